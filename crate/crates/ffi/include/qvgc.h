#ifndef QVGC_H
#define QVGC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QvgcGate {
  QVGC_GATE_H = 0,
  QVGC_GATE_X = 1,
  QVGC_GATE_Y = 2,
  QVGC_GATE_Z = 3,
  QVGC_GATE_S = 4,
  QVGC_GATE_T = 5,
  QVGC_GATE_CNOT = 6,
  QVGC_GATE_RX = 7,
  QVGC_GATE_RY = 8,
  QVGC_GATE_RZ = 9,
  QVGC_GATE_RZZ = 10,
} QvgcGate;

typedef enum QvgcStatus {
  QVGC_STATUS_OK = 0,
  QVGC_STATUS_NULL_POINTER = 1,
  QVGC_STATUS_INVALID_ARGUMENT = 2,
  QVGC_STATUS_CAPACITY = 3,
  QVGC_STATUS_INDEX = 4,
  QVGC_STATUS_DIMENSION = 5,
  QVGC_STATUS_DEGENERATE = 6,
  QVGC_STATUS_UNSUPPORTED = 7,
  QVGC_STATUS_NUMERICAL = 8,
  QVGC_STATUS_IO = 9,
  QVGC_STATUS_FORMAT = 10,
  QVGC_STATUS_BUFFER_TOO_SMALL = 11,
  QVGC_STATUS_PANIC = 12,
} QvgcStatus;

/**
 * Opaque statevector handle.
 */
typedef struct QvgcStatevector QvgcStatevector;

/**
 * Opaque variational classifier handle.
 */
typedef struct QvgcVqc QvgcVqc;

/**
 * Weighted binary-classification metrics. `confusion` is row-major with
 * rows indexed by the true class.
 */
typedef struct QvgcMetrics {
  double weighted_precision;
  double weighted_recall;
  double weighted_f1;
  uint64_t confusion[4];
} QvgcMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qvgc_version(void);

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *qvgc_last_error(void);

void qvgc_clear_error(void);

/**
 * Creates |0…0⟩ on `n_qubits` qubits.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum QvgcStatus qvgc_statevector_new(uint32_t n_qubits, struct QvgcStatevector **out);

/**
 * Builds a state from `len` amplitudes given as separate real and imaginary
 * arrays. `len` must be a power of two and the vector normalized.
 *
 * # Safety
 * `re` and `im` must point to `len` doubles; `out` must be writable.
 */
enum QvgcStatus qvgc_statevector_from_amplitudes(const double *re,
                                                 const double *im,
                                                 size_t len,
                                                 struct QvgcStatevector **out);

/**
 * Amplitude-encodes `len` features (zero-padded to a power of two and
 * normalized).
 *
 * # Safety
 * `x` must point to `len` doubles; `out` must be writable.
 */
enum QvgcStatus qvgc_amplitude_encode(const double *x, size_t len, struct QvgcStatevector **out);

/**
 * Releases a statevector. Null is ignored.
 *
 * # Safety
 * `sv` must come from this library and not be used afterwards.
 */
void qvgc_statevector_free(struct QvgcStatevector *sv);

/**
 * # Safety
 * `sv` must be a live handle; `out` must be writable.
 */
enum QvgcStatus qvgc_statevector_n_qubits(const struct QvgcStatevector *sv, uint32_t *out);

/**
 * Number of amplitudes (2^n).
 *
 * # Safety
 * `sv` must be a live handle; `out` must be writable.
 */
enum QvgcStatus qvgc_statevector_len(const struct QvgcStatevector *sv, size_t *out);

/**
 * Applies one gate. `angle` is ignored for fixed gates; qubit 0 is the
 * least significant bit of the basis index.
 *
 * # Safety
 * `sv` must be a live handle and `targets` must point to `n_targets` values.
 */
enum QvgcStatus qvgc_statevector_apply(struct QvgcStatevector *sv,
                                       enum QvgcGate gate,
                                       const uint32_t *targets,
                                       size_t n_targets,
                                       double angle);

/**
 * Copies the amplitudes into `re` and `im`, each of capacity `len`.
 *
 * # Safety
 * `sv` must be a live handle; `re` and `im` must be writable for `len`
 * doubles.
 */
enum QvgcStatus qvgc_statevector_amplitudes(const struct QvgcStatevector *sv,
                                            double *re,
                                            double *im,
                                            size_t len);

/**
 * ⟨Z⊗…⊗Z⟩ of the state.
 *
 * # Safety
 * `sv` must be a live handle; `out` must be writable.
 */
enum QvgcStatus qvgc_statevector_parity_expectation(const struct QvgcStatevector *sv, double *out);

/**
 * Samples `shots` measurements with a seeded generator and writes the count
 * of each basis index into `counts` (capacity `len` ≥ 2^n).
 *
 * # Safety
 * `sv` must be a live handle; `counts` must be writable for `len` values.
 */
enum QvgcStatus qvgc_statevector_sample(const struct QvgcStatevector *sv,
                                        uint64_t shots,
                                        uint64_t seed,
                                        uint64_t *counts,
                                        size_t len);

/**
 * Classifier with a ZZ feature map (full entanglement) and a
 * hardware-efficient ansatz with random initial angles.
 *
 * # Safety
 * `out` must be writable.
 */
enum QvgcStatus qvgc_vqc_new_zz(uint32_t n_features,
                                uint32_t repetitions,
                                uint32_t layers,
                                uint64_t seed,
                                struct QvgcVqc **out);

/**
 * Classifier with amplitude encoding and a hardware-efficient ansatz.
 *
 * # Safety
 * `out` must be writable.
 */
enum QvgcStatus qvgc_vqc_new_amplitude(uint32_t n_features,
                                       uint32_t layers,
                                       uint64_t seed,
                                       struct QvgcVqc **out);

/**
 * Loads a classifier checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum QvgcStatus qvgc_vqc_load(const char *path, struct QvgcVqc **out);

/**
 * Writes a classifier checkpoint.
 *
 * # Safety
 * `vqc` must be a live handle and `path` a NUL-terminated string.
 */
enum QvgcStatus qvgc_vqc_save(const struct QvgcVqc *vqc, const char *path);

/**
 * # Safety
 * `vqc` must come from this library and not be used afterwards.
 */
void qvgc_vqc_free(struct QvgcVqc *vqc);

/**
 * # Safety
 * `vqc` must be a live handle; `out` must be writable.
 */
enum QvgcStatus qvgc_vqc_n_params(const struct QvgcVqc *vqc, size_t *out);

/**
 * Copies θ into `params` (capacity `len`).
 *
 * # Safety
 * `vqc` must be a live handle; `params` must be writable for `len` doubles.
 */
enum QvgcStatus qvgc_vqc_get_params(const struct QvgcVqc *vqc, double *params, size_t len);

/**
 * Replaces θ; `len` must equal the parameter count.
 *
 * # Safety
 * `vqc` must be a live handle; `params` must point to `len` doubles.
 */
enum QvgcStatus qvgc_vqc_set_params(struct QvgcVqc *vqc, const double *params, size_t len);

/**
 * Exact parity expectation for one feature vector and the class it implies
 * (0 for even parity, 1 for odd). Either output may be null.
 *
 * # Safety
 * `vqc` must be a live handle and `x` must point to `len` doubles.
 */
enum QvgcStatus qvgc_vqc_forward(const struct QvgcVqc *vqc,
                                 const double *x,
                                 size_t len,
                                 double *expectation,
                                 uint8_t *class_);

/**
 * Majority-vote class over `shots` seeded samples.
 *
 * # Safety
 * `vqc` must be a live handle, `x` must point to `len` doubles and `class`
 * must be writable.
 */
enum QvgcStatus qvgc_vqc_predict_shots(const struct QvgcVqc *vqc,
                                       const double *x,
                                       size_t len,
                                       uint64_t shots,
                                       uint64_t seed,
                                       uint8_t *class_);

/**
 * Support-weighted precision, recall and F1 of binary predictions.
 *
 * # Safety
 * `predictions` and `labels` must point to `len` bytes; `out` must be
 * writable.
 */
enum QvgcStatus qvgc_weighted_metrics(const uint8_t *predictions,
                                      const uint8_t *labels,
                                      size_t len,
                                      struct QvgcMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QVGC_H */
