//! C ABI over the `qvgc` core crate.
//!
//! Objects cross the boundary as opaque heap handles created by a `*_new` or
//! `*_load` function and released with the matching `*_free`. Every fallible
//! function returns a [`QvgcStatus`]; on failure, [`qvgc_last_error`] holds a
//! message for the calling thread. Panics are caught and reported as
//! `QVGC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use num_complex::Complex64;
use qvgc::checkpoint::{load_checkpoint, save_checkpoint};
use qvgc::encoders::{build_amplitude_state, Entanglement, FeatureMapSpec};
use qvgc::metrics::compute_weighted_metrics;
use qvgc::statevec::{GateKind, Observable, Statevector};
use qvgc::vqc::VqcModel;
use qvgc::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QvgcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Capacity = 3,
    Index = 4,
    Dimension = 5,
    Degenerate = 6,
    Unsupported = 7,
    Numerical = 8,
    Io = 9,
    Format = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QvgcGate {
    H = 0,
    X = 1,
    Y = 2,
    Z = 3,
    S = 4,
    T = 5,
    Cnot = 6,
    Rx = 7,
    Ry = 8,
    Rz = 9,
    Rzz = 10,
}

impl From<QvgcGate> for GateKind {
    fn from(g: QvgcGate) -> Self {
        match g {
            QvgcGate::H => GateKind::H,
            QvgcGate::X => GateKind::X,
            QvgcGate::Y => GateKind::Y,
            QvgcGate::Z => GateKind::Z,
            QvgcGate::S => GateKind::S,
            QvgcGate::T => GateKind::T,
            QvgcGate::Cnot => GateKind::Cnot,
            QvgcGate::Rx => GateKind::Rx,
            QvgcGate::Ry => GateKind::Ry,
            QvgcGate::Rz => GateKind::Rz,
            QvgcGate::Rzz => GateKind::Rzz,
        }
    }
}

/// Weighted binary-classification metrics. `confusion` is row-major with
/// rows indexed by the true class.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QvgcMetrics {
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub confusion: [u64; 4],
}

/// Opaque statevector handle.
pub struct QvgcStatevector {
    inner: Statevector,
}

/// Opaque variational classifier handle.
pub struct QvgcVqc {
    inner: VqcModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QvgcStatus {
    match e {
        Error::Capacity { .. } => QvgcStatus::Capacity,
        Error::Index(_) => QvgcStatus::Index,
        Error::Arity { .. } | Error::Dimension { .. } => QvgcStatus::Dimension,
        Error::Degenerate(_) => QvgcStatus::Degenerate,
        Error::Unsupported(_) => QvgcStatus::Unsupported,
        Error::Usage(_) | Error::InvalidConfig(_) => QvgcStatus::InvalidArgument,
        Error::Numerical(_) => QvgcStatus::Numerical,
        Error::Io(_) => QvgcStatus::Io,
        Error::Format(_) | Error::Json(_) | Error::Csv(_) => QvgcStatus::Format,
    }
}

struct Failure(QvgcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(QvgcStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QvgcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QvgcStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            QvgcStatus::Panic
        }
    }
}

unsafe fn slice_in<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn slice_out<'a, T>(data: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(data, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn path_arg(path: *const c_char) -> Result<String, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure(QvgcStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qvgc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qvgc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn qvgc_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Creates |0…0⟩ on `n_qubits` qubits.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn qvgc_statevector_new(n_qubits: u32, out: *mut *mut QvgcStatevector) -> QvgcStatus {
    guard(|| {
        let sv = Statevector::zero_state(n_qubits as usize)?;
        write_out(out, Box::into_raw(Box::new(QvgcStatevector { inner: sv })), "out")
    })
}

/// Builds a state from `len` amplitudes given as separate real and imaginary
/// arrays. `len` must be a power of two and the vector normalized.
///
/// # Safety
/// `re` and `im` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qvgc_statevector_from_amplitudes(
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut QvgcStatevector,
) -> QvgcStatus {
    guard(|| {
        let re = slice_in(re, len, "re")?;
        let im = slice_in(im, len, "im")?;
        let amps = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let sv = Statevector::from_amplitudes(amps)?;
        write_out(out, Box::into_raw(Box::new(QvgcStatevector { inner: sv })), "out")
    })
}

/// Amplitude-encodes `len` features (zero-padded to a power of two and
/// normalized).
///
/// # Safety
/// `x` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qvgc_amplitude_encode(x: *const f64, len: usize, out: *mut *mut QvgcStatevector) -> QvgcStatus {
    guard(|| {
        let x = slice_in(x, len, "x")?;
        let sv = build_amplitude_state(x)?;
        write_out(out, Box::into_raw(Box::new(QvgcStatevector { inner: sv })), "out")
    })
}

/// Releases a statevector. Null is ignored.
///
/// # Safety
/// `sv` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qvgc_statevector_free(sv: *mut QvgcStatevector) {
    if !sv.is_null() {
        drop(Box::from_raw(sv));
    }
}

/// # Safety
/// `sv` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qvgc_statevector_n_qubits(sv: *const QvgcStatevector, out: *mut u32) -> QvgcStatus {
    guard(|| {
        let sv = handle(sv, "statevector")?;
        write_out(out, sv.inner.n_qubits() as u32, "out")
    })
}

/// Number of amplitudes (2^n).
///
/// # Safety
/// `sv` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qvgc_statevector_len(sv: *const QvgcStatevector, out: *mut usize) -> QvgcStatus {
    guard(|| {
        let sv = handle(sv, "statevector")?;
        write_out(out, sv.inner.len(), "out")
    })
}

/// Applies one gate. `angle` is ignored for fixed gates; qubit 0 is the
/// least significant bit of the basis index.
///
/// # Safety
/// `sv` must be a live handle and `targets` must point to `n_targets` values.
#[no_mangle]
pub unsafe extern "C" fn qvgc_statevector_apply(
    sv: *mut QvgcStatevector,
    gate: QvgcGate,
    targets: *const u32,
    n_targets: usize,
    angle: f64,
) -> QvgcStatus {
    guard(|| {
        let sv = handle_mut(sv, "statevector")?;
        let targets: Vec<usize> = slice_in(targets, n_targets, "targets")?
            .iter()
            .map(|&t| t as usize)
            .collect();
        sv.inner.apply(gate.into(), &targets, angle)?;
        Ok(())
    })
}

/// Copies the amplitudes into `re` and `im`, each of capacity `len`.
///
/// # Safety
/// `sv` must be a live handle; `re` and `im` must be writable for `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn qvgc_statevector_amplitudes(
    sv: *const QvgcStatevector,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> QvgcStatus {
    guard(|| {
        let sv = handle(sv, "statevector")?;
        let amps = sv.inner.amplitudes();
        if len < amps.len() {
            return Err(Failure(
                QvgcStatus::BufferTooSmall,
                format!("need room for {} amplitudes, got {len}", amps.len()),
            ));
        }
        let re = slice_out(re, amps.len(), "re")?;
        let im = slice_out(im, amps.len(), "im")?;
        for (k, a) in amps.iter().enumerate() {
            re[k] = a.re;
            im[k] = a.im;
        }
        Ok(())
    })
}

/// ⟨Z⊗…⊗Z⟩ of the state.
///
/// # Safety
/// `sv` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qvgc_statevector_parity_expectation(sv: *const QvgcStatevector, out: *mut f64) -> QvgcStatus {
    guard(|| {
        let sv = handle(sv, "statevector")?;
        write_out(out, sv.inner.expectation(Observable::ParityZ), "out")
    })
}

/// Samples `shots` measurements with a seeded generator and writes the count
/// of each basis index into `counts` (capacity `len` ≥ 2^n).
///
/// # Safety
/// `sv` must be a live handle; `counts` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn qvgc_statevector_sample(
    sv: *const QvgcStatevector,
    shots: u64,
    seed: u64,
    counts: *mut u64,
    len: usize,
) -> QvgcStatus {
    guard(|| {
        let sv = handle(sv, "statevector")?;
        let dim = sv.inner.len();
        if len < dim {
            return Err(Failure(
                QvgcStatus::BufferTooSmall,
                format!("need room for {dim} counts, got {len}"),
            ));
        }
        let counts = slice_out(counts, dim, "counts")?;
        counts.fill(0);
        for (idx, c) in sv.inner.sample(shots, seed) {
            counts[idx] = c;
        }
        Ok(())
    })
}

fn new_vqc(feature_map: FeatureMapSpec, layers: u32, seed: u64, out: *mut *mut QvgcVqc) -> Result<(), Failure> {
    let model = VqcModel::with_random_theta(feature_map, layers as usize, seed)?;
    // SAFETY: callers forward a pointer documented as writable.
    unsafe { write_out(out, Box::into_raw(Box::new(QvgcVqc { inner: model })), "out") }
}

/// Classifier with a ZZ feature map (full entanglement) and a
/// hardware-efficient ansatz with random initial angles.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qvgc_vqc_new_zz(
    n_features: u32,
    repetitions: u32,
    layers: u32,
    seed: u64,
    out: *mut *mut QvgcVqc,
) -> QvgcStatus {
    guard(|| {
        let fm = FeatureMapSpec::Zz {
            n_features: n_features as usize,
            repetitions: repetitions as usize,
            entanglement: Entanglement::Full,
        };
        new_vqc(fm, layers, seed, out)
    })
}

/// Classifier with amplitude encoding and a hardware-efficient ansatz.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qvgc_vqc_new_amplitude(n_features: u32, layers: u32, seed: u64, out: *mut *mut QvgcVqc) -> QvgcStatus {
    guard(|| new_vqc(FeatureMapSpec::amplitude(n_features as usize), layers, seed, out))
}

/// Loads a classifier checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qvgc_vqc_load(path: *const c_char, out: *mut *mut QvgcVqc) -> QvgcStatus {
    guard(|| {
        let model: VqcModel = load_checkpoint(path_arg(path)?)?;
        write_out(out, Box::into_raw(Box::new(QvgcVqc { inner: model })), "out")
    })
}

/// Writes a classifier checkpoint.
///
/// # Safety
/// `vqc` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qvgc_vqc_save(vqc: *const QvgcVqc, path: *const c_char) -> QvgcStatus {
    guard(|| {
        let vqc = handle(vqc, "vqc")?;
        save_checkpoint(&vqc.inner, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `vqc` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qvgc_vqc_free(vqc: *mut QvgcVqc) {
    if !vqc.is_null() {
        drop(Box::from_raw(vqc));
    }
}

/// # Safety
/// `vqc` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qvgc_vqc_n_params(vqc: *const QvgcVqc, out: *mut usize) -> QvgcStatus {
    guard(|| {
        let vqc = handle(vqc, "vqc")?;
        write_out(out, vqc.inner.n_params(), "out")
    })
}

/// Copies θ into `params` (capacity `len`).
///
/// # Safety
/// `vqc` must be a live handle; `params` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qvgc_vqc_get_params(vqc: *const QvgcVqc, params: *mut f64, len: usize) -> QvgcStatus {
    guard(|| {
        let vqc = handle(vqc, "vqc")?;
        let n = vqc.inner.n_params();
        if len < n {
            return Err(Failure(
                QvgcStatus::BufferTooSmall,
                format!("need room for {n} parameters, got {len}"),
            ));
        }
        slice_out(params, n, "params")?.copy_from_slice(&vqc.inner.theta_q);
        Ok(())
    })
}

/// Replaces θ; `len` must equal the parameter count.
///
/// # Safety
/// `vqc` must be a live handle; `params` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qvgc_vqc_set_params(vqc: *mut QvgcVqc, params: *const f64, len: usize) -> QvgcStatus {
    guard(|| {
        let vqc = handle_mut(vqc, "vqc")?;
        let n = vqc.inner.n_params();
        if len != n {
            return Err(Error::Arity { expected: n, actual: len }.into());
        }
        vqc.inner.theta_q.copy_from_slice(slice_in(params, len, "params")?);
        Ok(())
    })
}

/// Exact parity expectation for one feature vector and the class it implies
/// (0 for even parity, 1 for odd). Either output may be null.
///
/// # Safety
/// `vqc` must be a live handle and `x` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qvgc_vqc_forward(
    vqc: *const QvgcVqc,
    x: *const f64,
    len: usize,
    expectation: *mut f64,
    class: *mut u8,
) -> QvgcStatus {
    guard(|| {
        let vqc = handle(vqc, "vqc")?;
        let p = vqc.inner.forward(slice_in(x, len, "x")?)?;
        if !expectation.is_null() {
            expectation.write(p.expectation);
        }
        if !class.is_null() {
            class.write(p.label.class());
        }
        Ok(())
    })
}

/// Majority-vote class over `shots` seeded samples.
///
/// # Safety
/// `vqc` must be a live handle, `x` must point to `len` doubles and `class`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn qvgc_vqc_predict_shots(
    vqc: *const QvgcVqc,
    x: *const f64,
    len: usize,
    shots: u64,
    seed: u64,
    class: *mut u8,
) -> QvgcStatus {
    guard(|| {
        let vqc = handle(vqc, "vqc")?;
        let label = vqc.inner.predict_by_shots(slice_in(x, len, "x")?, shots, seed)?;
        write_out(class, label.class(), "class")
    })
}

/// Support-weighted precision, recall and F1 of binary predictions.
///
/// # Safety
/// `predictions` and `labels` must point to `len` bytes; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qvgc_weighted_metrics(
    predictions: *const u8,
    labels: *const u8,
    len: usize,
    out: *mut QvgcMetrics,
) -> QvgcStatus {
    guard(|| {
        let m = compute_weighted_metrics(slice_in(predictions, len, "predictions")?, slice_in(labels, len, "labels")?)?;
        let c = m.confusion;
        write_out(
            out,
            QvgcMetrics {
                weighted_precision: m.weighted_precision,
                weighted_recall: m.weighted_recall,
                weighted_f1: m.weighted_f1,
                confusion: [c[0][0], c[0][1], c[1][0], c[1][1]],
            },
            "out",
        )
    })
}
