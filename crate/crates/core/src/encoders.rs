//! Data-encoding feature maps: second-order Pauli (ZZ) and amplitude encoding.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuits::{Angle, Circuit};
use crate::error::{Error, Result};
use crate::statevec::{GateKind, Statevector, MAX_QUBITS};

/// Which qubit pairs receive a ZZ interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entanglement {
    /// Every pair i < j.
    #[default]
    Full,
    /// Nearest neighbours (i, i+1).
    Linear,
}

impl Entanglement {
    pub fn pairs(self, n: usize) -> Vec<(usize, usize)> {
        match self {
            Entanglement::Full => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
            Entanglement::Linear => (1..n).map(|j| (j - 1, j)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMapSpec {
    Zz {
        n_features: usize,
        repetitions: usize,
        #[serde(default)]
        entanglement: Entanglement,
    },
    Amplitude {
        n_features: usize,
    },
    /// No encoding; the ansatz acts directly on |0…0⟩.
    Identity {
        n_qubits: usize,
    },
}

impl FeatureMapSpec {
    pub fn zz(n_features: usize, repetitions: usize) -> Self {
        FeatureMapSpec::Zz {
            n_features,
            repetitions,
            entanglement: Entanglement::Full,
        }
    }

    pub fn amplitude(n_features: usize) -> Self {
        FeatureMapSpec::Amplitude { n_features }
    }

    pub fn n_features(&self) -> usize {
        match *self {
            FeatureMapSpec::Zz { n_features, .. } | FeatureMapSpec::Amplitude { n_features } => {
                n_features
            }
            FeatureMapSpec::Identity { .. } => 0,
        }
    }

    pub fn n_qubits(&self) -> usize {
        match *self {
            FeatureMapSpec::Zz { n_features, .. } => n_features,
            FeatureMapSpec::Amplitude { n_features } => amplitude_qubits(n_features),
            FeatureMapSpec::Identity { n_qubits } => n_qubits,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FeatureMapSpec::Zz {
                n_features,
                repetitions,
                ..
            } => {
                if n_features == 0 || n_features > MAX_QUBITS {
                    return Err(Error::config(format!(
                        "ZZ map needs 1..={MAX_QUBITS} features, got {n_features}"
                    )));
                }
                if repetitions == 0 {
                    return Err(Error::config("ZZ map needs at least one repetition"));
                }
            }
            FeatureMapSpec::Amplitude { n_features } => {
                if n_features < 2 || amplitude_qubits(n_features) > MAX_QUBITS {
                    return Err(Error::config(format!(
                        "amplitude encoding needs 2..=2^{MAX_QUBITS} features, got {n_features}"
                    )));
                }
            }
            FeatureMapSpec::Identity { n_qubits } => {
                if n_qubits == 0 || n_qubits > MAX_QUBITS {
                    return Err(Error::Capacity {
                        requested: n_qubits,
                        max: MAX_QUBITS,
                    });
                }
            }
        }
        Ok(())
    }

    /// The encoded state U_φ(x)|0⟩.
    pub fn encode(&self, x: &[f64]) -> Result<Statevector> {
        if x.len() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        match *self {
            FeatureMapSpec::Zz {
                repetitions,
                entanglement,
                ..
            } => {
                let circuit = build_zz_map_with(x, repetitions, entanglement)?;
                circuit.run(&Statevector::zero_state(x.len())?)
            }
            FeatureMapSpec::Amplitude { .. } => build_amplitude_state(x),
            FeatureMapSpec::Identity { n_qubits } => Statevector::zero_state(n_qubits),
        }
    }
}

/// ⌈log₂ n⌉ (at least one qubit).
pub fn amplitude_qubits(n_features: usize) -> usize {
    n_features.next_power_of_two().trailing_zeros().max(1) as usize
}

/// One Pauli-Z product term of the ZZ map: a single qubit or a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZzTerm {
    Single(usize),
    Pair(usize, usize),
}

impl ZzTerm {
    /// φ_S(x): x_i for singletons, (π − x_i)(π − x_j) for pairs.
    pub fn phi(self, x: &[f64]) -> f64 {
        match self {
            ZzTerm::Single(i) => x[i],
            ZzTerm::Pair(i, j) => (PI - x[i]) * (PI - x[j]),
        }
    }

    /// Gate angle realizing exp(iφZ…Z) with R(θ) = exp(−iθ Z…Z/2).
    pub fn angle(self, x: &[f64]) -> f64 {
        // `+ 0.0` folds −0.0 into 0.0 so zero phases print cleanly.
        -2.0 * self.phi(x) + 0.0
    }

    /// Non-zero partial derivatives of [`ZzTerm::angle`] as (feature, d angle / d x).
    pub fn angle_partials(self, x: &[f64]) -> Vec<(usize, f64)> {
        match self {
            ZzTerm::Single(i) => vec![(i, -2.0)],
            ZzTerm::Pair(i, j) => vec![(i, 2.0 * (PI - x[j])), (j, 2.0 * (PI - x[i]))],
        }
    }

    fn kind_and_targets(self) -> (GateKind, Vec<usize>) {
        match self {
            ZzTerm::Single(i) => (GateKind::Rz, vec![i]),
            ZzTerm::Pair(i, j) => (GateKind::Rzz, vec![i, j]),
        }
    }
}

/// Phase terms of one repetition, in gate order.
pub fn zz_terms(n: usize, entanglement: Entanglement) -> Vec<ZzTerm> {
    let mut terms: Vec<ZzTerm> = (0..n).map(ZzTerm::Single).collect();
    terms.extend(
        entanglement
            .pairs(n)
            .into_iter()
            .map(|(i, j)| ZzTerm::Pair(i, j)),
    );
    terms
}

/// A built ZZ circuit plus, for each phase gate, its index in the circuit and
/// the term that produced its angle. Used to differentiate through the map.
#[derive(Debug, Clone)]
pub struct ZzLayout {
    pub circuit: Circuit,
    pub phase_gates: Vec<(usize, ZzTerm)>,
}

pub fn build_zz_layout(x: &[f64], repetitions: usize, entanglement: Entanglement) -> Result<ZzLayout> {
    if x.is_empty() {
        return Err(Error::Degenerate("ZZ map needs at least one feature".into()));
    }
    if repetitions == 0 {
        return Err(Error::config("ZZ map needs at least one repetition"));
    }
    if x.len() > MAX_QUBITS {
        return Err(Error::Capacity {
            requested: x.len(),
            max: MAX_QUBITS,
        });
    }
    let n = x.len();
    let terms = zz_terms(n, entanglement);
    let mut circuit = Circuit::new(n);
    let mut phase_gates = Vec::with_capacity(repetitions * terms.len());
    for _ in 0..repetitions {
        for q in 0..n {
            circuit.add(GateKind::H, &[q], None)?;
        }
        for &term in &terms {
            let (kind, targets) = term.kind_and_targets();
            phase_gates.push((circuit.len(), term));
            circuit.add(kind, &targets, Some(Angle::Fixed(term.angle(x))))?;
        }
    }
    Ok(ZzLayout {
        circuit,
        phase_gates,
    })
}

/// ZZ feature map with full pairwise entanglement.
///
/// Each repetition applies H to every qubit, then RZ per qubit and RZZ per
/// pair with angles chosen so the phase layer equals exp(i Σ_S φ_S(x) Π_{k∈S} Z_k).
pub fn build_zz_map(x: &[f64], repetitions: usize) -> Result<Circuit> {
    build_zz_map_with(x, repetitions, Entanglement::Full)
}

pub fn build_zz_map_with(x: &[f64], repetitions: usize, entanglement: Entanglement) -> Result<Circuit> {
    Ok(build_zz_layout(x, repetitions, entanglement)?.circuit)
}

/// Writes x/‖x‖ into the amplitudes of ⌈log₂ dim(x)⌉ qubits, zero-padding
/// the tail when dim(x) is not a power of two.
pub fn build_amplitude_state(x: &[f64]) -> Result<Statevector> {
    if x.len() < 2 {
        return Err(Error::Degenerate(format!(
            "amplitude encoding needs at least 2 features, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite feature value".into()));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Degenerate("all-zero vector cannot be normalized".into()));
    }
    let n_qubits = amplitude_qubits(x.len());
    if n_qubits > MAX_QUBITS {
        return Err(Error::Capacity {
            requested: n_qubits,
            max: MAX_QUBITS,
        });
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
    for (a, &v) in amplitudes.iter_mut().zip(x) {
        *a = Complex64::new(v / norm, 0.0);
    }
    Statevector::from_amplitudes(amplitudes)
}

/// Per-dimension min-max scaling onto [−π, π], fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleScaler {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AngleScaler {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut iter = rows.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Degenerate("cannot fit a scaler on zero rows".into()))?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for row in iter {
            if row.len() != lo.len() {
                return Err(Error::Dimension {
                    expected: lo.len(),
                    actual: row.len(),
                });
            }
            for (k, &v) in row.iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        Ok(Self { lo, hi })
    }

    /// d(output)/d(input) per dimension; zero for constant dimensions.
    pub fn slopes(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&lo, &hi)| if hi > lo { 2.0 * PI / (hi - lo) } else { 0.0 })
            .collect()
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    -PI + 2.0 * PI * (v - lo) / (hi - lo)
                } else {
                    0.0
                }
            })
            .collect()
    }
}
