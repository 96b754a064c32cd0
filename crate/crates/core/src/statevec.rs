//! Dense statevector simulator.
//!
//! Qubit `q` is bit `q` of the basis index (qubit 0 is the least-significant
//! bit). Gates are applied in place with stride kernels, so each gate costs
//! O(2^n) regardless of its arity.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the simulator will allocate (2^24 amplitudes, 256 MiB).
pub const MAX_QUBITS: usize = 24;

/// Tolerance used when checking that caller-supplied amplitudes are normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    T,
    Cnot,
    Rx,
    Ry,
    Rz,
    Rzz,
}

impl GateKind {
    pub const ALL: [GateKind; 11] = [
        GateKind::H,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::S,
        GateKind::T,
        GateKind::Cnot,
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::Rzz,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::Cnot | GateKind::Rzz => 2,
            _ => 1,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(
            self,
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::Rzz
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::S => "S",
            GateKind::T => "T",
            GateKind::Cnot => "CNOT",
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::Rzz => "RZZ",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        GateKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Observables the classifier reads out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    /// Z ⊗ Z ⊗ … ⊗ Z over every qubit: +1 on even-parity basis states, −1 on odd.
    ParityZ,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

fn check_capacity(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::Capacity {
            requested: n_qubits,
            max: MAX_QUBITS,
        });
    }
    Ok(())
}

impl Statevector {
    /// |0…0⟩ on `n_qubits` qubits.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        check_capacity(n_qubits)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps an explicit amplitude vector. The length must be a power of two
    /// and the vector must be normalized to within [`NORM_TOLERANCE`].
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Degenerate(format!(
                "amplitude vector length {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_capacity(n_qubits)?;
        let state = Self {
            n_qubits,
            amplitudes,
        };
        let norm = state.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Degenerate(format!(
                "amplitudes have squared norm {norm}, expected 1"
            )));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_targets(&self, kind: GateKind, targets: &[usize]) -> Result<()> {
        if targets.len() != kind.arity() {
            return Err(Error::index(format!(
                "{kind} takes {} target(s), got {}",
                kind.arity(),
                targets.len()
            )));
        }
        for &t in targets {
            if t >= self.n_qubits {
                return Err(Error::index(format!(
                    "target {t} out of range for {} qubit(s)",
                    self.n_qubits
                )));
            }
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::index(format!(
                "{kind} targets must be distinct, got {} twice",
                targets[0]
            )));
        }
        Ok(())
    }

    /// Applies one gate in place. `angle` is read only by rotation kinds.
    ///
    /// Rotations follow `R_P(θ) = exp(−iθP/2)`; `RZZ(θ) = exp(−iθ Z⊗Z/2)`.
    /// For `CNOT` the targets are `[control, target]`.
    pub fn apply(&mut self, kind: GateKind, targets: &[usize], angle: f64) -> Result<()> {
        self.check_targets(kind, targets)?;
        let q = targets[0];
        match kind {
            GateKind::H => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                self.apply_1q(q, [[h, h], [h, -h]]);
            }
            GateKind::X => self.for_each_pair(q, |a, b| std::mem::swap(a, b)),
            GateKind::Y => {
                let i = Complex64::i();
                self.for_each_pair(q, |a, b| {
                    let (a0, b0) = (*a, *b);
                    *a = -i * b0;
                    *b = i * a0;
                });
            }
            GateKind::Z => self.apply_phase(q, Complex64::new(-1.0, 0.0)),
            GateKind::S => self.apply_phase(q, Complex64::i()),
            GateKind::T => self.apply_phase(q, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)),
            GateKind::Cnot => self.apply_cnot(targets[0], targets[1]),
            GateKind::Rx => {
                let (s, c) = (angle / 2.0).sin_cos();
                let c = Complex64::new(c, 0.0);
                let mis = Complex64::new(0.0, -s);
                self.apply_1q(q, [[c, mis], [mis, c]]);
            }
            GateKind::Ry => {
                let (s, c) = (angle / 2.0).sin_cos();
                let (c, s) = (Complex64::new(c, 0.0), Complex64::new(s, 0.0));
                self.apply_1q(q, [[c, -s], [s, c]]);
            }
            GateKind::Rz => {
                let lo = Complex64::from_polar(1.0, -angle / 2.0);
                let hi = Complex64::from_polar(1.0, angle / 2.0);
                let mask = 1usize << q;
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    *a *= if i & mask == 0 { lo } else { hi };
                }
            }
            GateKind::Rzz => self.apply_rzz(targets[0], targets[1], angle),
        }
        Ok(())
    }

    /// Visits every amplitude pair (i, i | 2^q) with bit q of i clear.
    fn for_each_pair(&mut self, q: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
        let stride = 1usize << q;
        for block in self.amplitudes.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a, b);
            }
        }
    }

    fn apply_1q(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        self.for_each_pair(q, |a, b| {
            let (a0, b0) = (*a, *b);
            *a = m[0][0] * a0 + m[0][1] * b0;
            *b = m[1][0] * a0 + m[1][1] * b0;
        });
    }

    fn apply_phase(&mut self, q: usize, phase: Complex64) {
        self.for_each_pair(q, |_, b| *b *= phase);
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
    }

    fn apply_rzz(&mut self, a: usize, b: usize, angle: f64) {
        let even = Complex64::from_polar(1.0, -angle / 2.0);
        let odd = Complex64::from_polar(1.0, angle / 2.0);
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            let parity = ((i >> a) ^ (i >> b)) & 1;
            *amp *= if parity == 0 { even } else { odd };
        }
    }

    /// ⟨ψ|O|ψ⟩.
    pub fn expectation(&self, obs: Observable) -> f64 {
        match obs {
            Observable::ParityZ => self
                .amplitudes
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let p = a.norm_sqr();
                    if i.count_ones() % 2 == 0 {
                        p
                    } else {
                        -p
                    }
                })
                .sum(),
        }
    }

    /// Draws `shots` computational-basis measurements from |α_x|².
    ///
    /// Counts are keyed by basis index; outcomes with zero probability never
    /// appear.
    pub fn sample(&self, shots: u64, seed: u64) -> BTreeMap<usize, u64> {
        let mut cumulative = Vec::with_capacity(self.amplitudes.len());
        let mut total = 0.0;
        for a in &self.amplitudes {
            total += a.norm_sqr();
            cumulative.push(total);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = BTreeMap::new();
        for _ in 0..shots {
            let u = rng.gen::<f64>() * total;
            // First index whose cumulative mass exceeds u; zero-mass entries
            // share their predecessor's value and are never selected.
            let idx = cumulative
                .partition_point(|&c| c <= u)
                .min(cumulative.len() - 1);
            *counts.entry(idx).or_insert(0) += 1;
        }
        counts
    }
}
