//! Variational quantum classifier: feature map, ansatz, parity readout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::circuits::Circuit;
use crate::encoders::FeatureMapSpec;
use crate::error::{Error, Result};
use crate::statevec::{GateKind, Observable, Statevector};

/// Probability clamp used by the cross-entropy loss.
pub const PROB_EPS: f64 = 1e-12;

/// Default number of shots for sampled inference.
pub const DEFAULT_SHOTS: u64 = 1024;

/// Binary class label. Dataset class 0 maps to `Plus` (even parity) and
/// class 1 to `Minus` (odd parity).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Plus,
    Minus,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Plus => 1.0,
            Label::Minus => -1.0,
        }
    }

    pub fn from_class(class: u8) -> Self {
        if class == 0 {
            Label::Plus
        } else {
            Label::Minus
        }
    }

    pub fn class(self) -> u8 {
        match self {
            Label::Plus => 0,
            Label::Minus => 1,
        }
    }

    /// Sign of an expectation value, with exact zero resolved to `Plus`.
    pub fn from_expectation(e: f64) -> Self {
        if e >= 0.0 {
            Label::Plus
        } else {
            Label::Minus
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub expectation: f64,
    pub prob_plus: f64,
    pub label: Label,
}

impl Prediction {
    pub fn from_expectation(expectation: f64) -> Self {
        Self {
            expectation,
            prob_plus: (1.0 + expectation) / 2.0,
            label: Label::from_expectation(expectation),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnsatzSpec {
    /// Per layer: RY then RZ on every qubit, then CNOT(i, i+1 mod n) for each i.
    HardwareEfficient { n_qubits: usize, layers: usize },
    /// Any parametric circuit.
    Custom { circuit: Circuit },
}

impl AnsatzSpec {
    pub fn hardware_efficient(n_qubits: usize, layers: usize) -> Self {
        AnsatzSpec::HardwareEfficient { n_qubits, layers }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            AnsatzSpec::HardwareEfficient { n_qubits, .. } => *n_qubits,
            AnsatzSpec::Custom { circuit } => circuit.n_qubits(),
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            AnsatzSpec::HardwareEfficient { n_qubits, layers } => 2 * n_qubits * layers,
            AnsatzSpec::Custom { circuit } => circuit.n_params(),
        }
    }

    pub fn build(&self) -> Result<Circuit> {
        match self {
            AnsatzSpec::Custom { circuit } => Ok(circuit.clone()),
            &AnsatzSpec::HardwareEfficient { n_qubits, layers } => {
                let mut c = Circuit::with_params(n_qubits, 2 * n_qubits * layers);
                let mut slot = 0;
                for _ in 0..layers {
                    for q in 0..n_qubits {
                        c.param(GateKind::Ry, &[q], slot)?;
                        c.param(GateKind::Rz, &[q], slot + 1)?;
                        slot += 2;
                    }
                    if n_qubits > 1 {
                        for q in 0..n_qubits {
                            c.add(GateKind::Cnot, &[q, (q + 1) % n_qubits], None)?;
                        }
                    }
                }
                Ok(c)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcModel {
    pub feature_map: FeatureMapSpec,
    pub ansatz: AnsatzSpec,
    pub theta_q: Vec<f64>,
}

impl VqcModel {
    pub fn new(feature_map: FeatureMapSpec, ansatz: AnsatzSpec, theta_q: Vec<f64>) -> Result<Self> {
        let model = Self {
            feature_map,
            ansatz,
            theta_q,
        };
        model.validate()?;
        Ok(model)
    }

    /// Hardware-efficient ansatz with angles drawn uniformly from [−π, π).
    pub fn with_random_theta(feature_map: FeatureMapSpec, layers: usize, seed: u64) -> Result<Self> {
        let ansatz = AnsatzSpec::hardware_efficient(feature_map.n_qubits(), layers);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = (0..ansatz.n_params())
            .map(|_| rng.gen_range(-PI..PI))
            .collect();
        Self::new(feature_map, ansatz, theta)
    }

    pub fn validate(&self) -> Result<()> {
        self.feature_map.validate()?;
        if self.feature_map.n_qubits() != self.ansatz.n_qubits() {
            return Err(Error::config(format!(
                "feature map uses {} qubit(s) but ansatz uses {}",
                self.feature_map.n_qubits(),
                self.ansatz.n_qubits()
            )));
        }
        if self.theta_q.len() != self.ansatz.n_params() {
            return Err(Error::Arity {
                expected: self.ansatz.n_params(),
                actual: self.theta_q.len(),
            });
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.ansatz.n_qubits()
    }

    pub fn n_features(&self) -> usize {
        self.feature_map.n_features()
    }

    pub fn n_params(&self) -> usize {
        self.theta_q.len()
    }

    /// V_θ U_φ(x)|0⟩ under an explicit parameter vector.
    pub fn final_state_with(&self, features: &[f64], theta: &[f64]) -> Result<Statevector> {
        let mut state = self.feature_map.encode(features)?;
        self.ansatz.build()?.bind(theta)?.apply_to(&mut state)?;
        Ok(state)
    }

    pub fn final_state(&self, features: &[f64]) -> Result<Statevector> {
        self.final_state_with(features, &self.theta_q)
    }

    pub fn expectation_with(&self, features: &[f64], theta: &[f64]) -> Result<f64> {
        Ok(self
            .final_state_with(features, theta)?
            .expectation(Observable::ParityZ))
    }

    /// Exact parity expectation and the label it implies.
    pub fn forward(&self, features: &[f64]) -> Result<Prediction> {
        let e = self.expectation_with(features, &self.theta_q)?;
        Ok(Prediction::from_expectation(e))
    }

    /// Majority vote over `shots` sampled parities; ties go to `Plus`.
    pub fn predict_by_shots(&self, features: &[f64], shots: u64, seed: u64) -> Result<Label> {
        if shots == 0 {
            return Err(Error::Usage("shots must be positive".into()));
        }
        let state = self.final_state(features)?;
        Ok(majority_parity(&state, shots, seed))
    }

    /// Mean cross-entropy over a batch under an explicit parameter vector.
    pub fn loss_with(&self, features: &[Vec<f64>], labels: &[Label], theta: &[f64]) -> Result<f64> {
        check_batch(features, labels)?;
        let per_sample = features
            .par_iter()
            .zip(labels.par_iter())
            .map(|(x, &y)| Ok(sample_loss(self.expectation_with(x, theta)?, y)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(per_sample.iter().sum::<f64>() / per_sample.len() as f64)
    }

    pub fn loss(&self, features: &[Vec<f64>], labels: &[Label]) -> Result<f64> {
        self.loss_with(features, labels, &self.theta_q)
    }

    pub fn expectations(&self, features: &[Vec<f64>]) -> Result<Vec<f64>> {
        features
            .par_iter()
            .map(|x| self.expectation_with(x, &self.theta_q))
            .collect()
    }
}

pub(crate) fn check_batch(features: &[Vec<f64>], labels: &[Label]) -> Result<()> {
    if features.is_empty() {
        return Err(Error::Usage("empty batch".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::Dimension {
            expected: features.len(),
            actual: labels.len(),
        });
    }
    Ok(())
}

pub fn majority_parity(state: &Statevector, shots: u64, seed: u64) -> Label {
    let counts = state.sample(shots, seed);
    let even: u64 = counts
        .iter()
        .filter(|(idx, _)| idx.count_ones() % 2 == 0)
        .map(|(_, c)| c)
        .sum();
    if 2 * even >= shots {
        Label::Plus
    } else {
        Label::Minus
    }
}

/// p(y) = (1 + yE)/2 clamped to [ε, 1 − ε].
pub fn label_probability(expectation: f64, label: Label) -> f64 {
    ((1.0 + label.sign() * expectation) / 2.0).clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// −log p(y | E).
pub fn sample_loss(expectation: f64, label: Label) -> f64 {
    -label_probability(expectation, label).ln()
}

/// d(−log p(y))/dE = −y/(1 + yE); zero where the clamp is active.
pub fn dloss_dexpectation(expectation: f64, label: Label) -> f64 {
    let y = label.sign();
    let p = (1.0 + y * expectation) / 2.0;
    if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
        return 0.0;
    }
    -y / (1.0 + y * expectation)
}
