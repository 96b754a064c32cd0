//! Gradients of the classifier loss.
//!
//! Ansatz angles and ZZ feature-map phases are differentiated with the
//! parameter-shift rule: every rotation here is exp(−iθP/2) with P² = I, so
//! dE/dθ = [E(θ + π/2) − E(θ − π/2)] / 2 exactly. Feature gradients then chain
//! through each phase gate's angle as a function of x; repeated occurrences
//! of a feature are summed. Central finite differences serve as the oracle.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{Angle, Circuit};
use crate::encoders::{build_zz_layout, FeatureMapSpec};
use crate::error::{Error, Result};
use crate::statevec::{Observable, Statevector};
use crate::vqc::{check_batch, dloss_dexpectation, sample_loss, Label, VqcModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub d_theta_q: Vec<f64>,
    pub d_features: Vec<f64>,
}

impl GradientReport {
    pub fn is_finite(&self) -> bool {
        self.d_theta_q.iter().chain(&self.d_features).all(|v| v.is_finite())
    }
}

/// Expectation and its derivatives for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationGradient {
    pub expectation: f64,
    pub d_theta_q: Vec<f64>,
    /// Empty unless feature gradients were requested.
    pub d_features: Vec<f64>,
}

/// Maps each ansatz slot to the single gate that consumes it.
fn slot_gates(ansatz: &Circuit) -> Result<Vec<usize>> {
    let mut owner: Vec<Option<usize>> = vec![None; ansatz.n_params()];
    for (g, gate) in ansatz.gates().iter().enumerate() {
        if let Some(Angle::Param { slot, scale, .. }) = gate.angle {
            if scale != 1.0 {
                return Err(Error::Unsupported(format!(
                    "parameter p{slot} has affine scale {scale}; parameter shift needs unit scale"
                )));
            }
            if owner[slot].replace(g).is_some() {
                return Err(Error::Unsupported(format!(
                    "parameter p{slot} feeds more than one gate"
                )));
            }
        }
    }
    owner
        .into_iter()
        .enumerate()
        .map(|(slot, g)| {
            g.ok_or_else(|| Error::Unsupported(format!("parameter p{slot} feeds no gate")))
        })
        .collect()
}

fn concrete_angle(gate: &crate::circuits::Gate) -> Result<f64> {
    match gate.angle {
        Some(Angle::Fixed(v)) => Ok(v),
        None => Ok(0.0),
        Some(Angle::Param { slot, .. }) => Err(Error::Usage(format!("unbound parameter p{slot}"))),
    }
}

/// dE/d(angle) for each gate flagged in `wanted`, by shifting that gate's
/// angle by ±π/2. The prefix state is carried forward so each shift only
/// replays the suffix.
fn shifted_derivatives(initial: Statevector, circuit: &Circuit, wanted: &[bool]) -> Result<(f64, Vec<f64>)> {
    let gates = circuit.gates();
    let mut out = vec![0.0; gates.len()];
    let mut prefix = initial;
    let run_suffix = |state: &mut Statevector, from: usize| -> Result<()> {
        for gate in &gates[from..] {
            state.apply(gate.kind, &gate.targets, concrete_angle(gate)?)?;
        }
        Ok(())
    };
    for (g, gate) in gates.iter().enumerate() {
        let angle = concrete_angle(gate)?;
        if wanted[g] {
            let mut plus = prefix.clone();
            plus.apply(gate.kind, &gate.targets, angle + FRAC_PI_2)?;
            run_suffix(&mut plus, g + 1)?;
            let mut minus = prefix.clone();
            minus.apply(gate.kind, &gate.targets, angle - FRAC_PI_2)?;
            run_suffix(&mut minus, g + 1)?;
            out[g] = 0.5 * (plus.expectation(Observable::ParityZ) - minus.expectation(Observable::ParityZ));
        }
        prefix.apply(gate.kind, &gate.targets, angle)?;
    }
    Ok((prefix.expectation(Observable::ParityZ), out))
}

/// E, dE/dθ_Q and (optionally, ZZ maps only) dE/dx by parameter shift.
pub fn expectation_gradient(model: &VqcModel, features: &[f64], with_features: bool) -> Result<ExpectationGradient> {
    model.validate()?;
    if features.len() != model.n_features() {
        return Err(Error::Dimension {
            expected: model.n_features(),
            actual: features.len(),
        });
    }
    let ansatz = model.ansatz.build()?;
    let owners = slot_gates(&ansatz)?;
    let bound = ansatz.bind(&model.theta_q)?;

    let (initial, prefix_circuit, phase_gates) = match model.feature_map {
        FeatureMapSpec::Zz {
            repetitions,
            entanglement,
            ..
        } if with_features => {
            let layout = build_zz_layout(features, repetitions, entanglement)?;
            (
                Statevector::zero_state(model.n_qubits())?,
                layout.circuit,
                layout.phase_gates,
            )
        }
        _ if with_features => {
            return Err(Error::Unsupported(
                "feature gradients are only available for the ZZ feature map".into(),
            ))
        }
        _ => (
            model.feature_map.encode(features)?,
            Circuit::new(model.n_qubits()),
            Vec::new(),
        ),
    };

    let offset = prefix_circuit.len();
    let full = Circuit::compose(&prefix_circuit, &bound)?;
    let mut wanted = vec![false; full.len()];
    for &g in &owners {
        wanted[offset + g] = true;
    }
    for &(g, _) in &phase_gates {
        wanted[g] = true;
    }
    let (expectation, d_angle) = shifted_derivatives(initial, &full, &wanted)?;

    let d_theta_q = owners.iter().map(|&g| d_angle[offset + g]).collect();
    let mut d_features = Vec::new();
    if with_features {
        d_features = vec![0.0; features.len()];
        for &(g, term) in &phase_gates {
            for (k, da_dx) in term.angle_partials(features) {
                d_features[k] += d_angle[g] * da_dx;
            }
        }
    }
    Ok(ExpectationGradient {
        expectation,
        d_theta_q,
        d_features,
    })
}

/// dE/dθ_Q.
pub fn expectation_grad_theta(model: &VqcModel, features: &[f64]) -> Result<Vec<f64>> {
    Ok(expectation_gradient(model, features, false)?.d_theta_q)
}

/// dE/dx for a ZZ-encoded model.
pub fn expectation_grad_features(model: &VqcModel, features: &[f64]) -> Result<Vec<f64>> {
    Ok(expectation_gradient(model, features, true)?.d_features)
}

/// d(loss)/dθ_Q for one sample.
pub fn grad_theta_parameter_shift(model: &VqcModel, features: &[f64], label: Label) -> Result<Vec<f64>> {
    let g = expectation_gradient(model, features, false)?;
    let dl = dloss_dexpectation(g.expectation, label);
    Ok(g.d_theta_q.into_iter().map(|d| dl * d).collect())
}

/// d(loss)/dx for one sample of a ZZ-encoded model.
pub fn grad_features(model: &VqcModel, features: &[f64], label: Label) -> Result<Vec<f64>> {
    let g = expectation_gradient(model, features, true)?;
    let dl = dloss_dexpectation(g.expectation, label);
    Ok(g.d_features.into_iter().map(|d| dl * d).collect())
}

/// Both loss gradients for one sample of a ZZ-encoded model.
pub fn parameter_shift_report(model: &VqcModel, features: &[f64], label: Label) -> Result<GradientReport> {
    let g = expectation_gradient(model, features, true)?;
    let dl = dloss_dexpectation(g.expectation, label);
    Ok(GradientReport {
        d_theta_q: g.d_theta_q.iter().map(|d| dl * d).collect(),
        d_features: g.d_features.iter().map(|d| dl * d).collect(),
    })
}

/// Central differences of the loss over every θ_Q entry and every feature.
pub fn grad_finite_difference(model: &VqcModel, features: &[f64], label: Label, h: f64) -> Result<GradientReport> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::Usage(format!("step {h} outside [1e-7, 1e-3]")));
    }
    let loss_at = |x: &[f64], theta: &[f64]| -> Result<f64> {
        Ok(sample_loss(model.expectation_with(x, theta)?, label))
    };
    let mut theta = model.theta_q.clone();
    let mut d_theta_q = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        let orig = theta[k];
        theta[k] = orig + h;
        let up = loss_at(features, &theta)?;
        theta[k] = orig - h;
        let down = loss_at(features, &theta)?;
        theta[k] = orig;
        d_theta_q.push((up - down) / (2.0 * h));
    }
    let mut x = features.to_vec();
    let mut d_features = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let orig = x[k];
        x[k] = orig + h;
        let up = loss_at(&x, &theta)?;
        x[k] = orig - h;
        let down = loss_at(&x, &theta)?;
        x[k] = orig;
        d_features.push((up - down) / (2.0 * h));
    }
    Ok(GradientReport {
        d_theta_q,
        d_features,
    })
}

/// Loss and gradients accumulated over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradient {
    pub loss: f64,
    /// Mean d(loss)/dθ_Q over the batch.
    pub d_theta_q: Vec<f64>,
    /// Per-sample d(mean loss)/dx, i.e. already divided by the batch size.
    pub d_features: Vec<Vec<f64>>,
}

/// Mean loss with gradients for a batch, evaluated in parallel and reduced in
/// sample order.
pub fn batch_gradient(
    model: &VqcModel,
    features: &[Vec<f64>],
    labels: &[Label],
    with_features: bool,
) -> Result<BatchGradient> {
    check_batch(features, labels)?;
    let per_sample = features
        .par_iter()
        .zip(labels.par_iter())
        .map(|(x, &y)| {
            let g = expectation_gradient(model, x, with_features)?;
            let dl = dloss_dexpectation(g.expectation, y);
            Ok((sample_loss(g.expectation, y), dl, g))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_sample.len() as f64;
    let mut loss = 0.0;
    let mut d_theta_q = vec![0.0; model.n_params()];
    let mut d_features = Vec::with_capacity(per_sample.len());
    for (l, dl, g) in per_sample {
        loss += l;
        for (acc, d) in d_theta_q.iter_mut().zip(&g.d_theta_q) {
            *acc += dl * d / n;
        }
        d_features.push(g.d_features.iter().map(|d| dl * d / n).collect());
    }
    Ok(BatchGradient {
        loss: loss / n,
        d_theta_q,
        d_features,
    })
}
