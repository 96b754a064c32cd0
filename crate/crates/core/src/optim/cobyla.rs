//! Unconstrained COBYLA (Powell's constrained optimization by linear
//! approximation).
//!
//! The method keeps a simplex of n + 1 evaluated points, interpolates a linear
//! model through them and steps to the minimizer of that model inside a trust
//! region of radius `rho`. When the simplex becomes too flat or too stretched
//! relative to `rho`, a geometry step replaces one vertex instead. `rho` halves
//! whenever the model stops predicting progress, down to `rhoend`.

use serde::{Deserialize, Serialize};

use super::{Counted, NoObserver, Observer, OptimResult, TraceRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CobylaConfig {
    pub rhobeg: f64,
    pub rhoend: f64,
    /// Evaluation budget; `None` means 100 × dim.
    pub maxfun: Option<usize>,
}

impl Default for CobylaConfig {
    fn default() -> Self {
        Self {
            rhobeg: 1.0,
            rhoend: 1e-4,
            maxfun: None,
        }
    }
}

// Simplex acceptability: every vertex at least ALPHA·rho from the opposite
// face and at most BETA·rho from the pivot. GAMMA scales geometry steps.
const ALPHA: f64 = 0.25;
const BETA: f64 = 2.1;
const GAMMA: f64 = 0.5;

pub fn cobyla_minimize<F>(objective: F, x0: &[f64], config: CobylaConfig) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    cobyla_minimize_observed(objective, x0, config, NoObserver)
}

pub fn cobyla_minimize_observed<F, O>(
    objective: F,
    x0: &[f64],
    config: CobylaConfig,
    mut observer: O,
) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
    O: Observer,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::Usage("COBYLA needs at least one variable".into()));
    }
    if !(config.rhobeg > config.rhoend && config.rhoend > 0.0) {
        return Err(Error::Usage(format!(
            "need rhobeg > rhoend > 0, got rhobeg={} rhoend={}",
            config.rhobeg, config.rhoend
        )));
    }
    let maxfun = config.maxfun.unwrap_or(100 * n).max(n + 1);
    let mut f = Counted::new(objective);
    let mut rho = config.rhobeg;

    let mut sim: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut fval: Vec<f64> = Vec::with_capacity(n + 1);
    sim.push(x0.to_vec());
    fval.push(f.eval(x0)?);
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += rho;
        fval.push(f.eval(&x)?);
        sim.push(x);
    }

    let mut trace = Vec::new();
    let mut iteration = 0;
    let mut stopped = false;
    let mut after_geometry_step = false;

    loop {
        // Best vertex becomes the pivot; ties keep the earlier point.
        let best = (0..=n).fold(0, |b, j| if fval[j] < fval[b] { j } else { b });
        sim.swap(0, best);
        fval.swap(0, best);

        iteration += 1;
        let record = TraceRecord {
            iteration,
            fevals: f.fevals,
            best_value: fval[0],
        };
        trace.push(record);
        if observer.observe(&record, &sim[0]).is_break() {
            stopped = true;
            break;
        }
        if f.fevals >= maxfun {
            break;
        }

        let edges: Vec<Vec<f64>> = (1..=n).map(|j| sub(&sim[j], &sim[0])).collect();
        let Some(inv) = invert(&edges) else {
            // Collapsed simplex: rebuild it around the pivot.
            for i in 0..n {
                if f.fevals >= maxfun {
                    break;
                }
                let mut x = sim[0].clone();
                x[i] += rho;
                fval[i + 1] = f.eval(&x)?;
                sim[i + 1] = x;
            }
            continue;
        };

        // Linear model gradient: edges · g = Δf.
        let df: Vec<f64> = (1..=n).map(|j| fval[j] - fval[0]).collect();
        let grad: Vec<f64> = (0..n)
            .map(|r| (0..n).map(|c| inv[r][c] * df[c]).sum())
            .collect();

        // Column j of the inverse is normal to the face opposite vertex j + 1.
        let vsig: Vec<f64> = (0..n)
            .map(|j| 1.0 / (0..n).map(|r| inv[r][j] * inv[r][j]).sum::<f64>().sqrt())
            .collect();
        let dist: Vec<f64> = edges.iter().map(|e| norm(e)).collect();
        let acceptable = vsig.iter().all(|&s| s >= ALPHA * rho) && dist.iter().all(|&d| d <= BETA * rho);

        if !acceptable && !after_geometry_step {
            let j = if dist.iter().any(|&d| d > BETA * rho) {
                argmax(&dist)
            } else {
                argmin(&vsig)
            };
            let col: Vec<f64> = (0..n).map(|r| inv[r][j]).collect();
            let scale = GAMMA * rho / norm(&col);
            let mut step: Vec<f64> = col.iter().map(|c| c * scale).collect();
            if dot(&grad, &step) > 0.0 {
                step.iter_mut().for_each(|s| *s = -*s);
            }
            let x = add(&sim[0], &step);
            fval[j + 1] = f.eval(&x)?;
            sim[j + 1] = x;
            after_geometry_step = true;
            continue;
        }
        after_geometry_step = false;

        let gnorm = norm(&grad);
        if gnorm <= f64::MIN_POSITIVE {
            if !reduce_rho(&mut rho, config.rhoend) {
                break;
            }
            continue;
        }
        let step: Vec<f64> = grad.iter().map(|g| -rho * g / gnorm).collect();
        let predicted = rho * gnorm;
        let x = add(&sim[0], &step);
        let fx = f.eval(&x)?;
        let actual = fval[0] - fx;
        let improved = actual > 0.0;

        // Barycentric weight of each non-pivot vertex in the new point; a
        // large |t_j| keeps the simplex well-conditioned after replacing j.
        let t: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|r| step[r] * inv[r][j]).sum())
            .collect();
        let mut drop = None;
        let mut best_t = if improved { 0.0 } else { 1.0 };
        for j in 0..n {
            if t[j].abs() > best_t {
                best_t = t[j].abs();
                drop = Some(j);
            }
        }
        let mut far = BETA * rho;
        for j in 0..n {
            if t[j].abs() >= 0.1 && dist[j] > far {
                far = dist[j];
                drop = Some(j);
            }
        }
        if let Some(j) = drop {
            sim[j + 1] = x;
            fval[j + 1] = fx;
        }

        if actual < 0.1 * predicted && acceptable && !reduce_rho(&mut rho, config.rhoend) {
            break;
        }
    }

    let best = (0..=n).fold(0, |b, j| if fval[j] < fval[b] { j } else { b });
    Ok(OptimResult {
        params: sim.swap_remove(best),
        value: fval[best],
        fevals: f.fevals,
        trace,
        stopped,
    })
}

/// Halves `rho` (snapping to `rhoend` near the end). False once `rho` has
/// already reached `rhoend`.
fn reduce_rho(rho: &mut f64, rhoend: f64) -> bool {
    if *rho <= rhoend {
        return false;
    }
    *rho *= 0.5;
    if *rho <= 1.5 * rhoend {
        *rho = rhoend;
    }
    true
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, j| if v[j] > v[b] { j } else { b })
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, j| if v[j] < v[b] { j } else { b })
}

/// Gauss–Jordan inverse with partial pivoting; `None` when singular.
fn invert(rows: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = rows.len();
    let scale = rows
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).fold(col, |b, r| if a[r][col].abs() > a[b][col].abs() { r } else { b });
        if a[pivot][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r != col && a[r][col] != 0.0 {
                let factor = a[r][col];
                for j in 0..n {
                    a[r][j] -= factor * a[col][j];
                    inv[r][j] -= factor * inv[col][j];
                }
            }
        }
    }
    Some(inv)
}
