//! Nakanishi–Fujii–Todo sequential minimal optimization.
//!
//! With every other parameter fixed, a VQC expectation is
//! `a + B cos t + C sin t` in the offset `t` of one rotation angle. Three
//! samples (t = 0, ±π/2) fix the sinusoid and its minimizer in closed form.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::{Counted, NoObserver, Observer, OptimResult, TraceRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NftConfig {
    pub sweeps: usize,
    /// Evaluate each closed-form candidate and keep the best of the sampled
    /// points. Needed when the objective is not exactly sinusoidal per
    /// parameter (e.g. a cross-entropy over many samples).
    pub verify_steps: bool,
}

impl Default for NftConfig {
    fn default() -> Self {
        Self {
            sweeps: 100,
            verify_steps: false,
        }
    }
}

/// Amplitudes below this leave the parameter where it is.
const DEGENERATE_AMPLITUDE: f64 = 1e-14;

pub fn nft_minimize<F>(objective: F, x0: &[f64], config: NftConfig) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    nft_minimize_observed(objective, x0, config, NoObserver)
}

/// The observer fires after every single-parameter update; one sweep is
/// `x0.len()` consecutive updates.
pub fn nft_minimize_observed<F, O>(objective: F, x0: &[f64], config: NftConfig, mut observer: O) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
    O: Observer,
{
    if x0.is_empty() {
        return Err(Error::Usage("NFT needs at least one parameter".into()));
    }
    let mut f = Counted::new(objective);
    let mut x = x0.to_vec();
    let mut trace = Vec::new();
    let mut value = f.eval(&x)?;
    let mut iteration = 0;
    let mut stopped = false;

    'sweeps: for sweep in 0..config.sweeps {
        if sweep > 0 && !config.verify_steps {
            // Refresh the running value so predicted minima do not drift.
            value = f.eval(&x)?;
        }
        for k in 0..x.len() {
            let base = x[k];
            x[k] = base + FRAC_PI_2;
            let f_plus = f.eval(&x)?;
            x[k] = base - FRAC_PI_2;
            let f_minus = f.eval(&x)?;

            let a = 0.5 * (f_plus + f_minus);
            let c = 0.5 * (f_plus - f_minus);
            let b = value - a;
            let amplitude = b.hypot(c);

            let (mut best_t, mut best_v) = (0.0, value);
            if amplitude > DEGENERATE_AMPLITUDE {
                let t = wrap(c.atan2(b) + PI);
                if config.verify_steps {
                    x[k] = base + t;
                    let f_t = f.eval(&x)?;
                    for (tt, vv) in [(FRAC_PI_2, f_plus), (-FRAC_PI_2, f_minus), (t, f_t)] {
                        if vv < best_v {
                            best_t = tt;
                            best_v = vv;
                        }
                    }
                } else {
                    best_t = t;
                    best_v = a - amplitude;
                }
            }
            x[k] = base + best_t;
            value = best_v;

            iteration += 1;
            let record = TraceRecord {
                iteration,
                fevals: f.fevals,
                best_value: value,
            };
            trace.push(record);
            if observer.observe(&record, &x).is_break() {
                stopped = true;
                break 'sweeps;
            }
        }
    }
    Ok(OptimResult {
        params: x,
        value,
        fevals: f.fevals,
        trace,
        stopped,
    })
}

/// Maps an angle into (−π, π].
fn wrap(t: f64) -> f64 {
    let mut t = t % (2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    } else if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ops::ControlFlow;

    #[test]
    fn cosine_reaches_minimum_in_one_sweep() {
        let cfg = NftConfig {
            sweeps: 1,
            verify_steps: false,
        };
        let r = nft_minimize(|x| Ok(x[0].cos()), &[0.3], cfg).unwrap();
        assert!((r.value + 1.0).abs() < 1e-12);
        assert!((r.params[0].abs() - PI).abs() < 1e-9, "{}", r.params[0]);
        assert!((r.params[0].cos() + 1.0).abs() < 1e-12);
        assert_eq!(r.fevals, 3);
    }

    #[test]
    fn optimum_is_fixpoint() {
        let cfg = NftConfig {
            sweeps: 1,
            verify_steps: false,
        };
        let r = nft_minimize(|x| Ok((x[0] - 1.0).cos() + 2.0 * x[1].sin()), &[1.0 + PI, -FRAC_PI_2], cfg).unwrap();
        assert!((r.params[0] - (1.0 + PI)).abs() < 1e-10);
        assert!((r.params[1] + FRAC_PI_2).abs() < 1e-10);
        assert!((r.value + 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_parameter_unchanged() {
        let r = nft_minimize(|x| Ok(x[1].cos()), &[0.25, 0.0], NftConfig { sweeps: 2, verify_steps: false }).unwrap();
        assert_eq!(r.params[0], 0.25);
    }

    #[test]
    fn verified_steps_never_increase() {
        // Not sinusoidal: the verified variant must still be monotone.
        let f = |x: &[f64]| Ok((x[0] - 0.4).powi(2) + (x[1] + 1.0).powi(4));
        let cfg = NftConfig {
            sweeps: 5,
            verify_steps: true,
        };
        let mut last = f(&[2.0, 2.0]).unwrap();
        let r = nft_minimize_observed(f, &[2.0, 2.0], cfg, |rec: &TraceRecord, p: &[f64]| {
            let now = f(p).unwrap();
            assert!(now <= last + 1e-12);
            assert_eq!(now, rec.best_value);
            last = now;
            ControlFlow::Continue(())
        })
        .unwrap();
        assert!(r.value < 1.0);
    }

    #[test]
    fn observer_can_stop() {
        let r = nft_minimize_observed(
            |x| Ok(x[0].cos() + x[1].cos()),
            &[0.1, 0.2],
            NftConfig::default(),
            |rec: &TraceRecord, _: &[f64]| {
                if rec.iteration == 3 {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            },
        )
        .unwrap();
        assert!(r.stopped);
        assert_eq!(r.trace.len(), 3);
    }

    #[test]
    fn wrap_range() {
        for t in [-7.0, -PI, -0.1, 0.0, PI, 4.0, 12.5] {
            let w = wrap(t);
            assert!(w > -PI && w <= PI);
            assert!(((w - t) / (2.0 * PI)).round() * 2.0 * PI - (w - t) < 1e-12);
        }
    }
}
