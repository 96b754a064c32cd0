//! Classical optimizers: COBYLA and NFT (derivative-free) and Adam.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod adam;
mod cobyla;
mod nft;

pub use adam::{adam_step, Adam};
pub use cobyla::{cobyla_minimize, cobyla_minimize_observed, CobylaConfig};
pub use nft::{nft_minimize, nft_minimize_observed, NftConfig};

/// One line of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub fevals: usize,
    pub best_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub params: Vec<f64>,
    pub value: f64,
    pub fevals: usize,
    pub trace: Vec<TraceRecord>,
    /// The observer asked to stop before the optimizer converged.
    pub stopped: bool,
}

/// Called after every iteration with the trace record and the current
/// parameters; return `ControlFlow::Break(())` to stop.
pub trait Observer {
    fn observe(&mut self, record: &TraceRecord, params: &[f64]) -> ControlFlow<()>;
}

impl<F> Observer for F
where
    F: FnMut(&TraceRecord, &[f64]) -> ControlFlow<()>,
{
    fn observe(&mut self, record: &TraceRecord, params: &[f64]) -> ControlFlow<()> {
        self(record, params)
    }
}

pub(crate) struct NoObserver;

impl Observer for NoObserver {
    fn observe(&mut self, _: &TraceRecord, _: &[f64]) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

/// Wraps an objective, counting evaluations and rejecting non-finite values.
pub(crate) struct Counted<F> {
    f: F,
    pub fevals: usize,
}

impl<F> Counted<F>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    pub fn new(f: F) -> Self {
        Self { f, fevals: 0 }
    }

    pub fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.fevals += 1;
        let v = (self.f)(x)?;
        if !v.is_finite() {
            return Err(Error::numerical(format!(
                "objective returned {v} at evaluation {} (x = {x:?})",
                self.fevals
            )));
        }
        Ok(v)
    }
}
