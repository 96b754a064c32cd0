//! Hybrid graph neural network / variational quantum classifier toolkit.
//!
//! The crate bundles a dense statevector simulator, the ZZ and amplitude
//! feature maps, a hardware-efficient variational classifier with parity
//! readout, parameter-shift gradients, COBYLA/NFT/Adam optimizers, a small
//! message-passing GNN, and the experiment pipeline that trains them serially
//! or end to end on synthetic graph data.

pub mod autodiff;
pub mod checkpoint;
pub mod circuits;
pub mod cli;
pub mod encoders;
pub mod error;
pub mod gnn;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod statevec;
pub mod vqc;

pub use error::{Error, Result};
