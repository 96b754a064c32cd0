use serde::{Deserialize, Serialize};

use crate::encoders::{amplitude_qubits, Entanglement, FeatureMapSpec};
use crate::error::{Error, Result};
use crate::statevec::MAX_QUBITS;
use crate::vqc::DEFAULT_SHOTS;

/// Largest qubit count accepted for ZZ encoding (one qubit per feature).
pub const ZZ_MAX_QUBITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    ClassicalOnly,
    SerialVqc,
    EndToEnd,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::ClassicalOnly => "classical",
            Regime::SerialVqc => "serial",
            Regime::EndToEnd => "end-to-end",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    Zz { reps: usize },
    Amplitude,
}

impl Encoding {
    pub fn name(self) -> &'static str {
        match self {
            Encoding::Zz { .. } => "zz",
            Encoding::Amplitude => "amplitude",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Cobyla,
    Nft,
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Cobyla => "cobyla",
            OptimizerKind::Nft => "nft",
            OptimizerKind::Adam => "adam",
        }
    }
}

/// Quantity watched by early stopping during VQC training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    #[default]
    ValLoss,
    ValF1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnnSettings {
    pub hidden: usize,
    pub n_layers: usize,
    pub head_hidden: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
}

impl Default for GnnSettings {
    fn default() -> Self {
        Self {
            hidden: 64,
            n_layers: 3,
            head_hidden: 64,
            lr: 1e-2,
            batch_size: 16,
            epochs: 100,
            patience: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CobylaSettings {
    pub rhobeg: f64,
    pub rhoend: f64,
}

impl Default for CobylaSettings {
    fn default() -> Self {
        Self {
            rhobeg: 1.0,
            rhoend: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndToEndSettings {
    pub lr_theta_q: f64,
    pub lr_theta_g: f64,
    /// θ_Q is updated only during epochs that are multiples of this.
    pub theta_q_every: usize,
    pub batch_size: usize,
    /// Optimizer for the serial warm start of θ_Q; `None` starts from the
    /// random initialization.
    pub warm_start: Option<OptimizerKind>,
}

impl Default for EndToEndSettings {
    fn default() -> Self {
        Self {
            lr_theta_q: 1e-3,
            lr_theta_g: 1e-6,
            theta_q_every: 10,
            batch_size: 16,
            warm_start: Some(OptimizerKind::Nft),
        }
    }
}

/// Linear compression of frozen embeddings ahead of the VQC, trained with a
/// small classification head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BottleneckSettings {
    pub width: usize,
    pub epochs: usize,
    pub lr: f64,
    pub head_hidden: usize,
}

impl BottleneckSettings {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            epochs: 1,
            lr: 1e-3,
            head_hidden: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub regime: Regime,
    pub embed_dim: usize,
    pub encoding: Encoding,
    pub entanglement: Entanglement,
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    pub patience: usize,
    pub data_fraction: f64,
    pub seed: u64,
    pub shots: u64,
    pub vqc_layers: usize,
    pub monitor: Monitor,
    /// Learning rate when the VQC itself is trained with Adam.
    pub vqc_adam_lr: f64,
    pub gnn: GnnSettings,
    pub cobyla: CobylaSettings,
    pub end_to_end: EndToEndSettings,
    pub bottleneck: Option<BottleneckSettings>,
}

impl ExperimentConfig {
    pub fn new(regime: Regime, embed_dim: usize, encoding: Encoding) -> Self {
        Self {
            regime,
            embed_dim,
            encoding,
            entanglement: Entanglement::Full,
            optimizer: match regime {
                Regime::EndToEnd => OptimizerKind::Adam,
                _ => OptimizerKind::Nft,
            },
            epochs: 100,
            patience: 10,
            data_fraction: 1.0,
            seed: 0,
            shots: DEFAULT_SHOTS,
            vqc_layers: 3,
            monitor: Monitor::ValLoss,
            vqc_adam_lr: 0.05,
            gnn: GnnSettings::default(),
            cobyla: CobylaSettings::default(),
            end_to_end: EndToEndSettings::default(),
            bottleneck: None,
        }
    }

    pub fn serial(embed_dim: usize, encoding: Encoding) -> Self {
        Self::new(Regime::SerialVqc, embed_dim, encoding)
    }

    pub fn end_to_end(embed_dim: usize, reps: usize) -> Self {
        Self::new(Regime::EndToEnd, embed_dim, Encoding::Zz { reps })
    }

    pub fn classical(embed_dim: usize) -> Self {
        Self::new(Regime::ClassicalOnly, embed_dim, Encoding::Amplitude)
    }

    /// Width of the vectors handed to the feature map.
    pub fn vqc_features(&self) -> usize {
        self.bottleneck.map_or(self.embed_dim, |b| b.width)
    }

    pub fn feature_map(&self) -> FeatureMapSpec {
        let n = self.vqc_features();
        match self.encoding {
            Encoding::Zz { reps } => FeatureMapSpec::Zz {
                n_features: n,
                repetitions: reps,
                entanglement: self.entanglement,
            },
            Encoding::Amplitude => FeatureMapSpec::amplitude(n),
        }
    }

    /// Qubits used by the VQC; `None` for the classical regime.
    pub fn n_qubits(&self) -> Option<usize> {
        if self.regime == Regime::ClassicalOnly {
            return None;
        }
        let n = self.vqc_features();
        Some(match self.encoding {
            Encoding::Zz { .. } => n,
            Encoding::Amplitude => amplitude_qubits(n),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        if !(self.data_fraction > 0.0 && self.data_fraction <= 1.0) {
            return Err(Error::config(format!("data fraction {} outside (0, 1]", self.data_fraction)));
        }
        if self.epochs == 0 || self.patience == 0 || self.gnn.epochs == 0 || self.gnn.patience == 0 {
            return Err(Error::config("epochs and patience must be positive"));
        }
        if self.shots == 0 {
            return Err(Error::config("shots must be positive"));
        }
        if self.gnn.batch_size == 0 || self.end_to_end.batch_size == 0 || self.end_to_end.theta_q_every == 0 {
            return Err(Error::config("batch sizes and update cadence must be positive"));
        }
        for (name, lr) in [
            ("GNN", self.gnn.lr),
            ("VQC Adam", self.vqc_adam_lr),
            ("θ_Q", self.end_to_end.lr_theta_q),
            ("θ_G", self.end_to_end.lr_theta_g),
        ] {
            if !(lr.is_finite() && lr >= 0.0) {
                return Err(Error::config(format!("{name} learning rate must be finite and non-negative")));
            }
        }
        if self.regime == Regime::ClassicalOnly {
            return Ok(());
        }
        if let Some(b) = self.bottleneck {
            if b.width == 0 || b.width > self.embed_dim {
                return Err(Error::config(format!(
                    "bottleneck width {} must be in 1..={}",
                    b.width, self.embed_dim
                )));
            }
            if self.regime != Regime::SerialVqc {
                return Err(Error::Unsupported("a bottleneck is only available in the serial regime".into()));
            }
        }
        let n = self.vqc_features();
        match self.encoding {
            Encoding::Zz { reps } => {
                if reps == 0 {
                    return Err(Error::config("ZZ encoding needs at least one repetition"));
                }
                if n > ZZ_MAX_QUBITS {
                    return Err(Error::Capacity {
                        requested: n,
                        max: ZZ_MAX_QUBITS,
                    });
                }
            }
            Encoding::Amplitude => {
                if self.regime == Regime::EndToEnd {
                    return Err(Error::Unsupported(
                        "end-to-end training needs ZZ encoding; amplitude encoding has no feature gradient".into(),
                    ));
                }
                if n < 2 {
                    return Err(Error::config("amplitude encoding needs at least 2 features"));
                }
                if amplitude_qubits(n) > MAX_QUBITS {
                    return Err(Error::Capacity {
                        requested: amplitude_qubits(n),
                        max: MAX_QUBITS,
                    });
                }
            }
        }
        if self.regime == Regime::EndToEnd {
            if self.optimizer != OptimizerKind::Adam {
                return Err(Error::Unsupported("end-to-end training uses Adam".into()));
            }
            if self.end_to_end.warm_start == Some(OptimizerKind::Adam) {
                return Err(Error::config("warm start optimizer must be COBYLA or NFT"));
            }
        }
        if self.optimizer == OptimizerKind::Cobyla && !(self.cobyla.rhobeg > self.cobyla.rhoend && self.cobyla.rhoend > 0.0) {
            return Err(Error::config("COBYLA needs rhobeg > rhoend > 0"));
        }
        Ok(())
    }
}
