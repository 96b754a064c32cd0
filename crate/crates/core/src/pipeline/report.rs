use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{Encoding, ExperimentConfig};
use super::dataset::{GeneratorParams, SplitSummary};
use crate::error::Result;
use crate::gnn::PretrainEpoch;
use crate::metrics::WeightedMetrics;

/// One row of a VQC convergence trace. Epoch 0 is the initial model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub fevals: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_f1: f64,
    pub best_val_loss: f64,
    pub improved: bool,
    /// Largest absolute change of any θ_Q entry during the epoch.
    pub theta_q_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: ExperimentConfig,
    pub dataset: GeneratorParams,
    pub n_qubits: Option<usize>,
    pub train: SplitSummary,
    pub val: SplitSummary,
    pub test: SplitSummary,
    pub metrics: WeightedMetrics,
    /// Test metrics of the model before the last training stage (end-to-end
    /// only).
    pub baseline: Option<WeightedMetrics>,
    pub pretrain: Vec<PretrainEpoch>,
    pub trace: Vec<EpochTrace>,
    pub best_epoch: usize,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `w-precision  w-recall  w-F1` row in the usual results-table layout.
    pub fn table_row(&self) -> String {
        format!(
            "{:<12} {:>11.4} {:>8.4} {:>9.4}",
            self.config.regime.name(),
            self.metrics.weighted_precision,
            self.metrics.weighted_recall,
            self.metrics.weighted_f1
        )
    }
}

pub const TABLE_HEADER: &str = "regime       w-precision w-recall w-F1score";

pub const TRACE_CSV_COLUMNS: [&str; 8] = [
    "epoch",
    "fevals",
    "train_loss",
    "val_loss",
    "val_f1",
    "best_val_loss",
    "improved",
    "theta_q_delta",
];

pub fn trace_csv_record(t: &EpochTrace) -> Vec<String> {
    vec![
        t.epoch.to_string(),
        t.fevals.to_string(),
        t.train_loss.to_string(),
        t.val_loss.to_string(),
        t.val_f1.to_string(),
        t.best_val_loss.to_string(),
        t.improved.to_string(),
        t.theta_q_delta.to_string(),
    ]
}

pub fn write_trace_csv(trace: &[EpochTrace], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_CSV_COLUMNS)?;
    for t in trace {
        w.write_record(trace_csv_record(t))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns of the aggregate results CSV, one row per experiment.
///
/// | column | meaning |
/// |---|---|
/// | `regime` | classical, serial or end-to-end |
/// | `embed_dim` | GNN embedding width d |
/// | `encoding` | zz or amplitude (empty for classical) |
/// | `zz_reps` | ZZ repetitions (empty otherwise) |
/// | `bottleneck` | compressed width, empty when unused |
/// | `n_qubits` | VQC register size |
/// | `optimizer` | cobyla, nft or adam |
/// | `epochs`, `data_fraction`, `seed`, `shots` | run settings |
/// | `train_size` | training graphs after subsampling |
/// | `w_precision`, `w_recall`, `w_f1` | weighted test metrics |
/// | `tn`, `fp`, `fn`, `tp` | test confusion counts (class 1 positive) |
/// | `best_epoch` | epoch of the selected model |
/// | `status` | `ok` or `failed` |
/// | `error` | failure message, empty on success |
pub const RESULTS_CSV_COLUMNS: [&str; 21] = [
    "regime",
    "embed_dim",
    "encoding",
    "zz_reps",
    "bottleneck",
    "n_qubits",
    "optimizer",
    "epochs",
    "data_fraction",
    "seed",
    "shots",
    "train_size",
    "w_precision",
    "w_recall",
    "w_f1",
    "tn",
    "fp",
    "fn",
    "tp",
    "best_epoch",
    "status",
];

fn config_fields(cfg: &ExperimentConfig) -> Vec<String> {
    let classical = cfg.regime == super::config::Regime::ClassicalOnly;
    let (encoding, reps) = match (classical, cfg.encoding) {
        (true, _) => (String::new(), String::new()),
        (false, Encoding::Zz { reps }) => ("zz".to_string(), reps.to_string()),
        (false, Encoding::Amplitude) => ("amplitude".to_string(), String::new()),
    };
    vec![
        cfg.regime.name().to_string(),
        cfg.embed_dim.to_string(),
        encoding,
        reps,
        cfg.bottleneck.map(|b| b.width.to_string()).unwrap_or_default(),
        cfg.n_qubits().map(|n| n.to_string()).unwrap_or_default(),
        if classical { String::new() } else { cfg.optimizer.name().to_string() },
        cfg.epochs.to_string(),
        cfg.data_fraction.to_string(),
        cfg.seed.to_string(),
        cfg.shots.to_string(),
    ]
}

/// Writes one CSV row per outcome; failures keep their config columns and
/// carry the error message.
pub fn write_results_csv<'a>(
    rows: impl IntoIterator<Item = (&'a ExperimentConfig, std::result::Result<&'a MetricsReport, &'a str>)>,
    out: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = RESULTS_CSV_COLUMNS.to_vec();
    header.push("error");
    w.write_record(&header)?;
    for (cfg, outcome) in rows {
        let mut rec = config_fields(cfg);
        match outcome {
            Ok(r) => {
                let m = &r.metrics;
                rec.extend([
                    r.train.size.to_string(),
                    m.weighted_precision.to_string(),
                    m.weighted_recall.to_string(),
                    m.weighted_f1.to_string(),
                    m.confusion[0][0].to_string(),
                    m.confusion[0][1].to_string(),
                    m.confusion[1][0].to_string(),
                    m.confusion[1][1].to_string(),
                    r.best_epoch.to_string(),
                    "ok".to_string(),
                    String::new(),
                ]);
            }
            Err(msg) => {
                rec.extend(std::iter::repeat(String::new()).take(9));
                rec.push("failed".to_string());
                rec.push(msg.to_string());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
