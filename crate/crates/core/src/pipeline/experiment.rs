use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bottleneck::{train_bottleneck, Bottleneck};
use super::config::{Encoding, ExperimentConfig, Monitor, OptimizerKind, Regime};
use super::dataset::{Dataset, Split, SplitSummary};
use super::report::{EpochTrace, MetricsReport};
use super::derive_seed;
use crate::autodiff::batch_gradient;
use crate::encoders::AngleScaler;
use crate::error::{Error, Result};
use crate::gnn::{pretrain_classical, GnnConfig, GnnModel, Graph, PretrainConfig};
use crate::metrics::{compute_weighted_metrics, WeightedMetrics};
use crate::optim::{cobyla_minimize_observed, nft_minimize_observed, Adam, CobylaConfig, NftConfig, TraceRecord};
use crate::vqc::{sample_loss, Label, VqcModel};

// Independent random streams derived from the experiment seed.
const STREAM_SUBSET: u64 = 1;
const STREAM_GNN_INIT: u64 = 2;
const STREAM_PRETRAIN: u64 = 3;
const STREAM_BOTTLENECK: u64 = 4;
const STREAM_VQC_INIT: u64 = 5;
const STREAM_VQC_BATCHES: u64 = 6;
const STREAM_JOINT_BATCHES: u64 = 7;
const STREAM_SHOTS: u64 = 8;

/// Everything needed to classify a graph after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub gnn: GnnModel,
    pub bottleneck: Option<Bottleneck>,
    pub scaler: Option<AngleScaler>,
    /// `None` for the classical regime, which predicts with the GNN head.
    pub vqc: Option<VqcModel>,
}

impl HybridModel {
    /// The vector handed to the VQC feature map.
    pub fn vqc_features(&self, graph: &Graph) -> Result<Vec<f64>> {
        let z = self.gnn.embed(graph)?;
        self.features_from_embedding(&z)
    }

    fn features_from_embedding(&self, z: &[f64]) -> Result<Vec<f64>> {
        let c = match &self.bottleneck {
            Some(b) => b.compress(z)?,
            None => z.to_vec(),
        };
        Ok(match &self.scaler {
            Some(s) => s.transform(&c),
            None => c,
        })
    }

    /// Predicted class; the VQC path uses majority vote over `shots` samples.
    pub fn predict(&self, graph: &Graph, shots: u64, seed: u64) -> Result<u8> {
        match &self.vqc {
            Some(vqc) => Ok(vqc.predict_by_shots(&self.vqc_features(graph)?, shots, seed)?.class()),
            None => self.gnn.predict_class(graph),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub model: HybridModel,
}

struct Splits<'a> {
    train: Vec<&'a Graph>,
    val: Vec<&'a Graph>,
    test: Vec<&'a Graph>,
    train_summary: SplitSummary,
}

fn summarize(graphs: &[&Graph]) -> SplitSummary {
    let class1 = graphs.iter().filter(|g| g.label() == 1).count();
    SplitSummary {
        size: graphs.len(),
        class0: graphs.len() - class1,
        class1,
    }
}

fn classes(graphs: &[&Graph]) -> Vec<u8> {
    graphs.iter().map(|g| g.label()).collect()
}

fn labels(graphs: &[&Graph]) -> Vec<Label> {
    graphs.iter().map(|g| Label::from_class(g.label())).collect()
}

/// Runs the classical-only regime.
pub fn run_classical(config: &ExperimentConfig, dataset: &Dataset) -> Result<MetricsReport> {
    expect_regime(config, Regime::ClassicalOnly)?;
    Ok(run_experiment_with(config, dataset, &mut |_| {})?.report)
}

/// Pretrains and freezes the GNN, then fits the VQC on its embeddings.
pub fn run_serial(config: &ExperimentConfig, dataset: &Dataset) -> Result<MetricsReport> {
    expect_regime(config, Regime::SerialVqc)?;
    Ok(run_experiment_with(config, dataset, &mut |_| {})?.report)
}

/// Jointly fine-tunes GNN and VQC with Adam after pretraining.
pub fn run_end_to_end(config: &ExperimentConfig, dataset: &Dataset) -> Result<MetricsReport> {
    expect_regime(config, Regime::EndToEnd)?;
    Ok(run_experiment_with(config, dataset, &mut |_| {})?.report)
}

/// Dispatches on `config.regime`.
pub fn run_experiment(config: &ExperimentConfig, dataset: &Dataset) -> Result<MetricsReport> {
    Ok(run_experiment_with(config, dataset, &mut |_| {})?.report)
}

fn expect_regime(config: &ExperimentConfig, regime: Regime) -> Result<()> {
    if config.regime != regime {
        return Err(Error::Usage(format!(
            "expected a {} configuration, got {}",
            regime.name(),
            config.regime.name()
        )));
    }
    Ok(())
}

/// Full run returning the trained model. `sink` sees every VQC trace row as
/// soon as it is recorded.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    dataset: &Dataset,
    sink: &mut dyn FnMut(&EpochTrace),
) -> Result<RunOutput> {
    config.validate()?;
    dataset.check_invariants()?;
    let seed = config.seed;
    let train_idx = dataset.train_subset(config.data_fraction, derive_seed(seed, STREAM_SUBSET))?;
    let train: Vec<&Graph> = train_idx.iter().map(|&i| &dataset.graphs[i]).collect();
    let splits = Splits {
        train_summary: summarize(&train),
        train,
        val: dataset.split_graphs(Split::Val),
        test: dataset.split_graphs(Split::Test),
    };

    let gnn_config = GnnConfig {
        f_in: dataset.graphs[0].f_in(),
        hidden: config.gnn.hidden,
        n_layers: config.gnn.n_layers,
        embed_dim: config.embed_dim,
        head_hidden: config.gnn.head_hidden,
    };
    let gnn = GnnModel::init(gnn_config, derive_seed(seed, STREAM_GNN_INIT))?;
    let pretrain = pretrain_classical(
        &gnn,
        &splits.train,
        &splits.val,
        &PretrainConfig {
            epochs: config.gnn.epochs,
            patience: config.gnn.patience,
            lr: config.gnn.lr,
            batch_size: config.gnn.batch_size,
            seed: derive_seed(seed, STREAM_PRETRAIN),
        },
    )?;

    let pretrain_history = pretrain.history;
    let (model, trace, best_epoch, baseline) = match config.regime {
        Regime::ClassicalOnly => {
            let model = HybridModel {
                gnn: pretrain.model,
                bottleneck: None,
                scaler: None,
                vqc: None,
            };
            (model, Vec::new(), pretrain.best_epoch, None)
        }
        Regime::SerialVqc => {
            let stage = serial_stage(config, config.optimizer, pretrain.model, &splits, sink)?;
            (stage.model, stage.trace, stage.best_epoch, None)
        }
        Regime::EndToEnd => {
            let initial = match config.end_to_end.warm_start {
                Some(opt) => serial_stage(config, opt, pretrain.model, &splits, &mut |_| {})?.model,
                None => untrained_hybrid(config, pretrain.model, &splits)?,
            };
            let baseline = evaluate(&initial, &splits.test, config)?;
            let stage = joint_stage(config, initial, &splits, sink)?;
            (stage.model, stage.trace, stage.best_epoch, Some(baseline))
        }
    };
    let report = MetricsReport {
        config: config.clone(),
        dataset: dataset.params,
        n_qubits: config.n_qubits(),
        train: splits.train_summary,
        val: summarize(&splits.val),
        test: summarize(&splits.test),
        metrics: evaluate(&model, &splits.test, config)?,
        baseline,
        pretrain: pretrain_history,
        trace,
        best_epoch,
    };
    Ok(RunOutput { report, model })
}

fn evaluate(model: &HybridModel, graphs: &[&Graph], config: &ExperimentConfig) -> Result<WeightedMetrics> {
    let shot_seed = derive_seed(config.seed, STREAM_SHOTS);
    let preds = graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| model.predict(g, config.shots, derive_seed(shot_seed, i as u64)))
        .collect::<Result<Vec<u8>>>()?;
    compute_weighted_metrics(&preds, &classes(graphs))
}

fn embed_all(gnn: &GnnModel, graphs: &[&Graph]) -> Result<Vec<Vec<f64>>> {
    graphs.par_iter().map(|g| gnn.embed(g)).collect()
}

/// Bottleneck and scaler fitted on the training embeddings, plus a VQC with
/// random initial angles.
fn untrained_hybrid(config: &ExperimentConfig, gnn: GnnModel, splits: &Splits) -> Result<HybridModel> {
    let emb_train = embed_all(&gnn, &splits.train)?;
    let bottleneck = match config.bottleneck {
        Some(b) => Some(train_bottleneck(
            &emb_train,
            &classes(&splits.train),
            &b,
            config.gnn.batch_size,
            derive_seed(config.seed, STREAM_BOTTLENECK),
        )?),
        None => None,
    };
    let compressed = match &bottleneck {
        Some(b) => emb_train.iter().map(|z| b.compress(z)).collect::<Result<Vec<_>>>()?,
        None => emb_train,
    };
    let scaler = match config.encoding {
        Encoding::Zz { .. } => Some(AngleScaler::fit(compressed.iter().map(|v| v.as_slice()))?),
        Encoding::Amplitude => None,
    };
    let vqc = VqcModel::with_random_theta(
        config.feature_map(),
        config.vqc_layers,
        derive_seed(config.seed, STREAM_VQC_INIT),
    )?;
    Ok(HybridModel {
        gnn,
        bottleneck,
        scaler,
        vqc: Some(vqc),
    })
}

struct ThetaLog {
    last: Vec<f64>,
    best: Vec<f64>,
}

struct Stage {
    model: HybridModel,
    trace: Vec<EpochTrace>,
    best_epoch: usize,
}

/// Early-stopping bookkeeping shared by every training loop.
struct Tracker<'s> {
    monitor: Monitor,
    patience: usize,
    trace: Vec<EpochTrace>,
    best_val_loss: f64,
    best_val_f1: f64,
    best_epoch: usize,
    since_best: usize,
    sink: &'s mut dyn FnMut(&EpochTrace),
}

struct Validation {
    loss: f64,
    f1: f64,
}

impl<'s> Tracker<'s> {
    fn new(monitor: Monitor, patience: usize, sink: &'s mut dyn FnMut(&EpochTrace)) -> Self {
        Self {
            monitor,
            patience,
            trace: Vec::new(),
            best_val_loss: f64::INFINITY,
            best_val_f1: f64::NEG_INFINITY,
            best_epoch: 0,
            since_best: 0,
            sink,
        }
    }

    fn last_epoch(&self) -> usize {
        self.trace.last().map_or(0, |t| t.epoch)
    }

    /// Returns `(improved, stop)`.
    fn record(&mut self, epoch: usize, fevals: usize, train_loss: f64, val: Validation, theta_q_delta: f64) -> Result<(bool, bool)> {
        if !(train_loss.is_finite() && val.loss.is_finite()) {
            return Err(Error::numerical(format!(
                "loss became non-finite at epoch {epoch} (train {train_loss}, val {})",
                val.loss
            )));
        }
        let improved = match self.monitor {
            Monitor::ValLoss => val.loss < self.best_val_loss,
            Monitor::ValF1 => val.f1 > self.best_val_f1,
        };
        self.best_val_loss = self.best_val_loss.min(val.loss);
        self.best_val_f1 = self.best_val_f1.max(val.f1);
        if improved {
            self.best_epoch = epoch;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        let row = EpochTrace {
            epoch,
            fevals,
            train_loss,
            val_loss: val.loss,
            val_f1: val.f1,
            best_val_loss: self.best_val_loss,
            improved,
            theta_q_delta,
        };
        (self.sink)(&row);
        self.trace.push(row);
        Ok((improved, self.since_best >= self.patience))
    }
}

fn validate_vqc(vqc: &VqcModel, theta: &[f64], xs: &[Vec<f64>], ys: &[Label]) -> Result<Validation> {
    let es = xs
        .par_iter()
        .map(|x| vqc.expectation_with(x, theta))
        .collect::<Result<Vec<f64>>>()?;
    let loss = es.iter().zip(ys).map(|(&e, &y)| sample_loss(e, y)).sum::<f64>() / es.len() as f64;
    let preds: Vec<u8> = es.iter().map(|&e| Label::from_expectation(e).class()).collect();
    let truth: Vec<u8> = ys.iter().map(|y| y.class()).collect();
    Ok(Validation {
        loss,
        f1: compute_weighted_metrics(&preds, &truth)?.weighted_f1,
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn serial_stage(
    config: &ExperimentConfig,
    optimizer: OptimizerKind,
    gnn: GnnModel,
    splits: &Splits,
    sink: &mut dyn FnMut(&EpochTrace),
) -> Result<Stage> {
    let mut model = untrained_hybrid(config, gnn, splits)?;
    let features = |graphs: &[&Graph]| -> Result<Vec<Vec<f64>>> {
        embed_all(&model.gnn, graphs)?
            .iter()
            .map(|z| model.features_from_embedding(z))
            .collect()
    };
    let x_train = features(&splits.train)?;
    let x_val = features(&splits.val)?;
    let y_train = labels(&splits.train);
    let y_val = labels(&splits.val);
    let mut vqc = model.vqc.take().expect("untrained hybrid has a VQC");

    let mut tracker = Tracker::new(config.monitor, config.patience, sink);
    let theta0 = vqc.theta_q.clone();
    let train0 = vqc.loss_with(&x_train, &y_train, &theta0)?;
    tracker.record(0, 0, train0, validate_vqc(&vqc, &theta0, &x_val, &y_val)?, 0.0)?;
    let mut thetas = ThetaLog {
        last: theta0.clone(),
        best: theta0.clone(),
    };
    let n = vqc.n_params();

    // Records an epoch boundary and tells the optimizer whether to stop.
    let on_epoch = |tracker: &mut Tracker, thetas: &mut ThetaLog, epoch: usize, fevals: usize, loss: f64, p: &[f64]| -> Result<bool> {
        let val = validate_vqc(&vqc, p, &x_val, &y_val)?;
        let (improved, stop) = tracker.record(epoch, fevals, loss, val, max_abs_diff(p, &thetas.last))?;
        thetas.last.copy_from_slice(p);
        if improved {
            thetas.best.copy_from_slice(p);
        }
        Ok(stop)
    };

    if n > 0 {
        match optimizer {
            OptimizerKind::Nft => {
                let cfg = NftConfig {
                    sweeps: config.epochs,
                    verify_steps: true,
                };
                let mut failure = None;
                nft_minimize_observed(
                    |p: &[f64]| vqc.loss_with(&x_train, &y_train, p),
                    &theta0,
                    cfg,
                    |rec: &TraceRecord, p: &[f64]| {
                        if rec.iteration % n != 0 {
                            return ControlFlow::Continue(());
                        }
                        match on_epoch(&mut tracker, &mut thetas, rec.iteration / n, rec.fevals, rec.best_value, p) {
                            Ok(false) => ControlFlow::Continue(()),
                            Ok(true) => ControlFlow::Break(()),
                            Err(e) => {
                                failure = Some(e);
                                ControlFlow::Break(())
                            }
                        }
                    },
                )?;
                if let Some(e) = failure {
                    return Err(e);
                }
            }
            OptimizerKind::Cobyla => {
                let per_epoch = n + 1;
                let cfg = CobylaConfig {
                    rhobeg: config.cobyla.rhobeg,
                    rhoend: config.cobyla.rhoend,
                    maxfun: Some(config.epochs * per_epoch),
                };
                let mut failure = None;
                let mut stopped = false;
                let result = cobyla_minimize_observed(
                    |p: &[f64]| vqc.loss_with(&x_train, &y_train, p),
                    &theta0,
                    cfg,
                    |rec: &TraceRecord, p: &[f64]| {
                        while rec.fevals >= (tracker.last_epoch() + 1) * per_epoch && tracker.last_epoch() < config.epochs {
                            let epoch = tracker.last_epoch() + 1;
                            match on_epoch(&mut tracker, &mut thetas, epoch, rec.fevals, rec.best_value, p) {
                                Ok(false) => {}
                                Ok(true) => {
                                    stopped = true;
                                    return ControlFlow::Break(());
                                }
                                Err(e) => {
                                    failure = Some(e);
                                    return ControlFlow::Break(());
                                }
                            }
                        }
                        ControlFlow::Continue(())
                    },
                )?;
                if let Some(e) = failure {
                    return Err(e);
                }
                // Converged inside an epoch: record where it ended.
                if !stopped && tracker.last_epoch() < config.epochs && result.params != thetas.last {
                    let epoch = tracker.last_epoch() + 1;
                    on_epoch(&mut tracker, &mut thetas, epoch, result.fevals, result.value, &result.params)?;
                }
            }
            OptimizerKind::Adam => {
                let mut adam = Adam::new(n, config.vqc_adam_lr);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_VQC_BATCHES));
                let mut order: Vec<usize> = (0..x_train.len()).collect();
                let mut theta = theta0.clone();
                let mut probe = vqc.clone();
                let mut fevals = 0;
                for epoch in 1..=config.epochs {
                    order.shuffle(&mut rng);
                    let mut total = 0.0;
                    for chunk in order.chunks(config.gnn.batch_size) {
                        let xs: Vec<Vec<f64>> = chunk.iter().map(|&i| x_train[i].clone()).collect();
                        let ys: Vec<Label> = chunk.iter().map(|&i| y_train[i]).collect();
                        probe.theta_q.copy_from_slice(&theta);
                        let g = batch_gradient(&probe, &xs, &ys, false)?;
                        fevals += chunk.len();
                        total += g.loss * chunk.len() as f64;
                        adam.step(&mut theta, &g.d_theta_q)?;
                    }
                    if on_epoch(&mut tracker, &mut thetas, epoch, fevals, total / x_train.len() as f64, &theta)? {
                        break;
                    }
                }
            }
        }
    }
    vqc.theta_q = thetas.best;
    model.vqc = Some(vqc);
    Ok(Stage {
        model,
        best_epoch: tracker.best_epoch,
        trace: tracker.trace,
    })
}

fn joint_validation(model: &HybridModel, graphs: &[&Graph], ys: &[Label]) -> Result<Validation> {
    let vqc = model.vqc.as_ref().expect("joint training has a VQC");
    let xs = graphs
        .par_iter()
        .map(|g| model.vqc_features(g))
        .collect::<Result<Vec<_>>>()?;
    validate_vqc(vqc, &vqc.theta_q, &xs, ys)
}

/// Joint Adam fine-tuning. θ_G moves every minibatch; θ_Q only during epochs
/// that are multiples of `theta_q_every`.
fn joint_stage(
    config: &ExperimentConfig,
    initial: HybridModel,
    splits: &Splits,
    sink: &mut dyn FnMut(&EpochTrace),
) -> Result<Stage> {
    let settings = config.end_to_end;
    let scaler = initial
        .scaler
        .clone()
        .ok_or_else(|| Error::Unsupported("end-to-end training needs ZZ encoding".into()))?;
    let slopes = scaler.slopes();
    let y_train = labels(&splits.train);
    let y_val = labels(&splits.val);

    let mut model = initial.clone();
    let mut best = initial;
    let n_g = model.gnn.n_params();
    let n_q = model.vqc.as_ref().map_or(0, |v| v.n_params());
    let mut adam_g = Adam::new(n_g, settings.lr_theta_g);
    let mut adam_q = Adam::new(n_q, settings.lr_theta_q);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_JOINT_BATCHES));
    let mut order: Vec<usize> = (0..splits.train.len()).collect();

    let mut tracker = Tracker::new(Monitor::ValLoss, config.patience, sink);
    let train0 = joint_validation(&model, &splits.train, &y_train)?.loss;
    tracker.record(0, 0, train0, joint_validation(&model, &splits.val, &y_val)?, 0.0)?;
    let mut fevals = 0;

    for epoch in 1..=config.epochs {
        let update_q = epoch % settings.theta_q_every == 0;
        let theta_before = model.vqc.as_ref().map(|v| v.theta_q.clone()).unwrap_or_default();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(settings.batch_size) {
            let caches = chunk
                .par_iter()
                .map(|&i| model.gnn.forward(splits.train[i]))
                .collect::<Result<Vec<_>>>()?;
            let xs: Vec<Vec<f64>> = caches.iter().map(|c| scaler.transform(&c.embedding)).collect();
            let ys: Vec<Label> = chunk.iter().map(|&i| y_train[i]).collect();
            let vqc = model.vqc.as_mut().expect("joint training has a VQC");
            let g = batch_gradient(vqc, &xs, &ys, true)?;
            fevals += chunk.len();
            total += g.loss * chunk.len() as f64;

            let gnn = &model.gnn;
            let per_graph = chunk
                .par_iter()
                .zip(caches.par_iter())
                .zip(g.d_features.par_iter())
                .map(|((&i, cache), d_x)| {
                    let d_emb: Vec<f64> = d_x.iter().zip(&slopes).map(|(d, s)| d * s).collect();
                    gnn.backward(splits.train[i], cache, &d_emb)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut grad_g = vec![0.0; n_g];
            for gg in &per_graph {
                for (acc, v) in grad_g.iter_mut().zip(gg) {
                    *acc += v;
                }
            }
            adam_g.step(model.gnn.params_mut(), &grad_g)?;
            if update_q {
                adam_q.step(&mut vqc.theta_q, &g.d_theta_q)?;
            }
        }
        let delta = max_abs_diff(&model.vqc.as_ref().map(|v| v.theta_q.clone()).unwrap_or_default(), &theta_before);
        let val = joint_validation(&model, &splits.val, &y_val)?;
        let (improved, stop) = tracker.record(epoch, fevals, total / splits.train.len() as f64, val, delta)?;
        if improved {
            best = model.clone();
        }
        if stop {
            break;
        }
    }
    Ok(Stage {
        model: best,
        best_epoch: tracker.best_epoch,
        trace: tracker.trace,
    })
}
