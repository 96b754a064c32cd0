//! The `qvgc` command line: `generate`, `run` and `grid`.
//!
//! Exit codes: 0 success, 1 I/O or other runtime failure, 2 usage or invalid
//! configuration, 3 numerical abort, 4 grid finished with failed points.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::checkpoint::to_checkpoint_json;
use crate::encoders::Entanglement;
use crate::error::{Error, Result};
use crate::pipeline::{
    generate_synthetic_dataset, run_experiment_with, run_grid, trace_csv_record, worker_count, write_results_csv,
    write_trace_csv, BottleneckSettings, Dataset, Encoding, ExperimentConfig, GeneratorParams, GridSpec,
    Monitor, OptimizerKind, Regime, Split, SplitPlan, TABLE_HEADER, TRACE_CSV_COLUMNS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const PRETRAIN_FILE: &str = "pretrain.csv";
pub const MODEL_FILE: &str = "model.json";
pub const RESULTS_FILE: &str = "results.csv";

#[derive(Debug, Parser)]
#[command(name = "qvgc", version, about = "Hybrid GNN + variational quantum classifier experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic graph dataset file.
    Generate(GenerateArgs),
    /// Train and evaluate one configuration.
    Run(RunArgs),
    /// Run a dims × fractions × seeds ablation grid.
    Grid(GridArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of graphs (at least 20).
    #[arg(long, default_value_t = 320)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    /// Which feature dimensions carry the class signal.
    #[arg(long, default_value_t = 0)]
    task: u64,
    #[arg(long, default_value_t = 30)]
    min_nodes: usize,
    #[arg(long, default_value_t = 80)]
    max_nodes: usize,
    /// Explicit split sizes; without them the split is 60/20/20.
    #[arg(long, requires_all = ["val", "test"])]
    train: Option<usize>,
    #[arg(long, requires_all = ["train", "test"])]
    val: Option<usize>,
    #[arg(long, requires_all = ["train", "val"])]
    test: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    Classical,
    Serial,
    EndToEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EncodingArg {
    Zz,
    Amplitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EntanglementArg {
    Full,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MonitorArg {
    ValLoss,
    ValF1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OptimizerArg {
    Cobyla,
    Nft,
    Adam,
}

#[derive(Debug, Clone, Args)]
struct ExperimentArgs {
    #[arg(long, value_enum, default_value_t = RegimeArg::Serial)]
    regime: RegimeArg,
    #[arg(long, value_enum, default_value_t = EncodingArg::Zz)]
    encoding: EncodingArg,
    #[arg(long, default_value_t = 2)]
    zz_reps: usize,
    /// Qubit pairs coupled by the ZZ map.
    #[arg(long, value_enum, default_value_t = EntanglementArg::Full)]
    entanglement: EntanglementArg,
    /// Quantity watched by early stopping.
    #[arg(long, value_enum, default_value_t = MonitorArg::ValLoss)]
    monitor: MonitorArg,
    /// Defaults to NFT for serial runs and Adam for end-to-end runs.
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 1024)]
    shots: u64,
    /// Ansatz layers.
    #[arg(long, default_value_t = 3)]
    layers: usize,
    /// Compress embeddings to this width before the VQC.
    #[arg(long)]
    bottleneck: Option<usize>,
    #[arg(long)]
    bottleneck_epochs: Option<usize>,
    /// Epoch limit for classical pretraining.
    #[arg(long, default_value_t = 100)]
    gnn_epochs: usize,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Replay the configuration stored in a run manifest.
    #[arg(long, conflicts_with_all = ["dataset", "dim", "fraction", "seed"])]
    manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Defaults to `qvgc-run`, or the manifest's directory when replaying.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long, conflicts_with_all = ["dataset", "dims", "fractions", "seeds"])]
    manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    dataset: Option<PathBuf>,
    /// Comma-separated embedding dimensions, e.g. `6,8`.
    #[arg(long, required_unless_present = "manifest")]
    dims: Option<String>,
    /// Comma-separated training fractions, e.g. `0.5,1.0`.
    #[arg(long, default_value = "1.0")]
    fractions: String,
    /// Comma-separated seeds or inclusive ranges, e.g. `1..3`.
    #[arg(long, default_value = "0")]
    seeds: String,
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Worker threads; `QVGC_THREADS` takes precedence.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Written before training starts and rewritten with the end time when the
/// command finishes. Replaying it reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub dataset: PathBuf,
    pub dataset_params: GeneratorParams,
    pub config: ExperimentConfig,
    pub grid: Option<GridSpec>,
    pub seeds: Vec<u64>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Writes through a temporary sibling and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::InvalidConfig(_) | Error::Unsupported(_) | Error::Capacity { .. } => EXIT_USAGE,
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Grid(a) => cmd_grid(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<i32> {
    let split = match (a.train, a.val, a.test) {
        (Some(train), Some(val), Some(test)) => SplitPlan::Counts { train, val, test },
        _ => SplitPlan::default(),
    };
    let params = GeneratorParams {
        seed: a.seed,
        n_graphs: a.n,
        class_separation: a.separation,
        min_nodes: a.min_nodes,
        max_nodes: a.max_nodes,
        f_in: 8,
        task: a.task,
        split,
    };
    params.validate()?;
    let ds = generate_synthetic_dataset(&params)?;
    write_atomic(&a.out, &ds.to_bytes()?)?;
    println!("wrote {} graphs to {}", ds.graphs.len(), a.out.display());
    println!("split    size  class0  class1");
    for split in [Split::Train, Split::Val, Split::Test] {
        let s = ds.summary(split);
        println!("{:<8} {:>4} {:>7} {:>7}", format!("{split:?}").to_lowercase(), s.size, s.class0, s.class1);
    }
    Ok(EXIT_OK)
}

fn build_config(e: &ExperimentArgs, dim: usize, fraction: f64, seed: u64) -> ExperimentConfig {
    let regime = match e.regime {
        RegimeArg::Classical => Regime::ClassicalOnly,
        RegimeArg::Serial => Regime::SerialVqc,
        RegimeArg::EndToEnd => Regime::EndToEnd,
    };
    let encoding = match e.encoding {
        EncodingArg::Zz => Encoding::Zz { reps: e.zz_reps },
        EncodingArg::Amplitude => Encoding::Amplitude,
    };
    let mut cfg = ExperimentConfig::new(regime, dim, encoding);
    if let Some(opt) = e.optimizer {
        cfg.optimizer = match opt {
            OptimizerArg::Cobyla => OptimizerKind::Cobyla,
            OptimizerArg::Nft => OptimizerKind::Nft,
            OptimizerArg::Adam => OptimizerKind::Adam,
        };
    }
    cfg.entanglement = match e.entanglement {
        EntanglementArg::Full => Entanglement::Full,
        EntanglementArg::Linear => Entanglement::Linear,
    };
    cfg.monitor = match e.monitor {
        MonitorArg::ValLoss => Monitor::ValLoss,
        MonitorArg::ValF1 => Monitor::ValF1,
    };
    cfg.epochs = e.epochs;
    cfg.patience = e.patience;
    cfg.shots = e.shots;
    cfg.vqc_layers = e.layers;
    cfg.gnn.epochs = e.gnn_epochs;
    cfg.data_fraction = fraction;
    cfg.seed = seed;
    cfg.bottleneck = e.bottleneck.map(|w| {
        let mut b = BottleneckSettings::new(w);
        if let Some(n) = e.bottleneck_epochs {
            b.epochs = n;
        }
        b
    });
    cfg
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Usage(format!("cannot read dataset {}: {io}", path.display())),
        other => other,
    })
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    write_atomic(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(manifest)?.as_bytes())
}

/// Loads a manifest for replay and checks the dataset it points at.
fn load_replay(path: &Path, command: &str) -> Result<(RunManifest, Dataset)> {
    let m = RunManifest::load(path)?;
    if m.command != command {
        return Err(Error::Usage(format!("{} is not a {command} manifest", path.display())));
    }
    let ds = load_dataset(&m.dataset)?;
    if ds.params != m.dataset_params {
        return Err(Error::Usage(format!(
            "dataset {} does not match the parameters recorded in the manifest",
            m.dataset.display()
        )));
    }
    Ok((m, ds))
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn cmd_run(a: RunArgs) -> Result<i32> {
    let (config, dataset_path, ds, default_dir) = match &a.manifest {
        Some(path) => {
            let (m, ds) = load_replay(path, "run")?;
            m.config.validate()?;
            (m.config, m.dataset, ds, manifest_dir(path))
        }
        None => {
            let config = build_config(&a.experiment, a.dim, a.fraction, a.seed);
            config.validate()?;
            let path = a.dataset.clone().expect("clap enforces --dataset");
            let ds = load_dataset(&path)?;
            (config, path, ds, PathBuf::from("qvgc-run"))
        }
    };
    let dataset_params = ds.params;
    let out_dir = a.out_dir.clone().unwrap_or(default_dir);
    fs::create_dir_all(&out_dir)?;

    let mut manifest = RunManifest {
        tool: "qvgc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "run".into(),
        dataset: dataset_path,
        dataset_params,
        config: config.clone(),
        grid: None,
        seeds: vec![config.seed],
        started_unix: unix_now(),
        finished_unix: None,
        outputs: [METRICS_FILE, CONVERGENCE_FILE, PRETRAIN_FILE, MODEL_FILE]
            .iter()
            .map(|f| out_dir.join(f))
            .collect(),
    };
    write_manifest(&out_dir, &manifest)?;

    // The convergence trace is streamed so an aborted run keeps its rows.
    let mut trace_out = csv::Writer::from_writer(File::create(out_dir.join(CONVERGENCE_FILE))?);
    trace_out.write_record(TRACE_CSV_COLUMNS)?;
    trace_out.flush()?;
    let mut sink_err: Option<Error> = None;
    let result = run_experiment_with(&config, &ds, &mut |row| {
        if sink_err.is_some() {
            return;
        }
        if let Err(e) = trace_out.write_record(trace_csv_record(row)) {
            sink_err = Some(e.into());
        } else if let Err(e) = trace_out.flush() {
            sink_err = Some(e.into());
        }
    });
    if let Some(e) = sink_err {
        return Err(e);
    }
    let output = result?;
    drop(trace_out);

    let report = &output.report;
    write_atomic(&out_dir.join(METRICS_FILE), report.to_json()?.as_bytes())?;
    let mut pre = csv::Writer::from_writer(Vec::new());
    pre.write_record(["epoch", "train_loss", "val_weighted_f1"])?;
    for p in &report.pretrain {
        pre.write_record([p.epoch.to_string(), p.train_loss.to_string(), p.val_weighted_f1.to_string()])?;
    }
    write_atomic(
        &out_dir.join(PRETRAIN_FILE),
        &pre.into_inner().map_err(|e| Error::Io(e.into_error()))?,
    )?;
    write_atomic(&out_dir.join(MODEL_FILE), to_checkpoint_json(&output.model)?.as_bytes())?;

    manifest.finished_unix = Some(unix_now());
    write_manifest(&out_dir, &manifest)?;

    println!("{TABLE_HEADER}");
    println!("{}", report.table_row());
    Ok(EXIT_OK)
}

fn cmd_grid(a: GridArgs) -> Result<i32> {
    let (base, spec, dataset_path, ds, default_dir) = match &a.manifest {
        Some(path) => {
            let (m, ds) = load_replay(path, "grid")?;
            let spec = m
                .grid
                .ok_or_else(|| Error::Usage(format!("{} has no grid axes", path.display())))?;
            (m.config, spec, m.dataset, ds, manifest_dir(path))
        }
        None => {
            let spec = GridSpec::parse(a.dims.as_deref().unwrap_or_default(), &a.fractions, &a.seeds)?;
            let dim = spec.dims.first().copied().unwrap_or(1);
            let base = build_config(&a.experiment, dim, 1.0, 0);
            let path = a.dataset.clone().expect("clap enforces --dataset");
            let ds = load_dataset(&path)?;
            (base, spec, path, ds, PathBuf::from("qvgc-grid"))
        }
    };
    let threads = worker_count(a.threads)?;
    let out_dir = a.out_dir.clone().unwrap_or(default_dir);
    fs::create_dir_all(&out_dir)?;
    let mut manifest = RunManifest {
        tool: "qvgc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "grid".into(),
        dataset: dataset_path,
        dataset_params: ds.params,
        config: base.clone(),
        grid: Some(spec.clone()),
        seeds: spec.seeds.clone(),
        started_unix: unix_now(),
        finished_unix: None,
        outputs: vec![out_dir.join(RESULTS_FILE), out_dir.join("runs")],
    };
    write_manifest(&out_dir, &manifest)?;

    let points = run_grid(&base, &ds, &spec, threads)?;
    let runs_dir = out_dir.join("runs");
    for (i, p) in points.iter().enumerate() {
        let dir = runs_dir.join(format!(
            "{i:03}_d{}_f{}_s{}",
            p.config.embed_dim, p.config.data_fraction, p.config.seed
        ));
        fs::create_dir_all(&dir)?;
        match &p.outcome {
            Ok(r) => {
                write_atomic(&dir.join(METRICS_FILE), r.to_json()?.as_bytes())?;
                let mut buf = Vec::new();
                write_trace_csv(&r.trace, &mut buf)?;
                write_atomic(&dir.join(CONVERGENCE_FILE), &buf)?;
            }
            Err(msg) => write_atomic(&dir.join("error.txt"), msg.as_bytes())?,
        }
    }
    let mut csv_buf = Vec::new();
    write_results_csv(
        points.iter().map(|p| (&p.config, p.outcome.as_ref().map_err(|s| s.as_str()))),
        &mut csv_buf,
    )?;
    write_atomic(&out_dir.join(RESULTS_FILE), &csv_buf)?;
    manifest.finished_unix = Some(unix_now());
    write_manifest(&out_dir, &manifest)?;

    println!("{:<6} {:>8} {:>6}  {TABLE_HEADER}", "dim", "fraction", "seed");
    let mut failed = 0;
    for p in &points {
        let prefix = format!("{:<6} {:>8} {:>6}", p.config.embed_dim, p.config.data_fraction, p.config.seed);
        match &p.outcome {
            Ok(r) => println!("{prefix}  {}", r.table_row()),
            Err(msg) => {
                failed += 1;
                println!("{prefix}  failed: {msg}");
            }
        }
    }
    std::io::stdout().flush()?;
    if failed > 0 {
        eprintln!("{failed} of {} grid points failed", points.len());
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}
