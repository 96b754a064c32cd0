use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::dataset::Dataset;
use super::experiment::run_experiment;
use super::report::MetricsReport;
use crate::error::{Error, Result};

/// Environment variable overriding the grid worker count.
pub const THREADS_ENV: &str = "QVGC_THREADS";

/// Cartesian product axes; points are ordered dims, then fractions, then
/// seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl GridSpec {
    /// Parses comma-separated lists; integer lists also accept inclusive
    /// ranges such as `1..5`.
    pub fn parse(dims: &str, fractions: &str, seeds: &str) -> Result<Self> {
        Ok(Self {
            dims: parse_int_list(dims)?
                .into_iter()
                .map(|v| usize::try_from(v).map_err(|_| Error::Usage(format!("dimension {v} too large"))))
                .collect::<Result<_>>()?,
            fractions: parse_list(fractions, |s| s.parse::<f64>().ok())?,
            seeds: parse_int_list(seeds)?,
        })
    }

    pub fn len(&self) -> usize {
        self.dims.len() * self.fractions.len() * self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn configs(&self, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &d in &self.dims {
            for &f in &self.fractions {
                for &s in &self.seeds {
                    out.push(ExperimentConfig {
                        embed_dim: d,
                        data_fraction: f,
                        seed: s,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

fn parse_list<T>(text: &str, item: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| item(s.trim()).ok_or_else(|| Error::Usage(format!("cannot parse grid value {s:?}"))))
        .collect()
}

fn parse_int_list(text: &str) -> Result<Vec<u64>> {
    let parts = parse_list(text, |s| {
        if let Some((a, b)) = s.split_once("..") {
            let (a, b) = (a.trim().parse::<u64>().ok()?, b.trim().parse::<u64>().ok()?);
            (a <= b).then(|| (a..=b).collect::<Vec<_>>())
        } else {
            s.parse::<u64>().ok().map(|v| vec![v])
        }
    })?;
    Ok(parts.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub config: ExperimentConfig,
    /// The report, or the error message of a failed or invalid point.
    pub outcome: std::result::Result<MetricsReport, String>,
}

/// Worker count: `QVGC_THREADS` if set, else `requested`, else the
/// available parallelism.
pub fn worker_count(requested: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        };
    }
    Ok(requested
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

/// Runs every grid point on a bounded pool. Invalid or failing points are
/// kept with their error and do not stop the others.
pub fn run_grid(base: &ExperimentConfig, dataset: &Dataset, spec: &GridSpec, threads: usize) -> Result<Vec<GridPoint>> {
    let configs = spec.configs(base);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        configs
            .into_par_iter()
            .map(|config| {
                let outcome = run_experiment(&config, dataset).map_err(|e| e.to_string());
                GridPoint { config, outcome }
            })
            .collect()
    }))
}

pub fn run_ablation_grid(
    base: &ExperimentConfig,
    dataset: &Dataset,
    dims: &[usize],
    fractions: &[f64],
    seeds: &[u64],
) -> Result<Vec<GridPoint>> {
    let spec = GridSpec {
        dims: dims.to_vec(),
        fractions: fractions.to_vec(),
        seeds: seeds.to_vec(),
    };
    run_grid(base, dataset, &spec, worker_count(None)?)
}
