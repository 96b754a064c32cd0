//! Synthetic graph datasets and their on-disk container.
//!
//! Graphs are random geometric graphs in the unit square. Class 1 differs
//! from class 0 by a mean shift on a few node-feature dimensions and by
//! placing a share of its nodes in tight spatial clusters (denser, more
//! clustered neighbourhoods). Both effects scale with `class_separation`; at 0
//! the two classes are drawn from the same distribution.
//!
//! File layout (little-endian):
//!
//! ```text
//! magic   b"QVGCDATA"
//! version u16 (= 1)
//! header  u32 length + JSON GeneratorParams
//! count   u32
//! graph*  n_nodes u32, f_in u32, features f64[n_nodes*f_in] (row-major),
//!         n_edges u32, edges (u32, u32)[n_edges], label u8, split u8
//! ```

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::Graph;

pub const DATASET_MAGIC: &[u8; 8] = b"QVGCDATA";
pub const DATASET_VERSION: u16 = 1;

/// Smallest dataset the generator accepts.
pub const MIN_GRAPHS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    fn code(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Split::Train),
            1 => Ok(Split::Val),
            2 => Ok(Split::Test),
            _ => Err(Error::Format(format!("unknown split code {code}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitPlan {
    /// Train and validation shares; the test split takes the remainder.
    Fractions { train: f64, val: f64 },
    Counts { train: usize, val: usize, test: usize },
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan::Fractions { train: 0.6, val: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub seed: u64,
    pub n_graphs: usize,
    pub class_separation: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub f_in: usize,
    /// Selects which feature dimensions carry the class signal, emulating
    /// distinct binary sub-tasks over the same kind of data.
    pub task: u64,
    pub split: SplitPlan,
}

impl GeneratorParams {
    pub fn new(seed: u64, n_graphs: usize, class_separation: f64) -> Self {
        Self {
            seed,
            n_graphs,
            class_separation,
            min_nodes: 30,
            max_nodes: 80,
            f_in: 8,
            task: 0,
            split: SplitPlan::default(),
        }
    }

    /// The default desk-scale corpus: 200 / 60 / 60 graphs.
    pub fn desk_scale(seed: u64, class_separation: f64) -> Self {
        Self {
            split: SplitPlan::Counts {
                train: 200,
                val: 60,
                test: 60,
            },
            ..Self::new(seed, 320, class_separation)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_graphs < MIN_GRAPHS {
            return Err(Error::config(format!(
                "need at least {MIN_GRAPHS} graphs, got {}",
                self.n_graphs
            )));
        }
        if !(0.0..=1.0).contains(&self.class_separation) {
            return Err(Error::config(format!(
                "class separation {} outside [0, 1]",
                self.class_separation
            )));
        }
        if self.min_nodes == 0 || self.min_nodes > self.max_nodes {
            return Err(Error::config("need 1 <= min_nodes <= max_nodes"));
        }
        if self.f_in < 6 {
            return Err(Error::config("generator needs at least 6 node features"));
        }
        match self.split {
            SplitPlan::Fractions { train, val } => {
                if !(train > 0.0 && val > 0.0 && train + val < 1.0) {
                    return Err(Error::config("split fractions must be positive and sum below 1"));
                }
            }
            SplitPlan::Counts { train, val, test } => {
                if train + val + test != self.n_graphs {
                    return Err(Error::config(format!(
                        "split counts {train}+{val}+{test} do not add up to {}",
                        self.n_graphs
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub params: GeneratorParams,
    pub graphs: Vec<Graph>,
    pub splits: Vec<Split>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub size: usize,
    pub class0: usize,
    pub class1: usize,
}

impl Dataset {
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.graphs.len())
            .filter(|&i| self.splits[i] == split)
            .collect()
    }

    pub fn split_graphs(&self, split: Split) -> Vec<&Graph> {
        self.indices(split).into_iter().map(|i| &self.graphs[i]).collect()
    }

    pub fn summary(&self, split: Split) -> SplitSummary {
        let idx = self.indices(split);
        let class1 = idx.iter().filter(|&&i| self.graphs[i].label() == 1).count();
        SplitSummary {
            size: idx.len(),
            class0: idx.len() - class1,
            class1,
        }
    }

    /// Stratified subsample of the training split. Each class keeps
    /// ⌈fraction · count⌉ graphs (at least one); other splits are untouched.
    pub fn train_subset(&self, fraction: f64, seed: u64) -> Result<Vec<usize>> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::config(format!("data fraction {fraction} outside (0, 1]")));
        }
        let train = self.indices(Split::Train);
        if fraction == 1.0 {
            return Ok(train);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = Vec::new();
        for class in 0..2u8 {
            let mut members: Vec<usize> = train
                .iter()
                .copied()
                .filter(|&i| self.graphs[i].label() == class)
                .collect();
            members.shuffle(&mut rng);
            let n = ((fraction * members.len() as f64).ceil() as usize).clamp(1, members.len().max(1));
            keep.extend(members.into_iter().take(n));
        }
        keep.sort_unstable();
        Ok(keep)
    }

    pub fn check_invariants(&self) -> Result<()> {
        if self.graphs.len() != self.splits.len() {
            return Err(Error::Format("split assignment length differs from graph count".into()));
        }
        for split in [Split::Train, Split::Val, Split::Test] {
            let s = self.summary(split);
            if s.class0 == 0 || s.class1 == 0 {
                return Err(Error::Degenerate(format!("{split:?} split is missing a class")));
            }
        }
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(DATASET_MAGIC)?;
        w.write_all(&DATASET_VERSION.to_le_bytes())?;
        let header = serde_json::to_vec(&self.params)?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&(self.graphs.len() as u32).to_le_bytes())?;
        for (g, split) in self.graphs.iter().zip(&self.splits) {
            w.write_all(&(g.n_nodes() as u32).to_le_bytes())?;
            w.write_all(&(g.f_in() as u32).to_le_bytes())?;
            for v in g.features() {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&(g.edges().len() as u32).to_le_bytes())?;
            for &(a, b) in g.edges() {
                w.write_all(&(a as u32).to_le_bytes())?;
                w.write_all(&(b as u32).to_le_bytes())?;
            }
            w.write_all(&[g.label(), split.code()])?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write_to(&mut out)?;
        Ok(out)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::Format("not a qvgc dataset file".into()));
        }
        let version = u16::from_le_bytes(read_array(&mut r)?);
        if version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let header_len = read_u32(&mut r)? as usize;
        let mut header = vec![0u8; header_len];
        r.read_exact(&mut header)?;
        let params: GeneratorParams = serde_json::from_slice(&header)?;
        let count = read_u32(&mut r)? as usize;
        let mut graphs = Vec::with_capacity(count);
        let mut splits = Vec::with_capacity(count);
        for _ in 0..count {
            let n_nodes = read_u32(&mut r)? as usize;
            let f_in = read_u32(&mut r)? as usize;
            let mut features = Vec::with_capacity(n_nodes * f_in);
            for _ in 0..n_nodes * f_in {
                features.push(f64::from_le_bytes(read_array(&mut r)?));
            }
            let n_edges = read_u32(&mut r)? as usize;
            let mut edges = Vec::with_capacity(n_edges);
            for _ in 0..n_edges {
                let a = read_u32(&mut r)? as usize;
                let b = read_u32(&mut r)? as usize;
                edges.push((a, b));
            }
            let [label, split] = read_array::<2>(&mut r)?;
            graphs.push(Graph::new(n_nodes, f_in, features, edges, label)?);
            splits.push(Split::from_code(split)?);
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Format("trailing bytes after last graph".into()));
        }
        Ok(Self {
            params,
            graphs,
            splits,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_from(bytes.as_slice())
    }
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format("truncated dataset file".into())
        } else {
            Error::Io(e)
        }
    })?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

/// Number of feature dimensions carrying a class-dependent mean shift.
const SIGNAL_DIMS: usize = 3;
const FEATURE_SHIFT: f64 = 0.6;
const CLUSTERS: usize = 3;
const CLUSTER_SPREAD: f64 = 0.05;
const MEAN_DEGREE: f64 = 5.0;

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box–Muller; one draw per call keeps the stream layout simple.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn generate_graph(rng: &mut ChaCha8Rng, p: &GeneratorParams, label: u8) -> Result<Graph> {
    let s = p.class_separation;
    let n = rng.gen_range(p.min_nodes..=p.max_nodes);
    let centers: Vec<(f64, f64)> = (0..CLUSTERS)
        .map(|_| (rng.gen_range(0.15..0.85), rng.gen_range(0.15..0.85)))
        .collect();
    let mut pos = Vec::with_capacity(n);
    for _ in 0..n {
        let clustered = label == 1 && rng.gen::<f64>() < s;
        let (x, y) = if clustered {
            let (cx, cy) = centers[rng.gen_range(0..CLUSTERS)];
            (
                (cx + CLUSTER_SPREAD * standard_normal(rng)).clamp(0.0, 1.0),
                (cy + CLUSTER_SPREAD * standard_normal(rng)).clamp(0.0, 1.0),
            )
        } else {
            (rng.gen::<f64>(), rng.gen::<f64>())
        };
        pos.push((x, y));
    }
    let radius = (MEAN_DEGREE / (std::f64::consts::PI * n as f64)).sqrt();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let (dx, dy) = (pos[a].0 - pos[b].0, pos[a].1 - pos[b].1);
            if dx * dx + dy * dy < radius * radius {
                edges.push((a, b));
            }
        }
    }
    let noise_dims = p.f_in - 2;
    let first_signal = (p.task as usize * SIGNAL_DIMS) % noise_dims;
    let mut features = Vec::with_capacity(n * p.f_in);
    for &(x, y) in &pos {
        features.push(x);
        features.push(y);
        for k in 0..noise_dims {
            let signal = (k + noise_dims - first_signal) % noise_dims < SIGNAL_DIMS;
            let shift = if signal && label == 1 { FEATURE_SHIFT * s } else { 0.0 };
            features.push(standard_normal(rng) + shift);
        }
    }
    Graph::new(n, p.f_in, features, edges, label)
}

/// Deterministic in `params`: the same parameters always produce the same
/// graphs, labels and split assignment.
pub fn generate_synthetic_dataset(params: &GeneratorParams) -> Result<Dataset> {
    params.validate()?;
    let n = params.n_graphs;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ params.task.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    labels.shuffle(&mut rng);
    let graphs = labels
        .iter()
        .map(|&y| generate_graph(&mut rng, params, y))
        .collect::<Result<Vec<_>>>()?;

    let (n_train, n_val) = match params.split {
        SplitPlan::Fractions { train, val } => (
            (train * n as f64).round() as usize,
            (val * n as f64).round() as usize,
        ),
        SplitPlan::Counts { train, val, .. } => (train, val),
    };
    let mut splits = vec![Split::Test; n];
    let n0 = labels.iter().filter(|&&y| y == 0).count();
    let mut assigned = [0usize; 2];
    for class in 0..2u8 {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let share = if class == 0 { n0 as f64 / n as f64 } else { 1.0 };
        // Class 0 takes its proportional share; class 1 fills the rest.
        let (t, v) = if class == 0 {
            (
                (n_train as f64 * share).round() as usize,
                (n_val as f64 * share).round() as usize,
            )
        } else {
            (n_train - assigned[0], n_val - assigned[1])
        };
        if t + v > members.len() {
            return Err(Error::config("split sizes exceed class counts"));
        }
        for (k, &i) in members.iter().enumerate() {
            splits[i] = if k < t {
                Split::Train
            } else if k < t + v {
                Split::Val
            } else {
                Split::Test
            };
        }
        if class == 0 {
            assigned = [t, v];
        }
    }
    let ds = Dataset {
        params: *params,
        graphs,
        splits,
    };
    ds.check_invariants()?;
    Ok(ds)
}
