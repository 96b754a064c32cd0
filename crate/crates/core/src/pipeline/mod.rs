//! Experiment orchestration: synthetic data, the classical, serial and
//! end-to-end regimes, ablation grids and result files.

mod bottleneck;
mod config;
mod dataset;
mod experiment;
mod grid;
mod report;

pub use bottleneck::{train_bottleneck, Bottleneck};
pub use config::{
    BottleneckSettings, CobylaSettings, Encoding, EndToEndSettings, ExperimentConfig, GnnSettings, Monitor,
    OptimizerKind, Regime, ZZ_MAX_QUBITS,
};
pub use dataset::{
    generate_synthetic_dataset, Dataset, GeneratorParams, Split, SplitPlan, SplitSummary, DATASET_MAGIC,
    DATASET_VERSION, MIN_GRAPHS,
};
pub use experiment::{
    run_classical, run_end_to_end, run_experiment, run_experiment_with, run_serial, HybridModel, RunOutput,
};
pub use grid::{run_ablation_grid, run_grid, worker_count, GridPoint, GridSpec, THREADS_ENV};
pub use report::{
    trace_csv_record, write_results_csv, write_trace_csv, EpochTrace, MetricsReport, RESULTS_CSV_COLUMNS,
    TABLE_HEADER, TRACE_CSV_COLUMNS,
};

pub use crate::metrics::compute_weighted_metrics;

/// Seed for an independent random stream (SplitMix64 finalizer over the
/// base seed and stream id).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(base.wrapping_add(mix(stream.wrapping_add(0x9E37_79B9_7F4A_7C15))))
}
