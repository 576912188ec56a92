//! Synthetic data and detection metrics.

pub mod benchmark;
pub mod metrics;
pub mod model;

pub use benchmark::{
    benchmark_spec, simulate_cluster_benchmark, simulate_cluster_benchmark_seeded,
    BenchmarkConfig, BenchmarkTruth, OutbreakWindow,
};
pub use metrics::{
    auc_from_pairs, permutation_test, permutation_test_exact, roc_auc, sens_spec, timeliness,
    ScoreTable, SensSpec, Timeliness,
};
pub use model::{
    recovery_spec, recovery_truth, selection_spec, selection_truth, simulate_from_model,
    synthetic_skeleton,
};
