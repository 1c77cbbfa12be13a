//! Experiment plumbing: configuration, data generation and ingestion,
//! initialization, metrics and checkpoints.

mod config;
mod experiment;
mod gradcheck;
mod ratings;
mod vmf;

pub use config::{Experiment, ExperimentConfig, TransportKind};
pub use experiment::{
    completion_data, completion_warm_start, even_ranges, frechet_oracle, frechet_shards,
    frechet_trial_data, initialize_estimator, load_checkpoint, make_transport, polish,
    run_completion_trial, run_experiment, run_frechet_trial, save_checkpoint, ExperimentReport,
    MetricsRow, MetricsWriter, RowSink, TrialResult, CSV_HEADER,
};
pub use gradcheck::{check_case, fd_gradient, relative_gradient_error, GradCase, FD_STEP};
pub use ratings::{
    load_ratings, read_ratings, split_ratings, synthetic_ratings, write_synthetic_ratings,
    RatingsData, RawRating, SplitOptions, SyntheticCorpus, TEST_FRACTION,
};
pub use vmf::{random_mean_direction, sample_vmf};
