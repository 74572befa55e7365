//! Experiment runner: configs, synthetic data, traces, reference cache, sweeps.

pub mod cache;
pub mod config;
pub mod run;
pub mod synthetic;
pub mod trace;

pub use cache::DiskCache;
pub use config::{ExperimentConfig, Method, OracleKind, PolicyKind, Task};
pub use run::{
    build_objective, load_dataset, resolve_params, run_experiment, run_on_dataset, summary_csv,
    sweep, RunOutcome, SweepEntry,
};
pub use synthetic::{generate, LabelKind, SyntheticSpec};
pub use trace::{emit_csv, parse_csv, to_csv, ConvergenceTrace, TraceRow, CSV_HEADER};
