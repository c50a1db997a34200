//! Experiment harness: run configuration, timing methodology, reports,
//! the in-memory billing sweep, and the cross-architecture verifier.

pub mod config;
pub mod measure;
pub mod report;
pub mod runner;
pub mod sweep;

pub use config::{load_config, parse_config, ConfigError, RunConfig, SweepPlan};
pub use report::{bill_checksum, canonical_bill_lines, ExperimentReport, Measurement};
pub use runner::{persist_run, run_experiment, verify_architectures, BenchError, RunArtifacts, VerifyOutcome};
pub use sweep::{sweep_mcb, SweepResult};
