//! Experiment driver: stands up the simulated deployment for a config,
//! runs the month, measures billing (and cold start where the
//! architecture has one), and assembles the report. `verify` runs the
//! same data through all four architectures and compares checksums.

use std::path::PathBuf;

use thiserror::Error;

use crate::actors::{Simulation, SimulationConfig};
use crate::bench::config::{ConfigError, RunConfig};
use crate::bench::report::{append_csv, bill_checksum, ExperimentReport};
use crate::bench::{measure, report};
use crate::datagen;
use crate::mcb::{bill_all, BillingJob};
use crate::storage::Architecture;
use crate::tariff::BucketMask;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("experiment failed: {0}")]
    Experiment(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.to_path_buf(), source }
}

fn experiment(e: impl std::fmt::Display) -> BenchError {
    BenchError::Experiment(e.to_string())
}

/// Where this run's file-backed state lives; wiped beforehand so reruns
/// of the same config start from an empty month.
fn store_dir_for(cfg: &RunConfig) -> Result<Option<PathBuf>, BenchError> {
    let dir = match (&cfg.store_dir, cfg.architecture) {
        (Some(dir), _) => Some(dir.join(cfg.run_id())),
        (None, Architecture::A4) => Some(cfg.output_dir.join("stores").join(cfg.run_id())),
        (None, _) => None,
    };
    if let Some(d) = &dir {
        if d.exists() {
            std::fs::remove_dir_all(d).map_err(io_err(d))?;
        }
        std::fs::create_dir_all(d).map_err(io_err(d))?;
    }
    Ok(dir)
}

const METHODOLOGY: &str = "monotonic clock; warm-up discarded; median of";

/// Runs one full experiment and returns the report.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport, BenchError> {
    let mut sim_cfg = SimulationConfig::new(
        cfg.architecture,
        cfg.cn_count,
        cfg.households_per_cn,
        cfg.datagen.clone(),
    );
    sim_cfg.store_dir = store_dir_for(cfg)?;
    sim_cfg.serialize_payloads = cfg.serialize_payloads;
    sim_cfg.collect_deadline = cfg.collect_deadline;
    sim_cfg.mcb_workers = cfg.mcb_workers.iter().copied().max().unwrap_or(1);

    let sim = Simulation::build(&sim_cfg).map_err(experiment)?;
    let month_outcome = sim.run_month().map_err(experiment)?;

    // The first billing doubles as the correctness artifact (checksum);
    // the timed repetitions rebill the same finalized month.
    let bills = sim.run_month_billing(&cfg.bucket_set).map_err(experiment)?;
    let checksum = bill_checksum(&bills);
    let mut billing_error = None;
    let (bill_time, _) = measure::median_of(cfg.repetitions, || {
        if let Err(e) = sim.run_month_billing(&cfg.bucket_set) {
            billing_error = Some(e);
        }
    });
    if let Some(e) = billing_error {
        return Err(experiment(e));
    }

    let cold_start = match sim.backend().as_a4() {
        Some(a4) => {
            let mut load_error = None;
            let (median, _) = measure::median_of(cfg.repetitions, || match a4.cold_start_load() {
                Ok(loaded) => drop(loaded),
                Err(e) => load_error = Some(e),
            });
            if let Some(e) = load_error {
                return Err(experiment(e));
            }
            Some(median)
        }
        None => None,
    };

    // Kernel timings are architecture-independent: same generated data,
    // same mask, swept over the configured worker counts.
    let households = datagen::generate_grid_month(&cfg.datagen, cfg.cn_count, cfg.households_per_cn);
    let mask = BucketMask::build(&cfg.bucket_set).map_err(experiment)?;
    let prices = cfg.bucket_set.prices();
    let mut mcb_times = Vec::new();
    for &workers in &cfg.mcb_workers {
        let job = BillingJob { households: &households, mask: &mask, prices: &prices, worker_count: workers };
        let (median, _) = measure::median_of(cfg.repetitions, || {
            let outcome = bill_all(&job);
            debug_assert!(outcome.errors.is_empty());
        });
        mcb_times.push((workers, median));
    }

    sim.shutdown().map_err(experiment)?;

    Ok(ExperimentReport {
        run_id: cfg.run_id(),
        architecture: cfg.architecture,
        methodology: format!("{METHODOLOGY} {}", cfg.repetitions),
        ingest_days: month_outcome.per_day,
        bill_time,
        cold_start,
        mcb_times,
        bill_checksum: checksum,
        physical_cores: measure::physical_cores(),
        logical_cores: measure::logical_cores(),
    })
}

/// Written artifacts of one run.
pub struct RunArtifacts {
    pub csv_path: PathBuf,
    pub table_path: PathBuf,
    pub config_path: PathBuf,
}

/// Appends the report to the shared CSV and writes the rendered table
/// plus the verbatim config next to it.
pub fn persist_run(cfg: &RunConfig, rep: &ExperimentReport) -> Result<RunArtifacts, BenchError> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let csv_path = cfg.output_dir.join("report.csv");
    let mut csv = match std::fs::read_to_string(&csv_path) {
        Ok(existing) => existing,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(BenchError::Io { path: csv_path, source: e }),
    };
    append_csv(&mut csv, &rep.measurements());
    std::fs::write(&csv_path, &csv).map_err(io_err(&csv_path))?;

    let table_path = cfg.output_dir.join(format!("{}.table.txt", rep.run_id));
    std::fs::write(&table_path, report::render_table(rep)).map_err(io_err(&table_path))?;

    let config_path = cfg.output_dir.join(format!("{}.config.toml", rep.run_id));
    std::fs::write(&config_path, &cfg.raw).map_err(io_err(&config_path))?;

    Ok(RunArtifacts { csv_path, table_path, config_path })
}

/// The cross-architecture equivalence check: one config, four runs,
/// checksums must match bit for bit.
pub struct VerifyOutcome {
    pub checksums: Vec<(Architecture, String)>,
    pub reports: Vec<ExperimentReport>,
}

impl VerifyOutcome {
    pub fn consistent(&self) -> bool {
        self.checksums.windows(2).all(|w| w[0].1 == w[1].1)
    }
}

pub fn verify_architectures(cfg: &RunConfig) -> Result<VerifyOutcome, BenchError> {
    let mut checksums = Vec::new();
    let mut reports = Vec::new();
    for arch in Architecture::ALL {
        let report = run_experiment(&cfg.with_architecture(arch))?;
        checksums.push((arch, report.bill_checksum.clone()));
        reports.push(report);
    }
    Ok(VerifyOutcome { checksums, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::parse_config;

    fn desk_config(arch: &str, days: u32) -> RunConfig {
        // Small enough for unit-test time; the acceptance suite covers
        // the full grid.
        let raw = format!(
            r#"
            [run]
            architecture = "{arch}"
            cn_count = 2
            households_per_cn = 3
            repetitions = 1
            mcb_workers = [1, 2]
            output_dir = "OUTDIR"

            [month]
            year = 2009
            month = 1
            days = {days}

            [datagen]
            seed = 11
            "#
        );
        parse_config(&raw).unwrap()
    }

    #[test]
    fn run_experiment_produces_a_complete_report() {
        let out = tempfile::tempdir().unwrap();
        let mut cfg = desk_config("A3", 28);
        cfg.output_dir = out.path().to_path_buf();
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.ingest_days.len(), 28);
        assert_eq!(report.mcb_times.len(), 2);
        assert!(report.cold_start.is_none());
        assert_eq!(report.bill_checksum.len(), 64);
        let artifacts = persist_run(&cfg, &report).unwrap();
        assert!(artifacts.csv_path.exists());
        assert!(artifacts.table_path.exists());
        assert_eq!(std::fs::read_to_string(artifacts.config_path).unwrap(), cfg.raw);
    }

    #[test]
    fn a4_reports_cold_start_and_matching_checksum() {
        let out = tempfile::tempdir().unwrap();
        let mut a4 = desk_config("A4", 28);
        a4.output_dir = out.path().to_path_buf();
        let mut a1 = desk_config("A1", 28);
        a1.output_dir = out.path().to_path_buf();
        let report_a4 = run_experiment(&a4).unwrap();
        let report_a1 = run_experiment(&a1).unwrap();
        assert!(report_a4.cold_start.is_some());
        assert_eq!(report_a4.bill_checksum, report_a1.bill_checksum);
    }
}
