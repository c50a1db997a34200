//! Command-line front end: generate data, run experiments, sweep the
//! billing kernel, verify cross-architecture equivalence, and render
//! stored reports.
//!
//! Exit codes: 0 success, 2 config error, 3 experiment error,
//! 4 verification mismatch.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use gridbench_core::bench::{
    self, load_config, persist_run, run_experiment, sweep_mcb, verify_architectures, BenchError, RunConfig,
};
use gridbench_core::datagen;

#[derive(Parser)]
#[command(name = "gridbench", version, about = "Smart-meter storage architecture benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the configured synthetic month as CSV (household,slot,kwh)
    Generate {
        /// Run configuration file (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment and write report artifacts to the output dir
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Time the in-memory billing kernel over households x workers
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Directory for the sweep CSVs; defaults to the config's output dir
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run all four architectures on one config and compare checksums
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render tables from a stored report CSV
    Report {
        #[arg(long)]
        csv: PathBuf,
    },
}

const EXIT_OK: i32 = 0;
const EXIT_CONFIG: i32 = 2;
const EXIT_EXPERIMENT: i32 = 3;
const EXIT_MISMATCH: i32 = 4;

fn main() {
    let cli = Cli::parse();
    std::process::exit(match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gridbench: {e}");
            match e {
                AppError::Config(_) => EXIT_CONFIG,
                AppError::Experiment(_) => EXIT_EXPERIMENT,
            }
        }
    });
}

#[derive(Debug)]
enum AppError {
    Config(String),
    Experiment(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(m) | AppError::Experiment(m) => f.write_str(m),
        }
    }
}

impl From<BenchError> for AppError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Config(c) => AppError::Config(c.to_string()),
            other => AppError::Experiment(other.to_string()),
        }
    }
}

fn config(path: &PathBuf) -> Result<RunConfig, AppError> {
    load_config(path).map_err(|e| AppError::Config(e.to_string()))
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), AppError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| AppError::Experiment(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| AppError::Experiment(format!("cannot write {}: {e}", path.display())))
}

fn dispatch(cli: Cli) -> Result<i32, AppError> {
    match cli.command {
        Command::Generate { config: path, out } => {
            let cfg = config(&path)?;
            let data = datagen::generate_grid_month(&cfg.datagen, cfg.cn_count, cfg.households_per_cn);
            let mut buf = Vec::new();
            datagen::write_csv(&data, &mut buf).map_err(|e| AppError::Experiment(e.to_string()))?;
            match out {
                Some(path) => {
                    write_file(&path, std::str::from_utf8(&buf).expect("csv is utf-8"))?;
                    eprintln!("wrote {} readings to {}", data.len() * cfg.month.slots() as usize, path.display());
                }
                None => {
                    use std::io::Write;
                    std::io::stdout()
                        .write_all(&buf)
                        .map_err(|e| AppError::Experiment(e.to_string()))?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Run { config: path } => {
            let cfg = config(&path)?;
            let report = run_experiment(&cfg)?;
            let artifacts = persist_run(&cfg, &report)?;
            print!("{}", bench::report::render_table(&report));
            eprintln!(
                "report rows appended to {}; table at {}; config persisted at {}",
                artifacts.csv_path.display(),
                artifacts.table_path.display(),
                artifacts.config_path.display()
            );
            Ok(EXIT_OK)
        }
        Command::Sweep { config: path, out } => {
            let cfg = config(&path)?;
            let result = sweep_mcb(&cfg.datagen, &cfg.sweep.households, &cfg.sweep.workers, cfg.sweep.repetitions);
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            write_file(&dir.join("sweep_times.csv"), &result.times_csv())?;
            write_file(&dir.join("sweep_speedup.csv"), &result.speedup_csv())?;
            print!("{}", result.render());
            eprintln!("sweep CSVs written under {}", dir.display());
            Ok(EXIT_OK)
        }
        Command::Verify { config: path } => {
            let cfg = config(&path)?;
            let outcome = verify_architectures(&cfg)?;
            for (arch, checksum) in &outcome.checksums {
                println!("{arch}  {checksum}");
            }
            if outcome.consistent() {
                println!("VERIFIED: all architectures agree");
                Ok(EXIT_OK)
            } else {
                println!("MISMATCH: architectures disagree on the bill");
                Ok(EXIT_MISMATCH)
            }
        }
        Command::Report { csv } => {
            let text = std::fs::read_to_string(&csv)
                .map_err(|e| AppError::Experiment(format!("cannot read {}: {e}", csv.display())))?;
            let rows = bench::report::parse_csv(&text).map_err(AppError::Experiment)?;
            let mut order: Vec<String> = Vec::new();
            for row in &rows {
                if !order.contains(&row.run_id) {
                    order.push(row.run_id.clone());
                }
            }
            for run_id in order {
                let run_rows: Vec<_> = rows.iter().filter(|r| r.run_id == run_id).cloned().collect();
                let report =
                    bench::ExperimentReport::from_measurements(&run_rows).map_err(AppError::Experiment)?;
                print!("{}", bench::report::render_table(&report));
                println!();
            }
            Ok(EXIT_OK)
        }
    }
}
