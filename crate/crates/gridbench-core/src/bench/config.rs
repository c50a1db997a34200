//! Declarative run configuration. The TOML file is validated into
//! resolved domain values up front and persisted verbatim alongside the
//! results of every run. Decimal quantities (prices, noise amplitude)
//! are strings in the file so no value changes meaning on the way in.

use std::path::PathBuf;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::datagen::{DatagenConfig, NoiseKind, NoiseModel, ProfileTable};
use crate::domain::{DayType, Kwh, MonthSpec, Price};
use crate::storage::Architecture;
use crate::tariff::{
    apply_critical_clauses, default_bucket_set, BucketSet, Clause, CriticalClause, PricingScheme, TimeBucket,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    run: RunSection,
    month: MonthSection,
    #[serde(default)]
    tariff: TariffSection,
    datagen: DatagenSection,
    #[serde(default)]
    sweep: SweepSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    architecture: String,
    cn_count: u32,
    households_per_cn: u32,
    #[serde(default = "default_repetitions")]
    repetitions: u32,
    #[serde(default = "default_mcb_workers")]
    mcb_workers: Vec<usize>,
    #[serde(default = "default_output_dir")]
    output_dir: String,
    #[serde(default)]
    store_dir: Option<String>,
    #[serde(default)]
    serialize_payloads: bool,
    #[serde(default = "default_deadline_secs")]
    collect_deadline_secs: u64,
}

fn default_repetitions() -> u32 {
    5
}
fn default_mcb_workers() -> Vec<usize> {
    vec![1, 2, 4]
}
fn default_output_dir() -> String {
    "out".into()
}
fn default_deadline_secs() -> u64 {
    60
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MonthSection {
    year: i32,
    month: u32,
    #[serde(default = "default_days")]
    days: u32,
    #[serde(default)]
    weekend_days: Option<Vec<String>>,
}

fn default_days() -> u32 {
    31
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TariffSection {
    #[serde(default)]
    scheme: Option<String>,
    #[serde(default)]
    buckets: Option<Vec<BucketEntry>>,
    #[serde(default)]
    critical: Option<Vec<CriticalEntry>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BucketEntry {
    label: String,
    price: String,
    clauses: Vec<ClauseEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClauseEntry {
    day_type: String,
    start: String,
    end: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CriticalEntry {
    day_type: String,
    start: String,
    end: String,
    price: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DatagenSection {
    seed: u64,
    #[serde(default)]
    noise: Option<NoiseEntry>,
    #[serde(default)]
    profiles: Option<Vec<ProfileEntry>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseEntry {
    kind: String,
    amplitude: String,
    #[serde(default)]
    relative: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileEntry {
    month: u32,
    day_type: String,
    coefficients: Vec<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    #[serde(default)]
    households: Option<Vec<u32>>,
    #[serde(default)]
    workers: Option<Vec<usize>>,
    #[serde(default)]
    repetitions: Option<u32>,
}

#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub households: Vec<u32>,
    pub workers: Vec<usize>,
    pub repetitions: u32,
}

/// A fully validated experiment configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub architecture: Architecture,
    pub cn_count: u32,
    pub households_per_cn: u32,
    pub month: MonthSpec,
    pub scheme: PricingScheme,
    pub bucket_set: BucketSet,
    pub datagen: DatagenConfig,
    pub mcb_workers: Vec<usize>,
    pub repetitions: u32,
    pub output_dir: PathBuf,
    pub store_dir: Option<PathBuf>,
    pub serialize_payloads: bool,
    pub collect_deadline: Duration,
    pub sweep: SweepPlan,
    /// The config file exactly as read, for persisting with results.
    pub raw: String,
}

impl RunConfig {
    /// Same configuration, different architecture (used by `verify`).
    pub fn with_architecture(&self, architecture: Architecture) -> RunConfig {
        RunConfig { architecture, ..self.clone() }
    }

    /// Deterministic run identifier: architecture, seed, and a hash of
    /// the config file bytes.
    pub fn run_id(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(self.raw.as_bytes());
        let digest = super::report::hex_string(&hasher.finalize());
        format!("{}-s{}-{}", self.architecture, self.datagen.global_seed, &digest[..8])
    }
}

fn parse_day_type(s: &str) -> Result<DayType, ConfigError> {
    match s {
        "workday" => Ok(DayType::Workday),
        "weekend" => Ok(DayType::Weekend),
        other => Err(invalid(format!("day_type {other:?} (expected workday or weekend)"))),
    }
}

fn weekend_mask(names: &[String]) -> Result<u8, ConfigError> {
    let mut mask = 0u8;
    for name in names {
        let bit = match name.to_ascii_lowercase().as_str() {
            "mon" | "monday" => 0,
            "tue" | "tuesday" => 1,
            "wed" | "wednesday" => 2,
            "thu" | "thursday" => 3,
            "fri" | "friday" => 4,
            "sat" | "saturday" => 5,
            "sun" | "sunday" => 6,
            other => return Err(invalid(format!("unknown weekday {other:?}"))),
        };
        mask |= 1 << bit;
    }
    Ok(mask)
}

fn parse_clause(entry: &ClauseEntry) -> Result<Clause, ConfigError> {
    let day_type = parse_day_type(&entry.day_type)?;
    Clause::from_hhmm(day_type, &entry.start, &entry.end).map_err(|e| invalid(e.to_string()))
}

fn parse_price(s: &str) -> Result<Price, ConfigError> {
    s.parse().map_err(|e: String| invalid(format!("price {s:?}: {e}")))
}

pub fn parse_config(raw: &str) -> Result<RunConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(raw).map_err(|e| ConfigError::Parse(e.to_string()))?;

    let architecture: Architecture = file.run.architecture.parse().map_err(invalid)?;
    if file.run.cn_count == 0 {
        return Err(invalid("cn_count must be at least 1"));
    }
    if file.run.mcb_workers.is_empty() || file.run.mcb_workers.contains(&0) {
        return Err(invalid("mcb_workers must be a non-empty list of counts >= 1"));
    }
    if file.run.repetitions == 0 {
        return Err(invalid("repetitions must be at least 1"));
    }

    let mut month = MonthSpec::new(file.month.year, file.month.month, file.month.days)
        .map_err(|e| invalid(e.to_string()))?;
    if let Some(names) = &file.month.weekend_days {
        month = month.with_weekend_days(weekend_mask(names)?);
    }

    let scheme = match file.tariff.scheme.as_deref().unwrap_or("tou") {
        "tou" => PricingScheme::Tou,
        "cpp" => {
            let critical = file
                .tariff
                .critical
                .as_deref()
                .unwrap_or_default()
                .iter()
                .map(|c| {
                    Ok(CriticalClause {
                        day_type: parse_day_type(&c.day_type)?,
                        start: crate::tariff::parse_hhmm(&c.start).map_err(|e| invalid(e.to_string()))?,
                        end: crate::tariff::parse_hhmm(&c.end).map_err(|e| invalid(e.to_string()))?,
                        price: parse_price(&c.price)?,
                    })
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;
            PricingScheme::Cpp { critical }
        }
        other => return Err(invalid(format!("scheme {other:?} (expected tou or cpp)"))),
    };
    if file.tariff.critical.is_some() && matches!(scheme, PricingScheme::Tou) {
        return Err(invalid("critical clauses require scheme = \"cpp\""));
    }

    let bucket_set = match &file.tariff.buckets {
        None => default_bucket_set(month, &scheme).map_err(|e| invalid(e.to_string()))?,
        Some(entries) => {
            let base = entries
                .iter()
                .map(|b| {
                    let clauses =
                        b.clauses.iter().map(parse_clause).collect::<Result<Vec<_>, ConfigError>>()?;
                    Ok(TimeBucket::new(b.label.clone(), parse_price(&b.price)?, clauses))
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;
            match &scheme {
                PricingScheme::Tou => BucketSet::new(month, base).map_err(|e| invalid(e.to_string()))?,
                PricingScheme::Cpp { critical } => {
                    apply_critical_clauses(month, base, critical).map_err(|e| invalid(e.to_string()))?
                }
            }
        }
    };

    let mut datagen = DatagenConfig::new(file.datagen.seed, month);
    if let Some(noise) = &file.datagen.noise {
        let kind = match noise.kind.as_str() {
            "uniform" => NoiseKind::Uniform,
            "gaussian" => NoiseKind::Gaussian,
            other => return Err(invalid(format!("noise kind {other:?} (expected uniform or gaussian)"))),
        };
        let amplitude: Kwh = noise
            .amplitude
            .parse()
            .map_err(|e: String| invalid(format!("noise amplitude: {e}")))?;
        if amplitude.is_negative() {
            return Err(invalid("noise amplitude must be non-negative"));
        }
        datagen.noise = NoiseModel { kind, amplitude, relative: noise.relative };
    }
    if let Some(profiles) = &file.datagen.profiles {
        let mut table = ProfileTable::defaults();
        for p in profiles {
            if !(1..=12).contains(&p.month) {
                return Err(invalid(format!("profile month {} out of 1..=12", p.month)));
            }
            let coefficients: [f64; 11] = p
                .coefficients
                .as_slice()
                .try_into()
                .map_err(|_| invalid("profiles need exactly 11 coefficients c0..c10"))?;
            table.set(p.month, parse_day_type(&p.day_type)?, coefficients);
        }
        datagen.profiles = table;
    }

    let sweep = SweepPlan {
        households: file.sweep.households.unwrap_or_else(|| vec![1_000, 10_000]),
        workers: file.sweep.workers.unwrap_or_else(|| vec![1, 2, 4]),
        repetitions: file.sweep.repetitions.unwrap_or(file.run.repetitions),
    };
    if sweep.households.is_empty() || sweep.workers.is_empty() || sweep.workers.contains(&0) {
        return Err(invalid("sweep lists must be non-empty with workers >= 1"));
    }

    Ok(RunConfig {
        architecture,
        cn_count: file.run.cn_count,
        households_per_cn: file.run.households_per_cn,
        month,
        scheme,
        bucket_set,
        datagen,
        mcb_workers: file.run.mcb_workers.clone(),
        repetitions: file.run.repetitions,
        output_dir: PathBuf::from(&file.run.output_dir),
        store_dir: file.run.store_dir.as_ref().map(PathBuf::from),
        serialize_payloads: file.run.serialize_payloads,
        collect_deadline: Duration::from_secs(file.run.collect_deadline_secs),
        sweep,
        raw: raw.to_string(),
    })
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
    let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&raw)
}
