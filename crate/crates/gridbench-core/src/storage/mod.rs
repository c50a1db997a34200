//! The four storage architectures behind one backend contract: daily
//! batch ingest, month finalization, and bill computation.
//!
//! - [`ArchOne`]: one embedded relational store, batch inserts serialized
//!   through a single writer queue, billing as an in-store aggregation
//!   query.
//! - [`ArchTwo`]: one independent store per concentrator; ingest and
//!   billing fan out per store and results are concatenated in
//!   concentrator order.
//! - [`ArchThree`]: key-value store holding one growing monthly blob per
//!   household, plus the in-memory buffer billing runs on.
//! - [`ArchFour`]: hybrid layout; consumption lives in per-household
//!   files under a sharded tree, a shared timestamp file carries the time
//!   axis, and a metadata table maps households to file paths.
//!
//! Whatever the architecture, `compute_bill` over the same data and
//! bucket set must produce identical bills.

pub mod formats;

mod a1;
mod a2;
mod a3;
mod a4;
mod buffer;
mod table;

pub use a1::ArchOne;
pub use a2::ArchTwo;
pub use a3::ArchThree;
pub use a4::ArchFour;

use std::collections::HashSet;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ConcentratorId, HouseholdId, Kwh, MeterReading, MonthSpec};
use crate::mcb::{BillLine, McbError};
use crate::tariff::{BucketSet, TariffError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    A1,
    A2,
    A3,
    A4,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [Architecture::A1, Architecture::A2, Architecture::A3, Architecture::A4];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::A1 => "A1",
            Architecture::A2 => "A2",
            Architecture::A3 => "A3",
            Architecture::A4 => "A4",
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Architecture {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "A1" => Ok(Architecture::A1),
            "A2" => Ok(Architecture::A2),
            "A3" => Ok(Architecture::A3),
            "A4" => Ok(Architecture::A4),
            _ => Err(format!("unknown architecture {s:?} (expected A1..A4)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("batch for cn {cn} day {day} was already ingested")]
    DuplicateBatch { cn: u32, day: u32 },
    #[error("month file layout not initialized")]
    MonthNotInitialized,
    #[error("month file layout already initialized")]
    MonthAlreadyInitialized,
    #[error("month not finalized yet")]
    MonthNotFinalized,
    #[error("month already finalized; no further ingest accepted")]
    MonthFinalized,
    #[error("household {0} does not have a complete month")]
    IncompleteMonth(HouseholdId),
    #[error("cn {0} is not part of this deployment")]
    UnknownCn(ConcentratorId),
    #[error("batch for cn {cn} contains a reading of household {household}")]
    ForeignHousehold { cn: u32, household: HouseholdId },
    #[error("batch for cn {cn} arrived for day {day}, expected day {expected}")]
    OutOfOrderDay { cn: u32, day: u32, expected: u32 },
    #[error("batch for day {day} contains a reading for slot {slot}")]
    SlotOutsideDay { day: u32, slot: u32 },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },
    #[error("store error: {0}")]
    Store(String),
    #[error(transparent)]
    Billing(#[from] McbError),
    #[error(transparent)]
    Tariff(#[from] TariffError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<rusqlite::Error> for StorageError {
    fn from(e: rusqlite::Error) -> Self {
        StorageError::Store(e.to_string())
    }
}

/// Counts operations that are inside their critical section right now and
/// remembers the highest overlap ever observed.
#[derive(Debug, Default)]
pub struct ConcurrencyGauge {
    current: AtomicUsize,
    max: AtomicUsize,
}

impl ConcurrencyGauge {
    pub fn enter(&self) -> GaugeGuard<'_> {
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.max.fetch_max(now, Ordering::SeqCst);
        GaugeGuard { gauge: self }
    }

    pub fn max_observed(&self) -> usize {
        self.max.load(Ordering::SeqCst)
    }
}

pub struct GaugeGuard<'a> {
    gauge: &'a ConcurrencyGauge,
}

impl Drop for GaugeGuard<'_> {
    fn drop(&mut self) {
        self.gauge.current.fetch_sub(1, Ordering::SeqCst);
    }
}

#[derive(Debug, Default)]
pub(crate) struct OpLog {
    samples: Mutex<Vec<(String, Duration)>>,
}

impl OpLog {
    pub fn record(&self, op: &str, duration: Duration) {
        self.samples.lock().unwrap().push((op.to_string(), duration));
    }

    pub fn snapshot(&self) -> Vec<(String, Duration)> {
        self.samples.lock().unwrap().clone()
    }
}

/// Point-in-time view of a backend's instrumentation.
#[derive(Clone, Debug)]
pub struct MetricsSnapshot {
    /// Highest number of batch inserts ever applied simultaneously.
    pub max_concurrent_inserts: usize,
    /// `(operation, wall time)` samples in completion order.
    pub op_timings: Vec<(String, Duration)>,
}

/// Ingest bookkeeping shared by all four backends: duplicate-batch
/// rejection and the finalized flag.
#[derive(Debug, Default)]
pub(crate) struct IngestLedger {
    inserted: HashSet<(u32, u32)>,
    finalized: bool,
}

impl IngestLedger {
    /// Registers (cn, day) at arrival so a concurrent duplicate is
    /// rejected even while the first batch is still queued.
    pub fn begin_batch(&mut self, cn: u32, day: u32) -> Result<(), StorageError> {
        if self.finalized {
            return Err(StorageError::MonthFinalized);
        }
        if !self.inserted.insert((cn, day)) {
            return Err(StorageError::DuplicateBatch { cn, day });
        }
        Ok(())
    }

    pub fn rollback_batch(&mut self, cn: u32, day: u32) {
        self.inserted.remove(&(cn, day));
    }

    pub fn finalize(&mut self) {
        self.finalized = true;
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }
}

/// Rejects batches whose readings do not belong to the claimed (cn, day).
pub(crate) fn check_batch(
    month: &MonthSpec,
    cn: ConcentratorId,
    day: u32,
    batch: &[MeterReading],
) -> Result<(), StorageError> {
    let first = day * crate::domain::SLOTS_PER_DAY;
    let end = first + crate::domain::SLOTS_PER_DAY;
    if day >= month.days {
        return Err(StorageError::SlotOutsideDay { day, slot: first });
    }
    for r in batch {
        if r.household.cn != cn {
            return Err(StorageError::ForeignHousehold { cn: cn.0, household: r.household });
        }
        let s = r.slot.value();
        if s < first || s >= end {
            return Err(StorageError::SlotOutsideDay { day, slot: s });
        }
    }
    Ok(())
}

/// The storage contract every architecture implements. After all days of
/// the month are ingested and the month finalized, `compute_bill` over
/// any valid bucket set returns bills equal to the in-memory kernel's.
pub trait StorageBackend: Send + Sync {
    fn architecture(&self) -> Architecture;

    /// Ingest one concentrator's complete daily batch.
    fn insert_daily(&self, cn: ConcentratorId, day: u32, batch: &[MeterReading]) -> Result<(), StorageError>;

    /// Closes the ingest window; billing is only valid afterwards.
    fn finalize_month(&self) -> Result<(), StorageError>;

    /// Bills every stored household, ordered by household id.
    fn compute_bill(&self, set: &BucketSet) -> Result<Vec<BillLine>, StorageError>;

    /// Total energy retrievable from the store, for conservation checks.
    fn stored_total_kwh(&self) -> Result<Kwh, StorageError>;

    fn metrics(&self) -> MetricsSnapshot;
}

/// How a backend instance is opened.
#[derive(Clone, Debug)]
pub struct BackendConfig {
    pub month: MonthSpec,
    pub cn_count: u32,
    /// Worker count for in-memory billing (architectures III and IV).
    pub mcb_workers: usize,
    /// Directory for file-backed state. `None` keeps relational stores
    /// in memory; architecture IV requires a directory.
    pub store_dir: Option<PathBuf>,
}

impl BackendConfig {
    pub fn in_memory(month: MonthSpec, cn_count: u32) -> Self {
        BackendConfig { month, cn_count, mcb_workers: 1, store_dir: None }
    }
}

/// A backend of any architecture, statically dispatched.
pub enum AnyBackend {
    A1(ArchOne),
    A2(ArchTwo),
    A3(ArchThree),
    A4(ArchFour),
}

impl AnyBackend {
    pub fn open(arch: Architecture, cfg: &BackendConfig) -> Result<Self, StorageError> {
        Ok(match arch {
            Architecture::A1 => AnyBackend::A1(ArchOne::open(cfg)?),
            Architecture::A2 => AnyBackend::A2(ArchTwo::open(cfg)?),
            Architecture::A3 => AnyBackend::A3(ArchThree::open(cfg)?),
            Architecture::A4 => AnyBackend::A4(ArchFour::open(cfg)?),
        })
    }

    pub fn as_a2(&self) -> Option<&ArchTwo> {
        match self {
            AnyBackend::A2(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_a3(&self) -> Option<&ArchThree> {
        match self {
            AnyBackend::A3(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_a4(&self) -> Option<&ArchFour> {
        match self {
            AnyBackend::A4(b) => Some(b),
            _ => None,
        }
    }

    fn inner(&self) -> &dyn StorageBackend {
        match self {
            AnyBackend::A1(b) => b,
            AnyBackend::A2(b) => b,
            AnyBackend::A3(b) => b,
            AnyBackend::A4(b) => b,
        }
    }
}

impl StorageBackend for AnyBackend {
    fn architecture(&self) -> Architecture {
        self.inner().architecture()
    }

    fn insert_daily(&self, cn: ConcentratorId, day: u32, batch: &[MeterReading]) -> Result<(), StorageError> {
        self.inner().insert_daily(cn, day, batch)
    }

    fn finalize_month(&self) -> Result<(), StorageError> {
        self.inner().finalize_month()
    }

    fn compute_bill(&self, set: &BucketSet) -> Result<Vec<BillLine>, StorageError> {
        self.inner().compute_bill(set)
    }

    fn stored_total_kwh(&self) -> Result<Kwh, StorageError> {
        self.inner().stored_total_kwh()
    }

    fn metrics(&self) -> MetricsSnapshot {
        self.inner().metrics()
    }
}
