//! Architecture IV: hybrid file-system and metadata store. Consumption
//! values live in one plain-text file per household under a three-level
//! tree (month folder, then two sharding levels); date and time
//! information lives in a single file shared by every household; the
//! relational store only maps households to file paths, written once per
//! month. Billing runs the in-memory kernel over the coordinator buffer,
//! or over a cold-start reload from disk.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::domain::{ConcentratorId, HouseholdId, Kwh, MeterReading, MonthSpec};
use crate::mcb::{bill_all, BillLine, BillingJob, HouseholdMonth};
use crate::storage::buffer::MemoryBuffer;
use crate::storage::formats;
use crate::storage::table::{MetaRow, TableStore};
use crate::storage::{
    check_batch, Architecture, BackendConfig, ConcurrencyGauge, IngestLedger, MetricsSnapshot, OpLog,
    StorageBackend, StorageError,
};
use crate::tariff::{BucketMask, BucketSet};

const TIMESTAMP_FILE: &str = "timestamps.dat";

struct LayoutState {
    initialized: bool,
    /// Days whose timestamps are already in the shared file.
    ts_days: std::collections::HashSet<u32>,
    /// Next expected day per concentrator; file lines are slot-ordered
    /// only if each concentrator appends its days in order.
    next_day: std::collections::HashMap<u32, u32>,
}

pub struct ArchFour {
    month: MonthSpec,
    mcb_workers: usize,
    month_dir: PathBuf,
    metadata: TableStore,
    buffer: Mutex<MemoryBuffer>,
    layout: Mutex<LayoutState>,
    ledger: Mutex<IngestLedger>,
    gauge: Arc<ConcurrencyGauge>,
    ops: OpLog,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StorageError + '_ {
    move |e| StorageError::Io { path: path.to_path_buf(), source: e }
}

impl ArchFour {
    pub fn open(cfg: &BackendConfig) -> Result<Self, StorageError> {
        let root = cfg.store_dir.clone().ok_or_else(|| {
            StorageError::Store("architecture A4 needs a store directory".into())
        })?;
        let month_dir = root.join(format!("{:04}-{:02}", cfg.month.year, cfg.month.month));
        let gauge = Arc::new(ConcurrencyGauge::default());
        let metadata = TableStore::open(Some(root.join("a4-meta.sqlite")), gauge.clone())?;
        Ok(ArchFour {
            month: cfg.month,
            mcb_workers: cfg.mcb_workers.max(1),
            month_dir,
            metadata,
            buffer: Mutex::new(MemoryBuffer::new(cfg.month)),
            layout: Mutex::new(LayoutState {
                initialized: false,
                ts_days: Default::default(),
                next_day: Default::default(),
            }),
            ledger: Mutex::new(IngestLedger::default()),
            gauge,
            ops: OpLog::default(),
        })
    }

    /// Sharded path of a household's consumption file, relative to the
    /// month folder: two hex levels derived from the household key.
    fn relative_data_path(household: HouseholdId) -> String {
        let key = household.key();
        format!("{:02x}/{:02x}/{}.dat", key % 256, (key / 256) % 256, household)
    }

    pub fn consumption_path(&self, household: HouseholdId) -> PathBuf {
        self.month_dir.join(Self::relative_data_path(household))
    }

    pub fn timestamp_path(&self) -> PathBuf {
        self.month_dir.join(TIMESTAMP_FILE)
    }

    pub fn month_dir(&self) -> &Path {
        &self.month_dir
    }

    /// First-of-month setup: builds the tree, creates one empty file per
    /// household plus the shared timestamp file, and registers every
    /// household's file paths in the metadata table in a single monthly
    /// insertion.
    pub fn build_month(&self, households: &[HouseholdId]) -> Result<(), StorageError> {
        let start = Instant::now();
        {
            let mut layout = self.layout.lock().unwrap();
            if layout.initialized {
                return Err(StorageError::MonthAlreadyInitialized);
            }
            layout.initialized = true;
        }
        if self.month_dir.exists() {
            return Err(StorageError::MonthAlreadyInitialized);
        }
        std::fs::create_dir_all(&self.month_dir).map_err(io_err(&self.month_dir))?;
        let ts_path = self.timestamp_path();
        std::fs::write(&ts_path, "").map_err(io_err(&ts_path))?;
        let mut meta = Vec::with_capacity(households.len());
        for &household in households {
            let rel = Self::relative_data_path(household);
            let path = self.month_dir.join(&rel);
            let dir = path.parent().expect("sharded path has parents");
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            std::fs::write(&path, "").map_err(io_err(&path))?;
            meta.push(MetaRow { household, ts_path: TIMESTAMP_FILE.to_string(), data_path: rel });
        }
        self.metadata.put_meta(meta)?;
        self.ops.record("build_month", start.elapsed());
        Ok(())
    }

    /// Files currently present under the month folder.
    pub fn file_count(&self) -> Result<usize, StorageError> {
        fn walk(dir: &Path) -> std::io::Result<usize> {
            let mut n = 0;
            for entry in std::fs::read_dir(dir)? {
                let entry = entry?;
                if entry.file_type()?.is_dir() {
                    n += walk(&entry.path())?;
                } else {
                    n += 1;
                }
            }
            Ok(n)
        }
        walk(&self.month_dir).map_err(io_err(&self.month_dir))
    }

    /// Largest number of entries in any directory of the tree.
    pub fn max_dir_fanout(&self) -> Result<usize, StorageError> {
        fn walk(dir: &Path) -> std::io::Result<usize> {
            let mut here = 0;
            let mut deepest = 0;
            for entry in std::fs::read_dir(dir)? {
                let entry = entry?;
                here += 1;
                if entry.file_type()?.is_dir() {
                    deepest = deepest.max(walk(&entry.path())?);
                }
            }
            Ok(here.max(deepest))
        }
        walk(&self.month_dir).map_err(io_err(&self.month_dir))
    }

    /// Deserializes the whole month from disk: metadata rows resolve the
    /// files, the shared timestamp file fixes the slot axis, and each
    /// consumption file must hold exactly one value per slot.
    pub fn cold_start_load(&self) -> Result<Vec<HouseholdMonth>, StorageError> {
        if !self.ledger.lock().unwrap().is_finalized() {
            return Err(StorageError::MonthNotFinalized);
        }
        let start = Instant::now();
        let meta = self.metadata.get_meta()?;
        let slots = self.month.slots();
        let ts_path = self.timestamp_path();
        let ts_text = std::fs::read_to_string(&ts_path).map_err(|e| missing_or_io(&ts_path, e))?;
        let ts_count = formats::parse_timestamps(&self.month, &ts_text)
            .map_err(|reason| StorageError::CorruptFile { path: ts_path.clone(), reason })?;
        if ts_count != slots {
            return Err(StorageError::CorruptFile {
                path: ts_path,
                reason: format!("{ts_count} timestamps for a {slots}-slot month"),
            });
        }
        let mut out = Vec::with_capacity(meta.len());
        for row in meta {
            let path = self.month_dir.join(&row.data_path);
            let text = std::fs::read_to_string(&path).map_err(|e| missing_or_io(&path, e))?;
            let readings = formats::parse_consumption(&text)
                .map_err(|reason| StorageError::CorruptFile { path: path.clone(), reason })?;
            if readings.len() != slots as usize {
                return Err(StorageError::CorruptFile {
                    path,
                    reason: format!("{} values for a {slots}-slot month", readings.len()),
                });
            }
            out.push(HouseholdMonth { household: row.household, readings });
        }
        self.ops.record("cold_start_load", start.elapsed());
        Ok(out)
    }

    fn bill_households(&self, households: &[HouseholdMonth], set: &BucketSet) -> Result<Vec<BillLine>, StorageError> {
        let mask = BucketMask::build(set)?;
        let prices = set.prices();
        let outcome = bill_all(&BillingJob {
            households,
            mask: &mask,
            prices: &prices,
            worker_count: self.mcb_workers,
        });
        if let Some((household, e)) = outcome.errors.into_iter().next() {
            return Err(StorageError::Store(format!("billing {household}: {e}")));
        }
        Ok(outcome.bills)
    }

    /// Billing over a fresh cold-start reload instead of the buffer.
    pub fn compute_bill_cold(&self, set: &BucketSet) -> Result<Vec<BillLine>, StorageError> {
        let households = self.cold_start_load()?;
        self.bill_households(&households, set)
    }
}

fn missing_or_io(path: &Path, e: std::io::Error) -> StorageError {
    if e.kind() == std::io::ErrorKind::NotFound {
        StorageError::MissingFile(path.to_path_buf())
    } else {
        StorageError::Io { path: path.to_path_buf(), source: e }
    }
}

impl StorageBackend for ArchFour {
    fn architecture(&self) -> Architecture {
        Architecture::A4
    }

    fn insert_daily(&self, cn: ConcentratorId, day: u32, batch: &[MeterReading]) -> Result<(), StorageError> {
        check_batch(&self.month, cn, day, batch)?;
        {
            let layout = self.layout.lock().unwrap();
            if !layout.initialized {
                return Err(StorageError::MonthNotInitialized);
            }
            let expected = layout.next_day.get(&cn.0).copied().unwrap_or(0);
            if day != expected {
                return Err(StorageError::OutOfOrderDay { cn: cn.0, day, expected });
            }
        }
        self.ledger.lock().unwrap().begin_batch(cn.0, day)?;
        let start = Instant::now();
        {
            let _g = self.gauge.enter();
            // Distinct concentrators touch disjoint household files, so
            // these appends run concurrently. Append failures are not
            // rolled back; the duplicate guard stays set so a retry
            // cannot double-append.
            let mut per_household: std::collections::BTreeMap<HouseholdId, Vec<MeterReading>> = Default::default();
            for r in batch {
                per_household.entry(r.household).or_default().push(*r);
            }
            for (household, mut rows) in per_household {
                rows.sort_by_key(|r| r.slot.value());
                let path = self.consumption_path(household);
                append_text(&path, &formats::consumption_lines(&rows))?;
            }
            let mut layout = self.layout.lock().unwrap();
            if layout.ts_days.insert(day) {
                let ts_path = self.timestamp_path();
                append_text(&ts_path, &formats::timestamp_lines(&self.month, day))?;
            }
            layout.next_day.insert(cn.0, day + 1);
        }
        self.buffer.lock().unwrap().record_batch(day, batch);
        self.ops.record("insert_daily", start.elapsed());
        Ok(())
    }

    fn finalize_month(&self) -> Result<(), StorageError> {
        self.ledger.lock().unwrap().finalize();
        Ok(())
    }

    fn compute_bill(&self, set: &BucketSet) -> Result<Vec<BillLine>, StorageError> {
        if !self.ledger.lock().unwrap().is_finalized() {
            return Err(StorageError::MonthNotFinalized);
        }
        let start = Instant::now();
        let households = self.buffer.lock().unwrap().complete_households()?;
        let bills = self.bill_households(&households, set);
        self.ops.record("compute_bill", start.elapsed());
        bills
    }

    fn stored_total_kwh(&self) -> Result<Kwh, StorageError> {
        // Read back from the files, not the buffer copy.
        let meta = self.metadata.get_meta()?;
        let mut total = 0i64;
        for row in meta {
            let path = self.month_dir.join(&row.data_path);
            let text = std::fs::read_to_string(&path).map_err(|e| missing_or_io(&path, e))?;
            for kwh in formats::parse_consumption(&text)
                .map_err(|reason| StorageError::CorruptFile { path: path.clone(), reason })?
            {
                total += kwh.milli();
            }
        }
        Ok(Kwh::from_milli(total))
    }

    fn metrics(&self) -> MetricsSnapshot {
        MetricsSnapshot {
            max_concurrent_inserts: self.gauge.max_observed(),
            op_timings: self.ops.snapshot(),
        }
    }
}

fn append_text(path: &Path, text: &str) -> Result<(), StorageError> {
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| missing_or_io(path, e))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))?;
    Ok(())
}
