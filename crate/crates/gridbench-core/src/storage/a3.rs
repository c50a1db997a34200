//! Architecture III: key-value store with one monthly blob per
//! household. Each day's readings are appended to the household's
//! structured string, the coordinator keeps an in-memory copy, and
//! billing runs the in-memory kernel instead of a store query.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::domain::{ConcentratorId, HouseholdId, Kwh, MeterReading};
use crate::mcb::{bill_all, BillLine, BillingJob, HouseholdMonth};
use crate::storage::buffer::MemoryBuffer;
use crate::storage::formats;
use crate::storage::{
    check_batch, Architecture, BackendConfig, ConcurrencyGauge, IngestLedger, MetricsSnapshot, OpLog,
    StorageBackend, StorageError,
};
use crate::tariff::{BucketMask, BucketSet};

pub struct ArchThree {
    month: crate::domain::MonthSpec,
    mcb_workers: usize,
    kv: Mutex<BTreeMap<HouseholdId, String>>,
    buffer: Mutex<MemoryBuffer>,
    ledger: Mutex<IngestLedger>,
    gauge: Arc<ConcurrencyGauge>,
    ops: OpLog,
}

impl ArchThree {
    pub fn open(cfg: &BackendConfig) -> Result<Self, StorageError> {
        Ok(ArchThree {
            month: cfg.month,
            mcb_workers: cfg.mcb_workers.max(1),
            kv: Mutex::new(BTreeMap::new()),
            buffer: Mutex::new(MemoryBuffer::new(cfg.month)),
            ledger: Mutex::new(IngestLedger::default()),
            gauge: Arc::new(ConcurrencyGauge::default()),
            ops: OpLog::default(),
        })
    }

    pub fn blob(&self, household: HouseholdId) -> Option<String> {
        self.kv.lock().unwrap().get(&household).cloned()
    }

    /// Current blob size in bytes; the growth curve the append design pays for.
    pub fn blob_size(&self, household: HouseholdId) -> Option<usize> {
        self.kv.lock().unwrap().get(&household).map(|b| b.len())
    }

    /// Cold-start path: reconstruct every household-month from the blobs
    /// alone, validating completeness.
    pub fn parse_all_blobs(&self) -> Result<Vec<HouseholdMonth>, StorageError> {
        let kv = self.kv.lock().unwrap();
        let mut out = Vec::with_capacity(kv.len());
        for (&household, blob) in kv.iter() {
            let readings = formats::blob_to_readings(household, blob)
                .map_err(|reason| StorageError::Store(format!("blob for {household}: {reason}")))?;
            let hm = HouseholdMonth::from_readings(&self.month, &readings)
                .map_err(|_| StorageError::IncompleteMonth(household))?;
            out.push(hm);
        }
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

    /// Bills from re-parsed blobs instead of the memory buffer.
    pub fn compute_bill_from_blobs(&self, set: &BucketSet) -> Result<Vec<BillLine>, StorageError> {
        if !self.ledger.lock().unwrap().is_finalized() {
            return Err(StorageError::MonthNotFinalized);
        }
        let households = self.parse_all_blobs()?;
        self.bill_households(&households, set)
    }
}

impl StorageBackend for ArchThree {
    fn architecture(&self) -> Architecture {
        Architecture::A3
    }

    fn insert_daily(&self, cn: ConcentratorId, day: u32, batch: &[MeterReading]) -> Result<(), StorageError> {
        check_batch(&self.month, cn, day, batch)?;
        self.ledger.lock().unwrap().begin_batch(cn.0, day)?;
        let start = Instant::now();
        {
            let _g = self.gauge.enter();
            let mut kv = self.kv.lock().unwrap();
            for r in batch {
                kv.entry(r.household).or_default().push_str(&formats::blob_entry(r.slot, r.kwh));
            }
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
        // Sum what the store itself holds, not the buffer copy.
        let kv = self.kv.lock().unwrap();
        let mut total = 0i64;
        for (household, blob) in kv.iter() {
            for (_, kwh) in formats::parse_blob(blob)
                .map_err(|reason| StorageError::Store(format!("blob for {household}: {reason}")))?
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
