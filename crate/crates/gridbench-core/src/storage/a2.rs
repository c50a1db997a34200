//! Architecture II: an independent relational store per concentrator.
//! Ingest for distinct concentrators proceeds in parallel (one writer
//! per store, one shared gauge to observe the overlap). Billing runs the
//! same in-store query against every store and concatenates results in
//! concentrator order.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::domain::{ConcentratorId, Kwh, MeterReading};
use crate::mcb::BillLine;
use crate::storage::table::{ReadingRow, TableStore};
use crate::storage::{
    check_batch, Architecture, BackendConfig, ConcurrencyGauge, IngestLedger, MetricsSnapshot, OpLog,
    StorageBackend, StorageError,
};
use crate::tariff::BucketSet;

pub struct ArchTwo {
    month: crate::domain::MonthSpec,
    stores: Vec<TableStore>,
    ledger: Mutex<IngestLedger>,
    gauge: Arc<ConcurrencyGauge>,
    ops: OpLog,
}

impl ArchTwo {
    pub fn open(cfg: &BackendConfig) -> Result<Self, StorageError> {
        let gauge = Arc::new(ConcurrencyGauge::default());
        let stores = (0..cfg.cn_count)
            .map(|cn| {
                let path = cfg.store_dir.as_ref().map(|d| d.join(format!("a2-cn{cn}.sqlite")));
                TableStore::open(path, gauge.clone())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ArchTwo {
            month: cfg.month,
            stores,
            ledger: Mutex::new(IngestLedger::default()),
            gauge,
            ops: OpLog::default(),
        })
    }

    fn store(&self, cn: ConcentratorId) -> Result<&TableStore, StorageError> {
        self.stores.get(cn.0 as usize).ok_or(StorageError::UnknownCn(cn))
    }

    pub fn cn_count(&self) -> u32 {
        self.stores.len() as u32
    }

    pub fn row_count_for_cn(&self, cn: ConcentratorId) -> Result<u64, StorageError> {
        self.store(cn)?.row_count()
    }

    /// The per-store billing query, run from the owning concentrator's
    /// context in the simulation.
    pub fn compute_bill_for_cn(&self, cn: ConcentratorId, set: &BucketSet) -> Result<Vec<BillLine>, StorageError> {
        if !self.ledger.lock().unwrap().is_finalized() {
            return Err(StorageError::MonthNotFinalized);
        }
        self.store(cn)?.compute_bill(set)
    }
}

impl StorageBackend for ArchTwo {
    fn architecture(&self) -> Architecture {
        Architecture::A2
    }

    fn insert_daily(&self, cn: ConcentratorId, day: u32, batch: &[MeterReading]) -> Result<(), StorageError> {
        check_batch(&self.month, cn, day, batch)?;
        let store = self.store(cn)?;
        self.ledger.lock().unwrap().begin_batch(cn.0, day)?;
        let start = Instant::now();
        let rows: Vec<ReadingRow> = batch.iter().map(ReadingRow::from_reading).collect();
        let result = store.insert_batch(rows);
        if result.is_err() {
            self.ledger.lock().unwrap().rollback_batch(cn.0, day);
        }
        self.ops.record("insert_daily", start.elapsed());
        result
    }

    fn finalize_month(&self) -> Result<(), StorageError> {
        self.ledger.lock().unwrap().finalize();
        Ok(())
    }

    /// Fans the billing query out to all stores concurrently and
    /// concatenates the per-store results in concentrator order.
    fn compute_bill(&self, set: &BucketSet) -> Result<Vec<BillLine>, StorageError> {
        if !self.ledger.lock().unwrap().is_finalized() {
            return Err(StorageError::MonthNotFinalized);
        }
        let start = Instant::now();
        let mut per_store: Vec<Result<Vec<BillLine>, StorageError>> = Vec::new();
        std::thread::scope(|scope| {
            let handles: Vec<_> = self.stores.iter().map(|s| scope.spawn(move || s.compute_bill(set))).collect();
            per_store = handles.into_iter().map(|h| h.join().expect("billing fan-out panicked")).collect();
        });
        let mut bills = Vec::new();
        for (cn, result) in per_store.into_iter().enumerate() {
            // Attribute per-store failures to their concentrator.
            bills.extend(result.map_err(|e| match e {
                StorageError::IncompleteMonth(h) => StorageError::IncompleteMonth(h),
                other => StorageError::Store(format!("cn {cn}: {other}")),
            })?);
        }
        self.ops.record("compute_bill", start.elapsed());
        Ok(bills)
    }

    fn stored_total_kwh(&self) -> Result<Kwh, StorageError> {
        let mut total = 0i64;
        for s in &self.stores {
            total += s.total_kwh()?.milli();
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
