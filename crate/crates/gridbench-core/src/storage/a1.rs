//! Architecture I: one relational store for every concentrator's rows.
//! Daily batches queue up behind a single writer and are applied
//! sequentially in arrival order; the monthly bill is an aggregation
//! query executed inside the store.

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

pub struct ArchOne {
    month: crate::domain::MonthSpec,
    store: TableStore,
    ledger: Mutex<IngestLedger>,
    gauge: Arc<ConcurrencyGauge>,
    ops: OpLog,
}

impl ArchOne {
    pub fn open(cfg: &BackendConfig) -> Result<Self, StorageError> {
        let gauge = Arc::new(ConcurrencyGauge::default());
        let path = cfg.store_dir.as_ref().map(|d| d.join("a1.sqlite"));
        Ok(ArchOne {
            month: cfg.month,
            store: TableStore::open(path, gauge.clone())?,
            ledger: Mutex::new(IngestLedger::default()),
            gauge,
            ops: OpLog::default(),
        })
    }

    pub fn row_count(&self) -> Result<u64, StorageError> {
        self.store.row_count()
    }
}

impl StorageBackend for ArchOne {
    fn architecture(&self) -> Architecture {
        Architecture::A1
    }

    fn insert_daily(&self, cn: ConcentratorId, day: u32, batch: &[MeterReading]) -> Result<(), StorageError> {
        check_batch(&self.month, cn, day, batch)?;
        self.ledger.lock().unwrap().begin_batch(cn.0, day)?;
        let start = Instant::now();
        let rows: Vec<ReadingRow> = batch.iter().map(ReadingRow::from_reading).collect();
        let result = self.store.insert_batch(rows);
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

    fn compute_bill(&self, set: &BucketSet) -> Result<Vec<BillLine>, StorageError> {
        if !self.ledger.lock().unwrap().is_finalized() {
            return Err(StorageError::MonthNotFinalized);
        }
        let start = Instant::now();
        let bills = self.store.compute_bill(set);
        self.ops.record("compute_bill", start.elapsed());
        bills
    }

    fn stored_total_kwh(&self) -> Result<Kwh, StorageError> {
        self.store.total_kwh()
    }

    fn metrics(&self) -> MetricsSnapshot {
        MetricsSnapshot {
            max_concurrent_inserts: self.gauge.max_observed(),
            op_timings: self.ops.snapshot(),
        }
    }
}
