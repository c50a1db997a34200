//! Embedded relational store used by architectures I, II, and IV's
//! metadata table. One thread owns the connection; every request goes
//! through its queue, which is what serializes batch inserts in arrival
//! order and makes the single-writer property observable on the gauge.

use std::path::PathBuf;
use std::sync::mpsc::{channel, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;

use rusqlite::{params, Connection};

use crate::domain::{HouseholdId, Kwh, Money, SlotIndex};
use crate::mcb::BillLine;
use crate::storage::{ConcurrencyGauge, StorageError};
use crate::tariff::BucketSet;

#[derive(Clone, Copy, Debug)]
pub(crate) struct ReadingRow {
    pub cn: u32,
    pub local: u32,
    pub slot: u32,
    pub kwh_milli: i64,
}

impl ReadingRow {
    pub fn from_reading(r: &crate::domain::MeterReading) -> Self {
        ReadingRow {
            cn: r.household.cn.0,
            local: r.household.local_index,
            slot: r.slot.value(),
            kwh_milli: r.kwh.milli(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct MetaRow {
    pub household: HouseholdId,
    pub ts_path: String,
    pub data_path: String,
}

enum Request {
    InsertBatch { rows: Vec<ReadingRow>, reply: Sender<Result<(), StorageError>> },
    ComputeBill { set: BucketSet, reply: Sender<Result<Vec<BillLine>, StorageError>> },
    RowCount { reply: Sender<Result<u64, StorageError>> },
    TotalKwh { reply: Sender<Result<i64, StorageError>> },
    PutMeta { rows: Vec<MetaRow>, reply: Sender<Result<(), StorageError>> },
    GetMeta { reply: Sender<Result<Vec<MetaRow>, StorageError>> },
    Stop,
}

/// Handle to one store; cloneable senders funnel into the owning thread.
pub(crate) struct TableStore {
    tx: Sender<Request>,
    thread: Option<JoinHandle<()>>,
}

impl TableStore {
    /// Opens the store (file-backed or in-memory) and waits for the
    /// owning thread to finish schema setup.
    pub fn open(path: Option<PathBuf>, gauge: Arc<ConcurrencyGauge>) -> Result<Self, StorageError> {
        let (tx, rx) = channel::<Request>();
        let (ready_tx, ready_rx) = channel::<Result<(), StorageError>>();
        let thread = std::thread::spawn(move || {
            let conn = match open_connection(path.as_deref()) {
                Ok(conn) => {
                    let _ = ready_tx.send(Ok(()));
                    conn
                }
                Err(e) => {
                    let _ = ready_tx.send(Err(e));
                    return;
                }
            };
            serve(conn, rx, gauge);
        });
        match ready_rx.recv() {
            Ok(Ok(())) => Ok(TableStore { tx, thread: Some(thread) }),
            Ok(Err(e)) => Err(e),
            Err(_) => Err(StorageError::Store("store thread died during setup".into())),
        }
    }

    fn call<T>(&self, build: impl FnOnce(Sender<Result<T, StorageError>>) -> Request) -> Result<T, StorageError> {
        let (reply_tx, reply_rx) = channel();
        self.tx
            .send(build(reply_tx))
            .map_err(|_| StorageError::Store("store thread is gone".into()))?;
        reply_rx.recv().map_err(|_| StorageError::Store("store thread dropped the request".into()))?
    }

    pub fn insert_batch(&self, rows: Vec<ReadingRow>) -> Result<(), StorageError> {
        self.call(|reply| Request::InsertBatch { rows, reply })
    }

    pub fn compute_bill(&self, set: &BucketSet) -> Result<Vec<BillLine>, StorageError> {
        self.call(|reply| Request::ComputeBill { set: set.clone(), reply })
    }

    pub fn row_count(&self) -> Result<u64, StorageError> {
        self.call(|reply| Request::RowCount { reply })
    }

    pub fn total_kwh(&self) -> Result<Kwh, StorageError> {
        self.call(|reply| Request::TotalKwh { reply }).map(Kwh::from_milli)
    }

    pub fn put_meta(&self, rows: Vec<MetaRow>) -> Result<(), StorageError> {
        self.call(|reply| Request::PutMeta { rows, reply })
    }

    pub fn get_meta(&self) -> Result<Vec<MetaRow>, StorageError> {
        self.call(|reply| Request::GetMeta { reply })
    }
}

impl Drop for TableStore {
    fn drop(&mut self) {
        let _ = self.tx.send(Request::Stop);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn open_connection(path: Option<&std::path::Path>) -> Result<Connection, StorageError> {
    let conn = match path {
        Some(p) => {
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)
                    .map_err(|e| StorageError::Io { path: parent.to_path_buf(), source: e })?;
            }
            Connection::open(p)?
        }
        None => Connection::open_in_memory()?,
    };
    // Bulk-load posture: single-connection store, no durability needs.
    conn.execute_batch(
        "PRAGMA journal_mode=MEMORY;
         PRAGMA synchronous=OFF;
         CREATE TABLE IF NOT EXISTS readings (
             cn INTEGER NOT NULL,
             local_idx INTEGER NOT NULL,
             slot INTEGER NOT NULL,
             kwh_milli INTEGER NOT NULL,
             PRIMARY KEY (cn, local_idx, slot)
         ) WITHOUT ROWID;
         CREATE TABLE IF NOT EXISTS file_index (
             cn INTEGER NOT NULL,
             local_idx INTEGER NOT NULL,
             ts_path TEXT NOT NULL,
             data_path TEXT NOT NULL,
             PRIMARY KEY (cn, local_idx)
         ) WITHOUT ROWID;",
    )?;
    Ok(conn)
}

fn serve(mut conn: Connection, rx: std::sync::mpsc::Receiver<Request>, gauge: Arc<ConcurrencyGauge>) {
    while let Ok(req) = rx.recv() {
        match req {
            Request::InsertBatch { rows, reply } => {
                let _ = reply.send(insert_batch(&mut conn, &rows, &gauge));
            }
            Request::ComputeBill { set, reply } => {
                let _ = reply.send(compute_bill(&mut conn, &set));
            }
            Request::RowCount { reply } => {
                let res = conn
                    .query_row("SELECT COUNT(*) FROM readings", [], |r| r.get::<_, i64>(0))
                    .map(|v| v as u64)
                    .map_err(StorageError::from);
                let _ = reply.send(res);
            }
            Request::TotalKwh { reply } => {
                let res = conn
                    .query_row("SELECT COALESCE(SUM(kwh_milli), 0) FROM readings", [], |r| r.get(0))
                    .map_err(StorageError::from);
                let _ = reply.send(res);
            }
            Request::PutMeta { rows, reply } => {
                let _ = reply.send(put_meta(&mut conn, &rows));
            }
            Request::GetMeta { reply } => {
                let _ = reply.send(get_meta(&conn));
            }
            Request::Stop => break,
        }
    }
}

fn insert_batch(conn: &mut Connection, rows: &[ReadingRow], gauge: &ConcurrencyGauge) -> Result<(), StorageError> {
    let _g = gauge.enter();
    let tx = conn.transaction()?;
    {
        let mut stmt = tx.prepare_cached("INSERT INTO readings (cn, local_idx, slot, kwh_milli) VALUES (?1, ?2, ?3, ?4)")?;
        for row in rows {
            stmt.execute(params![row.cn, row.local, row.slot, row.kwh_milli])?;
        }
    }
    tx.commit()?;
    Ok(())
}

fn put_meta(conn: &mut Connection, rows: &[MetaRow]) -> Result<(), StorageError> {
    let tx = conn.transaction()?;
    {
        let mut stmt =
            tx.prepare_cached("INSERT INTO file_index (cn, local_idx, ts_path, data_path) VALUES (?1, ?2, ?3, ?4)")?;
        for row in rows {
            stmt.execute(params![row.household.cn.0, row.household.local_index, row.ts_path, row.data_path])?;
        }
    }
    tx.commit()?;
    Ok(())
}

fn get_meta(conn: &Connection) -> Result<Vec<MetaRow>, StorageError> {
    let mut stmt =
        conn.prepare("SELECT cn, local_idx, ts_path, data_path FROM file_index ORDER BY cn, local_idx")?;
    let rows = stmt
        .query_map([], |r| {
            Ok(MetaRow {
                household: HouseholdId::new(r.get(0)?, r.get(1)?),
                ts_path: r.get(2)?,
                data_path: r.get(3)?,
            })
        })?
        .collect::<Result<Vec<_>, _>>()?;
    Ok(rows)
}

/// The in-store billing query: a classification table maps each slot to
/// its bucket and price, and plain GROUP BY aggregation does the rest.
/// Everything stays in integer arithmetic, so the result matches the
/// in-memory kernel exactly.
fn compute_bill(conn: &mut Connection, set: &BucketSet) -> Result<Vec<BillLine>, StorageError> {
    let slots = set.month().slots();

    // Completeness first: every stored household needs the whole grid.
    if let Some(contents) = conn
        .query_row(
            "SELECT cn, local_idx FROM readings GROUP BY cn, local_idx HAVING COUNT(*) <> ?1
             ORDER BY cn, local_idx LIMIT 1",
            params![slots],
            |r| Ok((r.get::<_, u32>(0)?, r.get::<_, u32>(1)?)),
        )
        .map(Some)
        .or_else(|e| if e == rusqlite::Error::QueryReturnedNoRows { Ok(None) } else { Err(e) })?
    {
        return Err(StorageError::IncompleteMonth(HouseholdId::new(contents.0, contents.1)));
    }

    let tx = conn.transaction()?;
    tx.execute_batch(
        "CREATE TEMP TABLE IF NOT EXISTS slot_bucket (
             slot INTEGER PRIMARY KEY,
             bucket INTEGER NOT NULL,
             price_micro INTEGER NOT NULL
         );
         DELETE FROM slot_bucket;",
    )?;
    {
        let mut stmt = tx.prepare_cached("INSERT INTO slot_bucket (slot, bucket, price_micro) VALUES (?1, ?2, ?3)")?;
        for s in 0..slots {
            let b = set.classify(SlotIndex(s));
            stmt.execute(params![s, b as i64, set.bucket(b).price.micro()])?;
        }
    }

    let bucket_count = set.len();
    let mut bills: Vec<BillLine> = Vec::new();
    {
        let mut stmt = tx.prepare(
            "SELECT r.cn, r.local_idx, sb.bucket, SUM(r.kwh_milli)
             FROM readings r JOIN slot_bucket sb ON sb.slot = r.slot
             GROUP BY r.cn, r.local_idx, sb.bucket
             ORDER BY r.cn, r.local_idx, sb.bucket",
        )?;
        let mut rows = stmt.query([])?;
        while let Some(row) = rows.next()? {
            let household = HouseholdId::new(row.get(0)?, row.get(1)?);
            let bucket: i64 = row.get(2)?;
            let kwh: i64 = row.get(3)?;
            if bills.last().map(|b| b.household) != Some(household) {
                bills.push(BillLine {
                    household,
                    per_bucket_kwh: vec![Kwh::ZERO; bucket_count],
                    total_amount: Money::ZERO,
                });
            }
            bills.last_mut().expect("just pushed").per_bucket_kwh[bucket as usize] = Kwh::from_milli(kwh);
        }
    }
    {
        let mut stmt = tx.prepare(
            "SELECT r.cn, r.local_idx, SUM(r.kwh_milli * sb.price_micro)
             FROM readings r JOIN slot_bucket sb ON sb.slot = r.slot
             GROUP BY r.cn, r.local_idx
             ORDER BY r.cn, r.local_idx",
        )?;
        let mut rows = stmt.query([])?;
        let mut i = 0usize;
        while let Some(row) = rows.next()? {
            let household = HouseholdId::new(row.get(0)?, row.get(1)?);
            let nano: i64 = row.get(2)?;
            let line = bills.get_mut(i).ok_or_else(|| StorageError::Store("bill row mismatch".into()))?;
            if line.household != household {
                return Err(StorageError::Store("bill row mismatch".into()));
            }
            line.total_amount = Money::from_nano(nano);
            i += 1;
        }
        if i != bills.len() {
            return Err(StorageError::Store("bill row mismatch".into()));
        }
    }
    tx.commit()?;
    Ok(bills)
}
