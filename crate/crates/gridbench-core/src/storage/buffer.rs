//! The coordinator-side memory buffer kept by architectures III and IV:
//! a copy of every ingested reading, slot-addressable, with per-day
//! coverage tracking so incomplete months are caught before billing.

use std::collections::BTreeMap;

use crate::domain::{HouseholdId, Kwh, MeterReading, MonthSpec};
use crate::mcb::HouseholdMonth;
use crate::storage::StorageError;

#[derive(Debug)]
struct HouseholdBuf {
    readings: Vec<Kwh>,
    days_seen: u64,
}

#[derive(Debug)]
pub(crate) struct MemoryBuffer {
    month: MonthSpec,
    map: BTreeMap<HouseholdId, HouseholdBuf>,
}

impl MemoryBuffer {
    pub fn new(month: MonthSpec) -> Self {
        MemoryBuffer { month, map: BTreeMap::new() }
    }

    pub fn record_batch(&mut self, day: u32, batch: &[MeterReading]) {
        let slots = self.month.slots() as usize;
        for r in batch {
            let buf = self.map.entry(r.household).or_insert_with(|| HouseholdBuf {
                readings: vec![Kwh::ZERO; slots],
                days_seen: 0,
            });
            buf.readings[r.slot.value() as usize] = r.kwh;
            buf.days_seen |= 1 << day;
        }
    }

    /// Every buffered household as a complete month, household order.
    /// The first household missing a day fails the whole call.
    pub fn complete_households(&self) -> Result<Vec<HouseholdMonth>, StorageError> {
        let full = (1u64 << self.month.days) - 1;
        let mut out = Vec::with_capacity(self.map.len());
        for (&household, buf) in &self.map {
            if buf.days_seen != full {
                return Err(StorageError::IncompleteMonth(household));
            }
            out.push(HouseholdMonth { household, readings: buf.readings.clone() });
        }
        Ok(out)
    }

}
