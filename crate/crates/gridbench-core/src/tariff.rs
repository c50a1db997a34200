//! Time bucket definitions, slot classification, and the precomputed
//! indirection mask used by the billing kernel.
//!
//! A bucket is a continuous or intermittent period of the month in which
//! every reading has the same price; a [`BucketSet`] must partition the
//! whole month grid (every slot in exactly one bucket). The
//! [`BucketMask`] maps each slot to its position in a bucket-contiguous
//! layout so billing needs no per-reading conditionals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DayType, MonthSpec, Price, SlotIndex, SLOTS_PER_DAY};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TariffError {
    #[error("slot {slot} matches buckets {matches:?}, expected exactly one")]
    PartitionViolation { slot: u32, matches: Vec<usize> },
    #[error("bad clause: {0}")]
    BadClause(String),
    #[error("bad time of day {0:?} (expected HH:MM on the 15-minute grid)")]
    BadTime(String),
}

/// Parse `HH:MM` into a slot-of-day boundary in `0..=96`. `24:00` is the
/// end-of-day boundary.
pub fn parse_hhmm(s: &str) -> Result<u32, TariffError> {
    let bad = || TariffError::BadTime(s.to_string());
    let (h, m) = s.split_once(':').ok_or_else(bad)?;
    let hour: u32 = h.parse().map_err(|_| bad())?;
    let minute: u32 = m.parse().map_err(|_| bad())?;
    if minute % 15 != 0 || minute >= 60 || hour > 24 || (hour == 24 && minute != 0) {
        return Err(bad());
    }
    Ok(hour * 4 + minute / 15)
}

/// One predicate clause: slots of `day_type` days whose slot-of-day lies
/// in the half-open range `start..end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub day_type: DayType,
    pub start: u32,
    pub end: u32,
}

impl Clause {
    pub fn new(day_type: DayType, start: u32, end: u32) -> Result<Self, TariffError> {
        if start >= end || end > SLOTS_PER_DAY {
            return Err(TariffError::BadClause(format!(
                "slot-of-day range {start}..{end} is empty or exceeds {SLOTS_PER_DAY}"
            )));
        }
        Ok(Clause { day_type, start, end })
    }

    pub fn from_hhmm(day_type: DayType, start: &str, end: &str) -> Result<Self, TariffError> {
        Clause::new(day_type, parse_hhmm(start)?, parse_hhmm(end)?)
    }

    fn matches(&self, day_type: DayType, slot_of_day: u32) -> bool {
        self.day_type == day_type && (self.start..self.end).contains(&slot_of_day)
    }
}

/// A tariff period: one price over a possibly intermittent set of
/// clauses. A bucket with no clauses matches nothing and is legal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimeBucket {
    pub id: usize,
    pub label: String,
    pub price: Price,
    pub clauses: Vec<Clause>,
}

impl TimeBucket {
    pub fn new(label: impl Into<String>, price: Price, clauses: Vec<Clause>) -> Self {
        TimeBucket { id: 0, label: label.into(), price, clauses }
    }
}

/// An ordered bucket list known to partition the month grid. Bucket ids
/// are declaration positions; the sorted layout follows the same order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BucketSet {
    month: MonthSpec,
    buckets: Vec<TimeBucket>,
}

impl BucketSet {
    /// Builds the set and checks the partition property over every slot.
    pub fn new(month: MonthSpec, buckets: Vec<TimeBucket>) -> Result<Self, TariffError> {
        let set = Self::from_parts_unchecked(month, buckets);
        set.validate_partition()?;
        Ok(set)
    }

    /// Skips the partition check. `classify` on a non-partition set
    /// panics; `build_mask` reports the violation instead.
    pub fn from_parts_unchecked(month: MonthSpec, mut buckets: Vec<TimeBucket>) -> Self {
        for (i, b) in buckets.iter_mut().enumerate() {
            b.id = i;
        }
        BucketSet { month, buckets }
    }

    pub fn month(&self) -> &MonthSpec {
        &self.month
    }

    pub fn buckets(&self) -> &[TimeBucket] {
        &self.buckets
    }

    pub fn bucket(&self, id: usize) -> &TimeBucket {
        &self.buckets[id]
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn prices(&self) -> Vec<Price> {
        self.buckets.iter().map(|b| b.price).collect()
    }

    fn matching_buckets(&self, slot: SlotIndex) -> Vec<usize> {
        let day_type = self.month.slot_day_type(slot);
        let slot_of_day = slot.slot_of_day();
        self.buckets
            .iter()
            .filter(|b| b.clauses.iter().any(|c| c.matches(day_type, slot_of_day)))
            .map(|b| b.id)
            .collect()
    }

    /// Bucket for `slot`, or the violating evidence when the set is not a
    /// partition.
    pub fn classify_checked(&self, slot: SlotIndex) -> Result<usize, TariffError> {
        let matches = self.matching_buckets(slot);
        if matches.len() == 1 {
            Ok(matches[0])
        } else {
            Err(TariffError::PartitionViolation { slot: slot.value(), matches })
        }
    }

    /// Bucket for `slot`. Total on any set built through [`BucketSet::new`].
    pub fn classify(&self, slot: SlotIndex) -> usize {
        self.classify_checked(slot).expect("bucket set validated at construction")
    }

    /// Ok iff every slot of the month matches exactly one bucket.
    pub fn validate_partition(&self) -> Result<(), TariffError> {
        for s in 0..self.month.slots() {
            self.classify_checked(SlotIndex(s))?;
        }
        Ok(())
    }
}

/// Per-bucket range in the bucket-contiguous layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BucketSpan {
    pub offset: usize,
    pub len: usize,
}

/// Precomputed indirection array: `mask[slot]` is the destination
/// position of that slot's reading in the bucket-sorted layout, and
/// `boundaries[bucket]` the contiguous span each bucket occupies.
/// Calculated once per bucket set and shared by all households.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BucketMask {
    mask: Vec<u32>,
    boundaries: Vec<BucketSpan>,
}

impl BucketMask {
    /// Counting-sort construction: classify each slot once, prefix-sum
    /// the bucket counts, then hand out destinations in ascending slot
    /// order (which makes the layout stable within each bucket).
    pub fn build(set: &BucketSet) -> Result<BucketMask, TariffError> {
        let n = set.month().slots() as usize;
        let nb = set.len();
        let mut bucket_of = vec![0usize; n];
        let mut counts = vec![0usize; nb];
        for s in 0..n {
            let b = set.classify_checked(SlotIndex(s as u32))?;
            bucket_of[s] = b;
            counts[b] += 1;
        }
        let mut boundaries = Vec::with_capacity(nb);
        let mut offset = 0;
        for &len in &counts {
            boundaries.push(BucketSpan { offset, len });
            offset += len;
        }
        let mut next: Vec<usize> = boundaries.iter().map(|s| s.offset).collect();
        let mut mask = vec![0u32; n];
        for (s, &b) in bucket_of.iter().enumerate() {
            mask[s] = next[b] as u32;
            next[b] += 1;
        }
        Ok(BucketMask { mask, boundaries })
    }

    pub fn mask(&self) -> &[u32] {
        &self.mask
    }

    pub fn boundaries(&self) -> &[BucketSpan] {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn bucket_count(&self) -> usize {
        self.boundaries.len()
    }

    #[cfg(test)]
    pub(crate) fn from_raw(mask: Vec<u32>, boundaries: Vec<BucketSpan>) -> Self {
        BucketMask { mask, boundaries }
    }
}

/// Builds the mask for a bucket set.
pub fn build_mask(set: &BucketSet) -> Result<BucketMask, TariffError> {
    BucketMask::build(set)
}

/// Critical-peak override: within `start..end` on `day_type` days the
/// given price replaces the base tariff.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalClause {
    pub day_type: DayType,
    pub start: u32,
    pub end: u32,
    pub price: Price,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PricingScheme {
    Tou,
    /// Critical-peak clauses layered on a TOU base; the base clauses are
    /// re-partitioned so the result still covers every slot exactly once.
    Cpp { critical: Vec<CriticalClause> },
}

impl PricingScheme {
    pub fn kind_name(&self) -> &'static str {
        match self {
            PricingScheme::Tou => "tou",
            PricingScheme::Cpp { .. } => "cpp",
        }
    }
}

/// Subtracts `cut` from `(start, end)`, keeping whatever remains.
fn subtract_window(pieces: &mut Vec<(u32, u32)>, cut: (u32, u32)) {
    let mut out = Vec::with_capacity(pieces.len() + 1);
    for &(s, e) in pieces.iter() {
        if cut.1 <= s || cut.0 >= e {
            out.push((s, e));
            continue;
        }
        if s < cut.0 {
            out.push((s, cut.0));
        }
        if cut.1 < e {
            out.push((cut.1, e));
        }
    }
    *pieces = out;
}

/// Applies critical-peak windows to a base bucket list: matching windows
/// are carved out of the base clauses and appended as their own buckets.
pub fn apply_critical_clauses(
    month: MonthSpec,
    base: Vec<TimeBucket>,
    critical: &[CriticalClause],
) -> Result<BucketSet, TariffError> {
    let mut buckets = Vec::with_capacity(base.len() + critical.len());
    for bucket in base {
        let mut clauses = Vec::with_capacity(bucket.clauses.len());
        for clause in bucket.clauses {
            let mut pieces = vec![(clause.start, clause.end)];
            for c in critical.iter().filter(|c| c.day_type == clause.day_type) {
                subtract_window(&mut pieces, (c.start, c.end));
            }
            for (s, e) in pieces {
                clauses.push(Clause::new(clause.day_type, s, e)?);
            }
        }
        buckets.push(TimeBucket::new(bucket.label, bucket.price, clauses));
    }
    for (i, c) in critical.iter().enumerate() {
        buckets.push(TimeBucket::new(
            format!("critical-{i}"),
            c.price,
            vec![Clause::new(c.day_type, c.start, c.end)?],
        ));
    }
    BucketSet::new(month, buckets)
}

/// Plain-data form of a bucket, for wire messages and config files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketSpec {
    pub label: String,
    pub price: Price,
    pub clauses: Vec<Clause>,
}

/// Plain-data form of a whole bucket set; `build` re-validates the
/// partition, so a spec that traveled over a wire cannot smuggle an
/// invalid set past the constructor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketSetSpec {
    pub month: MonthSpec,
    pub buckets: Vec<BucketSpec>,
}

impl BucketSetSpec {
    pub fn from_set(set: &BucketSet) -> Self {
        BucketSetSpec {
            month: *set.month(),
            buckets: set
                .buckets()
                .iter()
                .map(|b| BucketSpec { label: b.label.clone(), price: b.price, clauses: b.clauses.clone() })
                .collect(),
        }
    }

    pub fn build(&self) -> Result<BucketSet, TariffError> {
        BucketSet::new(
            self.month,
            self.buckets
                .iter()
                .map(|b| TimeBucket::new(b.label.clone(), b.price, b.clauses.clone()))
                .collect(),
        )
    }
}

const DEFAULT_PERIODS: [(&str, &str, &str); 4] = [
    ("night", "00:00", "06:00"),
    ("morning", "06:00", "12:00"),
    ("afternoon", "12:00", "18:00"),
    ("evening", "18:00", "24:00"),
];
const DEFAULT_WORKDAY_PRICES: [&str; 4] = ["0.05", "0.10", "0.12", "0.20"];
const DEFAULT_WEEKEND_PRICES: [&str; 4] = ["0.04", "0.07", "0.08", "0.12"];

/// The shipped 8-bucket default: {workday, weekend} x {night, morning,
/// afternoon, evening} with distinct prices. CPP layers its critical
/// clauses on top of this base.
pub fn default_bucket_set(month: MonthSpec, scheme: &PricingScheme) -> Result<BucketSet, TariffError> {
    let mut buckets = Vec::with_capacity(8);
    for (day_type, tag, prices) in [
        (DayType::Workday, "workday", DEFAULT_WORKDAY_PRICES),
        (DayType::Weekend, "weekend", DEFAULT_WEEKEND_PRICES),
    ] {
        for ((name, start, end), price) in DEFAULT_PERIODS.iter().zip(prices) {
            buckets.push(TimeBucket::new(
                format!("{tag}-{name}"),
                price.parse().expect("static price literal"),
                vec![Clause::from_hhmm(day_type, start, end)?],
            ));
        }
    }
    match scheme {
        PricingScheme::Tou => BucketSet::new(month, buckets),
        PricingScheme::Cpp { critical } => apply_critical_clauses(month, buckets, critical),
    }
}
