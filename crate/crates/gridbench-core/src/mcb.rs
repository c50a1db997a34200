//! In-memory multi-core billing: gather readings into bucket-contiguous
//! order through the precomputed mask (sort phase), reduce each bucket's
//! contiguous span (aggregate phase), and partition households across
//! workers. Fixed-point arithmetic makes the result independent of worker
//! count and reduction order.
//!
//! [`brute_force_bill`] is the deliberately naive oracle: it classifies
//! every reading with a per-slot conditional scan, exactly the work the
//! mask exists to avoid, and must agree with the kernel bit for bit.

use thiserror::Error;

use crate::domain::{HouseholdId, Kwh, Money, MonthSpec, Price, SlotIndex, ValidationError};
use crate::tariff::{BucketMask, BucketSet, BucketSpan};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum McbError {
    #[error("reading array length {actual} does not match the mask length {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("bucket boundaries cover {covered} slots of {expected}")]
    BoundaryMismatch { covered: usize, expected: usize },
    #[error("got {actual} prices for {expected} buckets")]
    PriceCountMismatch { expected: usize, actual: usize },
}

/// One complete household-month as a contiguous kWh array in slot order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HouseholdMonth {
    pub household: HouseholdId,
    pub readings: Vec<Kwh>,
}

impl HouseholdMonth {
    /// Validates row-per-reading records and packs them into slot order.
    pub fn from_readings(
        month: &MonthSpec,
        readings: &[crate::domain::MeterReading],
    ) -> Result<Self, ValidationError> {
        crate::domain::validate_household_month(month, readings)?;
        let household = readings.first().expect("complete month is non-empty").household;
        let mut packed = vec![Kwh::ZERO; month.slots() as usize];
        for r in readings {
            packed[r.slot.value() as usize] = r.kwh;
        }
        Ok(HouseholdMonth { household, readings: packed })
    }

    pub fn total_kwh(&self) -> Kwh {
        self.readings.iter().copied().sum()
    }
}

/// Per-household bill: aggregated kWh per bucket and the total amount.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BillLine {
    pub household: HouseholdId,
    pub per_bucket_kwh: Vec<Kwh>,
    pub total_amount: Money,
}

impl BillLine {
    pub fn total_kwh(&self) -> Kwh {
        self.per_bucket_kwh.iter().copied().sum()
    }
}

/// Gather `readings` into bucket-contiguous order: `out[mask[i]] = readings[i]`.
/// A pure scatter; no branch ever inspects bucket membership.
pub fn sort_phase(readings: &[Kwh], mask: &BucketMask) -> Result<Vec<Kwh>, McbError> {
    let mut out = Vec::new();
    sort_phase_into(readings, mask, &mut out)?;
    Ok(out)
}

/// [`sort_phase`] writing into a reusable buffer. The mask is a
/// permutation, so every position of the buffer is overwritten and no
/// data can survive from a previous household.
pub fn sort_phase_into(readings: &[Kwh], mask: &BucketMask, out: &mut Vec<Kwh>) -> Result<(), McbError> {
    if readings.len() != mask.len() {
        return Err(McbError::LengthMismatch { expected: mask.len(), actual: readings.len() });
    }
    out.clear();
    out.resize(readings.len(), Kwh::ZERO);
    for (i, &r) in readings.iter().enumerate() {
        out[mask.mask()[i] as usize] = r;
    }
    Ok(())
}

/// Reduce each bucket's contiguous span of the sorted array to a sum.
pub fn aggregate_phase(sorted: &[Kwh], boundaries: &[BucketSpan]) -> Result<Vec<Kwh>, McbError> {
    let mut covered = 0usize;
    for b in boundaries {
        if b.offset != covered {
            return Err(McbError::BoundaryMismatch { covered, expected: sorted.len() });
        }
        covered += b.len;
    }
    if covered != sorted.len() {
        return Err(McbError::BoundaryMismatch { covered, expected: sorted.len() });
    }
    Ok(boundaries
        .iter()
        .map(|b| sorted[b.offset..b.offset + b.len].iter().copied().sum())
        .collect())
}

fn price_total(per_bucket: &[Kwh], prices: &[Price]) -> Result<Money, McbError> {
    if per_bucket.len() != prices.len() {
        return Err(McbError::PriceCountMismatch { expected: per_bucket.len(), actual: prices.len() });
    }
    Ok(per_bucket.iter().zip(prices).map(|(&k, &p)| k * p).sum())
}

/// Sort phase then aggregate phase for one household.
pub fn bill_household(
    household: HouseholdId,
    readings: &[Kwh],
    mask: &BucketMask,
    prices: &[Price],
) -> Result<BillLine, McbError> {
    let mut scratch = Vec::new();
    bill_household_with(household, readings, mask, prices, &mut scratch)
}

fn bill_household_with(
    household: HouseholdId,
    readings: &[Kwh],
    mask: &BucketMask,
    prices: &[Price],
    scratch: &mut Vec<Kwh>,
) -> Result<BillLine, McbError> {
    sort_phase_into(readings, mask, scratch)?;
    let per_bucket_kwh = aggregate_phase(scratch, mask.boundaries())?;
    let total_amount = price_total(&per_bucket_kwh, prices)?;
    Ok(BillLine { household, per_bucket_kwh, total_amount })
}

/// A batch billing run: complete household-months, the shared mask, one
/// price per bucket, and the worker count to partition across.
pub struct BillingJob<'a> {
    pub households: &'a [HouseholdMonth],
    pub mask: &'a BucketMask,
    pub prices: &'a [Price],
    pub worker_count: usize,
}

#[derive(Debug, Default)]
pub struct BillingOutcome {
    pub bills: Vec<BillLine>,
    pub errors: Vec<(HouseholdId, McbError)>,
}

/// Contiguous index ranges of sizes differing by at most one.
pub(crate) fn partition_ranges(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let base = n / parts;
    let rem = n % parts;
    let mut ranges = Vec::with_capacity(parts);
    let mut start = 0;
    for i in 0..parts {
        let len = base + usize::from(i < rem);
        ranges.push(start..start + len);
        start += len;
    }
    ranges
}

fn bill_chunk(
    households: &[HouseholdMonth],
    mask: &BucketMask,
    prices: &[Price],
) -> (Vec<BillLine>, Vec<(HouseholdId, McbError)>) {
    let mut bills = Vec::with_capacity(households.len());
    let mut errors = Vec::new();
    // One sorted buffer per worker, reused across its households.
    let mut scratch = Vec::with_capacity(mask.len());
    for hm in households {
        match bill_household_with(hm.household, &hm.readings, mask, prices, &mut scratch) {
            Ok(line) => bills.push(line),
            Err(e) => errors.push((hm.household, e)),
        }
    }
    (bills, errors)
}

/// Bills every household, partitioned by household into `worker_count`
/// contiguous chunks. No household is ever split across workers, and the
/// output is identical for every worker count. A household that fails
/// does not abort the others; it lands in the error list instead.
pub fn bill_all(job: &BillingJob) -> BillingOutcome {
    assert!(job.worker_count >= 1, "worker_count must be at least 1");
    let n = job.households.len();
    if n == 0 {
        return BillingOutcome::default();
    }
    if job.worker_count == 1 {
        let (bills, errors) = bill_chunk(job.households, job.mask, job.prices);
        return BillingOutcome { bills, errors };
    }
    let ranges = partition_ranges(n, job.worker_count);
    let mut chunk_results: Vec<(Vec<BillLine>, Vec<(HouseholdId, McbError)>)> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .iter()
            .filter(|r| !r.is_empty())
            .map(|r| {
                let chunk = &job.households[r.clone()];
                scope.spawn(|| bill_chunk(chunk, job.mask, job.prices))
            })
            .collect();
        chunk_results = handles.into_iter().map(|h| h.join().expect("billing worker panicked")).collect();
    });
    let mut outcome = BillingOutcome::default();
    for (bills, errors) in chunk_results {
        outcome.bills.extend(bills);
        outcome.errors.extend(errors);
    }
    outcome
}

/// Per-reading conditional classification: the slow path the mask was
/// designed to avoid, kept as the independent oracle for the kernel.
pub fn brute_force_bill(
    household: HouseholdId,
    readings: &[Kwh],
    set: &BucketSet,
    prices: &[Price],
) -> Result<BillLine, McbError> {
    let slots = set.month().slots() as usize;
    if readings.len() != slots {
        return Err(McbError::LengthMismatch { expected: slots, actual: readings.len() });
    }
    let mut per_bucket_kwh = vec![Kwh::ZERO; set.len()];
    for (s, &kwh) in readings.iter().enumerate() {
        per_bucket_kwh[set.classify(SlotIndex(s as u32))] += kwh;
    }
    let total_amount = price_total(&per_bucket_kwh, prices)?;
    Ok(BillLine { household, per_bucket_kwh, total_amount })
}
