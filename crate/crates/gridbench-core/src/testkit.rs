//! Seeded generators used by the randomized test suites: bucket sets that
//! are partitions by construction, and random household-months. Kept in
//! the library so unit, property, and acceptance tests share one source.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::domain::{DayType, HouseholdId, Kwh, MeterReading, MonthSpec, Price, SlotIndex};
use crate::mcb::HouseholdMonth;
use crate::tariff::{BucketSet, Clause, TimeBucket};

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn pick(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    rng.next_u64() % n
}

/// A bucket set that partitions `month` by construction: each day-type's
/// 96-slot template is cut into intervals and every interval is assigned
/// to exactly one of the buckets. Buckets may end up intermittent, may
/// span both day types, and may be empty.
pub fn random_bucket_set(seed: u64, month: MonthSpec) -> BucketSet {
    let mut rng = rng_for(seed, 1);
    let bucket_count = 1 + pick(&mut rng, 8) as usize;
    let mut buckets: Vec<TimeBucket> = (0..bucket_count)
        .map(|i| {
            TimeBucket::new(
                format!("b{i}"),
                Price::from_micro(pick(&mut rng, 500_000) as i64),
                vec![],
            )
        })
        .collect();
    for day_type in [DayType::Workday, DayType::Weekend] {
        let cut_count = pick(&mut rng, 6) as usize;
        let mut cuts: Vec<u32> = (0..cut_count).map(|_| 1 + pick(&mut rng, 95) as u32).collect();
        cuts.sort_unstable();
        cuts.dedup();
        let mut start = 0;
        for end in cuts.into_iter().chain([96]) {
            let owner = pick(&mut rng, bucket_count as u64) as usize;
            buckets[owner].clauses.push(Clause::new(day_type, start, end).unwrap());
            start = end;
        }
    }
    BucketSet::new(month, buckets).expect("construction tiles every slot exactly once")
}

/// Random slot-ordered kWh array for one household-month, up to ~8 kWh
/// per slot at watt-hour resolution.
pub fn random_kwh_month(seed: u64, month: &MonthSpec) -> Vec<Kwh> {
    let mut rng = rng_for(seed, 2);
    (0..month.slots()).map(|_| Kwh::from_milli(pick(&mut rng, 8_000) as i64)).collect()
}

pub fn random_household_month(seed: u64, month: &MonthSpec, household: HouseholdId) -> HouseholdMonth {
    HouseholdMonth { household, readings: random_kwh_month(seed, month) }
}

/// The same data as row-per-reading records, slot order.
pub fn readings_of(month_data: &HouseholdMonth) -> Vec<MeterReading> {
    month_data
        .readings
        .iter()
        .enumerate()
        .map(|(s, &kwh)| MeterReading { household: month_data.household, slot: SlotIndex(s as u32), kwh })
        .collect()
}

/// Month grid shortened to `days` for fast exhaustive checks. Production
/// months go through `MonthSpec::new`, which enforces 28..=31 days.
pub fn toy_month(days: u32) -> MonthSpec {
    MonthSpec { days, ..MonthSpec::new(2009, 1, 31).unwrap() }
}

/// One concentrator's daily batch: every local household's 96 readings.
pub fn cn_day_batch(
    cfg: &crate::datagen::DatagenConfig,
    cn: u32,
    households_per_cn: u32,
    day: u32,
) -> Vec<MeterReading> {
    let mut batch = Vec::new();
    for local in 0..households_per_cn {
        batch.extend(crate::datagen::generate_household_day(cfg, HouseholdId::new(cn, local), day));
    }
    batch
}

/// Drives a backend through the whole month, day by day across all
/// concentrators, then finalizes it.
pub fn ingest_month(
    backend: &dyn crate::storage::StorageBackend,
    cfg: &crate::datagen::DatagenConfig,
    cn_count: u32,
    households_per_cn: u32,
) -> Result<(), crate::storage::StorageError> {
    use crate::domain::ConcentratorId;
    for day in 0..cfg.month.days {
        for cn in 0..cn_count {
            backend.insert_daily(ConcentratorId(cn), day, &cn_day_batch(cfg, cn, households_per_cn, day))?;
        }
    }
    backend.finalize_month()
}

/// Reference bills straight from the generator output through the
/// brute-force classifier; what every backend must reproduce.
pub fn oracle_bills(
    cfg: &crate::datagen::DatagenConfig,
    cn_count: u32,
    households_per_cn: u32,
    set: &BucketSet,
) -> Vec<crate::mcb::BillLine> {
    let prices = set.prices();
    crate::datagen::generate_grid_month(cfg, cn_count, households_per_cn)
        .iter()
        .map(|hm| crate::mcb::brute_force_bill(hm.household, &hm.readings, set, &prices).unwrap())
        .collect()
}
