//! Deterministic synthetic meter data: per-(month, day-type) polynomial
//! regression baselines plus seeded additive noise.
//!
//! Every (seed, household, day) triple owns an independent noise stream
//! derived by packing the triple into a stream cipher key, so generation
//! order never matters and concentrators can generate their households in
//! parallel with bit-identical results.

mod profiles;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::domain::{DayType, HouseholdId, Kwh, MeterReading, MonthSpec, SlotIndex, SLOTS_PER_DAY};
use crate::mcb::HouseholdMonth;

/// Degree-10 load curve over normalized time of day `t = slot / 96`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionProfile {
    pub month: u32,
    pub day_type: DayType,
    pub coefficients: [f64; 11],
}

impl RegressionProfile {
    /// Baseline consumption for one slot: Horner evaluation, clamped at
    /// zero, rounded to watt-hour resolution.
    pub fn baseline(&self, slot_of_day: u32) -> Kwh {
        debug_assert!(slot_of_day < SLOTS_PER_DAY);
        let t = slot_of_day as f64 / SLOTS_PER_DAY as f64;
        let mut value = 0.0;
        for &c in self.coefficients.iter().rev() {
            value = value * t + c;
        }
        Kwh::from_f64(value.max(0.0))
    }
}

/// The 24 profiles (12 months x 2 day types) an experiment runs with.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileTable {
    coeffs: [[f64; 11]; 24],
}

fn table_index(month: u32, day_type: DayType) -> usize {
    debug_assert!((1..=12).contains(&month));
    (month as usize - 1) * 2 + (day_type == DayType::Weekend) as usize
}

impl ProfileTable {
    pub fn defaults() -> Self {
        ProfileTable { coeffs: profiles::DEFAULT_COEFFS }
    }

    pub fn profile(&self, month: u32, day_type: DayType) -> RegressionProfile {
        RegressionProfile { month, day_type, coefficients: self.coeffs[table_index(month, day_type)] }
    }

    pub fn set(&mut self, month: u32, day_type: DayType, coefficients: [f64; 11]) {
        self.coeffs[table_index(month, day_type)] = coefficients;
    }
}

impl Default for ProfileTable {
    fn default() -> Self {
        Self::defaults()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Uniform,
    Gaussian,
}

/// Additive noise: `uniform` draws from `[-amplitude, +amplitude]`,
/// `gaussian` uses `amplitude` as the standard deviation. With
/// `relative` set, the amplitude is a fraction of the slot's baseline
/// instead of an absolute kWh value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub amplitude: Kwh,
    pub relative: bool,
}

impl NoiseModel {
    pub fn uniform(amplitude: Kwh) -> Self {
        NoiseModel { kind: NoiseKind::Uniform, amplitude, relative: false }
    }

    pub fn none() -> Self {
        Self::uniform(Kwh::ZERO)
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        // "random noise" with no stated law: +/- 0.1 kWh uniform.
        Self::uniform(Kwh::from_milli(100))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatagenConfig {
    pub global_seed: u64,
    pub month: MonthSpec,
    pub profiles: ProfileTable,
    pub noise: NoiseModel,
}

impl DatagenConfig {
    pub fn new(global_seed: u64, month: MonthSpec) -> Self {
        DatagenConfig { global_seed, month, profiles: ProfileTable::defaults(), noise: NoiseModel::default() }
    }
}

/// Independent stream per (seed, household, day): the triple is packed
/// injectively into the cipher key, so no two streams can collide.
fn noise_stream(global_seed: u64, household: HouseholdId, day: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&global_seed.to_le_bytes());
    key[8..12].copy_from_slice(&household.cn.0.to_le_bytes());
    key[12..16].copy_from_slice(&household.local_index.to_le_bytes());
    key[16..20].copy_from_slice(&day.to_le_bytes());
    key[20] = 0x4e; // noise domain tag
    ChaCha8Rng::from_seed(key)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on two 53-bit uniforms.
    let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
    let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn noise_milli(model: &NoiseModel, rng: &mut ChaCha8Rng, baseline: Kwh) -> i64 {
    let amp = if model.relative {
        baseline.milli() * model.amplitude.milli() / 1000
    } else {
        model.amplitude.milli()
    };
    if amp == 0 {
        // Keep the stream position independent of the amplitude value.
        let _ = rng.next_u64();
        return 0;
    }
    match model.kind {
        NoiseKind::Uniform => {
            let span = (2 * amp + 1) as u64;
            (rng.next_u64() % span) as i64 - amp
        }
        NoiseKind::Gaussian => {
            let _ = rng.next_u64(); // consume like the uniform branch
            (standard_normal(rng) * amp as f64).round() as i64
        }
    }
}

/// One household's 96 readings for one day. Deterministic in every input.
pub fn generate_household_day(cfg: &DatagenConfig, household: HouseholdId, day: u32) -> Vec<MeterReading> {
    assert!(day < cfg.month.days, "day {day} outside the {}-day month", cfg.month.days);
    let profile = cfg.profiles.profile(cfg.month.month, cfg.month.day_type(day));
    let mut rng = noise_stream(cfg.global_seed, household, day);
    (0..SLOTS_PER_DAY)
        .map(|s| {
            let baseline = profile.baseline(s);
            let kwh = Kwh::from_milli((baseline.milli() + noise_milli(&cfg.noise, &mut rng, baseline)).max(0));
            MeterReading { household, slot: SlotIndex(day * SLOTS_PER_DAY + s), kwh }
        })
        .collect()
}

/// A complete household-month as a slot-ordered array.
pub fn generate_household_month(cfg: &DatagenConfig, household: HouseholdId) -> HouseholdMonth {
    let mut readings = Vec::with_capacity(cfg.month.slots() as usize);
    for day in 0..cfg.month.days {
        readings.extend(generate_household_day(cfg, household, day).into_iter().map(|r| r.kwh));
    }
    HouseholdMonth { household, readings }
}

/// `count` households on concentrator 0.
pub fn generate_month(cfg: &DatagenConfig, count: u32) -> Vec<HouseholdMonth> {
    generate_grid_month(cfg, 1, count)
}

/// The full grid's month, concentrator-major: all of cn 0's households,
/// then cn 1's, and so on.
pub fn generate_grid_month(cfg: &DatagenConfig, cn_count: u32, households_per_cn: u32) -> Vec<HouseholdMonth> {
    let mut out = Vec::with_capacity((cn_count * households_per_cn) as usize);
    for cn in 0..cn_count {
        for local in 0..households_per_cn {
            out.push(generate_household_month(cfg, HouseholdId::new(cn, local)));
        }
    }
    out
}

/// CSV dump of generated data: `household,slot,kwh`, households in
/// generation order, slots ascending.
pub fn write_csv<W: std::io::Write>(data: &[HouseholdMonth], mut w: W) -> std::io::Result<()> {
    writeln!(w, "household,slot,kwh")?;
    for hm in data {
        for (s, kwh) in hm.readings.iter().enumerate() {
            writeln!(w, "{},{},{}", hm.household, s, kwh)?;
        }
    }
    Ok(())
}
