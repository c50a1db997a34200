//! Core value types shared by every other module: readings, calendar and
//! slot arithmetic, identifiers, and the fixed-point units that make
//! cross-backend bill comparison exact.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 15-minute readings: 96 per day.
pub const SLOTS_PER_DAY: u32 = 96;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("invalid time component day={day} {hour:02}:{minute:02}")]
    InvalidTime { day: u32, hour: u32, minute: u32 },
    #[error("invalid month spec: {0}")]
    InvalidMonth(String),
    #[error("negative energy value {0} kWh")]
    NegativeKwh(Kwh),
}

/// Household-month completeness violations, reported in ascending slot
/// order with duplicates taking precedence over gaps at the same slot.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("missing reading for slot {0}")]
    MissingSlot(u32),
    #[error("duplicate reading for slot {0}")]
    DuplicateSlot(u32),
    #[error("slot {0} outside the month grid")]
    SlotOutOfRange(u32),
    #[error("readings from more than one household")]
    MixedHouseholds,
}

fn pow10(digits: u32) -> i64 {
    10i64.pow(digits)
}

/// Parse a plain decimal string into a scaled integer with `frac` fractional
/// digits. Rejects anything finer than the scale can hold.
pub fn parse_fixed(s: &str, frac: u32) -> Result<i64, String> {
    let s = s.trim();
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match rest.split_once('.') {
        Some((i, f)) => (i, f),
        None => (rest, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(format!("empty decimal: {s:?}"));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(format!("malformed decimal: {s:?}"));
    }
    if frac_part.len() > frac as usize && frac_part[frac as usize..].chars().any(|c| c != '0') {
        return Err(format!("{s:?} has more than {frac} fractional digits"));
    }
    let int_val: i64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|e| format!("{s:?}: {e}"))?
    };
    let mut frac_val: i64 = 0;
    for (i, c) in frac_part.chars().take(frac as usize).enumerate() {
        frac_val += (c as i64 - '0' as i64) * pow10(frac - 1 - i as u32);
    }
    let v = int_val
        .checked_mul(pow10(frac))
        .and_then(|v| v.checked_add(frac_val))
        .ok_or_else(|| format!("{s:?} overflows the fixed-point range"))?;
    Ok(if neg { -v } else { v })
}

/// Render a scaled integer as a decimal with exactly `frac` fractional digits.
pub fn format_fixed(v: i64, frac: u32) -> String {
    let scale = pow10(frac);
    let sign = if v < 0 { "-" } else { "" };
    let abs = v.unsigned_abs();
    format!(
        "{sign}{}.{:0width$}",
        abs / scale as u64,
        abs % scale as u64,
        width = frac as usize
    )
}

/// Energy in thousandths of a kWh (watt-hour resolution).
///
/// Integer arithmetic keeps sums associative, so billing results cannot
/// depend on reduction order or worker count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Kwh(i64);

impl Kwh {
    pub const ZERO: Kwh = Kwh(0);
    pub const FRAC_DIGITS: u32 = 3;

    pub fn from_milli(milli: i64) -> Self {
        Kwh(milli)
    }

    pub fn milli(self) -> i64 {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    /// Nearest representable value; ties round away from zero.
    pub fn from_f64(kwh: f64) -> Self {
        Kwh((kwh * 1000.0).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn clamp_non_negative(self) -> Self {
        Kwh(self.0.max(0))
    }
}

impl std::ops::Add for Kwh {
    type Output = Kwh;
    fn add(self, rhs: Kwh) -> Kwh {
        Kwh(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for Kwh {
    fn add_assign(&mut self, rhs: Kwh) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for Kwh {
    fn sum<I: Iterator<Item = Kwh>>(iter: I) -> Kwh {
        Kwh(iter.map(|k| k.0).sum())
    }
}

impl fmt::Display for Kwh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_fixed(self.0, Self::FRAC_DIGITS))
    }
}

impl FromStr for Kwh {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_fixed(s, Self::FRAC_DIGITS).map(Kwh)
    }
}

/// Price in millionths of a currency unit per kWh.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Price(i64);

impl Price {
    pub const FRAC_DIGITS: u32 = 6;

    pub fn from_micro(micro: i64) -> Self {
        Price(micro)
    }

    pub fn micro(self) -> i64 {
        self.0
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_fixed(self.0, Self::FRAC_DIGITS))
    }
}

impl FromStr for Price {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_fixed(s, Self::FRAC_DIGITS).map(Price)
    }
}

/// Monetary amount in billionths of a currency unit: exactly the product
/// scale of [`Kwh`] (1e-3) and [`Price`] (1e-6), so `kwh * price` never
/// rounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);
    pub const FRAC_DIGITS: u32 = 9;

    pub fn from_nano(nano: i64) -> Self {
        Money(nano)
    }

    pub fn nano(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }
}

impl std::ops::Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

impl std::ops::Mul<Price> for Kwh {
    type Output = Money;
    fn mul(self, price: Price) -> Money {
        let wide = self.0 as i128 * price.0 as i128;
        Money(i64::try_from(wide).expect("bill amount exceeds the fixed-point range"))
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_fixed(self.0, Self::FRAC_DIGITS))
    }
}

impl FromStr for Money {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_fixed(s, Self::FRAC_DIGITS).map(Money)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConcentratorId(pub u32);

impl fmt::Display for ConcentratorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Globally unique household identity: the concentrator it is linked to
/// plus a local index within that concentrator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HouseholdId {
    pub cn: ConcentratorId,
    pub local_index: u32,
}

impl HouseholdId {
    pub fn new(cn: u32, local_index: u32) -> Self {
        HouseholdId { cn: ConcentratorId(cn), local_index }
    }

    /// Stable scalar key used for file-system sharding.
    pub fn key(self) -> u64 {
        (self.cn.0 as u64) << 32 | self.local_index as u64
    }
}

impl fmt::Display for HouseholdId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.cn.0, self.local_index)
    }
}

impl FromStr for HouseholdId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (cn, local) = s.split_once('-').ok_or_else(|| format!("bad household id {s:?}"))?;
        Ok(HouseholdId {
            cn: ConcentratorId(cn.parse().map_err(|e| format!("bad household id {s:?}: {e}"))?),
            local_index: local.parse().map_err(|e| format!("bad household id {s:?}: {e}"))?,
        })
    }
}

/// Index of one 15-minute interval within a month, relative to slot 0 at
/// 00:00 of the month's first day.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlotIndex(pub u32);

impl SlotIndex {
    pub fn value(self) -> u32 {
        self.0
    }

    pub fn day(self) -> u32 {
        self.0 / SLOTS_PER_DAY
    }

    pub fn slot_of_day(self) -> u32 {
        self.0 % SLOTS_PER_DAY
    }
}

impl fmt::Display for SlotIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Workday,
    Weekend,
}

/// Month grid the whole harness runs against. Billing is entirely
/// month-relative; `year`/`month` only anchor weekday arithmetic and
/// timestamp rendering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthSpec {
    pub year: i32,
    pub month: u32,
    pub days: u32,
    /// Bitmask over weekdays, bit 0 = Monday .. bit 6 = Sunday.
    pub weekend_days: u8,
}

pub const WEEKEND_SAT_SUN: u8 = 0b110_0000;

impl MonthSpec {
    pub fn new(year: i32, month: u32, days: u32) -> Result<Self, DomainError> {
        if !(1..=12).contains(&month) {
            return Err(DomainError::InvalidMonth(format!("month {month} out of 1..=12")));
        }
        if !(28..=31).contains(&days) {
            return Err(DomainError::InvalidMonth(format!("{days} days out of 28..=31")));
        }
        NaiveDate::from_ymd_opt(year, month, 1)
            .ok_or_else(|| DomainError::InvalidMonth(format!("{year}-{month:02} is not a date")))?;
        Ok(MonthSpec { year, month, days, weekend_days: WEEKEND_SAT_SUN })
    }

    pub fn with_weekend_days(mut self, weekend_days: u8) -> Self {
        self.weekend_days = weekend_days & 0x7f;
        self
    }

    pub fn slots(&self) -> u32 {
        self.days * SLOTS_PER_DAY
    }

    fn first_day(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("validated at construction")
    }

    /// Calendar date of the given zero-based day of the grid. A `days`
    /// override longer than the real month simply rolls forward.
    pub fn date(&self, day: u32) -> NaiveDate {
        self.first_day() + Duration::days(day as i64)
    }

    pub fn day_type(&self, day: u32) -> DayType {
        let weekday = self.date(day).weekday().num_days_from_monday() as u8;
        if self.weekend_days & (1 << weekday) != 0 {
            DayType::Weekend
        } else {
            DayType::Workday
        }
    }

    pub fn slot_day_type(&self, slot: SlotIndex) -> DayType {
        self.day_type(slot.day())
    }

    /// `YYYY-MM-DDTHH:MM` rendering used by the shared timestamp file.
    pub fn slot_timestamp(&self, slot: SlotIndex) -> String {
        let date = self.date(slot.day());
        let s = slot.slot_of_day();
        format!("{}T{:02}:{:02}", date.format("%Y-%m-%d"), s / 4, (s % 4) * 15)
    }
}

/// One household's kWh consumption for one 15-minute slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeterReading {
    pub household: HouseholdId,
    pub slot: SlotIndex,
    pub kwh: Kwh,
}

impl MeterReading {
    pub fn new(household: HouseholdId, slot: SlotIndex, kwh: Kwh) -> Result<Self, DomainError> {
        if kwh.is_negative() {
            return Err(DomainError::NegativeKwh(kwh));
        }
        Ok(MeterReading { household, slot, kwh })
    }
}

/// Slot index for (day, hour, minute) on the 15-minute grid.
pub fn slot_index(month: &MonthSpec, day: u32, hour: u32, minute: u32) -> Result<SlotIndex, DomainError> {
    if day >= month.days || hour >= 24 || minute % 15 != 0 || minute >= 60 {
        return Err(DomainError::InvalidTime { day, hour, minute });
    }
    Ok(SlotIndex(day * SLOTS_PER_DAY + hour * 4 + minute / 15))
}

/// Checks that `readings` form exactly one complete household-month:
/// every slot of the grid present once, all rows from a single household.
pub fn validate_household_month(month: &MonthSpec, readings: &[MeterReading]) -> Result<(), ValidationError> {
    let slots = month.slots();
    let mut counts = vec![0u32; slots as usize];
    let mut household = None;
    for r in readings {
        match household {
            None => household = Some(r.household),
            Some(h) if h != r.household => return Err(ValidationError::MixedHouseholds),
            _ => {}
        }
        let s = r.slot.value();
        if s >= slots {
            return Err(ValidationError::SlotOutOfRange(s));
        }
        counts[s as usize] += 1;
    }
    // Ascending scan; a duplicate at slot s is reported before a gap at s
    // or anywhere later.
    for (s, &c) in counts.iter().enumerate() {
        if c > 1 {
            return Err(ValidationError::DuplicateSlot(s as u32));
        }
        if c == 0 {
            return Err(ValidationError::MissingSlot(s as u32));
        }
    }
    Ok(())
}
