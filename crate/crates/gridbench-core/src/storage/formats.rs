//! The byte-exact encodings shared by storage backends, fixtures, and the
//! serialized message mode. See docs/formats.md for the written schema.
//!
//! - monthly blob: a flat sequence of `<r t="SLOT" v="KWH"/>` elements,
//!   append-friendly (no enclosing root element)
//! - consumption file: one kWh decimal per line, slot order
//! - timestamp file: `SLOT,YYYY-MM-DDTHH:MM` per line, slot order

use crate::domain::{HouseholdId, Kwh, MeterReading, MonthSpec, SlotIndex};

/// One blob element for a reading.
pub fn blob_entry(slot: SlotIndex, kwh: Kwh) -> String {
    format!("<r t=\"{}\" v=\"{}\"/>", slot.value(), kwh)
}

/// Appends a batch of readings to a blob string in the given order.
pub fn append_blob_entries(blob: &mut String, readings: &[MeterReading]) {
    for r in readings {
        blob.push_str(&blob_entry(r.slot, r.kwh));
    }
}

/// Parses a blob back into `(slot, kwh)` pairs in append order.
pub fn parse_blob(blob: &str) -> Result<Vec<(SlotIndex, Kwh)>, String> {
    let mut out = Vec::new();
    let mut rest = blob;
    while !rest.is_empty() {
        rest = rest
            .strip_prefix("<r t=\"")
            .ok_or_else(|| format!("expected <r element at byte {}", blob.len() - rest.len()))?;
        let (slot_txt, after) = rest.split_once('"').ok_or("unterminated t attribute")?;
        let rest2 = after.strip_prefix(" v=\"").ok_or("expected v attribute")?;
        let (kwh_txt, after_kwh) = rest2.split_once('"').ok_or("unterminated v attribute")?;
        rest = after_kwh.strip_prefix("/>").ok_or("expected element terminator")?;
        let slot: u32 = slot_txt.parse().map_err(|e| format!("bad slot {slot_txt:?}: {e}"))?;
        let kwh: Kwh = kwh_txt.parse().map_err(|e| format!("bad kwh {kwh_txt:?}: {e}"))?;
        out.push((SlotIndex(slot), kwh));
    }
    Ok(out)
}

/// Reassembles a blob's entries into a reading list for one household.
pub fn blob_to_readings(household: HouseholdId, blob: &str) -> Result<Vec<MeterReading>, String> {
    Ok(parse_blob(blob)?
        .into_iter()
        .map(|(slot, kwh)| MeterReading { household, slot, kwh })
        .collect())
}

/// Consumption-file lines for one day's readings (values only; the
/// shared timestamp file carries the time axis).
pub fn consumption_lines(readings: &[MeterReading]) -> String {
    let mut out = String::new();
    for r in readings {
        out.push_str(&r.kwh.to_string());
        out.push('\n');
    }
    out
}

pub fn parse_consumption(text: &str) -> Result<Vec<Kwh>, String> {
    text.lines()
        .enumerate()
        .map(|(i, line)| line.parse().map_err(|e: String| format!("line {}: {e}", i + 1)))
        .collect()
}

/// Timestamp-file lines for one day of the month grid.
pub fn timestamp_lines(month: &MonthSpec, day: u32) -> String {
    let mut out = String::new();
    for s in 0..crate::domain::SLOTS_PER_DAY {
        let slot = SlotIndex(day * crate::domain::SLOTS_PER_DAY + s);
        out.push_str(&format!("{},{}\n", slot.value(), month.slot_timestamp(slot)));
    }
    out
}

/// Checks a full timestamp file: ascending slots from zero, rendering
/// consistent with the month grid. Returns the slot count.
pub fn parse_timestamps(month: &MonthSpec, text: &str) -> Result<u32, String> {
    let mut expected = 0u32;
    for (i, line) in text.lines().enumerate() {
        let (slot_txt, stamp) = line.split_once(',').ok_or_else(|| format!("line {}: no comma", i + 1))?;
        let slot: u32 = slot_txt.parse().map_err(|e| format!("line {}: {e}", i + 1))?;
        if slot != expected {
            return Err(format!("line {}: slot {slot}, expected {expected}", i + 1));
        }
        if stamp != month.slot_timestamp(SlotIndex(slot)) {
            return Err(format!("line {}: timestamp {stamp:?} does not match the grid", i + 1));
        }
        expected += 1;
    }
    Ok(expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::HouseholdId;
    use crate::testkit;

    #[test]
    fn blob_entry_is_pinned() {
        assert_eq!(
            blob_entry(SlotIndex(742), Kwh::from_milli(1234)),
            "<r t=\"742\" v=\"1.234\"/>"
        );
    }

    #[test]
    fn blob_round_trip() {
        let hh = HouseholdId::new(0, 0);
        let m = testkit::toy_month(2);
        let data = testkit::random_household_month(5, &m, hh);
        let rows = testkit::readings_of(&data);
        let mut blob = String::new();
        append_blob_entries(&mut blob, &rows[..96]);
        append_blob_entries(&mut blob, &rows[96..]);
        assert_eq!(blob_to_readings(hh, &blob).unwrap(), rows);
    }

    #[test]
    fn blob_parse_rejects_garbage() {
        assert!(parse_blob("<r t=\"1\" v=\"0.100\"/>junk").is_err());
        assert!(parse_blob("<r t=\"x\" v=\"0.100\"/>").is_err());
        assert!(parse_blob("<r t=\"1\" v=\"0.1.0\"/>").is_err());
    }

    #[test]
    fn consumption_round_trip() {
        let m = testkit::toy_month(2);
        let data = testkit::random_household_month(6, &m, HouseholdId::new(0, 0));
        let rows = testkit::readings_of(&data);
        let text = consumption_lines(&rows);
        assert_eq!(parse_consumption(&text).unwrap(), data.readings);
    }

    #[test]
    fn timestamp_lines_match_grid() {
        let m = testkit::toy_month(2);
        let mut text = String::new();
        text.push_str(&timestamp_lines(&m, 0));
        text.push_str(&timestamp_lines(&m, 1));
        assert_eq!(parse_timestamps(&m, &text).unwrap(), 192);
        assert!(text.starts_with("0,2009-01-01T00:00\n1,2009-01-01T00:15\n"));
        // Out-of-order or day-skipping files are rejected.
        assert!(parse_timestamps(&m, &timestamp_lines(&m, 1)).is_err());
    }
}
