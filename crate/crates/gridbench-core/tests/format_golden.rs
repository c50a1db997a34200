//! Golden-file tests pinning the storage encodings byte for byte. The
//! fixtures were produced from the scenario below (seed 77, 2-day toy
//! month) and checked in; any drift in the formats or in the generator's
//! determinism shows up as a byte diff here.

use gridbench_core::datagen::{self, DatagenConfig};
use gridbench_core::domain::HouseholdId;
use gridbench_core::storage::formats;
use gridbench_core::testkit;

fn fixture(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn cfg() -> DatagenConfig {
    DatagenConfig::new(77, testkit::toy_month(2))
}

#[test]
fn a3_blob_bytes_are_stable() {
    let cfg = cfg();
    let mut blob = String::new();
    for day in 0..2 {
        formats::append_blob_entries(&mut blob, &testkit::cn_day_batch(&cfg, 0, 1, day));
    }
    assert_eq!(blob, fixture("a3_blob_0-0.xml"));
}

#[test]
fn a4_consumption_bytes_are_stable() {
    let cfg = cfg();
    let mut lines = String::new();
    for day in 0..2 {
        let batch = datagen::generate_household_day(&cfg, HouseholdId::new(1, 0), day);
        lines.push_str(&formats::consumption_lines(&batch));
    }
    assert_eq!(lines, fixture("a4_consumption_1-0.dat"));
}

#[test]
fn a4_timestamp_bytes_are_stable() {
    let m = testkit::toy_month(2);
    let mut ts = String::new();
    for day in 0..2 {
        ts.push_str(&formats::timestamp_lines(&m, day));
    }
    assert_eq!(ts, fixture("a4_timestamps.dat"));
}

#[test]
fn golden_files_parse_back() {
    let m = testkit::toy_month(2);
    let blob = fixture("a3_blob_0-0.xml");
    assert_eq!(formats::parse_blob(&blob).unwrap().len(), 192);
    let values = formats::parse_consumption(&fixture("a4_consumption_1-0.dat")).unwrap();
    assert_eq!(values.len(), 192);
    assert_eq!(formats::parse_timestamps(&m, &fixture("a4_timestamps.dat")).unwrap(), 192);
}
