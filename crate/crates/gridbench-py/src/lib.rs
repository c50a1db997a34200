//! Python bindings for the benchmark core: synthetic data generation,
//! bucket sets and masks, the billing kernel with its brute-force
//! oracle, and the cross-architecture verifier.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use gridbench_core::bench;
use gridbench_core::datagen::{self, DatagenConfig};
use gridbench_core::domain::{HouseholdId, Kwh, Money, MonthSpec};
use gridbench_core::mcb::{self, BillingJob, HouseholdMonth};
use gridbench_core::tariff::{self, BucketMask, PricingScheme};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn month_spec(year: i32, month: u32, days: u32) -> PyResult<MonthSpec> {
    MonthSpec::new(year, month, days).map_err(value_err)
}

/// A validated tariff partition of one month's slots.
#[pyclass(name = "BucketSet")]
struct PyBucketSet {
    inner: tariff::BucketSet,
}

#[pymethods]
impl PyBucketSet {
    fn labels(&self) -> Vec<String> {
        self.inner.buckets().iter().map(|b| b.label.clone()).collect()
    }

    /// Price per kWh for each bucket, as micro-currency integers.
    fn prices_micro(&self) -> Vec<i64> {
        self.inner.prices().iter().map(|p| p.micro()).collect()
    }

    fn prices(&self) -> Vec<f64> {
        self.inner.prices().iter().map(|p| p.micro() as f64 / 1e6).collect()
    }

    /// Bucket id of a month-relative slot index.
    fn classify(&self, slot: u32) -> PyResult<usize> {
        if slot >= self.inner.month().slots() {
            return Err(value_err(format!("slot {slot} outside the month grid")));
        }
        Ok(self.inner.classify(gridbench_core::domain::SlotIndex(slot)))
    }

    fn slots(&self) -> u32 {
        self.inner.month().slots()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Bill", skip_from_py_object)]
#[derive(Clone)]
struct PyBill {
    #[pyo3(get)]
    household: String,
    /// Exact per-bucket energy in thousandths of a kWh.
    #[pyo3(get)]
    per_bucket_kwh_milli: Vec<i64>,
    /// Exact amount in billionths of a currency unit.
    #[pyo3(get)]
    total_nano: i64,
}

#[pymethods]
impl PyBill {
    fn per_bucket_kwh(&self) -> Vec<f64> {
        self.per_bucket_kwh_milli.iter().map(|&m| m as f64 / 1e3).collect()
    }

    fn total(&self) -> f64 {
        self.total_nano as f64 / 1e9
    }

    fn __repr__(&self) -> String {
        format!("Bill(household={:?}, total={})", self.household, self.total())
    }
}

fn to_py_bill(line: &mcb::BillLine) -> PyBill {
    PyBill {
        household: line.household.to_string(),
        per_bucket_kwh_milli: line.per_bucket_kwh.iter().map(|k| k.milli()).collect(),
        total_nano: line.total_amount.nano(),
    }
}

fn households_from_milli(readings: Vec<Vec<i64>>, slots: u32) -> PyResult<Vec<HouseholdMonth>> {
    readings
        .into_iter()
        .enumerate()
        .map(|(i, values)| {
            if values.len() != slots as usize {
                return Err(value_err(format!(
                    "household {i}: {} readings for a {slots}-slot month",
                    values.len()
                )));
            }
            Ok(HouseholdMonth {
                household: HouseholdId::new(0, i as u32),
                readings: values.into_iter().map(Kwh::from_milli).collect(),
            })
        })
        .collect()
}

/// The shipped 8-bucket time-of-use tariff, or its critical-peak variant.
#[pyfunction]
#[pyo3(signature = (year=2009, month=1, days=31, scheme="tou"))]
fn default_bucket_set(year: i32, month: u32, days: u32, scheme: &str) -> PyResult<PyBucketSet> {
    let spec = month_spec(year, month, days)?;
    let scheme = match scheme {
        "tou" => PricingScheme::Tou,
        "cpp" => PricingScheme::Cpp {
            critical: vec![tariff::CriticalClause {
                day_type: gridbench_core::domain::DayType::Workday,
                start: 72,
                end: 80,
                price: "0.40".parse().map_err(value_err)?,
            }],
        },
        other => return Err(value_err(format!("scheme {other:?} (expected tou or cpp)"))),
    };
    Ok(PyBucketSet { inner: tariff::default_bucket_set(spec, &scheme).map_err(value_err)? })
}

/// Deterministic synthetic month: one list of kWh values (thousandths)
/// per household, slot order.
#[pyfunction]
#[pyo3(signature = (seed, households, year=2009, month=1, days=31))]
fn generate_month_milli(seed: u64, households: u32, year: i32, month: u32, days: u32) -> PyResult<Vec<Vec<i64>>> {
    let cfg = DatagenConfig::new(seed, month_spec(year, month, days)?);
    Ok(datagen::generate_month(&cfg, households)
        .into_iter()
        .map(|hm| hm.readings.iter().map(|k| k.milli()).collect())
        .collect())
}

/// Same data as floats (kWh).
#[pyfunction]
#[pyo3(signature = (seed, households, year=2009, month=1, days=31))]
fn generate_month(seed: u64, households: u32, year: i32, month: u32, days: u32) -> PyResult<Vec<Vec<f64>>> {
    Ok(generate_month_milli(seed, households, year, month, days)?
        .into_iter()
        .map(|hm| hm.into_iter().map(|m| m as f64 / 1e3).collect())
        .collect())
}

/// The precomputed indirection: (mask, [(offset, len) per bucket]).
#[pyfunction]
fn build_mask(set: &PyBucketSet) -> PyResult<(Vec<u32>, Vec<(usize, usize)>)> {
    let mask = BucketMask::build(&set.inner).map_err(value_err)?;
    Ok((
        mask.mask().to_vec(),
        mask.boundaries().iter().map(|b| (b.offset, b.len)).collect(),
    ))
}

/// Multi-core billing over complete household-months given as milli-kWh
/// lists. Returns one Bill per household, independent of `workers`.
#[pyfunction]
#[pyo3(signature = (readings_milli, set, workers=1))]
fn bill(readings_milli: Vec<Vec<i64>>, set: &PyBucketSet, workers: usize) -> PyResult<Vec<PyBill>> {
    if workers == 0 {
        return Err(value_err("workers must be at least 1"));
    }
    let households = households_from_milli(readings_milli, set.inner.month().slots())?;
    let mask = BucketMask::build(&set.inner).map_err(value_err)?;
    let prices = set.inner.prices();
    let outcome = mcb::bill_all(&BillingJob { households: &households, mask: &mask, prices: &prices, worker_count: workers });
    if let Some((household, e)) = outcome.errors.first() {
        return Err(value_err(format!("billing {household}: {e}")));
    }
    Ok(outcome.bills.iter().map(to_py_bill).collect())
}

/// Reference bill via per-reading conditional classification; the oracle
/// the kernel must agree with exactly.
#[pyfunction]
fn brute_force_bill(readings_milli: Vec<Vec<i64>>, set: &PyBucketSet) -> PyResult<Vec<PyBill>> {
    let households = households_from_milli(readings_milli, set.inner.month().slots())?;
    let prices = set.inner.prices();
    households
        .iter()
        .map(|hm| {
            mcb::brute_force_bill(hm.household, &hm.readings, &set.inner, &prices)
                .map(|line| to_py_bill(&line))
                .map_err(value_err)
        })
        .collect()
}

/// SHA-256 checksum of the canonical encoding of a bill list.
#[pyfunction]
fn bill_checksum(bills: Vec<PyRef<PyBill>>) -> PyResult<String> {
    let lines: Vec<mcb::BillLine> = bills
        .iter()
        .map(|b| {
            Ok(mcb::BillLine {
                household: b.household.parse().map_err(value_err)?,
                per_bucket_kwh: b.per_bucket_kwh_milli.iter().map(|&m| Kwh::from_milli(m)).collect(),
                total_amount: Money::from_nano(b.total_nano),
            })
        })
        .collect::<PyResult<_>>()?;
    Ok(bench::bill_checksum(&lines))
}

/// Runs one config through all four storage architectures and returns
/// `[(architecture, checksum)]`; equal checksums mean equal bills.
#[pyfunction]
fn verify_config(config_toml: &str) -> PyResult<Vec<(String, String)>> {
    let cfg = bench::parse_config(config_toml).map_err(value_err)?;
    let outcome = bench::verify_architectures(&cfg).map_err(value_err)?;
    Ok(outcome
        .checksums
        .into_iter()
        .map(|(arch, sum)| (arch.name().to_string(), sum))
        .collect())
}

#[pymodule]
fn gridbench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBucketSet>()?;
    m.add_class::<PyBill>()?;
    m.add_function(wrap_pyfunction!(default_bucket_set, m)?)?;
    m.add_function(wrap_pyfunction!(generate_month, m)?)?;
    m.add_function(wrap_pyfunction!(generate_month_milli, m)?)?;
    m.add_function(wrap_pyfunction!(build_mask, m)?)?;
    m.add_function(wrap_pyfunction!(bill, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_bill, m)?)?;
    m.add_function(wrap_pyfunction!(bill_checksum, m)?)?;
    m.add_function(wrap_pyfunction!(verify_config, m)?)?;
    Ok(())
}
