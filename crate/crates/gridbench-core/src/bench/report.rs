//! Experiment reports: the canonical bill encoding and its checksum (the
//! cross-architecture equivalence witness), the long-format measurement
//! CSV, and human-readable table rendering.
//!
//! CSV schema: `run_id,architecture,metric,value,unit`, one row per
//! measurement, stable column order. Durations are integer nanoseconds
//! (unit `ns`) so a report survives a CSV round trip losslessly. No field
//! ever contains a comma.

use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::mcb::BillLine;
use crate::storage::Architecture;

/// Canonical text encoding of a bill list: households sorted by id, one
/// line per household with per-bucket kWh then the total amount.
pub fn canonical_bill_lines(bills: &[BillLine]) -> String {
    let mut sorted: Vec<&BillLine> = bills.iter().collect();
    sorted.sort_by_key(|b| b.household);
    let mut out = String::new();
    for line in sorted {
        out.push_str(&line.household.to_string());
        for kwh in &line.per_bucket_kwh {
            out.push(',');
            out.push_str(&kwh.to_string());
        }
        out.push(',');
        out.push_str(&line.total_amount.to_string());
        out.push('\n');
    }
    out
}

/// SHA-256 over the canonical encoding, lowercase hex. Equal data and
/// tariffs give equal checksums whatever architecture produced the bills.
pub fn bill_checksum(bills: &[BillLine]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_bill_lines(bills).as_bytes());
    hex_string(&hasher.finalize())
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Measurement {
    pub run_id: String,
    pub architecture: String,
    pub metric: String,
    pub value: String,
    pub unit: String,
}

pub const CSV_HEADER: &str = "run_id,architecture,metric,value,unit";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExperimentReport {
    pub run_id: String,
    pub architecture: Architecture,
    pub methodology: String,
    /// One wall time per day of the month, in ingest order.
    pub ingest_days: Vec<Duration>,
    /// Median monthly bill time.
    pub bill_time: Duration,
    /// Median cold-start load time (architecture IV only).
    pub cold_start: Option<Duration>,
    /// Median in-memory billing time per worker count.
    pub mcb_times: Vec<(usize, Duration)>,
    pub bill_checksum: String,
    pub physical_cores: usize,
    pub logical_cores: usize,
}

impl ExperimentReport {
    pub fn measurements(&self) -> Vec<Measurement> {
        let row = |metric: String, value: String, unit: &str| Measurement {
            run_id: self.run_id.clone(),
            architecture: self.architecture.name().to_string(),
            metric,
            value,
            unit: unit.to_string(),
        };
        let mut rows = vec![
            row("methodology".into(), self.methodology.clone(), "text"),
            row("host_physical_cores".into(), self.physical_cores.to_string(), "cores"),
            row("host_logical_cores".into(), self.logical_cores.to_string(), "cores"),
        ];
        for (day, d) in self.ingest_days.iter().enumerate() {
            rows.push(row(format!("ingest_day_{day:02}"), d.as_nanos().to_string(), "ns"));
        }
        rows.push(row("bill_time".into(), self.bill_time.as_nanos().to_string(), "ns"));
        if let Some(cold) = self.cold_start {
            rows.push(row("cold_start".into(), cold.as_nanos().to_string(), "ns"));
        }
        for (workers, d) in &self.mcb_times {
            rows.push(row(format!("mcb_time_w{workers}"), d.as_nanos().to_string(), "ns"));
        }
        rows.push(row("bill_checksum".into(), self.bill_checksum.clone(), "sha256"));
        rows
    }

    /// Rebuilds a report from its own measurement rows (all rows must
    /// share one run id).
    pub fn from_measurements(rows: &[Measurement]) -> Result<Self, String> {
        let first = rows.first().ok_or("no measurement rows")?;
        let run_id = first.run_id.clone();
        let architecture: Architecture = first.architecture.parse()?;
        let mut report = ExperimentReport {
            run_id,
            architecture,
            methodology: String::new(),
            ingest_days: Vec::new(),
            bill_time: Duration::ZERO,
            cold_start: None,
            mcb_times: Vec::new(),
            bill_checksum: String::new(),
            physical_cores: 0,
            logical_cores: 0,
        };
        let ns = |m: &Measurement| -> Result<Duration, String> {
            let nanos: u128 = m.value.parse().map_err(|e| format!("{}: {e}", m.metric))?;
            Ok(Duration::from_nanos(nanos as u64))
        };
        let mut ingest: Vec<(usize, Duration)> = Vec::new();
        for m in rows {
            if m.run_id != report.run_id {
                return Err(format!("mixed run ids {} and {}", report.run_id, m.run_id));
            }
            match m.metric.as_str() {
                "methodology" => report.methodology = m.value.clone(),
                "host_physical_cores" => report.physical_cores = m.value.parse().map_err(|e| format!("{e}"))?,
                "host_logical_cores" => report.logical_cores = m.value.parse().map_err(|e| format!("{e}"))?,
                "bill_time" => report.bill_time = ns(m)?,
                "cold_start" => report.cold_start = Some(ns(m)?),
                "bill_checksum" => report.bill_checksum = m.value.clone(),
                metric => {
                    if let Some(day) = metric.strip_prefix("ingest_day_") {
                        ingest.push((day.parse().map_err(|e| format!("{e}"))?, ns(m)?));
                    } else if let Some(w) = metric.strip_prefix("mcb_time_w") {
                        report.mcb_times.push((w.parse().map_err(|e| format!("{e}"))?, ns(m)?));
                    } else {
                        return Err(format!("unknown metric {metric:?}"));
                    }
                }
            }
        }
        ingest.sort_by_key(|&(day, _)| day);
        report.ingest_days = ingest.into_iter().map(|(_, d)| d).collect();
        Ok(report)
    }
}

/// Appends rows to a CSV string, emitting the header only when starting
/// from empty. Rows of one run stay contiguous.
pub fn append_csv(existing: &mut String, rows: &[Measurement]) {
    if existing.is_empty() {
        existing.push_str(CSV_HEADER);
        existing.push('\n');
    }
    for m in rows {
        existing.push_str(&format!("{},{},{},{},{}\n", m.run_id, m.architecture, m.metric, m.value, m.unit));
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<Measurement>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(format!("bad header {other:?}")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let mut parts = line.split(',');
            let mut next = || parts.next().map(str::to_string).ok_or(format!("line {}: too few fields", i + 2));
            let m = Measurement {
                run_id: next()?,
                architecture: next()?,
                metric: next()?,
                value: next()?,
                unit: next()?,
            };
            if parts.next().is_some() {
                return Err(format!("line {}: too many fields", i + 2));
            }
            Ok(m)
        })
        .collect()
}

fn secs(d: Duration) -> String {
    format!("{:.6}", d.as_secs_f64())
}

/// Human-readable rendering of one report.
pub fn render_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("run {} ({})\n", report.run_id, report.architecture));
    out.push_str(&format!("methodology: {}\n", report.methodology));
    out.push_str(&format!(
        "host: {} physical / {} logical cores\n",
        report.physical_cores, report.logical_cores
    ));
    if !report.ingest_days.is_empty() {
        let total: Duration = report.ingest_days.iter().sum();
        let worst = report.ingest_days.iter().max().expect("non-empty");
        out.push_str(&format!(
            "ingest: {} days, total {} s, median {} s, max {} s\n",
            report.ingest_days.len(),
            secs(total),
            secs(super::measure::median(&report.ingest_days)),
            secs(*worst),
        ));
    }
    out.push_str(&format!("bill time: {} s\n", secs(report.bill_time)));
    if let Some(cold) = report.cold_start {
        out.push_str(&format!("cold start: {} s\n", secs(cold)));
    }
    if !report.mcb_times.is_empty() {
        out.push_str("in-memory billing:\n");
        out.push_str("  workers    time_s    speedup\n");
        let t1 = report
            .mcb_times
            .iter()
            .find(|(w, _)| *w == 1)
            .map(|(_, d)| *d);
        for (workers, d) in &report.mcb_times {
            let speedup = match t1 {
                Some(t1) if !d.is_zero() => format!("{:.2}", t1.as_secs_f64() / d.as_secs_f64()),
                _ => "-".to_string(),
            };
            out.push_str(&format!("  {workers:>7}  {:>9}  {speedup:>7}\n", secs(*d)));
        }
    }
    out.push_str(&format!("bill checksum: {}\n", report.bill_checksum));
    out
}
