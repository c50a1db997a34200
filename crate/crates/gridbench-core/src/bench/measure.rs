//! Timing methodology: monotonic clock, optional warm-up run discarded,
//! median of N repetitions.

use std::time::{Duration, Instant};

pub fn time_it<R>(f: impl FnOnce() -> R) -> (R, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

/// Median; even sample counts average the two middle values.
pub fn median(samples: &[Duration]) -> Duration {
    assert!(!samples.is_empty(), "median of no samples");
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2
    }
}

/// Runs `f` once as a discarded warm-up, then `reps` timed repetitions.
/// Returns the median and the raw samples.
pub fn median_of<R>(reps: u32, mut f: impl FnMut() -> R) -> (Duration, Vec<Duration>) {
    let _ = f();
    let samples: Vec<Duration> = (0..reps.max(1)).map(|_| time_it(&mut f).1).collect();
    (median(&samples), samples)
}

/// Physical core count: distinct (physical id, core id) pairs from
/// /proc/cpuinfo, falling back to the logical count elsewhere.
pub fn physical_cores() -> usize {
    if let Ok(text) = std::fs::read_to_string("/proc/cpuinfo") {
        let mut cores = std::collections::HashSet::new();
        let (mut phys, mut core) = (None::<u64>, None::<u64>);
        for line in text.lines().chain(Some("")) {
            if line.is_empty() {
                if let (Some(p), Some(c)) = (phys, core) {
                    cores.insert((p, c));
                }
                phys = None;
                core = None;
                continue;
            }
            if let Some((key, value)) = line.split_once(':') {
                let value = value.trim();
                match key.trim() {
                    "physical id" => phys = value.parse().ok(),
                    "core id" => core = value.parse().ok(),
                    _ => {}
                }
            }
        }
        if !cores.is_empty() {
            return cores.len();
        }
    }
    logical_cores()
}

pub fn logical_cores() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
