//! Multi-core billing sweep: wall times and speedups over a grid of
//! household counts and worker counts, the shape of the scalability
//! study the kernel exists for.

use std::time::Duration;

use crate::bench::measure;
use crate::datagen::{self, DatagenConfig};
use crate::mcb::{bill_all, BillingJob};
use crate::tariff::{default_bucket_set, BucketMask, PricingScheme};

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub seed: u64,
    pub sizes: Vec<u32>,
    pub workers: Vec<usize>,
    /// `times[w][s]` = median wall time for `workers[w]` over `sizes[s]`.
    pub times: Vec<Vec<Duration>>,
    pub repetitions: u32,
    pub physical_cores: usize,
    pub logical_cores: usize,
}

impl SweepResult {
    /// Speedup grid S(w) = T(1) / T(w), per size column.
    pub fn speedups(&self) -> Vec<Vec<f64>> {
        let base = &self.times[0];
        self.times
            .iter()
            .map(|row| {
                row.iter()
                    .zip(base)
                    .map(|(t, t1)| {
                        if t.is_zero() {
                            f64::INFINITY
                        } else {
                            t1.as_secs_f64() / t.as_secs_f64()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn matrix_csv(&self, cell: impl Fn(usize, usize) -> String) -> String {
        let mut out = String::from("workers");
        for size in &self.sizes {
            out.push_str(&format!(",h{size}"));
        }
        out.push('\n');
        for (w, &workers) in self.workers.iter().enumerate() {
            out.push_str(&workers.to_string());
            for s in 0..self.sizes.len() {
                out.push(',');
                out.push_str(&cell(w, s));
            }
            out.push('\n');
        }
        out
    }

    /// Wall-time matrix (seconds at nanosecond precision), workers down,
    /// sizes across.
    pub fn times_csv(&self) -> String {
        self.matrix_csv(|w, s| format!("{:.9}", self.times[w][s].as_secs_f64()))
    }

    /// Speedup matrix in the same shape.
    pub fn speedup_csv(&self) -> String {
        let speedups = self.speedups();
        self.matrix_csv(|w, s| format!("{:.3}", speedups[w][s]))
    }

    pub fn render(&self) -> String {
        let speedups = self.speedups();
        let mut out = format!(
            "in-memory billing sweep: seed {}, median of {}, host {} physical / {} logical cores\n",
            self.seed, self.repetitions, self.physical_cores, self.logical_cores
        );
        out.push_str("workers");
        for size in &self.sizes {
            out.push_str(&format!("  {:>12}", format!("{size}hh")));
        }
        out.push('\n');
        for (w, &workers) in self.workers.iter().enumerate() {
            out.push_str(&format!("{workers:>7}"));
            for s in 0..self.sizes.len() {
                out.push_str(&format!(
                    "  {:>8.3}s {:>4}",
                    self.times[w][s].as_secs_f64(),
                    format!("x{:.2}", speedups[w][s])
                ));
            }
            out.push('\n');
        }
        out
    }
}

/// Times the in-memory billing kernel over every (size, workers) cell.
/// Datasets are generated once per size; each cell is a warm-up plus
/// `repetitions` timed runs, reported as the median.
pub fn sweep_mcb(
    base: &DatagenConfig,
    sizes: &[u32],
    workers: &[usize],
    repetitions: u32,
) -> SweepResult {
    let set = default_bucket_set(base.month, &PricingScheme::Tou).expect("default set partitions");
    let mask = BucketMask::build(&set).expect("validated set");
    let prices = set.prices();
    let mut times = vec![vec![Duration::ZERO; sizes.len()]; workers.len()];
    for (s, &size) in sizes.iter().enumerate() {
        let households = datagen::generate_month(base, size);
        for (w, &worker_count) in workers.iter().enumerate() {
            let job = BillingJob { households: &households, mask: &mask, prices: &prices, worker_count };
            let (median, _) = measure::median_of(repetitions, || {
                let outcome = bill_all(&job);
                assert!(outcome.errors.is_empty(), "billing failed during sweep");
                outcome
            });
            times[w][s] = median;
        }
    }
    SweepResult {
        seed: base.global_seed,
        sizes: sizes.to_vec(),
        workers: workers.to_vec(),
        times,
        repetitions,
        physical_cores: measure::physical_cores(),
        logical_cores: measure::logical_cores(),
    }
}
