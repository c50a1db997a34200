//! Acceptance suite: every exit criterion of the harness, one test per
//! criterion, each printing a PASS/FAIL line (visible with
//! `cargo test --test acceptance -- --nocapture`). Criteria run
//! serially so the timing-sensitive ones are not perturbed.
//!
//! C01  cross-backend bill equivalence over seeds, grids, and schemes
//! C02  kernel vs brute-force oracle on 1,000 randomized instances
//! C03  mask permutation/stability/classify consistency, 200 sets
//! C04  worker-count invariance at 1K households
//! C05  multi-core speedup at 10K households (enforced on >=4 cores)
//! C06  volume accounting: 2976 readings/month, households+1 files
//! C07  cold-start round trip and missing-file attribution at 1K
//! C08  single-store serialization vs per-store parallelism gauges
//! C09  runtime stress: exactly-once, FIFO, no exclusive overlap
//! C10  bit-identical reruns: data dumps and bill checksums

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use gridbench_core::actors::{
    Actor, Context, Envelope, HandlerMode, Runtime, RuntimeConfig, Simulation, SimulationConfig,
};
use gridbench_core::bench::{self, measure, parse_config, run_experiment};
use gridbench_core::datagen::{self, DatagenConfig};
use gridbench_core::domain::{ConcentratorId, DayType, HouseholdId, Kwh, MonthSpec, SlotIndex};
use gridbench_core::mcb::{bill_all, bill_household, brute_force_bill, BillingJob};
use gridbench_core::storage::{ArchOne, ArchTwo, Architecture, BackendConfig, StorageBackend};
use gridbench_core::tariff::{default_bucket_set, BucketMask, CriticalClause, PricingScheme};
use gridbench_core::testkit;

fn gate() -> std::sync::MutexGuard<'static, ()> {
    static GATE: OnceLock<Mutex<()>> = OnceLock::new();
    GATE.get_or_init(Mutex::default)
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn criterion(id: &str, name: &str, check: impl FnOnce() -> Result<String, String>) {
    let _serial = gate();
    let started = Instant::now();
    match check() {
        Ok(detail) => {
            println!("ACCEPTANCE {id} {name}: PASS ({detail}; {:.1}s)", started.elapsed().as_secs_f64());
        }
        Err(reason) => {
            println!("ACCEPTANCE {id} {name}: FAIL ({reason})");
            panic!("{id} {name}: {reason}");
        }
    }
}

fn month() -> MonthSpec {
    MonthSpec::new(2009, 1, 31).unwrap()
}

fn cpp_variant() -> PricingScheme {
    PricingScheme::Cpp {
        critical: vec![CriticalClause {
            day_type: DayType::Workday,
            start: 72, // 18:00
            end: 80,   // 20:00
            price: "0.40".parse().unwrap(),
        }],
    }
}

fn pipeline_checksum(
    arch: Architecture,
    seed: u64,
    cn_count: u32,
    per_cn: u32,
    scheme: &PricingScheme,
    store_root: &std::path::Path,
) -> Result<String, String> {
    let mut cfg = SimulationConfig::new(arch, cn_count, per_cn, DatagenConfig::new(seed, month()));
    if arch == Architecture::A4 {
        cfg.store_dir = Some(store_root.join(format!("{arch}-s{seed}-c{cn_count}-{}", scheme.kind_name())));
    }
    let sim = Simulation::build(&cfg).map_err(|e| e.to_string())?;
    sim.run_month().map_err(|e| e.to_string())?;
    let set = default_bucket_set(month(), scheme).map_err(|e| e.to_string())?;
    let bills = sim.run_month_billing(&set).map_err(|e| e.to_string())?;
    sim.shutdown().map_err(|e| e.to_string())?;
    Ok(bench::bill_checksum(&bills))
}

#[test]
fn c01_cross_backend_equivalence() {
    criterion("C01", "cross-backend-equivalence", || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut combos = 0;
        for seed in [1u64, 42, 7] {
            for cn_count in [1u32, 3] {
                for scheme in [PricingScheme::Tou, cpp_variant()] {
                    let mut checksums = Vec::new();
                    for arch in Architecture::ALL {
                        checksums.push((
                            arch,
                            pipeline_checksum(arch, seed, cn_count, 100, &scheme, dir.path())?,
                        ));
                    }
                    let first = &checksums[0].1;
                    for (arch, sum) in &checksums {
                        if sum != first {
                            return Err(format!(
                                "seed {seed}, {cn_count} cn, {}: {arch} checksum {sum} != A1 {first}",
                                scheme.kind_name()
                            ));
                        }
                    }
                    combos += 1;
                }
            }
        }
        Ok(format!("{combos} configurations x 4 architectures bit-identical"))
    });
}

#[test]
fn c02_oracle_equivalence() {
    criterion("C02", "oracle-equivalence", || {
        let hh = HouseholdId::new(0, 0);
        for case in 0..1000u64 {
            let m = testkit::toy_month(2 + (case % 3) as u32);
            let set = testkit::random_bucket_set(case, m);
            let mask = BucketMask::build(&set).map_err(|e| e.to_string())?;
            let readings = testkit::random_kwh_month(case ^ 0x5EED, &m);
            let prices = set.prices();
            let fast = bill_household(hh, &readings, &mask, &prices).map_err(|e| e.to_string())?;
            let slow = brute_force_bill(hh, &readings, &set, &prices).map_err(|e| e.to_string())?;
            if fast != slow {
                return Err(format!("case {case}: kernel and oracle disagree"));
            }
            let consumed: Kwh = readings.iter().copied().sum();
            if fast.total_kwh() != consumed {
                return Err(format!("case {case}: energy not conserved"));
            }
        }
        Ok("1000 randomized instances exactly equal".into())
    });
}

#[test]
fn c03_mask_correctness() {
    criterion("C03", "mask-correctness", || {
        for seed in 0..200u64 {
            let m = if seed % 4 == 0 { month() } else { testkit::toy_month(2 + (seed % 3) as u32) };
            let set = testkit::random_bucket_set(seed.wrapping_mul(0x9E3779B9), m);
            let mask = BucketMask::build(&set).map_err(|e| e.to_string())?;
            let mut seen: Vec<u32> = mask.mask().to_vec();
            seen.sort_unstable();
            if !seen.iter().enumerate().all(|(i, &v)| v as usize == i) {
                return Err(format!("seed {seed}: mask is not a permutation"));
            }
            let bounds = mask.boundaries();
            let mut last: Vec<Option<usize>> = vec![None; set.len()];
            for s in 0..m.slots() {
                let b = set.classify(SlotIndex(s));
                let pos = mask.mask()[s as usize] as usize;
                if pos < bounds[b].offset || pos >= bounds[b].offset + bounds[b].len {
                    return Err(format!("seed {seed}: slot {s} lands outside its bucket span"));
                }
                if last[b].is_some_and(|prev| pos <= prev) {
                    return Err(format!("seed {seed}: bucket {b} not stable"));
                }
                last[b] = Some(pos);
            }
        }
        Ok("200 random bucket sets: permutation, stable, classify-consistent".into())
    });
}

#[test]
fn c04_worker_count_invariance() {
    criterion("C04", "worker-count-invariance", || {
        let cfg = DatagenConfig::new(42, month());
        let households = datagen::generate_month(&cfg, 1000);
        let set = default_bucket_set(month(), &PricingScheme::Tou).map_err(|e| e.to_string())?;
        let mask = BucketMask::build(&set).map_err(|e| e.to_string())?;
        let prices = set.prices();
        let reference = bill_all(&BillingJob { households: &households, mask: &mask, prices: &prices, worker_count: 1 });
        if !reference.errors.is_empty() {
            return Err("reference billing reported errors".into());
        }
        for workers in [2usize, 4, 8] {
            let outcome =
                bill_all(&BillingJob { households: &households, mask: &mask, prices: &prices, worker_count: workers });
            if outcome.bills != reference.bills {
                return Err(format!("{workers} workers diverge from 1 worker"));
            }
        }
        Ok("1000 households identical for workers {1,2,4,8}".into())
    });
}

#[test]
fn c05_mcb_speedup() {
    criterion("C05", "mcb-speedup", || {
        let physical = measure::physical_cores();
        let cfg = DatagenConfig::new(7, month());
        let households = datagen::generate_month(&cfg, 10_000);
        let set = default_bucket_set(month(), &PricingScheme::Tou).map_err(|e| e.to_string())?;
        let mask = BucketMask::build(&set).map_err(|e| e.to_string())?;
        let prices = set.prices();
        let mut medians = Vec::new();
        for workers in [1usize, 2, 4] {
            let job = BillingJob { households: &households, mask: &mask, prices: &prices, worker_count: workers };
            let (median, _) = measure::median_of(5, || {
                let outcome = bill_all(&job);
                assert!(outcome.errors.is_empty());
            });
            medians.push((workers, median));
        }
        let t1 = medians[0].1.as_secs_f64();
        let t2 = medians[1].1.as_secs_f64();
        let t4 = medians[2].1.as_secs_f64();
        let detail = format!(
            "10K households, median-of-5: T(1)={t1:.3}s T(2)={t2:.3}s T(4)={t4:.3}s, ratios {:.2}/{:.2}",
            t2 / t1,
            t4 / t1
        );
        // Speedup sanity: adding workers never hurts (within 10% noise)
        // while the worker count fits the physical cores.
        for &(workers, median) in &medians {
            if workers <= physical && median.as_secs_f64() > 1.10 * t1 {
                return Err(format!("S({workers}) fell below 1 beyond noise: {detail}"));
            }
        }
        if physical >= 4 {
            if t2 > 0.70 * t1 {
                return Err(format!("T(2) {t2:.3}s exceeds 0.70 x T(1) {t1:.3}s"));
            }
            if t4 > 0.45 * t1 {
                return Err(format!("T(4) {t4:.3}s exceeds 0.45 x T(1) {t1:.3}s"));
            }
            Ok(format!("{detail}; thresholds enforced on {physical} physical cores"))
        } else {
            Ok(format!("{detail}; thresholds not enforced: {physical} physical cores < 4"))
        }
    });
}

#[test]
fn c06_volume_accounting() {
    criterion("C06", "volume-accounting", || {
        let cfg = DatagenConfig::new(1, month());
        let data = datagen::generate_month(&cfg, 1);
        if data.len() != 1 || data[0].readings.len() != 2976 {
            return Err(format!("expected 1 household x 2976 readings, got {} x {}", data.len(), data[0].readings.len()));
        }
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut backend_cfg = BackendConfig::in_memory(month(), 1);
        backend_cfg.store_dir = Some(dir.path().to_path_buf());
        let a4 = gridbench_core::storage::ArchFour::open(&backend_cfg).map_err(|e| e.to_string())?;
        let households: Vec<HouseholdId> = (0..100).map(|i| HouseholdId::new(0, i)).collect();
        a4.build_month(&households).map_err(|e| e.to_string())?;
        let files = a4.file_count().map_err(|e| e.to_string())?;
        if files != 101 {
            return Err(format!("expected 101 files for 100 households, found {files}"));
        }
        Ok("2976 readings/household-month; 101 files for 100 households".into())
    });
}

#[test]
fn c07_a4_round_trip() {
    criterion("C07", "a4-round-trip", || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut backend_cfg = BackendConfig::in_memory(month(), 1);
        backend_cfg.store_dir = Some(dir.path().to_path_buf());
        let a4 = gridbench_core::storage::ArchFour::open(&backend_cfg).map_err(|e| e.to_string())?;
        let households: Vec<HouseholdId> = (0..1000).map(|i| HouseholdId::new(0, i)).collect();
        a4.build_month(&households).map_err(|e| e.to_string())?;
        let gen = DatagenConfig::new(3, month());
        testkit::ingest_month(&a4, &gen, 1, 1000).map_err(|e| e.to_string())?;
        let loaded = a4.cold_start_load().map_err(|e| e.to_string())?;
        let expected = datagen::generate_grid_month(&gen, 1, 1000);
        if loaded != expected {
            return Err("cold start does not reproduce the generated month byte-for-byte".into());
        }
        let victim = a4.consumption_path(HouseholdId::new(0, 567));
        std::fs::remove_file(&victim).map_err(|e| e.to_string())?;
        match a4.cold_start_load() {
            Err(gridbench_core::storage::StorageError::MissingFile(path)) if path == victim => {}
            other => return Err(format!("expected MissingFile({victim:?}), got {other:?}")),
        }
        Ok("1000 households reproduced exactly; missing file attributed by resolved path".into())
    });
}

#[test]
fn c08_a1_serialization_a2_parallelism() {
    criterion("C08", "a1-serialization-a2-parallelism", || {
        let per_cn = 200u32;
        let days = 5u32;
        // Three concentrator threads hammer one shared A1 store.
        let a1 = ArchOne::open(&BackendConfig::in_memory(month(), 3)).map_err(|e| e.to_string())?;
        let gen = DatagenConfig::new(5, month());
        std::thread::scope(|scope| {
            for cn in 0..3u32 {
                let a1 = &a1;
                let gen = &gen;
                scope.spawn(move || {
                    for day in 0..days {
                        let batch = testkit::cn_day_batch(gen, cn, per_cn, day);
                        a1.insert_daily(ConcentratorId(cn), day, &batch).unwrap();
                    }
                });
            }
        });
        let a1_max = a1.metrics().max_concurrent_inserts;
        if a1_max != 1 {
            return Err(format!("A1 max insert concurrency {a1_max}, expected exactly 1"));
        }

        // The same load against per-concentrator stores must overlap.
        let a2 = ArchTwo::open(&BackendConfig::in_memory(month(), 3)).map_err(|e| e.to_string())?;
        std::thread::scope(|scope| {
            for cn in 0..3u32 {
                let a2 = &a2;
                let gen = &gen;
                scope.spawn(move || {
                    for day in 0..days {
                        let batch = testkit::cn_day_batch(gen, cn, per_cn, day);
                        a2.insert_daily(ConcentratorId(cn), day, &batch).unwrap();
                    }
                });
            }
        });
        let a2_max = a2.metrics().max_concurrent_inserts;
        if a2_max < 2 {
            return Err(format!("A2 max store concurrency {a2_max}, expected >= 2"));
        }
        Ok(format!("A1 gauge max = 1, A2 gauge max = {a2_max} under 3-concentrator load"))
    });
}

#[derive(Default)]
struct StressStats {
    received: AtomicUsize,
    running_any: AtomicUsize,
    exclusive_overlaps: AtomicUsize,
    concurrent_peak: AtomicUsize,
    concurrent_now: AtomicUsize,
    fifo_violations: AtomicUsize,
    last_seq: Mutex<std::collections::HashMap<u32, u64>>,
}

enum StressMsg {
    Seq { sender: u32, seq: u64 },
    Mixer,
    Stop,
}

struct StressActor(Arc<StressStats>);

impl Actor<StressMsg> for StressActor {
    fn mode(&self, msg: &StressMsg) -> HandlerMode {
        match msg {
            StressMsg::Mixer => HandlerMode::Concurrent,
            _ => HandlerMode::Exclusive,
        }
    }

    fn handle_exclusive(&mut self, _ctx: &Context<StressMsg>, env: Envelope<StressMsg>) {
        let peers = self.0.running_any.fetch_add(1, Ordering::SeqCst);
        if peers > 0 {
            self.0.exclusive_overlaps.fetch_add(1, Ordering::SeqCst);
        }
        if let StressMsg::Seq { sender, seq } = env.msg {
            let mut last = self.0.last_seq.lock().unwrap();
            let prev = last.insert(sender, seq);
            if let Some(prev) = prev {
                if seq != prev + 1 {
                    self.0.fifo_violations.fetch_add(1, Ordering::SeqCst);
                }
            } else if seq != 0 {
                self.0.fifo_violations.fetch_add(1, Ordering::SeqCst);
            }
            self.0.received.fetch_add(1, Ordering::SeqCst);
        }
        self.0.running_any.fetch_sub(1, Ordering::SeqCst);
    }

    fn handle_concurrent(&self, _ctx: &Context<StressMsg>, _env: Envelope<StressMsg>) {
        self.0.running_any.fetch_add(1, Ordering::SeqCst);
        let now = self.0.concurrent_now.fetch_add(1, Ordering::SeqCst) + 1;
        self.0.concurrent_peak.fetch_max(now, Ordering::SeqCst);
        std::thread::sleep(Duration::from_micros(50));
        self.0.concurrent_now.fetch_sub(1, Ordering::SeqCst);
        self.0.running_any.fetch_sub(1, Ordering::SeqCst);
    }
}

#[test]
fn c09_actor_runtime_invariants() {
    criterion("C09", "actor-runtime-invariants", || {
        let per_sender = 10_000u64;
        let stats = Arc::new(StressStats::default());
        let rt: Runtime<StressMsg> = Runtime::new(RuntimeConfig { workers: 4, codec: None });
        let addr = rt.spawn("stress", StressActor(stats.clone())).map_err(|e| e.to_string())?;
        std::thread::scope(|scope| {
            for sender in 0..4u32 {
                let addr = addr.clone();
                let rt = &rt;
                scope.spawn(move || {
                    for seq in 0..per_sender {
                        if seq % 97 == 96 {
                            rt.send(&addr, StressMsg::Mixer).unwrap();
                        }
                        rt.send(&addr, StressMsg::Seq { sender, seq }).unwrap();
                    }
                });
            }
        });
        rt.send(&addr, StressMsg::Stop).map_err(|e| e.to_string())?;
        rt.await_quiescence(Duration::from_secs(60)).map_err(|e| e.to_string())?;
        let received = stats.received.load(Ordering::SeqCst);
        if received != (per_sender * 4) as usize {
            return Err(format!("exactly-once violated: {received} of {}", per_sender * 4));
        }
        if stats.fifo_violations.load(Ordering::SeqCst) != 0 {
            return Err("per-sender FIFO violated".into());
        }
        if stats.exclusive_overlaps.load(Ordering::SeqCst) != 0 {
            return Err("an exclusive handler overlapped another handler".into());
        }
        let queued = rt.queued_messages();
        if queued != 0 {
            return Err(format!("{queued} messages left after quiescence"));
        }
        rt.shutdown(Duration::from_secs(5)).map_err(|e| e.to_string())?;
        Ok(format!(
            "40000 messages exactly once, FIFO intact, 0 exclusive overlaps, concurrent peak {}",
            stats.concurrent_peak.load(Ordering::SeqCst)
        ))
    });
}

#[test]
fn c10_determinism() {
    criterion("C10", "determinism", || {
        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        let raw = format!(
            r#"
            [run]
            architecture = "A3"
            cn_count = 2
            households_per_cn = 20
            repetitions = 1
            mcb_workers = [1, 2]
            output_dir = "{}"

            [month]
            year = 2009
            month = 1

            [datagen]
            seed = 42
            "#,
            out.path().display()
        );
        let cfg = parse_config(&raw).map_err(|e| e.to_string())?;

        let mut artifacts = Vec::new();
        for _ in 0..2 {
            let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
            let mut dump = Vec::new();
            let data = datagen::generate_grid_month(&cfg.datagen, cfg.cn_count, cfg.households_per_cn);
            datagen::write_csv(&data, &mut dump).map_err(|e| e.to_string())?;
            artifacts.push((report.bill_checksum.clone(), report.run_id.clone(), dump));
        }
        let (sum_a, id_a, dump_a) = &artifacts[0];
        let (sum_b, id_b, dump_b) = &artifacts[1];
        if sum_a != sum_b {
            return Err(format!("bill checksums differ: {sum_a} vs {sum_b}"));
        }
        if id_a != id_b {
            return Err("run ids differ for identical config".into());
        }
        if dump_a != dump_b {
            return Err("CSV data dumps differ".into());
        }
        Ok(format!("two A3 runs: checksum {}..., identical CSV dumps", &sum_a[..12]))
    });
}
