//! Property tests over randomized bucket sets and readings: the mask
//! invariants and the kernel-vs-oracle equivalence the whole harness
//! rests on.

use proptest::prelude::*;

use gridbench_core::domain::{HouseholdId, Kwh, SlotIndex};
use gridbench_core::mcb::{aggregate_phase, bill_household, brute_force_bill, sort_phase};
use gridbench_core::tariff::BucketMask;
use gridbench_core::testkit;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mask_is_a_stable_permutation_consistent_with_classify(seed in any::<u64>(), days in 2u32..=4) {
        let month = testkit::toy_month(days);
        let set = testkit::random_bucket_set(seed, month);
        let mask = BucketMask::build(&set).unwrap();

        let mut sorted: Vec<u32> = mask.mask().to_vec();
        sorted.sort_unstable();
        prop_assert!(sorted.iter().enumerate().all(|(i, &v)| v as usize == i), "not a permutation");

        let bounds = mask.boundaries();
        let mut last_pos: Vec<Option<usize>> = vec![None; set.len()];
        for s in 0..month.slots() {
            let bucket = set.classify(SlotIndex(s));
            let pos = mask.mask()[s as usize] as usize;
            let span = bounds[bucket];
            prop_assert!(span.offset <= pos && pos < span.offset + span.len, "mask disagrees with classify at slot {s}");
            if let Some(prev) = last_pos[bucket] {
                prop_assert!(pos > prev, "gather not stable within bucket {bucket}");
            }
            last_pos[bucket] = Some(pos);
        }
    }

    #[test]
    fn kernel_equals_oracle_with_energy_conserved(seed in any::<u64>(), days in 2u32..=4) {
        let month = testkit::toy_month(days);
        let set = testkit::random_bucket_set(seed, month);
        let mask = BucketMask::build(&set).unwrap();
        let readings = testkit::random_kwh_month(seed ^ 0xABCD, &month);
        let prices = set.prices();
        let hh = HouseholdId::new(0, 0);

        let fast = bill_household(hh, &readings, &mask, &prices).unwrap();
        let slow = brute_force_bill(hh, &readings, &set, &prices).unwrap();
        prop_assert_eq!(&fast, &slow);

        let consumed: Kwh = readings.iter().copied().sum();
        prop_assert_eq!(fast.total_kwh(), consumed);
    }

    #[test]
    fn phases_compose_to_direct_classification(seed in any::<u64>(), days in 2u32..=4) {
        let month = testkit::toy_month(days);
        let set = testkit::random_bucket_set(seed, month);
        let mask = BucketMask::build(&set).unwrap();
        let readings = testkit::random_kwh_month(seed ^ 0x1234, &month);

        let sorted = sort_phase(&readings, &mask).unwrap();
        let sums = aggregate_phase(&sorted, mask.boundaries()).unwrap();

        let mut direct = vec![Kwh::ZERO; set.len()];
        for (s, &kwh) in readings.iter().enumerate() {
            direct[set.classify(SlotIndex(s as u32))] += kwh;
        }
        prop_assert_eq!(sums, direct);
    }
}
