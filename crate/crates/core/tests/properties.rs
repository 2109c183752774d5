mod common;

use std::collections::BTreeSet;

use common::{brute_mms, brute_tps, instance_strategy, is_tps_fixed_point, value_strategy};
use mms_core::allocator::{approximation_factor, AllocatorState, EventKind, RoundResult};
use mms_core::harness::{gen_instance, verify_allocation, Family, GeneratorSpec};
use mms_core::number::{int, rat, ratio, Rational};
use mms_core::shares::{classify_item, mms_exact, tps, ItemClass, OracleLimits};
use mms_core::*;
use proptest::prelude::*;

fn mms_vector(inst: &Instance) -> Vec<Rational> {
    (0..inst.n())
        .map(|a| mms_exact(inst.row(a), inst.n(), &OracleLimits::default()).unwrap().value)
        .collect()
}

fn checked() -> AllocOptions {
    AllocOptions { check_bounds: true }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ordering_is_idempotent(inst in instance_strategy(4, 10)) {
        let once = order_instance(&inst);
        let twice = order_instance(once.base());
        prop_assert_eq!(twice.base(), once.base());
        for map in twice.rank_maps() {
            prop_assert_eq!(map, &(0..inst.m()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn ordered_rows_are_sorted_permutations(inst in instance_strategy(4, 10)) {
        let ordered = order_instance(&inst);
        for agent in 0..inst.n() {
            let row = ordered.base().row(agent);
            prop_assert!(row.windows(2).all(|w| w[0] >= w[1]));
            let ranks: BTreeSet<usize> = ordered.rank_maps()[agent].iter().copied().collect();
            prop_assert_eq!(ranks.len(), inst.m());
            for item in 0..inst.m() {
                prop_assert_eq!(&row[ordered.rank_maps()[agent][item]], inst.value(agent, item));
            }
        }
    }

    #[test]
    fn lift_dominates_and_partitions(
        inst in instance_strategy(4, 10),
        owners in proptest::collection::vec(0usize..6, 10),
    ) {
        let ordered = order_instance(&inst);
        let mut alloc = Allocation::empty(inst.m());
        for rank in 0..inst.m() {
            // Owners >= n leave the rank unallocated.
            if owners[rank] < inst.n() {
                alloc.assign(owners[rank], [rank]).unwrap();
            }
        }
        let lifted = lift_allocation(&alloc, &ordered).unwrap();
        lifted.validate(inst.n(), inst.m()).unwrap();
        prop_assert_eq!(lifted.unallocated.len(), alloc.unallocated.len());
        for (&agent, bundle) in &alloc.bundles {
            let before = ordered.base().bundle_value(agent, bundle);
            let after = inst.bundle_value(agent, lifted.bundle(agent).unwrap());
            prop_assert!(after >= before);
        }
    }

    #[test]
    fn scaling_does_not_change_choices(
        inst in instance_strategy(3, 9),
        alpha in proptest::collection::vec(value_strategy(), 3),
        factor in (1i64..=9, 1i64..=9),
        agent in 0usize..3,
    ) {
        let agent = agent % inst.n();
        let c = rat(factor.0, factor.1);
        let alpha = ThresholdVector::new(alpha[..inst.n()].to_vec()).unwrap();
        let scaled = scale_agent(&inst, agent, &c).unwrap();
        let mut scaled_alpha = alpha.clone();
        scaled_alpha.set(agent, alpha.get(agent) * &c);
        let a = run_alg(&order_instance(&inst), &alpha).unwrap();
        let b = run_alg(&order_instance(&scaled), &scaled_alpha).unwrap();
        prop_assert_eq!(a.allocation, b.allocation);
        prop_assert_eq!(a.failed_agents, b.failed_agents);
    }

    #[test]
    fn scaling_scales_mms(values in proptest::collection::vec(value_strategy(), 0..8), n in 1usize..4) {
        let limits = OracleLimits::default();
        let c = rat(5, 3);
        let scaled: Vec<Rational> = values.iter().map(|v| v * &c).collect();
        prop_assert_eq!(
            mms_exact(&scaled, n, &limits).unwrap().value,
            mms_exact(&values, n, &limits).unwrap().value * c
        );
    }

    #[test]
    fn tps_is_the_largest_fixed_point(values in proptest::collection::vec(value_strategy(), 0..12), n in 1usize..6) {
        let beta = tps(&values, n).unwrap();
        prop_assert!(is_tps_fixed_point(&values, n, &beta));
        prop_assert_eq!(beta, brute_tps(&values, n));
    }

    #[test]
    fn mms_is_monotone(values in proptest::collection::vec(value_strategy(), 1..9), n in 1usize..4) {
        let limits = OracleLimits::default();
        let full = mms_exact(&values, n, &limits).unwrap().value;
        let fewer = mms_exact(&values[1..], n, &limits).unwrap().value;
        prop_assert!(fewer <= full);
        let mut padded = values.clone();
        padded.push(int(0));
        prop_assert_eq!(mms_exact(&padded, n, &limits).unwrap().value, full.clone());
        prop_assert_eq!(tps(&padded, n).unwrap(), tps(&values, n).unwrap());
    }

    #[test]
    fn mms_witness_is_a_valid_partition(values in proptest::collection::vec(value_strategy(), 0..10), n in 1usize..5) {
        let w = mms_exact(&values, n, &OracleLimits::default()).unwrap();
        prop_assert_eq!(w.partition.len(), n);
        let mut seen: Vec<usize> = w.partition.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..values.len()).collect::<Vec<_>>());
        for bundle in &w.partition {
            let v: Rational = bundle.iter().map(|&i| values[i].clone()).sum();
            prop_assert!(v >= w.value);
        }
    }

    #[test]
    fn classification_is_a_partition(value in value_strategy(), alpha in (1i64..=20, 1i64..=4)) {
        let alpha = rat(alpha.0, alpha.1);
        let class = classify_item(&value, &alpha).unwrap();
        let pebble = value >= &alpha * rat(2, 9);
        let ice = !pebble && value >= &alpha * rat(4, 27);
        let expected = if pebble { ItemClass::Pebble } else if ice { ItemClass::Ice } else { ItemClass::Water };
        prop_assert_eq!(class, expected);
    }

    #[test]
    fn rounds_progress_and_respect_thresholds(
        inst in instance_strategy(4, 10),
        alpha in proptest::collection::vec(value_strategy(), 4),
    ) {
        let ordered = order_instance(&inst);
        let alpha = ThresholdVector::new(alpha[..inst.n()].to_vec()).unwrap();
        let target = |a: usize| alpha.get(a) * approximation_factor();
        let mut state = AllocatorState::new(&ordered, &alpha, checked()).unwrap();
        let mut rounds = 0;
        while !state.active().is_empty() {
            let before_items = state.unallocated().len();
            let before_agents = state.active().len();
            let result = state.run_round().unwrap();
            rounds += 1;
            match result {
                RoundResult::Allocated { agent } => {
                    prop_assert_eq!(state.active().len(), before_agents - 1);
                    let bundle = state.allocation().bundle(agent).unwrap();
                    prop_assert!(ordered.base().bundle_value(agent, bundle) >= target(agent));
                    if before_items > 0 && alpha.get(agent) > &int(0) {
                        prop_assert!(state.unallocated().len() < before_items);
                    }
                    let ev = state.trace().last().unwrap();
                    if ev.event == EventKind::Stage1 {
                        // Largest h: no later partner works for anyone.
                        let h = ev.h.unwrap();
                        let remaining: Vec<usize> = {
                            let mut r: Vec<usize> = state.unallocated().to_vec();
                            r.extend(ev.items.iter().copied());
                            r.sort_unstable();
                            r
                        };
                        let mut active: Vec<usize> = state.active().to_vec();
                        active.push(agent);
                        for later in h + 1..=remaining.len() {
                            for &a in &active {
                                let v = ordered.value(a, remaining[0]) + ordered.value(a, remaining[later - 1]);
                                prop_assert!(v < target(a));
                            }
                        }
                    }
                }
                RoundResult::Failed => break,
            }
        }
        prop_assert!(rounds <= inst.n());
        state.allocation().validate(inst.n(), inst.m()).unwrap();
    }

    #[test]
    fn fptas_descent_is_monotone_and_certified(inst in instance_strategy(3, 8), eps in 1i64..=5) {
        let cfg = FptasConfig::new(rat(eps, 10)).unwrap();
        let out = run_fptas(&inst, &cfg).unwrap();
        prop_assert!(out.iterations <= iteration_bound(inst.n(), &cfg.epsilon));
        let mms = mms_vector(&inst);
        // Replay the descent: an agent's target only moves when it fails, and
        // a failing agent's target was above its MMS.
        let shrink = int(1) - &cfg.epsilon;
        let mut alpha: Vec<Rational> = (0..inst.n()).map(|a| tps(inst.row(a), inst.n()).unwrap()).collect();
        for failed in &out.per_iteration_failures {
            for &a in failed {
                prop_assert!(alpha[a] > mms[a]);
                alpha[a] = &alpha[a] * &shrink;
            }
        }
        prop_assert_eq!(alpha.as_slice(), out.final_alpha.as_slice());
        let floor = approximation_factor() - &cfg.epsilon;
        for a in 0..inst.n() {
            let v = inst.bundle_value(a, out.allocation.bundle(a).unwrap());
            prop_assert!(ratio(&v, &mms[a]) >= floor);
        }
    }
}

#[test]
fn oracle_matches_enumeration_on_fixed_seeds() {
    for seed in 0..60 {
        let spec = GeneratorSpec::new(Family::Uniform, 1 + (seed % 3) as usize, 1 + (seed % 7) as usize, seed);
        let inst = gen_instance(&spec).unwrap();
        for a in 0..inst.n() {
            let fast = mms_exact(inst.row(a), inst.n(), &OracleLimits::default()).unwrap().value;
            assert_eq!(fast, brute_mms(inst.row(a), inst.n()), "seed {seed} agent {a}");
        }
    }
}

#[test]
fn allocator_meets_oracle_thresholds_on_fixed_seeds() {
    for family in [Family::Uniform, Family::Bimodal, Family::Identical] {
        for seed in 0..150 {
            let n = 1 + (seed % 4) as usize;
            let m = 2 + (seed % 11) as usize;
            let inst = gen_instance(&GeneratorSpec::new(family, n, m, seed)).unwrap();
            let mms = mms_vector(&inst);
            let ordered = order_instance(&inst);
            let out = run_alg_with(&ordered, &ThresholdVector::new(mms.clone()).unwrap(), checked()).unwrap();
            assert!(out.succeeded(), "{family:?} seed {seed}");
            let lifted = lift_allocation(&out.allocation, &ordered).unwrap();
            let report = verify_allocation(&inst, &lifted, None, Some(&OracleLimits::default())).unwrap();
            assert!(report.min_ratio.unwrap() >= approximation_factor(), "{family:?} seed {seed}");
        }
    }
}

#[test]
fn lift_example_by_hand() {
    let inst = Instance::new(vec![vec![int(3), int(1), int(2)], vec![int(1), int(2), int(3)]]).unwrap();
    let ordered = order_instance(&inst);
    let mut alloc = Allocation::empty(3);
    alloc.assign(0, [0]).unwrap();
    alloc.assign(1, [1, 2]).unwrap();
    let lifted = lift_allocation(&alloc, &ordered).unwrap();
    assert_eq!(inst.bundle_value(0, lifted.bundle(0).unwrap()), int(3));
    assert_eq!(inst.bundle_value(1, lifted.bundle(1).unwrap()), int(5));
}

#[test]
fn campaign_rows_recompute_from_stored_allocations() {
    let cfg = mms_core::harness::CampaignConfig::from_json(
        r#"{"families": ["uniform", "bimodal"], "sizes": [[3, 7], [2, 9]], "seeds": [5, 6, 7],
            "epsilon_grid": ["1/4"]}"#,
    )
    .unwrap();
    let summary = mms_core::harness::campaign(&cfg, &OracleLimits::default()).unwrap();
    assert_eq!(summary.rows.len(), 2 * 2 * 3 * 2);
    for row in &summary.rows {
        let report = verify_allocation(&row.instance, &row.allocation, None, Some(&OracleLimits::default())).unwrap();
        assert_eq!(report.min_ratio.as_ref(), Some(&row.min_ratio));
    }
}
