use proptest::prelude::*;
use sigma_core::pathfunc::{ClassC, KillingRate};
use sigma_core::{derive_seed, pairwise_sum, Engine, LevyModel, SigmaModel, TimeGrid, WeightFn};

fn weight() -> impl Strategy<Value = WeightFn> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|r| WeightFn::exp(r).unwrap()),
        (0.1f64..5.0).prop_map(|w| WeightFn::indicator(w).unwrap()),
        Just(WeightFn::InverseSquare),
    ]
}

fn model() -> impl Strategy<Value = SigmaModel> {
    prop_oneof![
        Just(SigmaModel::ReflectedBm),
        Just(SigmaModel::Drawdown),
        (0.5f64..2.0).prop_map(|b| SigmaModel::stopped_reflected(b).unwrap()),
        Just(SigmaModel::ExpMartingale),
        Just(SigmaModel::GeometricBm),
        (1.1f64..1.9).prop_map(|a| SigmaModel::StableLevy(LevyModel::new(a, 0.0).unwrap())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn seeds_are_deterministic_and_distinct(master in any::<u64>(), i in 0u64..1 << 40, j in 0u64..1 << 40) {
        prop_assert_eq!(derive_seed(master, i), derive_seed(master, i));
        if i != j {
            prop_assert_ne!(derive_seed(master, i), derive_seed(master, j));
        }
    }

    #[test]
    fn pairwise_sum_is_deterministic_and_accurate(v in proptest::collection::vec(-1e3f64..1e3, 0..500)) {
        let s = pairwise_sum(&v);
        prop_assert_eq!(s.to_bits(), pairwise_sum(&v.clone()).to_bits());
        let naive: f64 = v.iter().sum();
        prop_assert!((s - naive).abs() <= 1e-9 * (1.0 + v.iter().map(|x| x.abs()).sum::<f64>()));
    }

    #[test]
    fn sampled_paths_satisfy_model_contract(m in model(), seed in any::<u64>(), n in 10usize..400) {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let p = m.sample(seed, &grid).unwrap();
        prop_assert!(p.validate(&m.support_check(&grid)).is_ok(), "{:?}", p.validate(&m.support_check(&grid)));
        prop_assert_eq!(p.x[0], m.initial_x());
        // Same seed, same path.
        let q = m.sample(seed, &grid).unwrap();
        prop_assert_eq!(p.x, q.x);
    }

    #[test]
    fn class_c_is_monotone_and_bounded(seed in any::<u64>(), w in weight(), lambda in 0.0f64..3.0, lo in 0.0f64..1.0, height in 0.0f64..3.0) {
        let grid = TimeGrid::new(2.0, 200).unwrap();
        let p = SigmaModel::ReflectedBm.sample(seed, &grid).unwrap();
        let fk = ClassC::feynman_kac(lambda, KillingRate::Indicator { lo, hi: lo + 1.0, height }).unwrap();
        for f in [ClassC::decreasing_of_a(w).unwrap(), fk] {
            let c = f.curve(&p);
            prop_assert!(c.iter().all(|&v| v >= 0.0 && v <= c[0] + 1e-15));
            prop_assert!(c.windows(2).all(|s| s[1] <= s[0] + 1e-15));
        }
    }

    #[test]
    fn mf_is_nonnegative_and_tail_nonincreasing(w in weight(), a in 0.0f64..50.0, da in 0.0f64..5.0, x in 0.0f64..100.0) {
        prop_assert!(w.mf(a, x) >= 0.0);
        prop_assert!(w.tail(a + da) <= w.tail(a) + 1e-15);
        prop_assert!(w.f(a) >= 0.0);
    }
}

#[test]
fn no_seed_collisions_over_a_million_pairs() {
    let mut seen = std::collections::HashSet::with_capacity(1_000_000);
    for master in 0..10u64 {
        for i in 0..100_000u64 {
            assert!(seen.insert(derive_seed(master, i)), "collision at ({master}, {i})");
        }
    }
}

#[test]
fn engine_results_do_not_depend_on_call_order() {
    let grid = TimeGrid::new(1.0, 50).unwrap();
    let e = Engine::sequential(9);
    let a = e.run_mc(&SigmaModel::ReflectedBm, &grid, 100, &|p| p.x[50]).unwrap();
    let _ = e.substream(1).run_mc(&SigmaModel::ReflectedBm, &grid, 100, &|p| p.x[50]).unwrap();
    let b = e.run_mc(&SigmaModel::ReflectedBm, &grid, 100, &|p| p.x[50]).unwrap();
    assert_eq!(a, b);
}
