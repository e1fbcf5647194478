mod common;

use cbs_core::cbs::{cbs_expectation, interference_set, truncate, truncate_to};
use cbs_core::grouping::{sorted_insertion, verify_grouping, Relation};
use cbs_core::state::basis_probabilities;
use cbs_core::variance::{allocation_variance, optimal_allocation};
use cbs_core::StateVector;
use common::random_observable;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn groupings_are_sound_partitions(seed in any::<u64>(), n in 1usize..6, m in 0usize..25) {
        let o = random_observable(seed, n, m);
        let counts: Vec<usize> = [Relation::Gc, Relation::Qwc, Relation::None]
            .iter()
            .map(|&rel| {
                let g = sorted_insertion(&o, rel);
                let check = verify_grouping(&o, &g);
                assert!(check.valid, "{:?}", check.diagnostics);
                g.len()
            })
            .collect();
        prop_assert!(counts[0] <= counts[1] && counts[1] <= counts[2]);
        prop_assert_eq!(sorted_insertion(&o, Relation::Qwc), sorted_insertion(&o, Relation::Qwc));
    }

    #[test]
    fn allocation_preserves_budget(v in prop::collection::vec(0.0f64..10.0, 1..12), extra in 0u64..500) {
        let live = v.iter().filter(|&&x| x > 0.0).count() as u64;
        prop_assume!(live > 0);
        let plan = optimal_allocation(&v, live + extra).unwrap();
        prop_assert_eq!(plan.total(), live + extra);
        for (&vk, &lk) in v.iter().zip(plan.shots()) {
            prop_assert_eq!(vk > 0.0, lk > 0);
        }
        prop_assert!(allocation_variance(&v, &plan).unwrap().is_finite());
    }

    #[test]
    fn estimator_is_linear_in_the_observable(seed in any::<u64>(), scale in -5.0f64..5.0) {
        let o = random_observable(seed, 3, 8);
        let psi = StateVector::random(3, seed ^ 0x5555, false).unwrap();
        let t = truncate_to(&basis_probabilities(&psi), 4).unwrap();
        let intf = interference_set(&psi, &t).unwrap();
        let base = cbs_expectation(&o, &t, &intf, true).unwrap();
        let scaled = cbs_expectation(&o.scaled(scale).unwrap(), &t, &intf, true).unwrap();
        prop_assert!((scaled - scale * base).abs() < 1e-10 * (1.0 + base.abs() * scale.abs()));
    }

    #[test]
    fn truncation_is_monotone(seed in any::<u64>(), e1 in 1e-6f64..0.5, e2 in 1e-6f64..0.5) {
        let psi = StateVector::random(4, seed, false).unwrap();
        let probs = basis_probabilities(&psi);
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let a = truncate(&probs, lo).unwrap();
        let b = truncate(&probs, hi).unwrap();
        prop_assert!(a.r() >= b.r());
        prop_assert!(a.infidelity <= lo + 1e-12 && b.infidelity <= hi + 1e-12);
        prop_assert!(a.weights.windows(2).all(|w| w[0] >= w[1]));
    }
}
