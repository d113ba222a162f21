mod common;

use common::{crp_partition_probability, set_partitions, sizes_of};
use proptest::prelude::*;
use species_sampling::composition::compositions_of;
use species_sampling::estimator::{estimate_ppf, MembershipSequence};
use species_sampling::weights::{
    predictive_given_weights, sample_weights, size_biased_permutation, WeightModel,
};
use species_sampling::{
    check_additivity, check_balance, check_label_symmetry, dp_log_eppf, dp_ppf, eppf_from_ppf,
    ppf_from_eppf, size_function_ppf, Composition, EppfTable,
};

const NORM_TOL: f64 = 1e-12;
const REL_TOL: f64 = 1e-9;

fn sizes() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..6, 1..6)
}

fn theta() -> impl Strategy<Value = f64> {
    0.05f64..20.0
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_key_round_trips(s in sizes()) {
        let c = Composition::new(s.clone()).unwrap();
        let parsed: Composition = c.key().parse().unwrap();
        prop_assert_eq!(parsed.sizes(), &s[..]);
        prop_assert_eq!(c.total(), s.iter().sum::<usize>());
    }

    #[test]
    fn increment_adds_one_observation(s in sizes(), pick in 0usize..10) {
        let c = Composition::new(s).unwrap();
        let j = pick % (c.k() + 1) + 1;
        let next = c.increment(j).unwrap();
        prop_assert_eq!(next.total(), c.total() + 1);
        prop_assert_eq!(next.k(), c.k() + usize::from(j == c.k() + 1));
    }

    #[test]
    fn dp_ppf_normalizes(s in sizes(), t in theta()) {
        let p = dp_ppf(t).unwrap().evaluate(&Composition::new(s).unwrap()).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < NORM_TOL);
        prop_assert!(p.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn dp_log_eppf_is_permutation_invariant(s in sizes(), keys in prop::collection::vec(any::<u32>(), 6), t in theta()) {
        let c = Composition::new(s).unwrap();
        let mut sigma: Vec<usize> = (0..c.k()).collect();
        sigma.sort_by_key(|&i| keys[i]);
        let p = c.permuted(&sigma);
        prop_assert_eq!(dp_log_eppf(&c, t, 1.0), dp_log_eppf(&p, t, 1.0));
    }

    #[test]
    fn dp_eppf_matches_sequential_urn(n in 1usize..7, pick in any::<prop::sample::Index>(), t in theta()) {
        let parts = set_partitions(n);
        let labels = &parts[pick.index(parts.len())];
        let c = Composition::new(sizes_of(labels)).unwrap();
        let direct = crp_partition_probability(labels, t).ln();
        prop_assert!(close(dp_log_eppf(&c, t, 1.0), direct));
    }

    #[test]
    fn dp_eppf_sums_to_one_over_partitions(n in 1usize..8, t in theta()) {
        let total: f64 = compositions_of(n)
            .iter()
            .map(|c| c.label_sequence_count() as f64 * dp_log_eppf(c, t, 1.0).exp())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn canonicalize_yields_order_of_appearance(ids in prop::collection::vec(0u8..5, 1..12), shift in 1u8..50) {
        let m = MembershipSequence::canonicalize(&ids);
        // any relabeling of the ids gives the same partition
        let renamed: Vec<u8> = ids.iter().map(|i| i.wrapping_mul(7).wrapping_add(shift)).collect();
        prop_assert_eq!(&MembershipSequence::canonicalize(&renamed), &m);
        prop_assert!(MembershipSequence::new(m.labels().to_vec()).is_ok());
        let comp = m.composition().unwrap();
        prop_assert_eq!(comp.total(), ids.len());
        prop_assert_eq!(comp.k(), m.n_clusters());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dp_round_trips_through_eppf(t in theta()) {
        let ppf = dp_ppf(t).unwrap();
        let table = eppf_from_ppf(&ppf, 6).unwrap();
        let closed = EppfTable::dp(t, 1.0, 6).unwrap();
        for (c, log_p) in table.iter() {
            prop_assert!(close(log_p, closed.log_prob(c).unwrap()));
        }
        for c in compositions_of(4) {
            let back = ppf_from_eppf(&table, &c).unwrap();
            for (x, y) in back.iter().zip(ppf.evaluate(&c).unwrap()) {
                prop_assert!(close(*x, y));
            }
        }
        prop_assert!(check_additivity(&table).unwrap().holds);
    }

    #[test]
    fn linear_size_function_is_balanced(a in 0.05f64..10.0, t in theta()) {
        let ppf = size_function_ppf("a*m", move |m| a * m as f64, t).unwrap();
        prop_assert!(check_balance(&ppf, 6).unwrap().holds);
        prop_assert!(check_label_symmetry(&ppf, 6).unwrap().holds);
        let table = eppf_from_ppf(&ppf, 6).unwrap();
        prop_assert!(check_additivity(&table).unwrap().holds);
        // the rule a·m with mass θ is the DP with mass θ/a
        let dp = EppfTable::dp(t, a, 6).unwrap();
        for (c, log_p) in table.iter() {
            prop_assert!(close(log_p, dp.log_prob(c).unwrap()));
        }
    }

    #[test]
    fn affine_size_function_is_not_balanced(a in 0.1f64..5.0, b in 0.1f64..5.0, t in theta()) {
        let ppf = size_function_ppf("a*m+b", move |m| a * m as f64 + b, t).unwrap();
        let report = check_balance(&ppf, 4).unwrap();
        prop_assert!(!report.holds);
        prop_assert!(eppf_from_ppf(&ppf, 4).is_err());
    }

    #[test]
    fn predictive_given_weights_normalizes(seed in any::<u64>(), k in 1usize..6) {
        let draw = sample_weights(&WeightModel::dp(1.5), seed).unwrap();
        let mut rng = species_sampling::rng::substream(seed, 0);
        if let Ok(prefix) = size_biased_permutation(&draw, k, &mut rng) {
            let p = predictive_given_weights(k, &prefix).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < NORM_TOL);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn estimates_normalize(s in prop::collection::vec(1usize..4, 1..4), seed in any::<u64>()) {
        let c = Composition::new(s).unwrap();
        let est = estimate_ppf(&WeightModel::default_logistic_normal(), &c, 200, seed).unwrap();
        prop_assert_eq!(est.probabilities.len(), c.k() + 1);
        prop_assert!((est.probabilities.iter().sum::<f64>() - 1.0).abs() < NORM_TOL);
        prop_assert!(est.effective_sample_size >= 1.0 - 1e-12);
        prop_assert!(est.effective_sample_size <= 200.0 + 1e-9);
    }
}
