use bdnet::ages::{AgeCdf, AgeKind};
use bdnet::bdp::{self, BdParams};
use bdnet::bounds::{bound_general_thm, bound_general_thm_regrouped, bound_pure_birth_ss1, bound_pure_birth_ss1_regrouped};
use bdnet::contour::{phi, phi_inverse, sample_contour};
use bdnet::mixpo::{mixpo_pmf_vec, s2_integrand, tv_exact, MixingSample};
use bdnet::netsim::{NetParams, Social};
use bdnet::rng::stream_rng;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pmf_partial_sums_increase_to_one(l in 0.1f64..3.0, m in 0.0f64..3.0, t in 0.0f64..2.0) {
        let p = BdParams::new(l, m).unwrap();
        // The conditional law is geometric; 60 conditional means leave a negligible tail.
        let n_max = (60.0 * (l * t).exp()) as u64 + 200;
        let probs = bdp::pmf_vec(&p, t, n_max).unwrap();
        prop_assert!(probs.iter().all(|&x| x >= 0.0));
        let total: f64 = probs.iter().sum();
        prop_assert!(total <= 1.0 + 1e-12);
        prop_assert!(total > 1.0 - 1e-9, "total {}", total);
    }

    #[test]
    fn age_cdfs_are_monotone(l in 0.2f64..3.0, frac in 0.0f64..0.95, horizon in 0.2f64..5.0, y in 1u64..8) {
        let p = BdParams::new(l, l * frac).unwrap();
        for kind in [AgeKind::ConditionalGivenY { y }, AgeKind::Unconditional, AgeKind::FirstBlock, AgeKind::LastIndividual] {
            let law = AgeCdf::new(p, horizon, kind).unwrap();
            let mut prev = 0.0;
            for k in 0..=50 {
                let v = law.cdf((horizon * k as f64 / 50.0).min(horizon)).unwrap();
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
                prop_assert!(v >= prev - 1e-12, "{:?} at {}: {} < {}", kind, k, v, prev);
                prev = v;
            }
            prop_assert!((law.cdf(horizon).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn contour_round_trip(l in 0.2f64..3.0, m in 0.2f64..3.0, t in 0.1f64..3.0, seed in any::<u64>()) {
        let p = BdParams::new(l, m).unwrap();
        let e = sample_contour(&p, t, &mut stream_rng(seed, 0)).unwrap();
        let tree = phi(&e).unwrap();
        prop_assert_eq!(tree.leaves(), e.n_maxima());
        prop_assert_eq!(phi_inverse(&tree).unwrap().extrema, e.extrema);
    }

    #[test]
    fn tv_is_a_metric(a in prop::collection::vec(0.0f64..8.0, 1..6), b in prop::collection::vec(0.0f64..8.0, 1..6), c in prop::collection::vec(0.0f64..8.0, 1..6)) {
        let pmf = |v: &Vec<f64>| mixpo_pmf_vec(&MixingSample::new(v.clone()).unwrap(), 80);
        let (pa, pb, pc) = (pmf(&a), pmf(&b), pmf(&c));
        let ab = tv_exact(&pa, &pb).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - tv_exact(&pb, &pa).unwrap()).abs() < 1e-15);
        prop_assert!(ab <= tv_exact(&pa, &pc).unwrap() + tv_exact(&pc, &pb).unwrap() + 1e-12);
    }

    #[test]
    fn s2_integrand_symmetric(a in 0.0f64..50.0, b in 0.0f64..50.0) {
        prop_assert_eq!(s2_integrand(a, b), s2_integrand(b, a));
        prop_assert!(s2_integrand(a, b) <= (a - b).abs());
    }

    #[test]
    fn bound_evaluations_agree(l in 0.2f64..4.0, frac in 0.01f64..0.95, a in 0.1f64..3.0, b in 0.1f64..3.0, t in 0.5f64..40.0) {
        let p = NetParams::new(BdParams::new(l, l * frac).unwrap(), a, b, Social::Exponential { rate: 1.3 }).unwrap();
        let x = bound_general_thm(&p, t).unwrap().bound_value;
        let y = bound_general_thm_regrouped(&p, t).unwrap();
        prop_assert!((x - y).abs() <= 1e-12 * y.abs(), "{} {}", x, y);
        let q = NetParams::new(BdParams::new(l, 0.0).unwrap(), a, b, Social::LogNormal { m: 0.1, s: 0.7 }).unwrap();
        let x = bound_pure_birth_ss1(&q, t).unwrap().bound_value;
        let y = bound_pure_birth_ss1_regrouped(&q, t).unwrap();
        prop_assert!((x - y).abs() <= 1e-12 * y.abs());
    }

    #[test]
    fn social_quantiles_monotone(u in 0.001f64..0.998, du in 0.0005f64..0.001) {
        for s in [Social::Exponential { rate: 2.0 }, Social::LogNormal { m: 0.0, s: 1.0 }, Social::Uniform { a: 1.0, b: 3.0 }] {
            prop_assert!(s.quantile(u, 1.0 - u) <= s.quantile(u + du, 1.0 - u - du));
        }
    }
}
