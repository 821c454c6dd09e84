use bdnet::bdp::BdParams;
use bdnet::mixpo::*;
use bdnet::netsim::{NetParams, Social};
use bdnet::rng::{replicate, stream_rng};
use bdnet::stats::{chi2_gof, counts};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

fn net(l: f64, m: f64, a: f64, b: f64, social: Social) -> NetParams {
    NetParams::new(BdParams::new(l, m).unwrap(), a, b, social).unwrap()
}

#[test]
fn limit_mean_matches_closed_form() {
    let p = net(2.0, 1.0, 1.0, 2.0, Social::Exponential { rate: 1.0 });
    let m = sample_asymptotic_m(&p, 1_000_000, 1).unwrap();
    let target = asymptotic_m_mean(&p).unwrap();
    // (2 alpha E(S) / c) E(1 - e^{-cA}) with c = beta + mu and E(1 - e^{-cA}) = c / (c + lambda).
    assert!((target - 2.0 * 1.0 * 1.0 / 3.0 * 3.0 / 5.0).abs() < 1e-15);
    assert!(m.mean().within(target, 3.0), "{:?} vs {target}", m.mean());

    let pb = net(2.0, 0.0, 1.0, 1.0, Social::Exponential { rate: 1.0 });
    let mb = sample_asymptotic_m(&pb, 200_000, 2).unwrap();
    assert!(mb.mean().within(2.0 / 3.0, 3.0));
}

#[test]
fn constant_social_index_range() {
    let p = net(2.0, 1.0, 1.5, 2.0, Social::Constant { value: 2.0 });
    let m = sample_asymptotic_m(&p, 50_000, 3).unwrap();
    let sup = 1.5 * 4.0 / 3.0;
    assert!(m.values.iter().all(|&v| v > 0.0 && v < sup));
}

#[test]
fn quadrature_law_matches_simulated_degrees() {
    for (i, p) in [
        net(2.0, 1.0, 1.0, 2.0, Social::Exponential { rate: 1.0 }),
        net(1.0, 0.0, 3.0, 1.0, Social::LogNormal { m: 0.0, s: 0.5 }),
        net(1.5, 0.5, 2.0, 0.5, Social::Uniform { a: 0.5, b: 2.0 }),
    ]
    .into_iter()
    .enumerate()
    {
        let law = asymptotic_pmf(&p).unwrap();
        let total: f64 = law.probs.iter().sum::<f64>() + law.tail;
        assert!((total - 1.0).abs() < 1e-12);
        let degrees = replicate(10 + i as u64, 100_000, |rng, _| {
            let m = draw_asymptotic_m(&p, rng);
            if m == 0.0 {
                0
            } else {
                Poisson::new(m).unwrap().sample(rng) as usize
            }
        });
        let out = chi2_gof(&counts(degrees), &law.probs);
        assert!(out.p_value > 1e-3, "{i}: {out:?}");
    }
}

/// Two-point law as an equally weighted sample.
fn two_point(a: f64, b: f64, p_a: f64) -> MixingSample {
    let k = (p_a * 100.0).round() as usize;
    let mut v = vec![a; k];
    v.extend(std::iter::repeat_n(b, 100 - k));
    MixingSample::new(v).unwrap()
}

#[test]
fn coupling_bound_dominates_exact_tv() {
    let mut rng = stream_rng(5, 0);
    for case in 0..20 {
        let lam = if case % 4 == 0 {
            MixingSample::constant(rng.random_range(0.0..6.0)).unwrap()
        } else {
            two_point(rng.random_range(0.0..6.0), rng.random_range(0.0..6.0), rng.random_range(0.05..0.95))
        };
        let m = two_point(rng.random_range(0.0..6.0), rng.random_range(0.0..6.0), rng.random_range(0.05..0.95));
        let n = poisson_cutoff(lam.max().max(m.max()), 1e-13);
        let tv = tv_exact(&mixpo_pmf_vec(&lam, n), &mixpo_pmf_vec(&m, n)).unwrap();
        let bound = tv_bound_theorem_s2(&lam, &m, false).unwrap();
        assert!(tv <= bound.value + 3.0 * bound.stderr, "case {case}: {tv} > {bound:?}");
        let (_, best) = best_coupling_bound(&lam, &m).unwrap();
        assert!(tv <= best.value + 3.0 * best.stderr, "case {case}");
    }
}

#[test]
fn degenerate_bound_is_exact() {
    for (a, b) in [(1.0, 1.21), (0.0, 0.3), (4.0, 9.0), (2.5, 2.5)] {
        let lam = MixingSample::constant(a).unwrap();
        let m = MixingSample::constant(b).unwrap();
        for coupled in [true, false] {
            let est = tv_bound_theorem_s2(&lam, &m, coupled).unwrap();
            assert_eq!(est.value, s2_integrand(a, b));
            assert_eq!(est.stderr, 0.0);
        }
    }
    assert!((s2_integrand(1.0, 1.21) - 0.1).abs() < 1e-15);
}

#[test]
fn comonotone_not_worse_than_independent() {
    let mut rng = stream_rng(6, 0);
    for _ in 0..10 {
        let p = net(rng.random_range(1.0..3.0), 0.0, rng.random_range(0.5..2.0), rng.random_range(0.5..2.0), Social::Exponential { rate: 1.0 });
        let lam = MixingSample::new((0..1000).map(|_| rng.random_range(0.0..3.0)).collect()).unwrap();
        let m = sample_asymptotic_m(&p, 1000, rng.random()).unwrap();
        let co = s2_bound_with(&lam, &m, Coupling::Comonotone).unwrap();
        let ind = s2_bound_with(&lam, &m, Coupling::Independent).unwrap();
        assert!(co.value <= ind.value + 3.0 * ind.stderr, "{co:?} {ind:?}");
    }
}

#[test]
fn adaptive_pmf_tail() {
    let mix = MixingSample::new(vec![0.5, 12.0, 80.0]).unwrap();
    let p = mixpo_pmf_adaptive(&mix);
    assert!(p.tail < 1e-10);
    assert!(poisson_upper_tail(80.0, p.probs.len() as u64 - 1) < 1e-10);
    let pm = DiscretePmf::point_mass(0);
    let po = mixpo_pmf_vec(&MixingSample::constant(1.0).unwrap(), 60);
    assert!((tv_exact(&po, &pm).unwrap() - (1.0 - (-1f64).exp())).abs() < 1e-12);
}
