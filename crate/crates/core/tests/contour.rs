use bdnet::bdp::BdParams;
use bdnet::contour::*;
use bdnet::rng::replicate;
use bdnet::stats::{ks_pvalue, ks_statistic};
use rand::Rng;

fn params(l: f64, m: f64) -> BdParams {
    BdParams::new(l, m).unwrap()
}

/// Probability integral transform of a step that is `Exp(rate)` but
/// censored at `cap`; censored steps get a uniform draw on the censored
/// part of the range, so all outputs are i.i.d. uniform.
fn pit<R: Rng + ?Sized>(step: f64, cap: f64, censored: bool, rate: f64, rng: &mut R) -> f64 {
    if censored {
        let lo = -(-rate * cap).exp_m1();
        lo + (1.0 - lo) * rng.random::<f64>()
    } else {
        -(-rate * step).exp_m1()
    }
}

#[test]
fn step_sizes_follow_rates() {
    let (l, m, t) = (1.0, 2.0, 1.5);
    let p = params(l, m);
    let per_run = replicate(3, 20_000, |rng, _| {
        let e = sample_contour(&p, t, rng).unwrap();
        let x = &e.extrema;
        let mut ups = Vec::new();
        let mut downs = Vec::new();
        for k in (1..x.len()).step_by(2) {
            let (from, peak, to) = (x[k - 1], x[k], x[k + 1]);
            ups.push(pit(peak - from, t - from, peak == t, m, rng));
            downs.push(pit(peak - to, peak, to == 0.0, l, rng));
        }
        (ups, downs)
    });
    let mut ups: Vec<f64> = per_run.iter().flat_map(|r| r.0.iter().copied()).collect();
    let mut downs: Vec<f64> = per_run.iter().flat_map(|r| r.1.iter().copied()).collect();
    for v in [&mut ups, &mut downs] {
        v.sort_by(f64::total_cmp);
        let d = ks_statistic(v, |u| u.clamp(0.0, 1.0));
        assert!(ks_pvalue(d, v.len()) > 1e-3, "d = {d}, n = {}", v.len());
    }
}

#[test]
fn deflected_maxima_stay_below_height() {
    let p = params(2.0, 1.0);
    let ok = replicate(4, 5_000, |rng, _| {
        let e = sample_contour(&p, 1.5, rng).unwrap();
        e.maxima().all(|h| h <= 1.5) && e.validate().is_ok()
    });
    assert!(ok.into_iter().all(|b| b));
}

#[test]
fn undeflected_contour_terminates() {
    let lens = replicate(5, 100_000, |rng, _| sample_contour(&params(1.0, 2.0), f64::INFINITY, rng).unwrap().extrema.len());
    assert!(lens.iter().all(|&n| n >= 3 && n % 2 == 1));
    // Critical: finite but heavy-tailed, so only a few hundred runs.
    let lens = replicate(6, 200, |rng, _| sample_contour(&params(1.0, 1.0), f64::INFINITY, rng).unwrap().extrema.len());
    assert!(lens.iter().all(|&n| n >= 3));
    assert!(sample_contour(&params(2.0, 1.0), f64::INFINITY, &mut rand::rng()).is_err());
}

#[test]
fn bijection_is_exact() {
    assert_eq!(bijection_failures(&params(1.0, 2.0), 1.5, 10_000, 7).unwrap(), 0);
    assert_eq!(bijection_failures(&params(2.0, 1.0), 2.0, 2_000, 8).unwrap(), 0);
}

#[test]
fn figure_shape_round_trip() {
    let e = Excursion::new(vec![0.0, 2.0, 1.5, 3.0, 2.5, 3.2, 1.0, 2.1, 0.0], f64::INFINITY).unwrap();
    let tree = phi(&e).unwrap();
    assert_eq!(tree.nodes.len(), 4);
    let lengths: Vec<f64> = tree.nodes.iter().map(|n| n.tip - n.attach).collect();
    let expected = [2.0, 1.5, 0.7, 1.1];
    for (a, b) in lengths.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{lengths:?}");
    }
    assert_eq!(phi_inverse(&tree).unwrap().extrema, e.extrema);
}

#[test]
fn contour_and_path_trees_agree_in_law() {
    let check = tree_law_check(&params(1.0, 2.0), 1.5, 20_000, 1e-3, 9).unwrap();
    assert!(check.passed, "{check:?}");
    let check = tree_law_check(&params(2.0, 1.0), 1.0, 20_000, 1e-3, 10).unwrap();
    assert!(check.passed, "{check:?}");
}

#[test]
fn maxima_at_height_follow_population_law() {
    for (l, m, t) in [(1.0, 2.0, 1.5), (2.0, 1.0, 1.0)] {
        let tv = deflection_count_tv(&params(l, m), t, 100_000, 11).unwrap();
        assert!(tv <= 0.02, "{l} {m}: {tv}");
    }
}
