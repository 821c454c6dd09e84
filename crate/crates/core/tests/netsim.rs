//! Monte Carlo checks of the network simulator against the degree formulas.

use bdnet::bdp::{self, simulate_surviving, simulate_with, BdParams};
use bdnet::netsim::{
    self, lambda_general_from_path, pick_uniform_living, simulate_network_with, NetParams, Social,
};
use bdnet::rng::{replicate, stream_rng};
use bdnet::stats::{chi2_gof, chi2_homogeneity, counts, dkw_radius, grid_sup_distance, mean_estimate, tv_counts};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

const ALPHA: f64 = 1e-3;

fn params(l: f64, m: f64, a: f64, b: f64) -> NetParams {
    NetParams::new(BdParams::new(l, m).unwrap(), a, b, Social::Exponential { rate: 1.0 }).unwrap()
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).unwrap().sample(rng) as usize
    }
}

fn simulated_degrees(p: &NetParams, t: f64, n: usize, seed: u64) -> Vec<usize> {
    replicate(seed, n, |rng, _| loop {
        let real = simulate_network_with(p, t, rng).unwrap();
        if let Ok(s) = pick_uniform_living(&real, t, rng) {
            break s.degree;
        }
    })
}

fn poissonized_lambda(p: &NetParams, t: f64, n: usize, seed: u64) -> Vec<(f64, usize)> {
    replicate(seed, n, |rng, _| {
        let (path, _) = simulate_surviving(&p.bd, t, rng, 1_000_000).unwrap();
        let social: Vec<f64> = (0..path.nodes.len()).map(|_| p.social.sample(rng)).collect();
        let living = path.living_at(t);
        let j = living[rng.random_range(0..living.len())];
        let lam = lambda_general_from_path(&path, &social, p.alpha, p.beta, j, t).unwrap();
        (lam, poisson(lam, rng))
    })
}

#[test]
fn degree_law_matches_mixed_poisson_pure_birth() {
    let p = params(2.0, 0.0, 1.0, 1.0);
    let a = counts(simulated_degrees(&p, 1.5, 20_000, 1));
    let b = counts(poissonized_lambda(&p, 1.5, 20_000, 2).into_iter().map(|x| x.1));
    let out = chi2_homogeneity(&a, &b);
    assert!(out.p_value > ALPHA, "{out:?}, tv = {}", tv_counts(&a, &b));
}

#[test]
fn degree_law_matches_mixed_poisson_general() {
    let p = params(2.0, 1.0, 1.0, 2.0);
    let a = counts(simulated_degrees(&p, 2.0, 20_000, 3));
    let b = counts(poissonized_lambda(&p, 2.0, 20_000, 4).into_iter().map(|x| x.1));
    let out = chi2_homogeneity(&a, &b);
    assert!(out.p_value > ALPHA, "{out:?}, tv = {}", tv_counts(&a, &b));
}

#[test]
fn mean_lambda_equals_mean_degree() {
    let p = params(2.0, 0.0, 1.0, 1.0);
    let lam: Vec<f64> = poissonized_lambda(&p, 1.5, 20_000, 5).into_iter().map(|x| x.0).collect();
    let deg: Vec<f64> = simulated_degrees(&p, 1.5, 20_000, 6).into_iter().map(|d| d as f64).collect();
    let (a, b) = (mean_estimate(&lam), mean_estimate(&deg));
    let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!((a.value - b.value).abs() <= 3.0 * se, "{a:?} vs {b:?}");
}

#[test]
fn node_process_marginal_matches_birth_death_law() {
    let p = params(2.0, 1.0, 1.0, 1.0);
    let t = 1.0;
    let a = counts(replicate(7, 20_000, |rng, _| {
        simulate_network_with(&p, t, rng).unwrap().path.population_at(t)
    }));
    let b = counts(replicate(8, 20_000, |rng, _| simulate_with(&p.bd, t, rng).unwrap().population_at(t)));
    assert!(tv_counts(&a, &b) <= 0.02);
    let probs = bdp::pmf_vec(&p.bd, t, a.len() as u64 + 50).unwrap();
    assert!(chi2_gof(&a, &probs).p_value > ALPHA);
}

#[test]
fn picks_are_uniform_over_living() {
    let p = params(2.0, 0.0, 1.0, 1.0);
    let mut rng = stream_rng(9, 0);
    let real = loop {
        let r = simulate_network_with(&p, 1.0, &mut rng).unwrap();
        if r.path.population_at(1.0) >= 4 {
            break r;
        }
    };
    let living = real.path.living_at(1.0);
    let picks = (0..20_000).map(|_| {
        let s = pick_uniform_living(&real, 1.0, &mut rng).unwrap();
        living.iter().position(|&v| v == s.picked_node).unwrap()
    });
    let c = counts(picks);
    let probs = vec![1.0 / living.len() as f64; living.len()];
    assert!(chi2_gof(&c, &probs).p_value > ALPHA);
}

#[test]
fn outgoing_edges_are_poisson_given_age() {
    // Pure birth with constant social index: given its age a, the number of
    // surviving edges created by a non-initial node is Po((a s / b)(1 - e^{-b a})).
    let (alpha, beta, s) = (1.5, 1.0, 2.0);
    let p = NetParams::new(BdParams::new(1.5, 0.0).unwrap(), alpha, beta, Social::Constant { value: s }).unwrap();
    let t = 2.0;
    let resid = replicate(10, 20_000, |rng, _| {
        let real = simulate_network_with(&p, t, rng).unwrap();
        // The creator's clock only runs while another node is alive; for a
        // non-initial node this holds for its whole life.
        let y = real.path.population_at(t);
        if y < 2 {
            return None;
        }
        let node = rng.random_range(1..y);
        let a = t - real.path.nodes[node].birth_time;
        let m = alpha * s / beta * -(-beta * a).exp_m1();
        let k = real.outgoing_at(node, t) as f64;
        Some(((k - m), (k - m) * (k - m) - m))
    });
    let r: Vec<(f64, f64)> = resid.into_iter().flatten().collect();
    let first: Vec<f64> = r.iter().map(|x| x.0).collect();
    let second: Vec<f64> = r.iter().map(|x| x.1).collect();
    let (e1, e2) = (mean_estimate(&first), mean_estimate(&second));
    assert!(e1.within(0.0, 3.0), "{e1:?}");
    assert!(e2.within(0.0, 3.0), "dispersion {e2:?}");
}

#[test]
fn edge_lifetimes_are_exponential() {
    let p = params(1.0, 0.0, 2.0, 1.5);
    let (h, cap) = (4.0, 2.0);
    let lives: Vec<Vec<f64>> = replicate(11, 3_000, |rng, _| {
        let real = simulate_network_with(&p, h, rng).unwrap();
        real.edges
            .iter()
            .filter(|e| e.birth_time < h - cap)
            .map(|e| (e.death_time - e.birth_time).min(cap))
            .collect()
    });
    let mut all: Vec<f64> = lives.into_iter().flatten().collect();
    all.sort_by(f64::total_cmp);
    let grid: Vec<f64> = (0..100).map(|i| cap * i as f64 / 100.0).collect();
    let d = grid_sup_distance(&all, &grid, |x| -(-1.5 * x).exp_m1());
    assert!(d <= dkw_radius(all.len(), ALPHA), "{d}");
}

#[test]
fn multiple_edges_get_rarer() {
    let p = params(2.0, 1.0, 1.0, 2.0);
    let pts = netsim::multiple_edge_stats(&p, &[1.0, 3.0], 2_000, 12).unwrap();
    assert!(pts[0].fraction > 0.0);
    assert!(pts.iter().all(|x| x.survivors > 0));
}
