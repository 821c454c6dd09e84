//! Checks of the auxiliary inequalities used by the general bound: exact
//! evaluation on grids where a closed form exists, Monte Carlo with a
//! three-standard-error allowance otherwise.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bdp::{self, run_to_fate, fate_cap, simulate_surviving, simulate_with, BdParams, EventKind, PopulationPath};
use crate::error::{domain, invalid};
use crate::rng::{derive_seed, replicate};
use crate::stats::{binomial_sigma, mean_estimate, MeanVar};
use crate::Result;

/// Outcome of one lemma at one horizon (or one grid, for the deterministic
/// checks). `margin` is the slack left after the allowed Monte Carlo error;
/// negative means failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub name: String,
    pub t: Option<f64>,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub margin: f64,
    pub passed: bool,
    pub detail: String,
}

impl LemmaCheck {
    fn upper(name: &str, t: Option<f64>, lhs: f64, se: f64, rhs: f64, detail: String) -> Self {
        let margin = rhs + 3.0 * se - lhs;
        LemmaCheck {
            name: name.to_string(),
            t,
            lhs,
            lhs_stderr: se,
            rhs,
            margin,
            passed: margin >= 0.0,
            detail,
        }
    }

    fn equal(name: &str, t: Option<f64>, lhs: f64, se: f64, rhs: f64, tol: f64, detail: String) -> Self {
        let margin = 3.0 * se + tol - (lhs - rhs).abs();
        LemmaCheck {
            name: name.to_string(),
            t,
            lhs,
            lhs_stderr: se,
            rhs,
            margin,
            passed: margin >= 0.0,
            detail,
        }
    }
}

/// Settings for [`lemma_checks`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaConfig {
    pub grid: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    /// Rate `c` in the last-event lemma.
    pub c: f64,
    /// Exponents in the running-minimum lemma.
    pub delta: f64,
    pub gamma: f64,
    /// Event indices `l` for the survivor-count lemmas are drawn uniformly
    /// from `1..=max_event_index`.
    pub max_event_index: usize,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        LemmaConfig {
            grid: vec![2.0, 3.0, 4.0],
            replicates: 20_000,
            seed: 0,
            c: 1.0,
            delta: 1.0,
            gamma: 0.25,
            max_event_index: 30,
        }
    }
}

pub const MIN_REPLICATES: usize = 200;

fn require(params: &BdParams) -> Result<(f64, f64, f64)> {
    if !params.supercritical() {
        return domain("lemma checks require lambda > mu");
    }
    Ok((params.lambda, params.mu, params.growth_rate()))
}

fn require_reps(n: usize) -> Result<()> {
    if n < MIN_REPLICATES {
        return invalid(format!("{n} replicates is too few; at least {MIN_REPLICATES} are needed for a 3-sigma check"));
    }
    Ok(())
}

/// `e^{-x} - 1 + x <= x^2/2` on a grid of `x >= 0`.
pub fn check_pl() -> LemmaCheck {
    let mut xs = vec![0.0, 0.5, 1.0, 10.0, 100.0];
    xs.extend((1..=400).map(|k| k as f64 * 0.025));
    let worst = xs
        .iter()
        .map(|&x| x * x / 2.0 - ((-x).exp_m1() + x))
        .fold(f64::INFINITY, f64::min);
    LemmaCheck {
        name: "pl".into(),
        t: None,
        lhs: 0.0,
        lhs_stderr: 0.0,
        rhs: worst,
        margin: worst,
        passed: worst >= 0.0,
        detail: format!("{} grid points", xs.len()),
    }
}

/// `|e^{-z} - (1 - z/n)^n| <= (e/2) z^2/n` for `z/n <= 1`, with `z_n = n/2`
/// on `n = 1..100` plus a grid of other ratios.
pub fn check_l3() -> LemmaCheck {
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for n in 1..=100u32 {
        let nf = n as f64;
        for ratio in [0.5, 0.01, 0.1, 0.25, 0.75, 0.9, 1.0] {
            let z = ratio * nf;
            let lhs = ((-z).exp() - (1.0 - ratio).powi(n as i32)).abs();
            let rhs = std::f64::consts::E / 2.0 * z * z / nf;
            worst = worst.min(rhs - lhs);
            count += 1;
        }
    }
    LemmaCheck {
        name: "l3".into(),
        t: None,
        lhs: 0.0,
        lhs_stderr: 0.0,
        rhs: worst,
        margin: worst,
        passed: worst >= 0.0,
        detail: format!("{count} (z, n) pairs"),
    }
}

/// `P(Y_inf = 0 | Y_T > 0)` from the mass function against the closed form.
pub fn check_austerben2_exact(params: &BdParams, t: f64) -> Result<LemmaCheck> {
    let (l, m, _) = require(params)?;
    let formula = bdp::extinct_prob_conditional(params, t)?;
    let surv = bdp::survival_prob(params, t)?;
    let ratio = m / l;
    let mut sum = 0.0;
    let mut n = 1u64;
    loop {
        let p = bdp::pmf(params, t, n)?;
        let term = p * ratio.powf(n as f64);
        sum += term;
        if term < 1e-18 || n > 1_000_000 {
            break;
        }
        n += 1;
    }
    let lhs = sum / surv;
    Ok(LemmaCheck::equal(
        "austerben2",
        Some(t),
        lhs,
        0.0,
        formula,
        1e-12 * formula.max(1e-300) + 1e-15,
        "E((mu/lambda)^Y | Y > 0) summed over the mass function".into(),
    ))
}

/// Monte Carlo frequency of eventual extinction among paths alive at `t`.
pub fn check_austerben2_mc(params: &BdParams, t: f64, reps: usize, seed: u64) -> Result<LemmaCheck> {
    require(params)?;
    require_reps(reps)?;
    let cap = fate_cap(params, 1e-12);
    let extinct = replicate(seed, reps, |rng, _| -> Result<bool> {
        let (path, _) = simulate_surviving(params, t, rng, 100_000_000)?;
        Ok(run_to_fate(params, path.final_population() as u64, cap, rng).extinct)
    });
    let hits = extinct.into_iter().collect::<Result<Vec<bool>>>()?.iter().filter(|&&e| e).count();
    let p = bdp::extinct_prob_conditional(params, t)?;
    let freq = hits as f64 / reps as f64;
    Ok(LemmaCheck::equal(
        "austerben2_mc",
        Some(t),
        freq,
        binomial_sigma(p, reps),
        p,
        0.0,
        format!("{hits} of {reps} surviving paths died out later"),
    ))
}

/// `P(Y_T = 1 | Y_T > 0) = (lambda-mu)/(lambda e^{rT} - mu) <= 2(lambda-mu)/(lambda e^{rT})`.
pub fn check_nnl(params: &BdParams, t: f64) -> Result<LemmaCheck> {
    let (l, m, r) = require(params)?;
    let exact = bdp::pmf(params, t, 1)? / bdp::survival_prob(params, t)?;
    let closed = r / (l * (r * t).exp() - m);
    let bound = 2.0 * r / (l * (r * t).exp());
    let mut c = LemmaCheck::upper(
        "nnl",
        Some(t),
        exact,
        0.0,
        bound,
        format!("closed form {closed:e}"),
    );
    if (exact - closed).abs() > 1e-10 * closed {
        c.passed = false;
        c.detail = format!("mass function {exact:e} disagrees with closed form {closed:e}");
    }
    c.passed &= t >= std::f64::consts::LN_2 / r;
    Ok(c)
}

/// `E(1{Y>1}/(Y-1) | Y > 0) <= (lambda-mu)/(lambda e^{rT} - mu) (log(lambda/r) + rT)`.
pub fn check_nn2(params: &BdParams, t: f64) -> Result<LemmaCheck> {
    let (l, m, r) = require(params)?;
    let exact = bdp::recip_excess_mean_conditional(params, t)?;
    let bound = r / (l * (r * t).exp() - m) * ((l / r).ln() + r * t);
    Ok(LemmaCheck::upper("nn2", Some(t), exact, 0.0, bound, String::new()))
}

/// `E(1/Y_{T/2} | Y_inf > 0) <= 2(log(lambda/r) + rT/2) e^{-rT/2}` for `T >= 2 log 2 / r`.
pub fn check_n3(params: &BdParams, t: f64) -> Result<LemmaCheck> {
    let (l, _, r) = require(params)?;
    let exact = bdp::recip_mean_given_ultimate_survival(params, t / 2.0)?;
    let bound = 2.0 * ((l / r).ln() + r * t / 2.0) * (-r * t / 2.0).exp();
    Ok(LemmaCheck::upper("n3", Some(t), exact, 0.0, bound, String::new()))
}

/// 1-based event index at which each node was born; the initial node is event 1.
fn birth_event_index(path: &PopulationPath) -> Vec<usize> {
    let mut idx = vec![1usize; path.nodes.len()];
    for (e, ev) in path.events.iter().enumerate() {
        if ev.kind == EventKind::Birth {
            idx[ev.node] = e + 2;
        }
    }
    idx
}

/// Per-path quantities for the lemmas that condition on `Y_T > 0` and a
/// uniformly picked living node `J`.
struct PickedPath {
    born_before_half: bool,
    events: f64,
    since_last_event: f64,
    squared_gaps: f64,
}

fn picked_path<R: Rng + ?Sized>(params: &BdParams, t: f64, rng: &mut R) -> Result<PickedPath> {
    let (path, _) = simulate_surviving(params, t, rng, 100_000_000)?;
    let living = path.living_at(t);
    let j = living[rng.random_range(0..living.len())];
    let (times, _) = path.event_table(t);
    let r = birth_event_index(&path)[j];
    let squared_gaps = times[r - 1..].windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(PickedPath {
        born_before_half: path.nodes[j].birth_time < t / 2.0,
        events: times.len() as f64,
        since_last_event: t - times[times.len() - 1],
        squared_gaps,
    })
}

/// Birth of the picked node before `T/2`, too many events, time since the
/// last event and the squared inter-event gaps after the picked node's
/// birth, all from one set of surviving paths.
pub fn check_picked_node_lemmas(params: &BdParams, t: f64, reps: usize, c: f64, seed: u64) -> Result<Vec<LemmaCheck>> {
    let (l, m, r) = require(params)?;
    require_reps(reps)?;
    let paths = replicate(seed, reps, |rng, _| picked_path(params, t, rng))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    let lr = (l / r).ln();

    let hits = paths.iter().filter(|p| p.born_before_half).count();
    let freq = hits as f64 / reps as f64;
    let rhs = (-0.5 * l * t).exp() + r / (l * (r * t).exp_m1()) * (lr + r * t);
    out.push(LemmaCheck::upper(
        "ne_i",
        Some(t),
        freq,
        binomial_sigma(freq.max(rhs.min(1.0)), reps),
        rhs,
        format!("{hits} of {reps} picked nodes born before T/2"),
    ));

    let thr_events = 2.0 * ((4.0 * l).ln() - r.ln()) / (l + m);
    let kappa = (1.5 * (l + m) * t).exp().floor();
    let hits = paths.iter().filter(|p| p.events >= kappa).count();
    let freq = hits as f64 / reps as f64;
    let rhs = 60.0 * l.powi(3) * (l + m) / r.powi(4) * (-(l + m) * t).exp();
    let mut ne2 = LemmaCheck::upper(
        "ne_ii",
        Some(t),
        freq,
        binomial_sigma(freq.max(rhs.min(1.0)), reps),
        rhs,
        format!("kappa = {kappa}, max events seen {}", paths.iter().map(|p| p.events).fold(0.0, f64::max)),
    );
    ne2.passed &= t >= thr_events;
    out.push(ne2);

    let vals: Vec<f64> = paths.iter().map(|p| -(-c * p.since_last_event).exp_m1()).collect();
    let est = mean_estimate(&vals);
    let rhs = 2.0 * r / (l * (r * t).exp()) + c / l * bdp::recip_excess_mean_conditional(params, t)?;
    let mut nn1 = LemmaCheck::upper("nn1", Some(t), est.value, est.stderr, rhs, format!("c = {c}"));
    nn1.passed &= t >= std::f64::consts::LN_2 / r;
    out.push(nn1);

    let vals: Vec<f64> = paths.iter().map(|p| p.squared_gaps).collect();
    let est = mean_estimate(&vals);
    let t2 = t * t;
    let rhs = m / l * t2 / 4.0 * (-r * t).exp()
        + 60.0 * t2 * l.powi(3) * (l + m) / r.powi(4) * (-(l + m) * t).exp()
        + t2 * (-0.5 * l * t).exp()
        + 2.0 * r / l * (lr + r * t) * t2 * (-r * t).exp()
        + (0.75 * t2 + t / (2.0 * (l + m))) * (1.0 + 2.0 * lr + r * t) * (-0.25 * r * t).exp();
    let mut nl = LemmaCheck::upper("nl", Some(t), est.value, est.stderr, rhs, String::new());
    nl.passed &= t >= (2.0 * std::f64::consts::LN_2 / r).max(thr_events);
    out.push(nl);
    Ok(out)
}

/// Running minimum of the population after `T/2`, conditioned on ultimate
/// survival, against `e^{-gamma r T} + E(1/Y_{T/2} | Y_inf > 0) e^{(gamma/delta) r T}`.
/// Ultimate survival is decided by running each path on until it dies or
/// reaches a size whose extinction probability is below `1e-12`.
pub fn check_hl1(params: &BdParams, t: f64, reps: usize, delta: f64, gamma: f64, seed: u64) -> Result<LemmaCheck> {
    let (_, _, r) = require(params)?;
    require_reps(reps)?;
    if !(delta > 0.0 && gamma > 0.0) {
        return domain("delta and gamma must be positive");
    }
    let cap = fate_cap(params, 1e-12);
    let half = t / 2.0;
    let vals = replicate(seed, reps, |rng, _| -> Result<f64> {
        for _ in 0..100_000_000u64 {
            let path = simulate_with(params, half, rng)?;
            let y = path.final_population() as u64;
            if y == 0 {
                continue;
            }
            let fate = run_to_fate(params, y, cap, rng);
            if !fate.extinct {
                return Ok((fate.min_population as f64).powf(-delta));
            }
        }
        Err(crate::Error::Condition("no ultimately surviving path".into()))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let est = mean_estimate(&vals);
    let rhs = (-gamma * r * t).exp() + bdp::recip_mean_given_ultimate_survival(params, half)? * (gamma / delta * r * t).exp();
    Ok(LemmaCheck::upper(
        "hl1",
        Some(t),
        est.value,
        est.stderr,
        rhs,
        format!("delta = {delta}, gamma = {gamma}"),
    ))
}

/// One draw of `(Y_{T_l}, e^{-mu(T - T_{l+1})}, R_{T_l,T})` for a uniformly
/// chosen `l`, or `None` when fewer than `l + 1` events happen by `T`.
fn survivor_draw<R: Rng + ?Sized>(params: &BdParams, t: f64, max_l: usize, rng: &mut R) -> Result<Option<(f64, f64, f64)>> {
    let l = rng.random_range(1..=max_l);
    let path = simulate_with(params, t, rng)?;
    let (times, pops) = path.event_table(t);
    if times.len() < l + 1 {
        return Ok(None);
    }
    let (tl, tl1) = (times[l - 1], times[l]);
    let y = pops[l - 1] as f64;
    let survivors = path.nodes.iter().filter(|n| n.alive_at(tl) && n.death_time > t).count() as f64;
    Ok(Some((y, (-params.mu * (t - tl1)).exp(), survivors)))
}

fn y_bin(y: f64) -> usize {
    match y as u64 {
        0..=1 => 0,
        2 => 1,
        3 => 2,
        4..=5 => 3,
        6..=8 => 4,
        9..=14 => 5,
        _ => 6,
    }
}

/// Survivor counts `R_{T_l,T}`: binned regression of the first two
/// conditional moments, and the concentration bound
/// `E|(R-1)/(Y-1) 1{Y>1} - q| <= sqrt(6/Y)` with `q = e^{-mu(T-T_{l+1})}`.
///
/// The mean is compared with `(Y - mu/(lambda+mu)) q`; the simpler form
/// `(Y - 1) q` is reported in the detail for reference.
pub fn check_survivor_lemmas(params: &BdParams, t: f64, reps: usize, max_l: usize, seed: u64) -> Result<Vec<LemmaCheck>> {
    let (l, m, _) = require(params)?;
    require_reps(reps)?;
    let p_minus = m / (l + m);
    let draws: Vec<(f64, f64, f64)> = replicate(seed, reps, |rng, _| survivor_draw(params, t, max_l, rng))
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if draws.len() < MIN_REPLICATES {
        return invalid(format!("only {} paths reached the chosen event index", draws.len()));
    }

    let q_bins = 2;
    let bins = 7 * q_bins;
    let mut mean_res = vec![MeanVar::new(); bins];
    let mut sq_res = vec![MeanVar::new(); bins];
    let mut simple_res = MeanVar::new();
    let mut conc = [MeanVar::new(); 7];
    let mut conc_rhs = [MeanVar::new(); 7];
    for &(y, q, r) in &draws {
        let k = y_bin(y) * q_bins + usize::from(q >= 0.5);
        mean_res[k].push(r - (y - p_minus) * q);
        let second = y * q - y * q * q + y * y * q * q - p_minus * (2.0 * (y - 1.0) * q * q + q);
        sq_res[k].push(r * r - second);
        simple_res.push(r - (y - 1.0) * q);
        let ratio = if y > 1.0 { (r - 1.0) / (y - 1.0) } else { 0.0 };
        conc[y_bin(y)].push((ratio - q).abs());
        conc_rhs[y_bin(y)].push((6.0 / y).sqrt());
    }

    // Family-wise three-sigma level across the populated bins.
    let used: Vec<usize> = (0..bins).filter(|&k| mean_res[k].count() >= 30).collect();
    let level = 2.0 * Normal::standard().sf(3.0) / (2 * used.len()) as f64;
    let crit = Normal::standard().inverse_cdf(1.0 - level / 2.0);
    let z = |mv: &MeanVar| if mv.stderr() > 0.0 { (mv.mean() / mv.stderr()).abs() } else if mv.mean() == 0.0 { 0.0 } else { f64::INFINITY };
    let worst = used
        .iter()
        .flat_map(|&k| [z(&mean_res[k]), z(&sq_res[k])])
        .fold(0.0, f64::max);
    let mut out = vec![LemmaCheck {
        name: "no".into(),
        t: Some(t),
        lhs: worst,
        lhs_stderr: 0.0,
        rhs: crit,
        margin: crit - worst,
        passed: worst <= crit,
        detail: format!(
            "max |z| over {} bins for both moments; (Y-1)q form gives pooled z = {:.1}",
            used.len(),
            simple_res.mean() / simple_res.stderr()
        ),
    }];

    let mut worst_nl1: Option<LemmaCheck> = None;
    for k in 0..7 {
        if conc[k].count() < 30 {
            continue;
        }
        let c = LemmaCheck::upper("nl1", Some(t), conc[k].mean(), conc[k].stderr(), conc_rhs[k].mean(), format!("population bin {k}"));
        if worst_nl1.as_ref().is_none_or(|w| c.margin < w.margin) {
            worst_nl1 = Some(c);
        }
    }
    out.extend(worst_nl1);
    Ok(out)
}

/// Paths run to `horizon` and then to their eventual fate. Over the
/// surviving paths, `1/Y_t` must not increase and `Y_t` must not decrease
/// in mean along `times`; over the dying paths `Y_t` must not increase.
pub fn check_martingales(params: &BdParams, times: &[f64], reps: usize, seed: u64) -> Result<Vec<LemmaCheck>> {
    require(params)?;
    require_reps(reps)?;
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
        return invalid("time grid must be non-empty, non-negative and increasing");
    }
    let horizon = times[times.len() - 1];
    let cap = fate_cap(params, 1e-12);
    let runs = replicate(seed, reps, |rng, _| -> Result<(bool, Vec<f64>)> {
        let path = simulate_with(params, horizon, rng)?;
        let y = path.final_population() as u64;
        let extinct = y == 0 || run_to_fate(params, y, cap, rng).extinct;
        Ok((extinct, times.iter().map(|&s| path.population_at(s) as f64).collect()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::new();
    let mut push_worst = |name: &str, group: &[&Vec<f64>], f: &dyn Fn(f64, f64) -> f64| {
        let mut worst: Option<LemmaCheck> = None;
        for k in 1..times.len() {
            let d: Vec<f64> = group.iter().map(|ys| f(ys[k - 1], ys[k])).collect();
            if d.len() < 2 {
                continue;
            }
            let est = mean_estimate(&d);
            let c = LemmaCheck::upper(name, Some(times[k]), est.value, est.stderr, 0.0, format!("step from t = {} over {} paths", times[k - 1], d.len()));
            if worst.as_ref().is_none_or(|w| c.margin < w.margin) {
                worst = Some(c);
            }
        }
        out.push(worst.unwrap_or_else(|| LemmaCheck {
            name: name.to_string(),
            t: None,
            lhs: 0.0,
            lhs_stderr: 0.0,
            rhs: 0.0,
            margin: 0.0,
            passed: true,
            detail: "no paths in this group".into(),
        }));
    };
    let alive: Vec<&Vec<f64>> = runs.iter().filter(|(e, _)| !e).map(|(_, y)| y).collect();
    let dead: Vec<&Vec<f64>> = runs.iter().filter(|(e, _)| *e).map(|(_, y)| y).collect();
    push_worst("supermartingale", &alive, &|a, b| 1.0 / b - 1.0 / a);
    push_worst("submartingale_survival", &alive, &|a, b| a - b);
    push_worst("supermartingale_extinction", &dead, &|a, b| b - a);
    Ok(out)
}

/// Run every check on the horizons of `cfg.grid` that meet each lemma's
/// threshold.
pub fn lemma_checks(params: &BdParams, cfg: &LemmaConfig) -> Result<Vec<LemmaCheck>> {
    let (l, m, r) = require(params)?;
    require_reps(cfg.replicates)?;
    if cfg.grid.is_empty() || cfg.grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return invalid("grid must contain positive finite horizons");
    }
    let ln2 = std::f64::consts::LN_2;
    let thr_events = 2.0 * ((4.0 * l).ln() - r.ln()) / (l + m);
    let mut out = vec![check_pl(), check_l3()];
    for (i, &t) in cfg.grid.iter().enumerate() {
        let seed = derive_seed(cfg.seed, i as u64);
        out.push(check_austerben2_exact(params, t)?);
        out.push(check_austerben2_mc(params, t, cfg.replicates, derive_seed(seed, 1))?);
        if t >= ln2 / r {
            out.push(check_nnl(params, t)?);
        }
        out.push(check_nn2(params, t)?);
        if t >= 2.0 * ln2 / r {
            out.push(check_n3(params, t)?);
        }
        out.push(check_hl1(params, t, cfg.replicates, cfg.delta, cfg.gamma, derive_seed(seed, 2))?);
        for c in check_picked_node_lemmas(params, t, cfg.replicates, cfg.c, derive_seed(seed, 3))? {
            let applies = match c.name.as_str() {
                "ne_ii" => t >= thr_events,
                "nn1" => t >= ln2 / r,
                "nl" => t >= (2.0 * ln2 / r).max(thr_events),
                _ => true,
            };
            if applies {
                out.push(c);
            }
        }
        out.extend(check_survivor_lemmas(params, t, cfg.replicates, cfg.max_event_index, derive_seed(seed, 4))?);
    }
    let mut times = vec![0.0];
    times.extend(cfg.grid.iter().copied());
    times.sort_by(f64::total_cmp);
    times.dedup();
    out.extend(check_martingales(params, &times, cfg.replicates, derive_seed(cfg.seed, 1 << 20))?);
    Ok(out)
}
