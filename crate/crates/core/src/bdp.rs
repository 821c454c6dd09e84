//! Linear birth–death process started from one individual.
//!
//! Exact simulation of the node process, the one-dimensional mass function
//! `p_n(t)`, moments of `(Y_t, B_t, D_t)`, reciprocal moments and extinction
//! probabilities.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::rng::{stream_rng, Rng as StreamRng};

/// Per-capita birth rate `lambda` and death rate `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BdParams {
    pub lambda: f64,
    pub mu: f64,
}

impl BdParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain(format!("birth rate must be positive and finite, got {lambda}"));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return domain(format!("death rate must be non-negative and finite, got {mu}"));
        }
        Ok(Self { lambda, mu })
    }

    /// `lambda > mu`.
    pub fn supercritical(&self) -> bool {
        self.lambda > self.mu
    }

    /// Malthusian parameter `lambda - mu`.
    pub fn growth_rate(&self) -> f64 {
        self.lambda - self.mu
    }

    /// Exact (bitwise) equality of the two rates.
    pub fn is_critical(&self) -> bool {
        self.lambda == self.mu
    }

    fn require_supercritical(&self, what: &str) -> Result<()> {
        if self.supercritical() {
            Ok(())
        } else {
            domain(format!("{what} requires lambda > mu (lambda={}, mu={})", self.lambda, self.mu))
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        domain(format!("time must be finite and non-negative, got {t}"))
    }
}

/// `p~(t)` together with `1 - lambda p~` and `1 - mu p~`.
///
/// All three are written through `expm1` so that no subtraction of nearly
/// equal quantities occurs, including when `lambda - mu` is tiny relative to
/// `lambda`. The bitwise-critical case uses the separate exact expressions.
#[derive(Debug, Clone, Copy)]
struct Tilde {
    pt: f64,
    one_minus_lam: f64,
    one_minus_mu: f64,
}

fn tilde(p: &BdParams, t: f64) -> Tilde {
    let (l, m) = (p.lambda, p.mu);
    if p.is_critical() {
        let d = 1.0 + l * t;
        return Tilde {
            pt: t / d,
            one_minus_lam: 1.0 / d,
            one_minus_mu: 1.0 / d,
        };
    }
    let r = l - m;
    if r > 0.0 {
        // e^{-rt} - 1, denominator lambda - mu e^{-rt}
        let em = (-r * t).exp_m1();
        let den = r - m * em;
        Tilde {
            pt: -em / den,
            one_minus_lam: r * (1.0 + em) / den,
            one_minus_mu: r / den,
        }
    } else {
        // e^{rt} - 1, denominator lambda e^{rt} - mu (negative)
        let e = (r * t).exp_m1();
        let den = l * e + r;
        Tilde {
            pt: e / den,
            one_minus_lam: r / den,
            one_minus_mu: r * (1.0 + e) / den,
        }
    }
}

/// `P(Y_t = n)` for the process started from one individual.
pub fn pmf(params: &BdParams, t: f64, n: u64) -> Result<f64> {
    check_time(t)?;
    let tl = tilde(params, t);
    Ok(pmf_from(params, &tl, n))
}

fn pmf_from(params: &BdParams, tl: &Tilde, n: u64) -> f64 {
    if n == 0 {
        return params.mu * tl.pt;
    }
    let q = params.lambda * tl.pt;
    let head = tl.one_minus_mu * tl.one_minus_lam;
    if n == 1 {
        return head;
    }
    if q == 0.0 {
        return 0.0;
    }
    let k = n - 1;
    let pow = if k <= i32::MAX as u64 {
        q.powi(k as i32)
    } else {
        (k as f64 * q.ln()).exp()
    };
    head * pow
}

/// `P(Y_t = n)` for `n = 0..=n_max`.
pub fn pmf_vec(params: &BdParams, t: f64, n_max: u64) -> Result<Vec<f64>> {
    check_time(t)?;
    let tl = tilde(params, t);
    Ok((0..=n_max).map(|n| pmf_from(params, &tl, n)).collect())
}

/// `P(Y_t = 0)`.
pub fn p0_prob(params: &BdParams, t: f64) -> Result<f64> {
    pmf(params, t, 0)
}

/// `P(Y_t > 0)`, the acceptance probability of rejection sampling on survival.
pub fn survival_prob(params: &BdParams, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(1.0 - params.mu * tilde(params, t).pt)
}

/// Ratio `lambda p~(t)` of the geometric law of `Y_t` given `Y_t > 0`.
pub fn conditional_geometric_ratio(params: &BdParams, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(params.lambda * tilde(params, t).pt)
}

/// Moments of population size, births (initial individual included) and
/// deaths at one time point.
///
/// Birth/death fields are `None` when `lambda == mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub t: f64,
    pub mean_y: f64,
    pub var_y: f64,
    pub mean_b: Option<f64>,
    pub var_b: Option<f64>,
    pub cov_by: Option<f64>,
    pub mean_d: Option<f64>,
}

/// Closed-form moments at time `t`, with `B_0 = 1`, `D_0 = 0`.
///
/// The second-order birth moments solve the cumulant equations
/// `k11' = r k11 + lambda (k02 + k01)` and `k20' = 2 lambda k11 + lambda k01`
/// with zero initial values.
pub fn moments(params: &BdParams, t: f64) -> Result<MomentReport> {
    check_time(t)?;
    let (l, m) = (params.lambda, params.mu);
    if params.is_critical() {
        return Ok(MomentReport {
            t,
            mean_y: 1.0,
            var_y: 2.0 * l * t,
            mean_b: None,
            var_b: None,
            cov_by: None,
            mean_d: None,
        });
    }
    let r = l - m;
    let e = (r * t).exp();
    let em1 = (r * t).exp_m1();
    let var_y = (l + m) / r * e * em1;
    let mean_b = 1.0 + l * em1 / r;
    let mean_d = m * em1 / r;
    let cov_by = l * (l + m) / (r * r) * e * em1 - 2.0 * l * m / r * t * e;
    let var_b = l * l * (l + m) / r.powi(3) * e * e
        - 4.0 * l * l * m / (r * r) * t * e
        - l * (l + m) / (r * r) * e
        - l * m * (l + m) / r.powi(3);
    Ok(MomentReport {
        t,
        mean_y: e,
        var_y,
        mean_b: Some(mean_b),
        var_b: Some(var_b.max(0.0)),
        cov_by: Some(cov_by),
        mean_d: Some(mean_d),
    })
}

/// `E(1/Y_t | Y_t > 0)`.
///
/// Equals `log(1+z)/z` with `z = lambda (e^{(lambda-mu)t}-1)/(lambda-mu)`,
/// which reduces to `z = lambda t` in the critical case.
pub fn recip_mean_conditional(params: &BdParams, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return domain("reciprocal mean requires t > 0");
    }
    let (l, m) = (params.lambda, params.mu);
    let r = l - m;
    let z = if params.is_critical() {
        l * t
    } else {
        l * (r * t).exp_m1() / r
    };
    if z.is_finite() {
        return Ok(if z < 1e-8 { 1.0 - z / 2.0 } else { z.ln_1p() / z });
    }
    // e^{rt} overflowed; work with log z.
    let log_z = (l / r).ln() + r * t + (-(-r * t).exp_m1()).ln();
    Ok((log_z.ln() - log_z).exp())
}

/// Upper bound on `E(Y_t^{-1/2} | Y_t > 0)` for `lambda > mu` and
/// `t >= log 2 / (lambda - mu)`.
pub fn recip_sqrt_bound(params: &BdParams, t: f64) -> Result<f64> {
    params.require_supercritical("reciprocal square-root bound")?;
    check_time(t)?;
    let r = params.growth_rate();
    let t0 = std::f64::consts::LN_2 / r;
    if t < t0 * (1.0 - 1e-12) {
        return domain(format!("bound needs t >= log(2)/(lambda-mu) = {t0}, got {t}"));
    }
    let inner = 2.0 * r / params.lambda * ((params.lambda / r).ln() + r * t);
    Ok((-0.5 * r * t).exp() * inner.sqrt())
}

/// `E(Y_t^{-1/2} | Y_t > 0)` by summing the conditional geometric law.
///
/// Cost grows like `1 / P(Y_t = 1 | Y_t > 0)`; intended for moderate `t`.
pub fn recip_sqrt_mean_conditional(params: &BdParams, t: f64) -> Result<f64> {
    check_time(t)?;
    let tl = tilde(params, t);
    let q = params.lambda * tl.pt;
    let w = tl.one_minus_lam;
    let mut sum = 0.0;
    let mut qn = 1.0;
    let mut n = 1u64;
    loop {
        let term = w * qn / (n as f64).sqrt();
        sum += term;
        qn *= q;
        n += 1;
        if term < 1e-17 * sum || qn == 0.0 {
            break;
        }
        if n > 500_000_000 {
            return domain("series for E(Y^-1/2) does not converge fast enough at this t");
        }
    }
    Ok(sum)
}

/// `E(1/(Y_t - 1) 1{Y_t > 1} | Y_t > 0) = (1-q) (-log(1-q))`, `q = lambda p~(t)`.
pub fn recip_excess_mean_conditional(params: &BdParams, t: f64) -> Result<f64> {
    check_time(t)?;
    let w = tilde(params, t).one_minus_lam;
    Ok(-w * w.ln())
}

/// `E(1/Y_t | Y_inf > 0)` for `lambda > mu`, summed in closed form over the
/// law of `Y_t` weighted by the survival probability `1 - (mu/lambda)^n`.
pub fn recip_mean_given_ultimate_survival(params: &BdParams, t: f64) -> Result<f64> {
    params.require_supercritical("conditioning on ultimate survival")?;
    check_time(t)?;
    if t == 0.0 {
        return Ok(1.0);
    }
    let tl = tilde(params, t);
    let q = params.lambda * tl.pt;
    let sum = tl.one_minus_mu * tl.one_minus_lam / q * (tl.one_minus_mu.ln() - tl.one_minus_lam.ln());
    Ok(sum / (1.0 - params.mu / params.lambda))
}

/// Probability `(mu/lambda)^m` (or 1 if `mu >= lambda`) that a process
/// started from `m` individuals dies out.
pub fn extinct_prob_eventual(params: &BdParams, m: u64) -> Result<f64> {
    if m == 0 {
        return domain("initial population must be at least one");
    }
    if params.lambda >= params.mu {
        Ok((params.mu / params.lambda).powf(m as f64))
    } else {
        Ok(1.0)
    }
}

/// `P(Y_inf = 0 | Y_T > 0) = (mu/lambda) e^{-(lambda-mu)T}`.
pub fn extinct_prob_conditional(params: &BdParams, t: f64) -> Result<f64> {
    params.require_supercritical("conditional extinction probability")?;
    check_time(t)?;
    Ok(params.mu / params.lambda * (-params.growth_rate() * t).exp())
}

/// Exact `P(Y_T = 1 | Y_T > 0)` and the bound `2(lambda-mu)/(lambda e^{(lambda-mu)T})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbOne {
    pub exact: f64,
    pub bound: f64,
    /// `T >= log 2 / (lambda - mu)`, where the bound is guaranteed.
    pub bound_applies: bool,
}

pub fn prob_one_conditional(params: &BdParams, t: f64) -> Result<ProbOne> {
    params.require_supercritical("P(Y_T = 1 | Y_T > 0) bound")?;
    check_time(t)?;
    let r = params.growth_rate();
    Ok(ProbOne {
        exact: tilde(params, t).one_minus_lam,
        bound: 2.0 * r / params.lambda * (-r * t).exp(),
        bound_applies: t >= std::f64::consts::LN_2 / r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Birth,
    Death,
}

/// One jump of the population: a birth creates `node`, a death removes it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub node: usize,
}

/// Birth and death time of one node; nodes are numbered in birth order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub birth_time: f64,
    /// `+inf` when the node is alive at the horizon (serialised as `null`).
    #[serde(with = "inf_as_null")]
    pub death_time: f64,
    /// Node that gave birth; `None` for the initial node.
    pub parent: Option<usize>,
}

impl NodeRecord {
    pub fn alive_at(&self, t: f64) -> bool {
        self.birth_time <= t && t < self.death_time
    }
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Complete event log of one realisation on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationPath {
    pub params: BdParams,
    pub horizon: f64,
    pub seed: u64,
    pub stream: u64,
    pub events: Vec<Event>,
    pub nodes: Vec<NodeRecord>,
}

impl PopulationPath {
    /// `Y_t`.
    pub fn population_at(&self, t: f64) -> usize {
        let k = self.events.partition_point(|e| e.time <= t);
        let births = self.events[..k].iter().filter(|e| e.kind == EventKind::Birth).count();
        1 + births - (k - births)
    }

    /// Population at the horizon.
    pub fn final_population(&self) -> usize {
        let births = self.nodes.len() - 1;
        let deaths = self.events.len() - births;
        1 + births - deaths
    }

    /// `B_t`, counting the initial individual.
    pub fn births_until(&self, t: f64) -> usize {
        1 + self.events
            .iter()
            .take_while(|e| e.time <= t)
            .filter(|e| e.kind == EventKind::Birth)
            .count()
    }

    /// `D_t`.
    pub fn deaths_until(&self, t: f64) -> usize {
        self.events
            .iter()
            .take_while(|e| e.time <= t)
            .filter(|e| e.kind == EventKind::Death)
            .count()
    }

    /// Ids of the nodes alive at time `t`, in birth order.
    pub fn living_at(&self, t: f64) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.alive_at(t))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn extinct(&self) -> bool {
        self.final_population() == 0
    }

    /// Event times `T_1 = 0 < T_2 < ... < T_M` up to `t` together with the
    /// population just after each, where event 1 is the initial individual.
    pub fn event_table(&self, t: f64) -> (Vec<f64>, Vec<usize>) {
        let mut times = vec![0.0];
        let mut pop = vec![1usize];
        let mut y = 1usize;
        for e in self.events.iter().take_while(|e| e.time <= t) {
            match e.kind {
                EventKind::Birth => y += 1,
                EventKind::Death => y -= 1,
            }
            times.push(e.time);
            pop.push(y);
        }
        (times, pop)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("path serialises")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Exact simulation on `[0, horizon]` using stream 0 of `seed`.
pub fn simulate_path(params: &BdParams, horizon: f64, seed: u64) -> Result<PopulationPath> {
    simulate_path_stream(params, horizon, seed, 0)
}

/// Exact simulation on `[0, horizon]` using replicate stream `stream`.
pub fn simulate_path_stream(
    params: &BdParams,
    horizon: f64,
    seed: u64,
    stream: u64,
) -> Result<PopulationPath> {
    let mut rng = stream_rng(seed, stream);
    let mut path = simulate_with(params, horizon, &mut rng)?;
    path.seed = seed;
    path.stream = stream;
    Ok(path)
}

/// Exact simulation driven by a caller-supplied generator.
///
/// With `n` individuals the next event comes after an `Exp(n(lambda+mu))`
/// time and is a birth with probability `lambda/(lambda+mu)`; the parent of a
/// birth and the victim of a death are uniform among the living.
pub fn simulate_with<R: Rng + ?Sized>(
    params: &BdParams,
    horizon: f64,
    rng: &mut R,
) -> Result<PopulationPath> {
    check_time(horizon)?;
    let total = params.lambda + params.mu;
    let p_birth = params.lambda / total;
    let mut nodes = vec![NodeRecord {
        birth_time: 0.0,
        death_time: f64::INFINITY,
        parent: None,
    }];
    let mut alive: Vec<usize> = vec![0];
    let mut events = Vec::new();
    let mut t = 0.0;
    while !alive.is_empty() {
        let e: f64 = Exp1.sample(rng);
        t += e / (alive.len() as f64 * total);
        if t > horizon {
            break;
        }
        let k = rng.random_range(0..alive.len());
        if rng.random::<f64>() < p_birth {
            let id = nodes.len();
            nodes.push(NodeRecord {
                birth_time: t,
                death_time: f64::INFINITY,
                parent: Some(alive[k]),
            });
            alive.push(id);
            events.push(Event {
                time: t,
                kind: EventKind::Birth,
                node: id,
            });
        } else {
            let id = alive.swap_remove(k);
            nodes[id].death_time = t;
            events.push(Event {
                time: t,
                kind: EventKind::Death,
                node: id,
            });
        }
    }
    Ok(PopulationPath {
        params: *params,
        horizon,
        seed: 0,
        stream: 0,
        events,
        nodes,
    })
}

/// Draw paths until one survives to `horizon`; returns the path and the
/// number of attempts used.
pub fn simulate_surviving<R: Rng + ?Sized>(
    params: &BdParams,
    horizon: f64,
    rng: &mut R,
    max_attempts: usize,
) -> Result<(PopulationPath, usize)> {
    for attempt in 1..=max_attempts {
        let p = simulate_with(params, horizon, rng)?;
        if !p.extinct() {
            return Ok((p, attempt));
        }
    }
    Err(crate::Error::Condition(format!(
        "no surviving path in {max_attempts} attempts"
    )))
}

/// Population counts only: `(Y_T, B_T)` without the event log.
pub fn simulate_counts<R: Rng + ?Sized>(params: &BdParams, horizon: f64, rng: &mut R) -> (u64, u64) {
    let total = params.lambda + params.mu;
    let p_birth = params.lambda / total;
    let (mut y, mut b) = (1u64, 1u64);
    let mut t = 0.0;
    while y > 0 {
        let e: f64 = Exp1.sample(rng);
        t += e / (y as f64 * total);
        if t > horizon {
            break;
        }
        if rng.random::<f64>() < p_birth {
            y += 1;
            b += 1;
        } else {
            y -= 1;
        }
    }
    (y, b)
}

/// Outcome of running a population forward until its fate is settled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fate {
    pub extinct: bool,
    /// Smallest population size seen along the continuation.
    pub min_population: u64,
}

/// Continue a process from `y0` individuals until it dies out or reaches
/// `cap` individuals, where the residual extinction probability
/// `(mu/lambda)^cap` is treated as zero.
pub fn run_to_fate<R: Rng + ?Sized>(params: &BdParams, y0: u64, cap: u64, rng: &mut R) -> Fate {
    let p_birth = params.lambda / (params.lambda + params.mu);
    let mut y = y0;
    let mut min = y0;
    while y > 0 && y < cap {
        if rng.random::<f64>() < p_birth {
            y += 1;
        } else {
            y -= 1;
            min = min.min(y);
        }
    }
    Fate {
        extinct: y == 0,
        min_population: min,
    }
}

/// Population cap at which `(mu/lambda)^cap < tol`.
pub fn fate_cap(params: &BdParams, tol: f64) -> u64 {
    if params.mu == 0.0 {
        return 1;
    }
    let ratio = params.mu / params.lambda;
    if ratio >= 1.0 {
        return u64::MAX;
    }
    (tol.ln() / ratio.ln()).ceil().max(1.0) as u64
}

/// Convenience: independent replicate generator for `(seed, stream)`.
pub fn replicate_rng(seed: u64, stream: u64) -> StreamRng {
    stream_rng(seed, stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(l: f64, m: f64) -> BdParams {
        BdParams::new(l, m).unwrap()
    }

    #[test]
    fn initial_value_one() {
        for params in [p(1.0, 0.0), p(2.0, 1.0), p(1.0, 1.0), p(1.0, 3.0)] {
            assert_eq!(pmf(&params, 0.0, 1).unwrap(), 1.0);
            assert_eq!(pmf(&params, 0.0, 0).unwrap(), 0.0);
            assert_eq!(pmf(&params, 0.0, 2).unwrap(), 0.0);
        }
    }

    #[test]
    fn critical_extinction_value() {
        assert_relative_eq!(pmf(&p(1.0, 1.0), 2.0, 0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn critical_branch_matches_direct_formula() {
        let params = p(1.5, 1.5);
        let t: f64 = 0.7;
        let lt = 1.5 * t;
        for n in 1..20u64 {
            let want = lt.powi(n as i32 - 1) / (1.0 + lt).powi(n as i32 + 1);
            assert_relative_eq!(pmf(&params, t, n).unwrap(), want, max_relative = 1e-13);
        }
    }

    #[test]
    fn near_critical_is_continuous() {
        let a = pmf_vec(&p(1.0, 1.0), 3.0, 30).unwrap();
        let b = pmf_vec(&p(1.0, 1.0 - 1e-13), 3.0, 30).unwrap();
        let c = pmf_vec(&p(1.0, 1.0 + 1e-13), 3.0, 30).unwrap();
        for n in 0..=30 {
            assert!((a[n] - b[n]).abs() < 1e-11);
            assert!((a[n] - c[n]).abs() < 1e-11);
        }
    }

    #[test]
    fn general_branch_matches_textbook_form() {
        let params = p(2.0, 1.0);
        let t: f64 = 1.3;
        let e = t.exp();
        let pt = (e - 1.0) / (2.0 * e - 1.0);
        assert_relative_eq!(pmf(&params, t, 0).unwrap(), pt, max_relative = 1e-14);
        for n in 1..10u64 {
            let want = (1.0 - pt) * (1.0 - 2.0 * pt) * (2.0 * pt).powi(n as i32 - 1);
            assert_relative_eq!(pmf(&params, t, n).unwrap(), want, max_relative = 1e-13);
        }
    }

    #[test]
    fn pmf_sums_to_one() {
        for params in [p(2.0, 1.0), p(1.0, 2.0), p(1.0, 1.0), p(3.0, 0.0)] {
            let v = pmf_vec(&params, 1.0, 20_000).unwrap();
            let s: f64 = v.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "{params:?} {s}");
        }
    }

    #[test]
    fn large_time_does_not_overflow() {
        let params = p(2.0, 1.0);
        let v = pmf(&params, 1000.0, 0).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-15);
        let far = recip_mean_conditional(&params, 1000.0).unwrap();
        assert!(far.is_finite() && far >= 0.0);
        assert!(recip_mean_conditional(&params, 300.0).unwrap() > 0.0);
        let sub = p(1.0, 2.0);
        assert_relative_eq!(pmf(&sub, 1000.0, 0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn moments_at_zero() {
        let m = moments(&p(2.0, 1.0), 0.0).unwrap();
        assert_eq!(m.mean_y, 1.0);
        assert_eq!(m.var_y, 0.0);
        assert_relative_eq!(m.mean_b.unwrap(), 1.0);
        assert_relative_eq!(m.mean_d.unwrap(), 0.0);
        assert!(m.var_b.unwrap().abs() < 1e-12);
        assert!(m.cov_by.unwrap().abs() < 1e-12);
    }

    #[test]
    fn moments_example_values() {
        let m = moments(&p(2.0, 1.0), 2.0).unwrap();
        let e2 = 2f64.exp();
        assert_relative_eq!(m.mean_y, e2, max_relative = 1e-14);
        assert_relative_eq!(m.var_y, 3.0 * (e2 * e2 - e2), max_relative = 1e-13);
        assert_relative_eq!(m.mean_b.unwrap() - m.mean_d.unwrap(), m.mean_y, max_relative = 1e-13);
    }

    #[test]
    fn critical_moments_mark_birth_fields() {
        let m = moments(&p(1.0, 1.0), 2.0).unwrap();
        assert_eq!(m.mean_y, 1.0);
        assert_eq!(m.var_y, 4.0);
        assert!(m.mean_b.is_none() && m.var_b.is_none() && m.cov_by.is_none() && m.mean_d.is_none());
    }

    #[test]
    fn pure_birth_births_equal_population() {
        let m = moments(&p(1.5, 0.0), 1.2).unwrap();
        assert_relative_eq!(m.mean_b.unwrap(), m.mean_y, max_relative = 1e-13);
        assert_relative_eq!(m.var_b.unwrap(), m.var_y, max_relative = 1e-12);
        assert_relative_eq!(m.cov_by.unwrap(), m.var_y, max_relative = 1e-12);
    }

    #[test]
    fn recip_mean_critical_value() {
        assert_relative_eq!(
            recip_mean_conditional(&p(1.0, 1.0), 3.0).unwrap(),
            4f64.ln() / 3.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn recip_mean_matches_series() {
        for params in [p(2.0, 1.0), p(1.0, 2.0), p(1.0, 0.0)] {
            let t = 1.1;
            let v = pmf_vec(&params, t, 5000).unwrap();
            let surv = 1.0 - v[0];
            let s: f64 = v.iter().enumerate().skip(1).map(|(n, p)| p / n as f64).sum();
            assert_relative_eq!(recip_mean_conditional(&params, t).unwrap(), s / surv, max_relative = 1e-12);
        }
    }

    #[test]
    fn recip_mean_small_t_tends_to_one() {
        let v = recip_mean_conditional(&p(1.0, 0.0), 1e-9).unwrap();
        assert!((v - 1.0).abs() < 1e-8);
        assert!(recip_mean_conditional(&p(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn recip_sqrt_bound_example() {
        let v = recip_sqrt_bound(&p(2.0, 1.0), std::f64::consts::LN_2).unwrap();
        let want = (2.0 * std::f64::consts::LN_2).sqrt() / 2f64.sqrt();
        assert_relative_eq!(v, want, max_relative = 1e-14);
        let far = recip_sqrt_bound(&p(1.0, 0.99), 200.0).unwrap();
        assert!(far.is_finite() && far > 0.0);
        assert!(recip_sqrt_bound(&p(2.0, 1.0), 0.1).is_err());
    }

    #[test]
    fn recip_sqrt_bound_dominates_exact() {
        for params in [p(2.0, 1.0), p(2.0, 0.0), p(1.0, 0.5)] {
            let t0 = std::f64::consts::LN_2 / params.growth_rate();
            for k in 0..8 {
                let t = t0 + 0.5 * k as f64;
                let exact = recip_sqrt_mean_conditional(&params, t).unwrap();
                assert!(exact <= recip_sqrt_bound(&params, t).unwrap());
            }
        }
    }

    #[test]
    fn eventual_extinction() {
        assert_relative_eq!(extinct_prob_eventual(&p(2.0, 1.0), 3).unwrap(), 0.125);
        assert_eq!(extinct_prob_eventual(&p(1.0, 2.0), 1).unwrap(), 1.0);
        assert_eq!(extinct_prob_eventual(&p(1.0, 0.0), 5).unwrap(), 0.0);
    }

    #[test]
    fn conditional_extinction_matches_definition() {
        let params = p(2.0, 1.0);
        assert_relative_eq!(extinct_prob_conditional(&params, 0.0).unwrap(), 0.5);
        for t in [0.5, 2.0, 4.0] {
            let p0 = p0_prob(&params, t).unwrap();
            let want = (0.5 - p0) / (1.0 - p0);
            assert_relative_eq!(extinct_prob_conditional(&params, t).unwrap(), want, max_relative = 1e-12);
        }
        assert_eq!(extinct_prob_conditional(&p(1.0, 0.0), 5.0).unwrap(), 0.0);
        assert!(extinct_prob_conditional(&p(1.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn prob_one_examples() {
        let params = p(2.0, 1.0);
        let a = prob_one_conditional(&params, std::f64::consts::LN_2).unwrap();
        assert_relative_eq!(a.exact, 1.0 / 3.0, max_relative = 1e-14);
        assert_eq!(prob_one_conditional(&params, 0.0).unwrap().exact, 1.0);
        let b = prob_one_conditional(&params, 3.0).unwrap();
        assert!(b.bound_applies && b.exact <= b.bound);
    }

    #[test]
    fn excess_reciprocal_and_ultimate_survival_series() {
        let params = p(2.0, 1.0);
        let t = 1.4;
        let v = pmf_vec(&params, t, 20_000).unwrap();
        let surv = 1.0 - v[0];
        let ex: f64 = v.iter().enumerate().skip(2).map(|(n, p)| p / (n as f64 - 1.0)).sum();
        assert_relative_eq!(recip_excess_mean_conditional(&params, t).unwrap(), ex / surv, max_relative = 1e-12);
        let ratio = 0.5f64;
        let us: f64 = v
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, p)| p * (1.0 - ratio.powi(n as i32)) / n as f64)
            .sum();
        assert_relative_eq!(
            recip_mean_given_ultimate_survival(&params, t).unwrap(),
            us / (1.0 - ratio),
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_horizon_path_has_no_events() {
        let path = simulate_path(&p(1.0, 0.0), 0.0, 9).unwrap();
        assert!(path.events.is_empty());
        assert_eq!(path.population_at(0.0), 1);
    }

    #[test]
    fn pure_birth_nodes_never_die() {
        let path = simulate_path(&p(1.0, 0.0), 3.0, 11).unwrap();
        assert!(path.nodes.iter().all(|n| n.death_time.is_infinite()));
    }

    #[test]
    fn path_invariants() {
        for seed in 0..200 {
            let path = simulate_path(&p(2.0, 1.5), 3.0, seed).unwrap();
            let mut y = 1i64;
            let mut last = 0.0;
            let mut alive = vec![true];
            for e in &path.events {
                assert!(e.time > last && e.time <= 3.0);
                last = e.time;
                match e.kind {
                    EventKind::Birth => {
                        y += 1;
                        assert_eq!(e.node, alive.len());
                        alive.push(true);
                        let parent = path.nodes[e.node].parent.unwrap();
                        assert!(alive[parent]);
                    }
                    EventKind::Death => {
                        assert!(alive[e.node]);
                        alive[e.node] = false;
                        y -= 1;
                    }
                }
                assert!(y >= 0);
            }
            assert_eq!(y as usize, path.final_population());
            assert_eq!(path.living_at(3.0).len(), path.final_population());
        }
    }

    #[test]
    fn json_round_trip_keeps_infinite_deaths() {
        let path = simulate_path(&p(2.0, 1.0), 1.0, 3).unwrap();
        let back = PopulationPath::from_json(&path.to_json()).unwrap();
        assert_eq!(path, back);
    }

    #[test]
    fn fate_cap_value() {
        let c = fate_cap(&p(2.0, 1.0), 1e-12);
        assert!(0.5f64.powi(c as i32) < 1e-12);
    }
}
