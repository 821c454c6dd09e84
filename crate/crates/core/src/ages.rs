//! Age of a uniformly picked living individual at time `T`.
//!
//! Given `Y_T = y`, the living individuals ordered as in the right-aligned
//! contour tree split into `y - 1` individuals with i.i.d. ages of law `F_*`
//! and one "last" individual with law `F^*`, which has an atom at `T`
//! (the individual alive since time 0). Mixing over `y` with the reciprocal
//! moment `E(1/Y_T | Y_T > 0)` gives the unconditional law, which tends to
//! `Exp(lambda)` as `T` grows.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::bdp::{self, BdParams, PopulationPath};
use crate::contour::tree_from_path;
use crate::error::{domain, Error, Result};

fn check_range(t: f64, horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return domain(format!("horizon must be positive and finite, got {horizon}"));
    }
    if !(0.0..=horizon).contains(&t) {
        return domain(format!("age {t} outside [0, {horizon}]"));
    }
    Ok(())
}

/// `1 - F_*(t)`, the survival function of the first-block age law.
pub fn first_block_survival(params: &BdParams, horizon: f64, t: f64) -> Result<f64> {
    check_range(t, horizon)?;
    let l = params.lambda;
    if params.is_critical() {
        return Ok((-l * t).exp() * (horizon - t) / horizon);
    }
    let r = params.growth_rate();
    // e^{-lt} (1 - e^{-r(T-t)}) / (1 - e^{-rT}), valid for either sign of r.
    Ok((-l * t).exp() * (-r * (horizon - t)).exp_m1() / (-r * horizon).exp_m1())
}

/// `F_*`: age law of each of the first `Y_T - 1` individuals.
pub fn first_block_cdf(params: &BdParams, horizon: f64, t: f64) -> Result<f64> {
    Ok(1.0 - first_block_survival(params, horizon, t)?)
}

/// Density of `F_*` on `[0, T]`.
pub fn first_block_density(params: &BdParams, horizon: f64, t: f64) -> Result<f64> {
    check_range(t, horizon)?;
    let (l, m) = (params.lambda, params.mu);
    if params.is_critical() {
        return Ok((-l * t).exp() * (1.0 + l * (horizon - t)) / horizon);
    }
    let r = params.growth_rate();
    let e = (-r * horizon).exp();
    Ok((l * (-l * t).exp() - m * e * (-m * t).exp()) / -(-r * horizon).exp_m1())
}

/// `F^*` below `T` (the continuous part); `F^*(T) = 1`.
pub fn last_individual_cdf(params: &BdParams, horizon: f64, t: f64) -> Result<f64> {
    check_range(t, horizon)?;
    if t == horizon {
        return Ok(1.0);
    }
    let (l, m) = (params.lambda, params.mu);
    if params.is_critical() {
        return Ok(1.0 - (-l * t).exp() * (1.0 + l * t));
    }
    Ok((l * -(-m * t).exp_m1() - m * -(-l * t).exp_m1()) / (l - m))
}

/// Continuous part of the density of `F^*` on `[0, T)`.
pub fn last_individual_density(params: &BdParams, horizon: f64, t: f64) -> Result<f64> {
    check_range(t, horizon)?;
    let (l, m) = (params.lambda, params.mu);
    if params.is_critical() {
        return Ok(l * l * t * (-l * t).exp());
    }
    Ok(l * m * ((-m * t).exp() - (-l * t).exp()) / (l - m))
}

/// Mass of `F^*` at `T`: the probability that the last individual is the
/// initial one.
pub fn last_individual_atom(params: &BdParams, horizon: f64) -> Result<f64> {
    check_range(horizon, horizon)?;
    let (l, m) = (params.lambda, params.mu);
    Ok(if params.is_critical() {
        (1.0 + l * horizon) * (-l * horizon).exp()
    } else {
        (l * (-m * horizon).exp() - m * (-l * horizon).exp()) / (l - m)
    })
}

/// Normalising constant of the unnormalised last-individual density
/// `lambda e^{-lambda t} P(max = T | first min = t)` plus `e^{-lambda T}` at `T`:
/// `(lambda - mu)/(lambda e^{(lambda-mu)T} - mu)`, or `1/(1 + lambda T)` if critical.
pub fn last_individual_normalizer(params: &BdParams, horizon: f64) -> Result<f64> {
    check_range(horizon, horizon)?;
    let (l, m) = (params.lambda, params.mu);
    if params.is_critical() {
        return Ok(1.0 / (1.0 + l * horizon));
    }
    let r = l - m;
    Ok(if r > 0.0 {
        let e = (-r * horizon).exp();
        r * e / (l - m * e)
    } else {
        r / (l * (r * horizon).exp() - m)
    })
}

/// Truncated `Exp(lambda)` law on `[0, T]` of the non-initial ages in the pure
/// birth case.
pub fn pure_birth_age_cdf(params: &BdParams, horizon: f64, t: f64) -> Result<f64> {
    check_range(t, horizon)?;
    let l = params.lambda;
    Ok((-l * t).exp_m1() / (-l * horizon).exp_m1())
}

/// Age law given `Y_T = y`: mixture `(y-1)/y F_* + 1/y F^*`.
pub fn age_cdf_conditional(params: &BdParams, horizon: f64, y: u64, t: f64) -> Result<f64> {
    if y == 0 {
        return domain("conditional age law needs y_T >= 1");
    }
    let w = 1.0 / y as f64;
    Ok((1.0 - w) * first_block_cdf(params, horizon, t)? + w * last_individual_cdf(params, horizon, t)?)
}

/// Age law of a uniformly picked living individual given `Y_T > 0`.
pub fn age_cdf_unconditional(params: &BdParams, horizon: f64, t: f64) -> Result<f64> {
    check_range(t, horizon)?;
    let q = bdp::recip_mean_conditional(params, horizon)?;
    Ok((1.0 - q) * first_block_cdf(params, horizon, t)? + q * last_individual_cdf(params, horizon, t)?)
}

/// CDF of `Exp(lambda)`, the large-time limit of the age law.
pub fn limit_age_cdf(params: &BdParams, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        -(-params.lambda * t).exp_m1()
    }
}

/// Which age law an [`AgeCdf`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgeKind {
    ConditionalGivenY { y: u64 },
    Unconditional,
    FirstBlock,
    LastIndividual,
    PureBirthTruncExp,
}

/// A finite-time age law on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeCdf {
    pub params: BdParams,
    pub horizon: f64,
    pub kind: AgeKind,
}

impl AgeCdf {
    pub fn new(params: BdParams, horizon: f64, kind: AgeKind) -> Result<Self> {
        check_range(horizon, horizon)?;
        match kind {
            AgeKind::ConditionalGivenY { y: 0 } => return domain("conditional age law needs y_T >= 1"),
            AgeKind::PureBirthTruncExp if params.mu != 0.0 => {
                return domain("truncated exponential age law requires mu = 0")
            }
            _ => {}
        }
        Ok(Self { params, horizon, kind })
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        let (p, h) = (&self.params, self.horizon);
        match self.kind {
            AgeKind::ConditionalGivenY { y } => age_cdf_conditional(p, h, y, t),
            AgeKind::Unconditional => age_cdf_unconditional(p, h, t),
            AgeKind::FirstBlock => first_block_cdf(p, h, t),
            AgeKind::LastIndividual => last_individual_cdf(p, h, t),
            AgeKind::PureBirthTruncExp => pure_birth_age_cdf(p, h, t),
        }
    }

    /// Mass of the atom at `T` (zero for the continuous kinds).
    pub fn atom_at_horizon(&self) -> Result<f64> {
        let below = self.cdf_left_of_horizon()?;
        Ok(1.0 - below)
    }

    fn cdf_left_of_horizon(&self) -> Result<f64> {
        let (p, h) = (&self.params, self.horizon);
        let last_left = 1.0 - last_individual_atom(p, h)?;
        Ok(match self.kind {
            AgeKind::ConditionalGivenY { y } => {
                let w = 1.0 / y as f64;
                (1.0 - w) + w * last_left
            }
            AgeKind::Unconditional => {
                let q = bdp::recip_mean_conditional(p, h)?;
                (1.0 - q) + q * last_left
            }
            AgeKind::LastIndividual => last_left,
            AgeKind::FirstBlock | AgeKind::PureBirthTruncExp => 1.0,
        })
    }

    /// Generalised inverse `inf{t : F(t) >= u}` by bisection to `1e-12`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return domain(format!("quantile level {u} outside [0, 1]"));
        }
        if u > self.cdf_left_of_horizon()? {
            return Ok(self.horizon);
        }
        let (mut lo, mut hi) = (0.0, self.horizon);
        if self.cdf(0.0)? >= u {
            return Ok(0.0);
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid)? >= u {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Inverse-transform sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.quantile(rng.random::<f64>())
    }

    /// `(t, F(t))` on `n + 1` equally spaced points of `[0, T]`.
    pub fn grid(&self, n: usize) -> Result<Vec<(f64, f64)>> {
        let n = n.max(1);
        (0..=n)
            .map(|i| {
                let t = if i == n { self.horizon } else { self.horizon * i as f64 / n as f64 };
                Ok((t, self.cdf(t)?))
            })
            .collect()
    }
}

/// An age together with an `Exp(lambda)` variable coupled to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgeCoupling {
    pub node: usize,
    pub age: f64,
    pub z: f64,
    /// Position `l` of the individual in the right-aligned order (1-based).
    pub index: usize,
    pub population: usize,
    pub is_last: bool,
}

/// Couple the age of living node `node` at time `t` with an `Exp(lambda)`
/// variable: for all but the last individual `z = F_inf^{-1}(F_*(age))`, which
/// dominates the age; for the last one `z` is an independent draw from `rng`.
pub fn sample_age_and_coupled_exponential<R: Rng + ?Sized>(
    path: &PopulationPath,
    t: f64,
    node: usize,
    rng: &mut R,
) -> Result<AgeCoupling> {
    let tree = tree_from_path(path, t)?;
    let living = tree.right_aligned_living()?;
    let pos = living
        .iter()
        .position(|&(v, _)| tree.nodes[v].label == Some(node))
        .ok_or_else(|| Error::Condition(format!("node {node} is not alive at time {t}")))?;
    let (_, age) = living[pos];
    let population = living.len();
    let is_last = pos + 1 == population;
    let lambda = path.params.lambda;
    let z = if is_last {
        let e: f64 = Exp1.sample(rng);
        e / lambda
    } else {
        // F_inf^{-1}(F_*(a)) = -log(1 - F_*(a)) / lambda, evaluated on the
        // survival function to keep precision in the tail.
        -first_block_survival(&path.params, t, age)?.ln() / lambda
    };
    Ok(AgeCoupling {
        node,
        age,
        z,
        index: pos + 1,
        population,
        is_last,
    })
}

/// Pick a living individual uniformly at time `t` and couple its age.
pub fn pick_and_couple<R: Rng + ?Sized>(path: &PopulationPath, t: f64, rng: &mut R) -> Result<AgeCoupling> {
    let living = path.living_at(t);
    if living.is_empty() {
        return Err(Error::Condition(format!("population extinct at time {t}")));
    }
    let node = living[rng.random_range(0..living.len())];
    sample_age_and_coupled_exponential(path, t, node, rng)
}

/// Upper bound on `E|e^{-cA} - e^{-cZ}|` given survival to `T` for the
/// coupling above (`lambda > mu`, `c > 0`).
pub fn coupling_bound(params: &BdParams, horizon: f64, c: f64) -> Result<f64> {
    if !params.supercritical() {
        return domain("coupling bound requires lambda > mu");
    }
    if !(horizon > 0.0) || !(c > 0.0) {
        return domain("coupling bound needs T > 0 and c > 0");
    }
    let (l, r) = (params.lambda, params.growth_rate());
    let em1 = (r * horizon).exp_m1();
    Ok(l / (c + l) / em1 + r / (l * em1) * ((l / r).ln() + r * horizon))
}

/// CDF of the law that stochastically dominates the time since the last
/// event before `T`, given `Y_T = y`.
pub fn time_since_last_event_cdf_bound(params: &BdParams, horizon: f64, y: u64, t: f64) -> Result<f64> {
    if t < 0.0 {
        return domain(format!("time {t} must be nonnegative"));
    }
    Ok(if y > 1 {
        -(-((y - 1) as f64) * params.lambda * t).exp_m1()
    } else if t >= horizon {
        1.0
    } else {
        0.0
    })
}

/// `T - T_M`, the time since the last event up to `T` (the initial time
/// counts as an event).
pub fn time_since_last_event(path: &PopulationPath, t: f64) -> f64 {
    let last = path
        .events
        .iter()
        .take_while(|e| e.time <= t)
        .last()
        .map_or(0.0, |e| e.time);
    t - last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::gauss_legendre;

    fn p(l: f64, m: f64) -> BdParams {
        BdParams::new(l, m).unwrap()
    }

    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let (x, w) = gauss_legendre(40);
        let panels = 20;
        let h = (b - a) / panels as f64;
        let mut s = 0.0;
        for k in 0..panels {
            let lo = a + k as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                s += wi * 0.5 * h * f(lo + 0.5 * h * (xi + 1.0));
            }
        }
        s
    }

    #[test]
    fn endpoints() {
        for params in [p(2.0, 1.0), p(1.0, 1.0), p(1.0, 2.0), p(1.5, 0.0)] {
            for k in [
                AgeKind::ConditionalGivenY { y: 3 },
                AgeKind::Unconditional,
                AgeKind::FirstBlock,
                AgeKind::LastIndividual,
            ] {
                let cdf = AgeCdf::new(params, 2.5, k).unwrap();
                assert_eq!(cdf.cdf(2.5).unwrap(), 1.0);
                assert!(cdf.cdf(0.0).unwrap().abs() < 1e-15);
            }
        }
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(age_cdf_conditional(&p(2.0, 1.0), 2.0, 3, 2.5).is_err());
        assert!(age_cdf_conditional(&p(2.0, 1.0), 2.0, 3, -0.1).is_err());
        assert!(age_cdf_conditional(&p(2.0, 1.0), 2.0, 0, 1.0).is_err());
    }

    #[test]
    fn first_block_dominated_by_exponential() {
        for params in [p(2.0, 1.0), p(1.0, 1.0), p(1.0, 3.0), p(2.0, 0.0)] {
            for i in 0..=200 {
                let t = 3.0 * i as f64 / 200.0;
                let s = first_block_survival(&params, 3.0, t).unwrap();
                assert!(s <= (-params.lambda * t).exp() + 1e-12);
            }
        }
    }

    #[test]
    fn densities_integrate_to_cdfs() {
        for params in [p(2.0, 1.0), p(1.0, 1.0), p(1.0, 2.5)] {
            let h = 2.0;
            for t in [0.3, 1.0, 1.7] {
                let a = integrate(|s| first_block_density(&params, h, s).unwrap(), 0.0, t);
                assert!((a - first_block_cdf(&params, h, t).unwrap()).abs() < 1e-12);
                let b = integrate(|s| last_individual_density(&params, h, s).unwrap(), 0.0, t);
                assert!((b - last_individual_cdf(&params, h, t).unwrap()).abs() < 1e-12);
            }
            let total = integrate(|s| last_individual_density(&params, h, s).unwrap(), 0.0, h)
                + last_individual_atom(&params, h).unwrap();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normaliser_matches_integral() {
        for params in [p(2.0, 1.0), p(1.0, 1.0), p(0.7, 1.9)] {
            let (l, m, h) = (params.lambda, params.mu, 1.8);
            let un = |t: f64| {
                let hit = if params.is_critical() {
                    l * t / (1.0 + l * h)
                } else {
                    let r = l - m;
                    1.0 - (l * (r * (h - t)).exp() - m) / (l * (r * h).exp() - m) * (r * t).exp()
                };
                l * (-l * t).exp() * hit
            };
            let z = (-l * h).exp() + integrate(un, 0.0, h);
            assert!((z - last_individual_normalizer(&params, h).unwrap()).abs() < 1e-12);
        }
        assert!((last_individual_normalizer(&p(1.0, 1.0), 3.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn pure_birth_first_block_is_truncated_exponential() {
        let params = p(1.3, 0.0);
        for i in 0..100 {
            let t = 3.0 * i as f64 / 99.0;
            let a = first_block_cdf(&params, 3.0, t).unwrap();
            let b = pure_birth_age_cdf(&params, 3.0, t).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        // With mu = 0 the last individual is the root: all mass at T.
        assert_eq!(last_individual_cdf(&params, 3.0, 2.9).unwrap(), 0.0);
        assert_eq!(last_individual_atom(&params, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn critical_limit_is_continuous() {
        let h = 2.0;
        for t in [0.0, 0.5, 1.2, 1.99] {
            let c = age_cdf_unconditional(&p(1.0, 1.0), h, t).unwrap();
            let n = age_cdf_unconditional(&p(1.0 + 1e-7, 1.0), h, t).unwrap();
            assert!((c - n).abs() < 1e-5, "{t}: {c} vs {n}");
        }
    }

    #[test]
    fn large_time_limit_is_exponential() {
        let v = age_cdf_unconditional(&p(2.0, 1.0), 30.0, 1.0).unwrap();
        assert!((v - (1.0 - (-2.0f64).exp())).abs() < 1e-3);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let cdf = AgeCdf::new(p(2.0, 1.0), 2.0, AgeKind::Unconditional).unwrap();
        for u in [0.01, 0.3, 0.7, 0.9] {
            let t = cdf.quantile(u).unwrap();
            assert!((cdf.cdf(t).unwrap() - u).abs() < 1e-10);
        }
        assert_eq!(cdf.quantile(1.0).unwrap(), 2.0);
        assert!(cdf.atom_at_horizon().unwrap() > 0.0);
    }

    #[test]
    fn thm2_examples() {
        let params = p(2.0, 1.0);
        assert_eq!(time_since_last_event_cdf_bound(&params, 3.0, 1, 2.0).unwrap(), 0.0);
        assert_eq!(time_since_last_event_cdf_bound(&params, 3.0, 1, 3.0).unwrap(), 1.0);
        let v = time_since_last_event_cdf_bound(&params, 3.0, 3, 0.5).unwrap();
        assert!((v - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn coupling_dominates_and_last_is_root_in_pure_birth() {
        let params = p(2.0, 0.0);
        let mut rng = crate::rng::stream_rng(3, 1);
        for seed in 0..50 {
            let path = bdp::simulate_path(&params, 1.5, seed).unwrap();
            for node in path.living_at(1.5) {
                let c = sample_age_and_coupled_exponential(&path, 1.5, node, &mut rng).unwrap();
                assert_eq!(c.is_last, node == 0);
                if !c.is_last {
                    assert!(c.age <= c.z);
                }
            }
        }
    }
}
