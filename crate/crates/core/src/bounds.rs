//! Explicit convergence-rate bounds for the degree law and Monte Carlo checks
//! of the supporting lemmas.
//!
//! Each bound is also evaluated by an independent regrouped formula
//! (`*_regrouped`); the two must agree to rounding.

use serde::{Deserialize, Serialize};

use crate::bdp::{self, simulate_surviving, BdParams};
use crate::error::{domain, invalid};
use crate::mixpo::{asymptotic_pmf, mixpo_pmf_vec, poisson_cutoff, tv_exact, DiscretePmf, MixingSample};
use crate::netsim::{lambda_general_from_path, NetParams};
use crate::rng::replicate;
use crate::stats::{mean_estimate, ols_slope};
use crate::Result;
use rand::Rng;

pub mod lemmas;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Value of one bound at one horizon with its summands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub t: f64,
    pub bound_value: f64,
    /// `t` meets the threshold under which the bound is proved. The value is
    /// still reported when false but carries no guarantee.
    pub validity: bool,
    pub components: Vec<(String, f64)>,
}

impl BoundReport {
    fn from_parts(t: f64, validity: bool, components: Vec<(&str, f64)>) -> Self {
        let bound_value = components.iter().map(|(_, v)| v).sum();
        BoundReport {
            t,
            bound_value,
            validity,
            components: components.into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
        }
    }

    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return domain(format!("horizon must be positive and finite, got {t}"));
    }
    Ok(())
}

fn require_pure_birth(params: &NetParams) -> Result<()> {
    if params.bd.mu != 0.0 {
        return domain("pure-birth bound requires mu = 0");
    }
    Ok(())
}

/// Smallest horizon for the two-summand pure-birth bound: `log 2 / lambda`.
pub fn threshold_pure_birth(params: &BdParams) -> f64 {
    std::f64::consts::LN_2 / params.lambda
}

/// Smallest horizon for the general bound: `2 log(4 lambda/(lambda-mu)) / (lambda-mu)`.
pub fn threshold_general(params: &BdParams) -> Result<f64> {
    if !params.supercritical() {
        return domain("general bound requires lambda > mu");
    }
    let r = params.growth_rate();
    Ok(2.0 * (4.0 * params.lambda / r).ln() / r)
}

/// Pure-birth bound in terms of `E(1/Y_T)` and `E(1/sqrt(Y_T))`.
///
/// `E(1/sqrt(Y_T))` is replaced by its closed-form upper bound when
/// `T >= log 2 / lambda` and computed exactly otherwise.
pub fn bound_pure_birth_s1(params: &NetParams, t: f64) -> Result<BoundReport> {
    require_pure_birth(params)?;
    check_horizon(t)?;
    let (l, a, b) = (params.bd.lambda, params.alpha, params.beta);
    let (es, sd) = (params.social.mean(), params.social.std_dev());
    let recip = bdp::recip_mean_conditional(&params.bd, t)?;
    let recip_sqrt = if t >= threshold_pure_birth(&params.bd) {
        bdp::recip_sqrt_bound(&params.bd, t)?
    } else {
        bdp::recip_sqrt_mean_conditional(&params.bd, t)?
    };
    Ok(BoundReport::from_parts(
        t,
        true,
        vec![
            ("sigma_recip_sqrt", 4.0 * a / l * sd * recip_sqrt),
            ("mean_recip", 2.0 * a / l * es * recip),
            ("youngest", 2.0 * a / b * es * l / (b + l) / (l * t).exp_m1()),
        ],
    ))
}

/// `sqrt(32) alpha sigma_S sqrt(T/lambda) e^{-lambda T/2} + 4 alpha E(S)(T + lambda/(beta(beta+lambda))) e^{-lambda T}`.
pub fn bound_pure_birth_ss1(params: &NetParams, t: f64) -> Result<BoundReport> {
    require_pure_birth(params)?;
    check_horizon(t)?;
    let (l, a, b) = (params.bd.lambda, params.alpha, params.beta);
    let (es, sd) = (params.social.mean(), params.social.std_dev());
    let valid = t >= threshold_pure_birth(&params.bd);
    Ok(BoundReport::from_parts(
        t,
        valid,
        vec![
            ("sqrt_rate", 32f64.sqrt() * a / l.sqrt() * sd * t.sqrt() * (-0.5 * l * t).exp()),
            ("exp_rate", 4.0 * a * es * (t + l / (b * (b + l))) * (-l * t).exp()),
        ],
    ))
}

/// Same value as [`bound_pure_birth_ss1`] from a factored form.
pub fn bound_pure_birth_ss1_regrouped(params: &NetParams, t: f64) -> Result<f64> {
    require_pure_birth(params)?;
    check_horizon(t)?;
    let (l, a, b) = (params.bd.lambda, params.alpha, params.beta);
    let (es, sd) = (params.social.mean(), params.social.std_dev());
    let h = (-0.5 * l * t).exp();
    let inner = 4.0 * SQRT2 * sd * (t / l).sqrt() + 4.0 * es * h * (t * b * (b + l) + l) / (b * (b + l));
    Ok(a * h * inner)
}

/// The general-case bound with components `rate16`, `rate1` and
/// `sigma_rate1`. Requires `lambda > mu`; for `mu = 0` the `8/mu` constant
/// makes the bound infinite and the report is marked invalid.
pub fn bound_general_thm(params: &NetParams, t: f64) -> Result<BoundReport> {
    check_horizon(t)?;
    let thr = threshold_general(&params.bd)?;
    let (l, m, a, b) = (params.bd.lambda, params.bd.mu, params.alpha, params.beta);
    let (es, sd) = (params.social.mean(), params.social.std_dev());
    let r = l - m;
    let sqrt6 = 6f64.sqrt();

    let c16 = (5.0 * sqrt6 / 2.0 * l / r + 2.0 / 5.0 + (b + m / 2.0) * (229.0 / (5.0 * r) + 2.0 / (l + m))) * es
        + 27.0 / 10.0 * SQRT2 * sd;
    let rate16 = a * c16 * r * t * t * (-r * t / 6.0).exp();

    let c1 = ((0.5 + m / (4.0 * b)) * m / l
        + (8.0 / m + 4.0 / b) * l.powi(3) * (l + m) / r.powi(3)
        + (6.0 * t + sqrt6 / 2.0 + 3.0 / b * (m * t + 3.0) + 5.0 * l / (b * b)) * l)
        * es;
    let rate1 = a * b * c1 * t * t * (-r * t).exp();
    let sigma_rate1 = 3.0 * SQRT2 * a * l * sd * t * t * (-r * t).exp();

    let finite = m > 0.0;
    Ok(BoundReport::from_parts(
        t,
        finite && t >= thr,
        vec![("rate16", rate16), ("rate1", rate1), ("sigma_rate1", sigma_rate1)],
    ))
}

/// Same value as [`bound_general_thm`], with the constants expanded into
/// coefficients of `E(S)`, `sigma_S`, `T^0` and `T^1` before summing.
pub fn bound_general_thm_regrouped(params: &NetParams, t: f64) -> Result<f64> {
    check_horizon(t)?;
    threshold_general(&params.bd)?;
    let (l, m, a, b) = (params.bd.lambda, params.bd.mu, params.alpha, params.beta);
    let (es, sd) = (params.social.mean(), params.social.std_dev());
    let r = l - m;
    let t2 = t * t;
    let slow = r * t2 * (-r * t / 6.0).exp();
    let fast = t2 * (-r * t).exp();

    // Coefficient of E(S) in the slow term, expanded over the common factor.
    let s_slow = (25.0 * 6f64.sqrt() * l * (l + m)
        + 4.0 * r * (l + m)
        + (2.0 * b + m) * (229.0 * (l + m) + 10.0 * r))
        / (10.0 * r * (l + m));
    let sig_slow = 2.7 * SQRT2;

    // Coefficient of E(S) in the fast term as a polynomial in T.
    let k0 = b * m / (2.0 * l) + m * m / (4.0 * l)
        + (8.0 * b + 4.0 * m) / m * l.powi(3) * (l + m) / r.powi(3)
        + b * l * 6f64.sqrt() / 2.0
        + 9.0 * l
        + 5.0 * l * l / b;
    let k1 = 6.0 * b * l + 3.0 * m * l;
    let s_fast = k0 + k1 * t;
    let sig_fast = 3.0 * SQRT2 * l;

    Ok(a * (es * (s_slow * slow + s_fast * fast) + sd * (sig_slow * slow + sig_fast * fast)))
}

/// The bounds that apply to `params` at `t`: both pure-birth bounds when
/// `mu = 0`, otherwise the general bound.
pub fn applicable_bounds(params: &NetParams, t: f64) -> Result<Vec<(String, BoundReport)>> {
    if params.bd.mu == 0.0 {
        Ok(vec![
            ("s1".to_string(), bound_pure_birth_s1(params, t)?),
            ("ss1".to_string(), bound_pure_birth_ss1(params, t)?),
        ])
    } else {
        Ok(vec![("thm".to_string(), bound_general_thm(params, t)?)])
    }
}

/// One draw of `Lambda_T` for a uniformly picked living node, conditioned
/// on survival to `t`.
pub fn draw_lambda_star<R: Rng + ?Sized>(params: &NetParams, t: f64, rng: &mut R) -> Result<f64> {
    let (path, _) = simulate_surviving(&params.bd, t, rng, 100_000_000)?;
    let social: Vec<f64> = (0..path.nodes.len()).map(|_| params.social.sample(rng)).collect();
    let living = path.living_at(t);
    let j = living[rng.random_range(0..living.len())];
    lambda_general_from_path(&path, &social, params.alpha, params.beta, j, t)
}

/// `count` i.i.d. draws of `Lambda_T` given survival.
pub fn sample_lambda_star(params: &NetParams, t: f64, count: usize, seed: u64) -> Result<MixingSample> {
    check_horizon(t)?;
    if count == 0 {
        return invalid("sample size must be positive");
    }
    let draws = replicate(seed, count, |rng, _| draw_lambda_star(params, t, rng));
    MixingSample::new(draws.into_iter().collect::<Result<Vec<f64>>>()?)
}

/// Empirical `d_TV(nu_T, nu)` at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvEstimate {
    pub t: f64,
    pub tv: f64,
    /// Batch-means standard error.
    pub stderr: f64,
    pub lambda_mean: f64,
    pub samples: usize,
}

/// Estimate the TV distance between the finite-time and limiting degree
/// laws. The finite-time law is the mixed Poisson average over a sample of
/// `Lambda_T` (conditional Poisson given the path), which removes the
/// Poisson noise of simulated degrees. The standard error comes from the
/// spread of the same estimator on `batches` disjoint sub-samples.
pub fn empirical_tv(
    params: &NetParams,
    t: f64,
    count: usize,
    batches: usize,
    limit: &DiscretePmf,
    seed: u64,
) -> Result<TvEstimate> {
    if batches < 2 || count < 10 * batches {
        return invalid(format!("need at least 2 batches of 10 draws, got {count} draws in {batches} batches"));
    }
    let lam = sample_lambda_star(params, t, count, seed)?;
    let n_max = (limit.probs.len() as u64).max(poisson_cutoff(lam.max(), 1e-12));
    let tv = tv_exact(&mixpo_pmf_vec(&lam, n_max), limit)?;
    let size = count / batches;
    let batch_tv: Vec<f64> = (0..batches)
        .map(|k| {
            let part = MixingSample::new(lam.values[k * size..(k + 1) * size].to_vec())?;
            tv_exact(&mixpo_pmf_vec(&part, n_max), limit)
        })
        .collect::<Result<_>>()?;
    Ok(TvEstimate {
        t,
        tv,
        stderr: mean_estimate(&batch_tv).stderr,
        lambda_mean: lam.mean().value,
        samples: count,
    })
}

/// One grid point of a TV curve with the bounds that apply there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvCurvePoint {
    pub estimate: TvEstimate,
    pub bounds: Vec<(String, BoundReport)>,
}

impl TvCurvePoint {
    /// Every valid bound exceeds the estimate plus three standard errors.
    pub fn dominated(&self) -> bool {
        self.bounds
            .iter()
            .filter(|(_, b)| b.validity)
            .all(|(_, b)| b.bound_value >= self.estimate.tv + 3.0 * self.estimate.stderr)
    }
}

pub fn tv_curve(params: &NetParams, grid: &[f64], count: usize, batches: usize, seed: u64) -> Result<Vec<TvCurvePoint>> {
    let limit = asymptotic_pmf(params)?;
    grid.iter()
        .enumerate()
        .map(|(i, &t)| {
            let estimate = empirical_tv(params, t, count, batches, &limit, crate::rng::derive_seed(seed, i as u64))?;
            Ok(TvCurvePoint {
                estimate,
                bounds: applicable_bounds(params, t)?,
            })
        })
        .collect()
}

/// Least-squares slope of `log tv` against `t`.
pub fn log_tv_slope(points: &[TvEstimate]) -> f64 {
    let x: Vec<f64> = points.iter().map(|p| p.t).collect();
    let y: Vec<f64> = points.iter().map(|p| p.tv.ln()).collect();
    ols_slope(&x, &y)
}

/// Largest slope of `log tv` compatible with the proved decay rate:
/// `-lambda/2 + 0.1 lambda` without deaths, `-(lambda-mu)/6 + 0.1 (lambda-mu)`
/// otherwise.
pub fn slope_limit(params: &BdParams) -> f64 {
    if params.mu == 0.0 {
        -0.4 * params.lambda
    } else {
        let r = params.growth_rate();
        -r / 6.0 + 0.1 * r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::Social;

    fn net(l: f64, m: f64, a: f64, b: f64, social: Social) -> NetParams {
        NetParams::new(BdParams::new(l, m).unwrap(), a, b, social).unwrap()
    }

    #[test]
    fn reports_sum_components() {
        let p = net(2.0, 0.0, 1.0, 1.0, Social::Exponential { rate: 1.0 });
        for r in [bound_pure_birth_s1(&p, 3.0).unwrap(), bound_pure_birth_ss1(&p, 3.0).unwrap()] {
            let s: f64 = r.components.iter().map(|(_, v)| v).sum();
            assert_eq!(s, r.bound_value);
        }
    }

    #[test]
    fn alpha_to_zero() {
        let p = net(2.0, 0.0, 1e-12, 1.0, Social::Exponential { rate: 1.0 });
        assert!(bound_pure_birth_s1(&p, 3.0).unwrap().bound_value < 1e-11);
        let q = net(2.0, 1.0, 1e-12, 1.0, Social::Exponential { rate: 1.0 });
        assert!(bound_general_thm(&q, 6.0).unwrap().bound_value < 1e-8);
    }

    #[test]
    fn ss1_regrouped_agrees() {
        let p = net(2.0, 0.0, 1.0, 1.0, Social::Exponential { rate: 1.0 });
        for t in [0.5, 2.0, 4.0, 9.0] {
            let a = bound_pure_birth_ss1(&p, t).unwrap().bound_value;
            let b = bound_pure_birth_ss1_regrouped(&p, t).unwrap();
            assert!((a - b).abs() <= 1e-12 * a, "{t}: {a} {b}");
        }
        assert!(!bound_pure_birth_ss1(&p, 0.3).unwrap().validity);
        let c = net(2.0, 0.0, 1.0, 1.0, Social::Constant { value: 1.0 });
        assert_eq!(bound_pure_birth_ss1(&c, 2.0).unwrap().component("sqrt_rate"), Some(0.0));
    }

    #[test]
    fn thm_regrouped_agrees() {
        let p = net(2.0, 1.0, 1.0, 2.0, Social::Exponential { rate: 1.0 });
        let thr = threshold_general(&p.bd).unwrap();
        for t in [thr, 6.0, 10.0, 25.0] {
            let a = bound_general_thm(&p, t).unwrap();
            let b = bound_general_thm_regrouped(&p, t).unwrap();
            assert!((a.bound_value - b).abs() <= 1e-12 * b, "{t}: {} {b}", a.bound_value);
            assert!(a.validity);
        }
        assert!(!bound_general_thm(&p, 4.0).unwrap().validity);
    }

    #[test]
    fn thm_without_deaths() {
        let p = net(2.0, 0.0, 1.0, 2.0, Social::Exponential { rate: 1.0 });
        let r = bound_general_thm(&p, 10.0).unwrap();
        assert!(!r.validity);
        assert!(r.bound_value.is_infinite());
        let q = net(2.0, 1e-9, 1.0, 2.0, Social::Exponential { rate: 1.0 });
        let v = bound_general_thm(&q, 10.0).unwrap().bound_value;
        assert!(v.is_finite() && !v.is_nan());
    }

    #[test]
    fn s1_decreasing() {
        let p = net(2.0, 0.0, 1.0, 1.0, Social::Exponential { rate: 1.0 });
        let vals: Vec<f64> = (0..=16)
            .map(|k| bound_pure_birth_s1(&p, 2.0 + 0.5 * k as f64).unwrap().bound_value)
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        assert!(bound_pure_birth_s1(&net(1.0, 1.0, 1.0, 1.0, Social::default()), 1.0).is_err());
    }

    #[test]
    fn slope_limits() {
        assert_eq!(slope_limit(&BdParams::new(2.0, 0.0).unwrap()), -0.8);
        let l = slope_limit(&BdParams::new(1.0, 0.4).unwrap());
        assert!((l + 0.04).abs() < 1e-15);
    }
}
