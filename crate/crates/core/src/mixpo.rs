//! Mixed Poisson laws: pmfs, total variation distances and the coupling bound
//! `d_TV(MixPo(L), MixPo(M)) <= E min(|sqrt L - sqrt M|, |L - M|)`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{domain, invalid, Result};
use crate::netsim::NetParams;
use crate::quad::{graded_unit_rule, symmetric_graded_unit_rule};
use crate::rng::replicate;
use crate::stats::{Estimate, MeanVar};

/// Draws of a mixing variable, equally weighted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingSample {
    pub values: Vec<f64>,
}

impl MixingSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("mixing sample is empty");
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return invalid(format!("mixing values must be finite and nonnegative, got {v}"));
        }
        Ok(Self { values })
    }

    pub fn constant(v: f64) -> Result<Self> {
        Self::new(vec![v])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> Estimate {
        crate::stats::mean_estimate(&self.values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Probabilities on `0..probs.len()` plus the mass beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePmf {
    pub probs: Vec<f64>,
    pub tail: f64,
}

impl DiscretePmf {
    pub fn new(probs: Vec<f64>, tail: f64) -> Result<Self> {
        if probs.iter().any(|p| !(*p >= 0.0)) || !(tail >= 0.0) {
            return invalid("pmf entries and tail must be nonnegative");
        }
        let total: f64 = probs.iter().sum::<f64>() + tail;
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("pmf total {total} differs from 1"));
        }
        Ok(Self { probs, tail })
    }

    /// Empirical pmf of counts indexed by value.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return invalid("no observations");
        }
        Ok(Self {
            probs: counts.iter().map(|&c| c as f64 / n as f64).collect(),
            tail: 0.0,
        })
    }

    pub fn point_mass(k: usize) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Self { probs, tail: 0.0 }
    }

    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

/// `log P(Po(v) = n)`.
pub fn poisson_ln_pmf(v: f64, n: u64) -> f64 {
    if v == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    n as f64 * v.ln() - v - ln_gamma(n as f64 + 1.0)
}

/// `P(Po(v) > n)`.
pub fn poisson_upper_tail(v: f64, n: u64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        gamma_lr(n as f64 + 1.0, v)
    }
}

/// Smallest `n` with `P(Po(v) > n) < tol`.
pub fn poisson_cutoff(v: f64, tol: f64) -> u64 {
    let mut n = (v + 10.0 * v.sqrt() + 20.0).ceil() as u64;
    while poisson_upper_tail(v, n) >= tol {
        n += n / 4 + 1;
    }
    while n > 0 && poisson_upper_tail(v, n - 1) < tol {
        n -= 1;
    }
    n
}

/// `(1/K) sum_k P(Po(v_k) = n)`.
pub fn mixpo_pmf(mix: &MixingSample, n: u64) -> f64 {
    let lf = ln_gamma(n as f64 + 1.0);
    let s: f64 = mix
        .values
        .iter()
        .map(|&v| {
            if v == 0.0 {
                if n == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (n as f64 * v.ln() - v - lf).exp()
            }
        })
        .sum();
    s / mix.len() as f64
}

fn weighted_pmf<'a>(points: impl Iterator<Item = (f64, f64)> + 'a, n_max: u64) -> Vec<f64> {
    let lf: Vec<f64> = (0..=n_max).map(|n| ln_gamma(n as f64 + 1.0)).collect();
    let mut out = vec![0.0; n_max as usize + 1];
    for (v, w) in points {
        if v == 0.0 {
            out[0] += w;
            continue;
        }
        let lv = v.ln();
        for (n, o) in out.iter_mut().enumerate() {
            *o += w * (n as f64 * lv - v - lf[n]).exp();
        }
    }
    out
}

/// Mixed Poisson pmf on `0..=n_max` with the exact mean tail beyond.
pub fn mixpo_pmf_vec(mix: &MixingSample, n_max: u64) -> DiscretePmf {
    let k = mix.len() as f64;
    let probs = weighted_pmf(mix.values.iter().map(|&v| (v, 1.0 / k)), n_max);
    let tail = mix.values.iter().map(|&v| poisson_upper_tail(v, n_max)).sum::<f64>() / k;
    DiscretePmf { probs, tail }
}

/// As [`mixpo_pmf_vec`] with `n_max` chosen so the tail under the largest
/// mixing value is below `1e-10`.
pub fn mixpo_pmf_adaptive(mix: &MixingSample) -> DiscretePmf {
    mixpo_pmf_vec(mix, poisson_cutoff(mix.max(), 1e-10))
}

/// Total variation distance from truncated pmfs. Half the L1 distance on the
/// common support plus half the difference of tails; the error is at most
/// the smaller tail.
pub fn tv_exact(p: &DiscretePmf, q: &DiscretePmf) -> Result<f64> {
    if p.tail >= 1e-9 || q.tail >= 1e-9 {
        return invalid(format!("tail masses {} and {} too heavy for exact TV", p.tail, q.tail));
    }
    let n = p.probs.len().max(q.probs.len());
    let l1: f64 = (0..n).map(|i| (p.get(i) - q.get(i)).abs()).sum();
    Ok((0.5 * (l1 + (p.tail - q.tail).abs())).min(1.0))
}

/// `min(|sqrt a - sqrt b|, |a - b|)`.
pub fn s2_integrand(a: f64, b: f64) -> f64 {
    (a.sqrt() - b.sqrt()).abs().min((a - b).abs())
}

/// How the two mixing samples are joined when estimating the coupling bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Samples are aligned draws of a joint law.
    Paired,
    /// Independent coupling of the two empirical laws.
    Independent,
    /// Quantile (comonotone) coupling of the two empirical laws.
    Comonotone,
}

const FULL_PRODUCT_LIMIT: usize = 4_000_000;

/// Monte Carlo estimate of `E min(|sqrt L - sqrt M|, |L - M|)` under the given
/// coupling.
pub fn s2_bound_with(lam: &MixingSample, m: &MixingSample, coupling: Coupling) -> Result<Estimate> {
    let (a, b) = (&lam.values, &m.values);
    let est = |it: &mut dyn Iterator<Item = f64>| {
        let mv: MeanVar = it.collect();
        Estimate::new(mv.mean(), if mv.count() > 1 { mv.stderr() } else { 0.0 })
    };
    Ok(match coupling {
        Coupling::Paired => {
            if a.len() != b.len() {
                return invalid(format!("paired samples have lengths {} and {}", a.len(), b.len()));
            }
            est(&mut a.iter().zip(b).map(|(x, y)| s2_integrand(*x, *y)))
        }
        Coupling::Independent => {
            if a.len() * b.len() <= FULL_PRODUCT_LIMIT {
                let mut sum = 0.0;
                for x in a {
                    for y in b {
                        sum += s2_integrand(*x, *y);
                    }
                }
                // Exact expectation under the product of the empirical laws.
                let row: Vec<f64> = a.iter().map(|x| b.iter().map(|y| s2_integrand(*x, *y)).sum::<f64>() / b.len() as f64).collect();
                let se = if a.len() > 1 { crate::stats::mean_estimate(&row).stderr } else { 0.0 };
                Estimate::new(sum / (a.len() * b.len()) as f64, se)
            } else {
                let n = a.len().max(b.len());
                est(&mut (0..n).map(|i| s2_integrand(a[i % a.len()], b[(i * 7919 + 13) % b.len()])))
            }
        }
        Coupling::Comonotone => {
            let mut sa = a.clone();
            let mut sb = b.clone();
            sa.sort_by(f64::total_cmp);
            sb.sort_by(f64::total_cmp);
            let n = sa.len().max(sb.len());
            est(&mut (0..n).map(|i| s2_integrand(sa[i * sa.len() / n], sb[i * sb.len() / n])))
        }
    })
}

/// Coupling bound with `coupled` selecting aligned pairs or the independent
/// coupling of the two samples.
pub fn tv_bound_theorem_s2(lam: &MixingSample, m: &MixingSample, coupled: bool) -> Result<Estimate> {
    s2_bound_with(lam, m, if coupled { Coupling::Paired } else { Coupling::Independent })
}

/// The smaller of the independent and comonotone coupling bounds.
pub fn best_coupling_bound(lam: &MixingSample, m: &MixingSample) -> Result<(Coupling, Estimate)> {
    let ind = s2_bound_with(lam, m, Coupling::Independent)?;
    let com = s2_bound_with(lam, m, Coupling::Comonotone)?;
    Ok(if com.value <= ind.value {
        (Coupling::Comonotone, com)
    } else {
        (Coupling::Independent, ind)
    })
}

fn require_supercritical(params: &NetParams) -> Result<()> {
    if !params.bd.supercritical() {
        return domain("asymptotic degree law requires lambda > mu");
    }
    Ok(())
}

/// `E(M) = 2 alpha E(S) / (beta + mu + lambda)`.
pub fn asymptotic_m_mean(params: &NetParams) -> Result<f64> {
    require_supercritical(params)?;
    let c = params.beta + params.bd.mu;
    Ok(2.0 * params.alpha * params.social.mean() / (c + params.bd.lambda))
}

/// One draw of `(alpha/(beta+mu)) (S + E S)(1 - e^{-(beta+mu) A})`, `A ~ Exp(lambda)`.
pub fn draw_asymptotic_m<R: Rng + ?Sized>(params: &NetParams, rng: &mut R) -> f64 {
    let c = params.beta + params.bd.mu;
    let e: f64 = Exp1.sample(rng);
    let a = e / params.bd.lambda;
    let s = params.social.sample(rng);
    params.alpha / c * (s + params.social.mean()) * -(-c * a).exp_m1()
}

const CHUNK: usize = 4096;

/// `count` i.i.d. draws of the asymptotic mixing variable, generated in
/// fixed-size chunks on independent streams of `seed`.
pub fn sample_asymptotic_m(params: &NetParams, count: usize, seed: u64) -> Result<MixingSample> {
    require_supercritical(params)?;
    if count == 0 {
        return invalid("sample size must be positive");
    }
    let chunks = count.div_ceil(CHUNK);
    let parts = replicate(seed, chunks, |rng, c| {
        let len = CHUNK.min(count - c as usize * CHUNK);
        (0..len).map(|_| draw_asymptotic_m(params, rng)).collect::<Vec<f64>>()
    });
    MixingSample::new(parts.concat())
}

/// The asymptotic degree law `MixPo(M)` by two-dimensional quadrature over
/// the quantiles of `A` and `S`. Mass not resolved by the rule or beyond the
/// returned support is reported as the tail.
pub fn asymptotic_pmf(params: &NetParams) -> Result<DiscretePmf> {
    require_supercritical(params)?;
    let (l, c) = (params.bd.lambda, params.beta + params.bd.mu);
    let es = params.social.mean();
    let rule = graded_unit_rule(16, 44);
    let s_nodes: Vec<(f64, f64)> = if params.social.variance() == 0.0 {
        vec![(params.social.mean(), 1.0)]
    } else {
        symmetric_graded_unit_rule(16, 44)
            .iter()
            .map(|n| (params.social.quantile(n.u, n.one_minus_u), n.weight))
            .collect()
    };
    let mut points = Vec::with_capacity(rule.len() * s_nodes.len());
    let mut vmax: f64 = 0.0;
    for n in &rule {
        // 1 - e^{-cA} at the A-quantile u: 1 - (1-u)^{c/l}.
        let w = -((c / l) * n.one_minus_u.ln()).exp_m1();
        for &(s, ws) in &s_nodes {
            let v = params.alpha / c * (s + es) * w;
            vmax = vmax.max(v);
            points.push((v, n.weight * ws));
        }
    }
    let n_max = poisson_cutoff(vmax, 1e-13);
    let probs = weighted_pmf(points.into_iter(), n_max);
    let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    Ok(DiscretePmf { probs, tail })
}
