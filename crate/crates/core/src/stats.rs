//! Statistical helpers used by the Monte Carlo checks.

use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanVar {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two points.
    pub fn var(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        (self.var() / self.n as f64).sqrt()
    }
}

impl FromIterator<f64> for MeanVar {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut mv = MeanVar::new();
        for x in iter {
            mv.push(x);
        }
        mv
    }
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    /// `|value - target| <= k * stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr
    }

    /// Number of standard errors separating `value` from `target`.
    pub fn z(&self, target: f64) -> f64 {
        (self.value - target) / self.stderr
    }
}

/// Sample mean with standard error.
pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let mv: MeanVar = xs.iter().copied().collect();
    Estimate::new(mv.mean(), mv.stderr())
}

/// Sample variance with its large-sample standard error `sqrt((m4 - s^4)/n)`.
pub fn var_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let mv: MeanVar = xs.iter().copied().collect();
    let m = mv.mean();
    let s2 = mv.var();
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    Estimate::new(s2, ((m4 - s2 * s2).max(0.0) / n).sqrt())
}

/// Sample covariance with the standard error of the centred cross products.
pub fn cov_estimate(xs: &[f64], ys: &[f64]) -> Estimate {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let mv: MeanVar = prods.iter().copied().collect();
    let cov = mv.mean() * n / (n - 1.0);
    Estimate::new(cov, mv.stderr())
}

/// Binomial standard deviation of a frequency with success probability `p`.
pub fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Dvoretzky–Kiefer–Wolfowitz band half-width for `n` samples at level `alpha`.
pub fn dkw_radius(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Empirical CDF over a sorted sample.
pub fn ecdf(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64
}

/// `sup_x |F_n(x) - F(x)|` over the sample points of a sorted sample.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Largest gap between the empirical CDF and `cdf` on a fixed grid.
pub fn grid_sup_distance<F: Fn(f64) -> f64>(sorted: &[f64], grid: &[f64], cdf: F) -> f64 {
    grid.iter()
        .map(|&t| (ecdf(sorted, t) - cdf(t)).abs())
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov survival function `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // Series converges slowly here; the value is 1 to double precision.
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powi(k as i32 - 1) * (-2.0 * k * k * x * x).exp();
        s += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov p-value (Stephens' small-sample correction).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// Result of a two-sample test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test; ties across samples are handled by
/// advancing past equal values before comparing CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestOutcome {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let sn = ne.sqrt();
    TestOutcome {
        statistic: d,
        p_value: kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d),
    }
}

/// Chi-square test that two count vectors come from the same distribution.
///
/// Adjacent categories are pooled (left to right) until each pooled cell has
/// an expected count of at least 5 in both samples.
pub fn chi2_homogeneity(a: &[u64], b: &[u64]) -> TestOutcome {
    let len = a.len().max(b.len());
    let get = |v: &[u64], k: usize| v.get(k).copied().unwrap_or(0) as f64;
    let na: f64 = a.iter().map(|&c| c as f64).sum();
    let nb: f64 = b.iter().map(|&c| c as f64).sum();
    let n = na + nb;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for k in 0..len {
        ca += get(a, k);
        cb += get(b, k);
        let tot = ca + cb;
        if tot * na.min(nb) / n >= 5.0 {
            cells.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => cells.push((ca, cb)),
        }
    }
    if cells.len() < 2 {
        return TestOutcome {
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let mut stat = 0.0;
    for &(oa, ob) in &cells {
        let tot = oa + ob;
        let ea = tot * na / n;
        let eb = tot * nb / n;
        stat += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
    }
    let df = (cells.len() - 1) as f64;
    let p = ChiSquared::new(df).map(|c| c.sf(stat)).unwrap_or(f64::NAN);
    TestOutcome {
        statistic: stat,
        p_value: p,
    }
}

/// Chi-square goodness of fit of `observed` counts to category probabilities.
///
/// Categories are pooled left to right until each has expected count >= 5;
/// probability mass not covered by `probs` goes to the last cell.
pub fn chi2_gof(observed: &[u64], probs: &[f64]) -> TestOutcome {
    let n: f64 = observed.iter().map(|&c| c as f64).sum();
    let len = observed.len().max(probs.len());
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for k in 0..len {
        o += observed.get(k).copied().unwrap_or(0) as f64;
        e += probs.get(k).copied().unwrap_or(0.0) * n;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    let covered: f64 = probs.iter().sum::<f64>().min(1.0);
    e += (1.0 - covered) * n;
    if o > 0.0 || e > 0.0 {
        match cells.last_mut() {
            Some(last) if e < 5.0 => {
                last.0 += o;
                last.1 += e;
            }
            _ => cells.push((o, e)),
        }
    }
    if cells.len() < 2 {
        return TestOutcome {
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let stat: f64 = cells.iter().map(|&(o, e)| (o - e).powi(2) / e).sum();
    let df = (cells.len() - 1) as f64;
    let p = ChiSquared::new(df).map(|c| c.sf(stat)).unwrap_or(f64::NAN);
    TestOutcome {
        statistic: stat,
        p_value: p,
    }
}

/// Tally non-negative integer observations into a count vector.
pub fn counts(values: impl IntoIterator<Item = usize>) -> Vec<u64> {
    let mut c: Vec<u64> = Vec::new();
    for v in values {
        if v >= c.len() {
            c.resize(v + 1, 0);
        }
        c[v] += 1;
    }
    c
}

/// Relative frequencies of a count vector.
pub fn frequencies(c: &[u64]) -> Vec<f64> {
    let n: u64 = c.iter().sum();
    c.iter().map(|&k| k as f64 / n as f64).collect()
}

/// Total-variation distance between two empirical count vectors.
pub fn tv_counts(a: &[u64], b: &[u64]) -> f64 {
    tv_probs(&frequencies(a), &frequencies(b))
}

/// Half the L1 distance between two probability vectors (zero-padded).
pub fn tv_probs(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    let get = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
    0.5 * (0..len).map(|k| (get(p, k) - get(q, k)).abs()).sum::<f64>()
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut r = vec![0.0; v.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut m = k;
        while m + 1 < idx.len() && v[idx[m + 1]] == v[idx[k]] {
            m += 1;
        }
        let avg = (k + m) as f64 / 2.0;
        for &i in &idx[k..=m] {
            r[i] = avg;
        }
        k = m + 1;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// Two-sided permutation test of independence based on Spearman's rho.
pub fn spearman_permutation_test<R: Rng + ?Sized>(
    x: &[f64],
    y: &[f64],
    permutations: usize,
    rng: &mut R,
) -> TestOutcome {
    let rx = ranks(x);
    let ry = ranks(y);
    let observed = pearson(&rx, &ry);
    let mut shuffled = ry.clone();
    let mut extreme = 0usize;
    for _ in 0..permutations {
        shuffled.shuffle(rng);
        if pearson(&rx, &shuffled).abs() >= observed.abs() {
            extreme += 1;
        }
    }
    TestOutcome {
        statistic: observed,
        p_value: (extreme + 1) as f64 / (permutations + 1) as f64,
    }
}
