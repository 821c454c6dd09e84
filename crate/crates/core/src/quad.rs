//! Gauss–Legendre quadrature on the unit interval.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// A quadrature node `u` in `[0, 1)`, its complement `1 - u` (kept exactly,
/// since `u` can be within rounding of 1) and its weight.
#[derive(Debug, Clone, Copy)]
pub struct UnitNode {
    pub u: f64,
    pub one_minus_u: f64,
    pub weight: f64,
}

/// Composite rule on `[0, 1)` with panels `[1 - 2^-k, 1 - 2^-(k+1)]`.
///
/// Geometric grading towards 1 resolves the integrable log and power
/// singularities that appear when integrating over quantile functions of
/// unbounded laws. The mass beyond the last panel, `2^-panels`, is dropped.
pub fn graded_unit_rule(points_per_panel: usize, panels: usize) -> Vec<UnitNode> {
    let (x, w) = gauss_legendre(points_per_panel);
    let mut out = Vec::with_capacity(points_per_panel * panels);
    for k in 0..panels {
        let scale = 0.5f64.powi(k as i32);
        let half = 0.25 * scale;
        for (xi, wi) in x.iter().zip(&w) {
            let one_minus_u = half * (3.0 - xi);
            out.push(UnitNode {
                u: 1.0 - one_minus_u,
                one_minus_u,
                weight: half * wi,
            });
        }
    }
    out
}

/// Composite rule on `(0, 1)` graded geometrically towards both ends: the
/// panels `[2^-(k+2), 2^-(k+1)]` and their mirror images. Mass `2^-panels`
/// is dropped in total.
pub fn symmetric_graded_unit_rule(points_per_panel: usize, panels: usize) -> Vec<UnitNode> {
    let (x, w) = gauss_legendre(points_per_panel);
    let mut out = Vec::with_capacity(2 * points_per_panel * panels);
    for k in 0..panels {
        let lo = 0.5f64.powi(k as i32 + 2);
        let half = 0.5 * lo;
        for (xi, wi) in x.iter().zip(&w) {
            let small = lo + half * (1.0 + xi);
            out.push(UnitNode {
                u: small,
                one_minus_u: 1.0 - small,
                weight: half * wi,
            });
            out.push(UnitNode {
                u: 1.0 - small,
                one_minus_u: small,
                weight: half * wi,
            });
        }
    }
    out
}
