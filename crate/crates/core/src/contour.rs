//! Contour excursions, planar trees and the bijection `phi` between them.
//!
//! An [`Excursion`] is a piecewise-linear path with slopes ±1 that starts and
//! ends at height 0; it is stored as the heights of its alternating extrema
//! `0, M_1, m_1, M_2, ..., m_{n-1}, M_n, 0`. The associated [`PlanarTree`] has
//! one vertical segment per local maximum: segment `k+1` runs from `m_k` up to
//! `M_{k+1}`, the first one from 0 to `M_1`.
//!
//! Read as a genealogy, vertical segments are lifetimes. A birth–death path
//! killed at `T` maps to a tree whose children are ordered latest-born first,
//! and under that ordering the contour of the tree has up-steps `Exp(mu)` and
//! down-steps `Exp(lambda)`, capped at `T` ([`sample_contour`]).

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::bdp::{self, simulate_with, BdParams, PopulationPath};
use crate::rng::{derive_seed, replicate};
use crate::stats::{chi2_homogeneity, counts, frequencies, ks_two_sample, tv_probs, TestOutcome};
use crate::error::{domain, invalid, Result};

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

/// Alternating extrema of a contour path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    pub extrema: Vec<f64>,
    /// Height at which the path is deflected (`+inf` if never).
    #[serde(with = "inf_as_null")]
    pub deflection: f64,
    /// Number of exact floating-point ties between minima that the sampler
    /// broke by moving a minimum up by one ulp.
    #[serde(default)]
    pub ties_perturbed: u32,
}

/// Summary statistics shared by excursions and trees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeStats {
    /// Local maxima, i.e. vertical segments / individuals.
    pub maxima: usize,
    /// Maxima at the deflection height (individuals alive at the kill time).
    pub maxima_at_deflection: usize,
    /// Sum of vertical segment lengths.
    pub total_length: f64,
}

impl Excursion {
    pub fn new(extrema: Vec<f64>, deflection: f64) -> Result<Self> {
        let e = Self {
            extrema,
            deflection,
            ties_perturbed: 0,
        };
        e.validate()?;
        Ok(e)
    }

    /// Check alternation, endpoints, distinct non-zero minima and the cap.
    pub fn validate(&self) -> Result<()> {
        let h = &self.extrema;
        if h.len() < 3 || h.len() % 2 == 0 {
            return invalid(format!("excursion needs an odd number (>= 3) of extrema, got {}", h.len()));
        }
        if h[0] != 0.0 || h[h.len() - 1] != 0.0 {
            return invalid("excursion must start and end at height 0");
        }
        if h.iter().any(|x| !x.is_finite()) {
            return invalid("extrema must be finite");
        }
        let mut seen = HashSet::new();
        for i in 1..h.len() - 1 {
            if i % 2 == 1 {
                if !(h[i] > h[i - 1] && h[i] > h[i + 1]) {
                    return invalid(format!("extremum {i} is not a local maximum"));
                }
                if h[i] > self.deflection {
                    return invalid(format!("maximum {} exceeds deflection height {}", h[i], self.deflection));
                }
            } else {
                if h[i] <= 0.0 {
                    return invalid(format!("interior minimum {i} must be positive"));
                }
                if !seen.insert(h[i].to_bits()) {
                    return invalid(format!("duplicate local minimum at height {}", h[i]));
                }
            }
        }
        Ok(())
    }

    pub fn maxima(&self) -> impl Iterator<Item = f64> + '_ {
        self.extrema.iter().skip(1).step_by(2).copied()
    }

    pub fn n_maxima(&self) -> usize {
        (self.extrema.len() - 1) / 2
    }

    pub fn stats(&self) -> ShapeStats {
        let h = &self.extrema;
        let mut total = 0.0;
        let mut at = 0;
        for k in (1..h.len()).step_by(2) {
            total += h[k] - h[k - 1];
            if h[k] == self.deflection {
                at += 1;
            }
        }
        ShapeStats {
            maxima: self.n_maxima(),
            maxima_at_deflection: at,
            total_length: total,
        }
    }

    /// Mirror image `x -> -x` of the path.
    pub fn reversed(&self) -> Excursion {
        let mut extrema = self.extrema.clone();
        extrema.reverse();
        Excursion {
            extrema,
            deflection: self.deflection,
            ties_perturbed: self.ties_perturbed,
        }
    }

    /// Minimal SVG drawing of the path (unit slopes, y axis pointing up).
    pub fn to_svg(&self, width: f64, height: f64) -> String {
        let mut pts = vec![(0.0, 0.0)];
        let mut x = 0.0;
        for w in self.extrema.windows(2) {
            x += (w[1] - w[0]).abs();
            pts.push((x, w[1]));
        }
        let top = self
            .extrema
            .iter()
            .copied()
            .fold(0.0, f64::max)
            .max(if self.deflection.is_finite() { self.deflection } else { 0.0 })
            .max(1e-12);
        let sx = width / x.max(1e-12);
        let sy = height / top;
        let poly: Vec<String> = pts
            .iter()
            .map(|(a, b)| format!("{:.3},{:.3}", a * sx, height - b * sy))
            .collect();
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\">\n"
        );
        if self.deflection.is_finite() {
            let y = height - self.deflection * sy;
            svg.push_str(&format!(
                "<line x1=\"0\" y1=\"{y:.3}\" x2=\"{width}\" y2=\"{y:.3}\" stroke=\"grey\" stroke-dasharray=\"4\"/>\n"
            ));
        }
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"black\" points=\"{}\"/>\n</svg>\n",
            poly.join(" ")
        ));
        svg
    }
}

/// One vertical segment of a planar tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub parent: Option<usize>,
    /// Height where the segment leaves its parent (birth time).
    pub attach: f64,
    /// Top of the segment (death or kill time).
    pub tip: f64,
    /// Identifier carried over from the source (e.g. the path's node id).
    #[serde(default)]
    pub label: Option<usize>,
}

/// Rooted planar tree with vertical edge lengths.
///
/// Nodes produced by this module are in depth-first pre-order with children
/// visited in decreasing attach height, which is the planar order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarTree {
    pub nodes: Vec<TreeNode>,
    /// Kill height (`+inf` if the tree is not killed).
    #[serde(with = "inf_as_null")]
    pub kill_height: f64,
}

impl PlanarTree {
    fn children(&self) -> Result<(usize, Vec<Vec<usize>>)> {
        let n = self.nodes.len();
        let mut root = None;
        let mut kids = vec![Vec::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            if !(node.attach < node.tip) || !node.attach.is_finite() || !node.tip.is_finite() {
                return invalid(format!("node {i} needs finite attach < tip"));
            }
            match node.parent {
                None => {
                    if root.replace(i).is_some() {
                        return invalid("tree has more than one root");
                    }
                    if node.attach != 0.0 {
                        return invalid("root must attach at height 0");
                    }
                }
                Some(p) => {
                    if p >= n {
                        return invalid(format!("node {i} has unknown parent {p}"));
                    }
                    let par = &self.nodes[p];
                    if !(par.attach < node.attach && node.attach < par.tip) {
                        return invalid(format!("node {i} attaches outside its parent's span"));
                    }
                    kids[p].push(i);
                }
            }
            if node.tip > self.kill_height {
                return invalid(format!("node {i} reaches above the kill height"));
            }
        }
        let root = match root {
            Some(r) => r,
            None => return invalid("tree has no root"),
        };
        for k in kids.iter_mut() {
            k.sort_by(|&a, &b| self.nodes[b].attach.total_cmp(&self.nodes[a].attach));
        }
        Ok((root, kids))
    }

    /// Node indices in planar pre-order (children by decreasing attach).
    pub fn preorder(&self) -> Result<Vec<usize>> {
        let (root, kids) = self.children()?;
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            order.push(v);
            for &c in kids[v].iter().rev() {
                stack.push(c);
            }
        }
        if order.len() != self.nodes.len() {
            return invalid("tree is not connected");
        }
        Ok(order)
    }

    /// Same tree renumbered in planar pre-order with labels dropped.
    pub fn canonical(&self) -> Result<PlanarTree> {
        let order = self.preorder()?;
        let mut pos = vec![0usize; self.nodes.len()];
        for (k, &v) in order.iter().enumerate() {
            pos[v] = k;
        }
        let nodes = order
            .iter()
            .map(|&v| {
                let n = self.nodes[v];
                TreeNode {
                    parent: n.parent.map(|p| pos[p]),
                    attach: n.attach,
                    tip: n.tip,
                    label: None,
                }
            })
            .collect();
        Ok(PlanarTree {
            nodes,
            kill_height: self.kill_height,
        })
    }

    pub fn stats(&self) -> ShapeStats {
        ShapeStats {
            maxima: self.nodes.len(),
            maxima_at_deflection: self.nodes.iter().filter(|n| n.tip == self.kill_height).count(),
            total_length: self.nodes.iter().map(|n| n.tip - n.attach).sum(),
        }
    }

    /// Number of leaves of the drawn tree: every vertical segment ends in a
    /// tip, so this equals the number of contour maxima.
    pub fn leaves(&self) -> usize {
        self.nodes.len()
    }

    /// Individuals alive at the kill height, indexed as in the age analysis:
    /// position `l = 1..Y` runs over the maxima at the kill height from right
    /// to left in the contour, so the last one (`l = Y`) is the leftmost.
    /// Returns `(node index, age)` pairs with age `kill_height - attach`.
    pub fn right_aligned_living(&self) -> Result<Vec<(usize, f64)>> {
        let mut out: Vec<(usize, f64)> = self
            .preorder()?
            .into_iter()
            .filter(|&v| self.nodes[v].tip == self.kill_height)
            .map(|v| (v, self.kill_height - self.nodes[v].attach))
            .collect();
        out.reverse();
        Ok(out)
    }
}

/// Tree drawn under an excursion.
pub fn phi(excursion: &Excursion) -> Result<PlanarTree> {
    excursion.validate()?;
    let h = &excursion.extrema;
    let n = excursion.n_maxima();
    let mut nodes = Vec::with_capacity(n);
    nodes.push(TreeNode {
        parent: None,
        attach: 0.0,
        tip: h[1],
        label: None,
    });
    let mut spine: Vec<usize> = vec![0];
    for k in 1..n {
        let m = h[2 * k];
        while let Some(&top) = spine.last() {
            if nodes[top].attach > m {
                spine.pop();
            } else {
                break;
            }
        }
        let parent = *spine.last().expect("root attaches at 0 below every positive minimum");
        nodes.push(TreeNode {
            parent: Some(parent),
            attach: m,
            tip: h[2 * k + 1],
            label: None,
        });
        spine.push(k);
    }
    Ok(PlanarTree {
        nodes,
        kill_height: excursion.deflection,
    })
}

/// Contour of a planar tree: turns at every tip and at every attach point.
pub fn phi_inverse(tree: &PlanarTree) -> Result<Excursion> {
    let order = tree.preorder()?;
    let mut seen = HashSet::new();
    for n in tree.nodes.iter().filter(|n| n.parent.is_some()) {
        if !seen.insert(n.attach.to_bits()) {
            return invalid(format!("two segments attach at the same height {}", n.attach));
        }
    }
    let mut extrema = Vec::with_capacity(2 * order.len() + 1);
    extrema.push(0.0);
    for (k, &v) in order.iter().enumerate() {
        if k > 0 {
            extrema.push(tree.nodes[v].attach);
        }
        extrema.push(tree.nodes[v].tip);
    }
    extrema.push(0.0);
    let e = Excursion {
        extrema,
        deflection: tree.kill_height,
        ties_perturbed: 0,
    };
    e.validate()?;
    Ok(e)
}

/// Vertical mirroring of a planar tree: the tree of the reversed contour.
pub fn psi(tree: &PlanarTree) -> Result<PlanarTree> {
    phi(&phi_inverse(tree)?.reversed())
}

/// Sample the contour process with `Exp(mu)` up-steps and `Exp(lambda)`
/// down-steps, deflected at height `t` (pass `f64::INFINITY` for none).
///
/// Without deflection the path only returns to 0 almost surely when
/// `lambda <= mu`; in the critical case the number of steps has infinite
/// mean.
pub fn sample_contour<R: Rng + ?Sized>(params: &BdParams, t: f64, rng: &mut R) -> Result<Excursion> {
    if !(t > 0.0) {
        return domain(format!("deflection height must be positive, got {t}"));
    }
    if t.is_infinite() && params.supercritical() {
        return domain("undeflected contour process needs lambda <= mu to return to 0");
    }
    let mut extrema = vec![0.0];
    let mut minima: HashSet<u64> = HashSet::new();
    let mut ties = 0u32;
    let mut h = 0.0;
    loop {
        let up: f64 = Exp1.sample(rng);
        let max = if params.mu > 0.0 { (h + up / params.mu).min(t) } else { t };
        extrema.push(max);
        let down: f64 = Exp1.sample(rng);
        let mut min = max - down / params.lambda;
        if min <= 0.0 {
            extrema.push(0.0);
            break;
        }
        while !minima.insert(min.to_bits()) {
            min = f64::from_bits(min.to_bits() + 1);
            ties += 1;
        }
        extrema.push(min);
        h = min;
    }
    Ok(Excursion {
        extrema,
        deflection: t,
        ties_perturbed: ties,
    })
}

/// Genealogical tree of a path killed at `t`: one segment per individual born
/// before `t`, spanning `(birth, min(death, t))`, children latest-born first.
/// Segment labels are the path's node ids.
pub fn tree_from_path(path: &PopulationPath, t: f64) -> Result<PlanarTree> {
    if !(t > 0.0) || t > path.horizon {
        return domain(format!("kill time {t} must lie in (0, horizon = {}]", path.horizon));
    }
    let born: Vec<usize> = (0..path.nodes.len())
        .filter(|&i| path.nodes[i].birth_time < t)
        .collect();
    // Node ids are in birth order, so `born` is a prefix 0..k.
    let k = born.len();
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 1..k {
        let p = path.nodes[i].parent.expect("non-initial node has a parent");
        kids[p].push(i);
    }
    let mut order = Vec::with_capacity(k);
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        order.push(v);
        // Children are stored in birth order; latest first means pushing the
        // earliest last-out.
        for &c in kids[v].iter() {
            stack.push(c);
        }
    }
    let mut pos = vec![0usize; k];
    for (j, &v) in order.iter().enumerate() {
        pos[v] = j;
    }
    let nodes = order
        .iter()
        .map(|&v| {
            let rec = &path.nodes[v];
            TreeNode {
                parent: rec.parent.map(|p| pos[p]),
                attach: rec.birth_time,
                tip: rec.death_time.min(t),
                label: Some(v),
            }
        })
        .collect();
    Ok(PlanarTree { nodes, kill_height: t })
}

/// Two-sample comparison of trees read off sampled contours with trees of
/// simulated birth–death paths killed at the same height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeLawCheck {
    pub replicates: usize,
    pub maxima: TestOutcome,
    pub maxima_at_deflection: TestOutcome,
    pub total_length: TestOutcome,
    /// Per-statistic level after splitting `level` over the three tests.
    pub per_test_level: f64,
    pub passed: bool,
}

pub fn tree_law_check(params: &BdParams, t: f64, reps: usize, level: f64, seed: u64) -> Result<TreeLawCheck> {
    if reps < 2 {
        return invalid("need at least two replicates per sample");
    }
    let from_contour = replicate(derive_seed(seed, 0), reps, |rng, _| {
        sample_contour(params, t, rng).and_then(|e| phi(&e)).map(|tree| tree.stats())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let from_path = replicate(derive_seed(seed, 1), reps, |rng, _| {
        simulate_with(params, t, rng).and_then(|p| tree_from_path(&p, t)).map(|tree| tree.stats())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let maxima = chi2_homogeneity(
        &counts(from_contour.iter().map(|s| s.maxima)),
        &counts(from_path.iter().map(|s| s.maxima)),
    );
    let maxima_at_deflection = chi2_homogeneity(
        &counts(from_contour.iter().map(|s| s.maxima_at_deflection)),
        &counts(from_path.iter().map(|s| s.maxima_at_deflection)),
    );
    let total_length = ks_two_sample(
        &from_contour.iter().map(|s| s.total_length).collect::<Vec<_>>(),
        &from_path.iter().map(|s| s.total_length).collect::<Vec<_>>(),
    );
    let per_test_level = level / 3.0;
    let passed = [maxima, maxima_at_deflection, total_length]
        .iter()
        .all(|o| o.p_value >= per_test_level);
    Ok(TreeLawCheck {
        replicates: reps,
        maxima,
        maxima_at_deflection,
        total_length,
        per_test_level,
        passed,
    })
}

/// Sample `reps` excursions and count those for which
/// `phi_inverse(phi(e))` differs from `e`.
pub fn bijection_failures(params: &BdParams, t: f64, reps: usize, seed: u64) -> Result<usize> {
    let bad = replicate(seed, reps, |rng, _| -> Result<bool> {
        let e = sample_contour(params, t, rng)?;
        let back = phi_inverse(&phi(&e)?)?;
        Ok(back.extrema != e.extrema)
    });
    Ok(bad.into_iter().collect::<Result<Vec<bool>>>()?.iter().filter(|&&b| b).count())
}

/// Total variation between the empirical law of the number of maxima at the
/// deflection height and the exact law of `Y_t`.
pub fn deflection_count_tv(params: &BdParams, t: f64, reps: usize, seed: u64) -> Result<f64> {
    let at_t = replicate(seed, reps, |rng, _| sample_contour(params, t, rng).map(|e| e.stats().maxima_at_deflection))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let freq = frequencies(&counts(at_t));
    let probs = bdp::pmf_vec(params, t, freq.len() as u64 + 200)?;
    Ok(tv_probs(&freq, &probs))
}
