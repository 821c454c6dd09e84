//! Event-driven simulation of the dynamic network on top of the node process.
//!
//! Each living node `i` creates edges at rate `alpha * S_i` while at least one
//! other node is alive; the second endpoint is uniform among the other living
//! nodes, so there are no loops. Each edge dies at rate `beta`, and all edges
//! of a node are removed when it dies.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bdp::{BdParams, Event, EventKind, NodeRecord, PopulationPath};
use crate::error::{domain, Error, Result};
use crate::rng::stream_rng;

/// Distribution of the social index `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Social {
    Constant { value: f64 },
    Exponential { rate: f64 },
    LogNormal { m: f64, s: f64 },
    Uniform { a: f64, b: f64 },
}

impl Default for Social {
    fn default() -> Self {
        Social::Exponential { rate: 1.0 }
    }
}

impl Social {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Social::Constant { value } => value > 0.0 && value.is_finite(),
            Social::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            Social::LogNormal { m, s } => m.is_finite() && s >= 0.0 && s.is_finite(),
            Social::Uniform { a, b } => a > 0.0 && b > a && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            domain(format!("invalid social index distribution {self}"))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Social::Constant { value } => value,
            Social::Exponential { rate } => 1.0 / rate,
            Social::LogNormal { m, s } => (m + 0.5 * s * s).exp(),
            Social::Uniform { a, b } => 0.5 * (a + b),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            Social::Constant { value } => value * value,
            Social::Exponential { rate } => 2.0 / (rate * rate),
            Social::LogNormal { m, s } => (2.0 * m + 2.0 * s * s).exp(),
            Social::Uniform { a, b } => (a * a + a * b + b * b) / 3.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Social::Constant { .. } => 0.0,
            Social::Exponential { rate } => 1.0 / (rate * rate),
            Social::LogNormal { m, s } => (s * s).exp_m1() * (2.0 * m + s * s).exp(),
            Social::Uniform { a, b } => (b - a) * (b - a) / 12.0,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Social::Constant { value } => value,
            Social::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            Social::LogNormal { m, s } => {
                let z: f64 = StandardNormal.sample(rng);
                (m + s * z).exp()
            }
            Social::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
        }
    }

    /// Quantile at level `u`, with `one_minus_u = 1 - u` supplied exactly so
    /// the upper tail keeps full precision.
    pub fn quantile(&self, u: f64, one_minus_u: f64) -> f64 {
        match *self {
            Social::Constant { value } => value,
            Social::Exponential { rate } => -one_minus_u.ln() / rate,
            Social::LogNormal { m, s } => {
                let n = Normal::standard();
                let z = if u < 0.5 { n.inverse_cdf(u) } else { -n.inverse_cdf(one_minus_u) };
                (m + s * z).exp()
            }
            Social::Uniform { a, b } => {
                if u < 0.5 {
                    a + (b - a) * u
                } else {
                    b - (b - a) * one_minus_u
                }
            }
        }
    }
}

impl fmt::Display for Social {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Social::Constant { value } => write!(f, "const:{value}"),
            Social::Exponential { rate } => write!(f, "exp:{rate}"),
            Social::LogNormal { m, s } => write!(f, "lognormal:{m},{s}"),
            Social::Uniform { a, b } => write!(f, "uniform:{a},{b}"),
        }
    }
}

impl FromStr for Social {
    type Err = Error;

    /// Parses `const:c`, `exp:rate`, `lognormal:m,s` or `uniform:a,b`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("cannot parse social distribution '{s}' (expected const:c, exp:rate, lognormal:m,s or uniform:a,b)"));
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let d = match (name.trim(), nums.as_slice()) {
            ("const" | "constant", [c]) => Social::Constant { value: *c },
            ("exp" | "exponential", [r]) => Social::Exponential { rate: *r },
            ("lognormal", [m, s]) => Social::LogNormal { m: *m, s: *s },
            ("uniform", [a, b]) => Social::Uniform { a: *a, b: *b },
            _ => return Err(bad()),
        };
        d.validate()?;
        Ok(d)
    }
}

/// Node process, edge rates and social index law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub bd: BdParams,
    pub alpha: f64,
    pub beta: f64,
    pub social: Social,
}

impl NetParams {
    pub fn new(bd: BdParams, alpha: f64, beta: f64, social: Social) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return domain(format!("alpha must be nonnegative, got {alpha}"));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return domain(format!("beta must be positive, got {beta}"));
        }
        social.validate()?;
        Ok(Self { bd, alpha, beta, social })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeEventKind {
    Birth,
    Death,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCause {
    Direct,
    NodeDeath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeEvent {
    pub time: f64,
    pub kind: EdgeEventKind,
    pub edge: usize,
    pub creator: usize,
    pub target: usize,
    pub cause: EdgeCause,
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

/// Lifetime of one edge; `creator` is the node whose clock produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub creator: usize,
    pub target: usize,
    pub birth_time: f64,
    #[serde(with = "inf_as_null")]
    pub death_time: f64,
}

impl EdgeRecord {
    pub fn alive_at(&self, t: f64) -> bool {
        self.birth_time <= t && t < self.death_time
    }

    pub fn touches(&self, node: usize) -> bool {
        self.creator == node || self.target == node
    }
}

/// One realization of nodes, social indices and edges on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetRealization {
    pub net: NetParams,
    pub path: PopulationPath,
    pub social_indices: Vec<f64>,
    pub edges: Vec<EdgeRecord>,
    pub edge_events: Vec<EdgeEvent>,
    pub seed: u64,
}

/// Degree information of one picked node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeSample {
    /// Incident edges counted with multiplicity.
    pub degree: usize,
    /// Distinct neighbours.
    pub neighbour_count: usize,
    pub has_multiple_edge: bool,
    pub picked_node: usize,
    pub picked_age: f64,
}

impl NetRealization {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("realization serialises")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Edges incident to `node` alive at `t`.
    pub fn incident_at(&self, node: usize, t: f64) -> impl Iterator<Item = &EdgeRecord> + '_ {
        self.edges.iter().filter(move |e| e.touches(node) && e.alive_at(t))
    }

    pub fn degree_at(&self, node: usize, t: f64) -> usize {
        self.incident_at(node, t).count()
    }

    /// Edges created by `node` and alive at `t`.
    pub fn outgoing_at(&self, node: usize, t: f64) -> usize {
        self.edges
            .iter()
            .filter(|e| e.creator == node && e.alive_at(t))
            .count()
    }

    pub fn degree_sample(&self, node: usize, t: f64) -> DegreeSample {
        let mut others: Vec<usize> = self
            .incident_at(node, t)
            .map(|e| if e.creator == node { e.target } else { e.creator })
            .collect();
        let degree = others.len();
        others.sort_unstable();
        others.dedup();
        DegreeSample {
            degree,
            neighbour_count: others.len(),
            has_multiple_edge: others.len() < degree,
            picked_node: node,
            picked_age: t - self.path.nodes[node].birth_time,
        }
    }
}

/// Prefix sums over node weights, growable at the end.
#[derive(Debug, Default)]
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn prefix(&self, mut i: usize) -> f64 {
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i - 1];
            i &= i - 1;
        }
        s
    }

    fn push(&mut self, v: f64) {
        let i = self.tree.len() + 1;
        let low = i & i.wrapping_neg();
        let covered = self.prefix(i - 1) - self.prefix(i - low);
        self.tree.push(v + covered);
    }

    fn add(&mut self, idx: usize, v: f64) {
        let mut i = idx + 1;
        while i <= self.tree.len() {
            self.tree[i - 1] += v;
            i += i & i.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        self.prefix(self.tree.len())
    }

    /// Smallest index whose prefix sum exceeds `u`.
    fn find(&self, mut u: f64) -> usize {
        let n = self.tree.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next - 1] <= u {
                pos = next;
                u -= self.tree[next - 1];
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }
}

/// Simulate on `[0, horizon]` from stream 0 of `seed`.
pub fn simulate_network(params: &NetParams, horizon: f64, seed: u64) -> Result<NetRealization> {
    let mut rng = stream_rng(seed, 0);
    let mut real = simulate_network_with(params, horizon, &mut rng)?;
    real.seed = seed;
    real.path.seed = seed;
    Ok(real)
}

/// Simulate with competing exponential clocks for node births and deaths,
/// edge creations and edge deaths.
pub fn simulate_network_with<R: Rng + ?Sized>(
    params: &NetParams,
    horizon: f64,
    rng: &mut R,
) -> Result<NetRealization> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return domain(format!("horizon must be finite and nonnegative, got {horizon}"));
    }
    let bd = params.bd;
    let node_rate = bd.lambda + bd.mu;
    let mut nodes = vec![NodeRecord {
        birth_time: 0.0,
        death_time: f64::INFINITY,
        parent: None,
    }];
    let mut social = vec![params.social.sample(rng)];
    let mut weights = Fenwick::default();
    weights.push(social[0]);
    let mut alive: Vec<usize> = vec![0];
    let mut alive_pos: Vec<usize> = vec![0];
    let mut events = Vec::new();
    let mut edges: Vec<EdgeRecord> = Vec::new();
    let mut edge_events = Vec::new();
    let mut live_edges: Vec<usize> = Vec::new();
    let mut live_pos: Vec<usize> = Vec::new();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new()];
    let mut t = 0.0;

    let kill_edge = |e: usize,
                         t: f64,
                         cause: EdgeCause,
                         edges: &mut Vec<EdgeRecord>,
                         live_edges: &mut Vec<usize>,
                         live_pos: &mut Vec<usize>,
                         edge_events: &mut Vec<EdgeEvent>| {
        let p = live_pos[e];
        live_edges.swap_remove(p);
        if p < live_edges.len() {
            live_pos[live_edges[p]] = p;
        }
        edges[e].death_time = t;
        edge_events.push(EdgeEvent {
            time: t,
            kind: EdgeEventKind::Death,
            edge: e,
            creator: edges[e].creator,
            target: edges[e].target,
            cause,
        });
    };

    while !alive.is_empty() {
        let y = alive.len();
        let r_nodes = y as f64 * node_rate;
        let s_total = if y >= 2 { weights.total().max(0.0) } else { 0.0 };
        let r_create = params.alpha * s_total;
        let r_edge_death = params.beta * live_edges.len() as f64;
        let total = r_nodes + r_create + r_edge_death;
        let e: f64 = Exp1.sample(rng);
        t += e / total;
        if t > horizon {
            break;
        }
        let u = rng.random::<f64>() * total;
        if u < r_nodes {
            let k = rng.random_range(0..y);
            if u < y as f64 * bd.lambda {
                let id = nodes.len();
                nodes.push(NodeRecord {
                    birth_time: t,
                    death_time: f64::INFINITY,
                    parent: Some(alive[k]),
                });
                let s = params.social.sample(rng);
                social.push(s);
                weights.push(s);
                alive_pos.push(alive.len());
                alive.push(id);
                incident.push(Vec::new());
                events.push(Event {
                    time: t,
                    kind: EventKind::Birth,
                    node: id,
                });
            } else {
                let id = alive.swap_remove(k);
                if k < alive.len() {
                    alive_pos[alive[k]] = k;
                }
                nodes[id].death_time = t;
                weights.add(id, -social[id]);
                events.push(Event {
                    time: t,
                    kind: EventKind::Death,
                    node: id,
                });
                for &ed in &incident[id] {
                    if edges[ed].death_time.is_infinite() {
                        kill_edge(ed, t, EdgeCause::NodeDeath, &mut edges, &mut live_edges, &mut live_pos, &mut edge_events);
                    }
                }
                incident[id] = Vec::new();
            }
        } else if u < r_nodes + r_create {
            let src = loop {
                let v = weights.find(rng.random::<f64>() * s_total);
                // Rounding in the prefix sums can leave a dead node with a
                // residual weight of order 1e-16; redraw in that case.
                if nodes[v].death_time.is_infinite() {
                    break v;
                }
            };
            let k = rng.random_range(0..y - 1);
            let dst = if alive[k] == src { alive[y - 1] } else { alive[k] };
            let id = edges.len();
            edges.push(EdgeRecord {
                creator: src,
                target: dst,
                birth_time: t,
                death_time: f64::INFINITY,
            });
            live_pos.push(live_edges.len());
            live_edges.push(id);
            incident[src].push(id);
            incident[dst].push(id);
            edge_events.push(EdgeEvent {
                time: t,
                kind: EdgeEventKind::Birth,
                edge: id,
                creator: src,
                target: dst,
                cause: EdgeCause::Direct,
            });
        } else {
            let ed = live_edges[rng.random_range(0..live_edges.len())];
            kill_edge(ed, t, EdgeCause::Direct, &mut edges, &mut live_edges, &mut live_pos, &mut edge_events);
        }
    }
    let path = PopulationPath {
        params: bd,
        horizon,
        seed: 0,
        stream: 0,
        events,
        nodes,
    };
    Ok(NetRealization {
        net: *params,
        path,
        social_indices: social,
        edges,
        edge_events,
        seed: 0,
    })
}

/// Degree sample of a node picked uniformly among those alive at `t`.
pub fn pick_uniform_living<R: Rng + ?Sized>(real: &NetRealization, t: f64, rng: &mut R) -> Result<DegreeSample> {
    let living = real.path.living_at(t);
    if living.is_empty() {
        return Err(Error::Condition(format!("no node alive at time {t}")));
    }
    let node = living[rng.random_range(0..living.len())];
    Ok(real.degree_sample(node, t))
}

fn check_alive(path: &PopulationPath, node: usize, t: f64) -> Result<()> {
    if t > path.horizon || node >= path.nodes.len() || !path.nodes[node].alive_at(t) {
        return Err(Error::Condition(format!("node {node} is not alive at time {t}")));
    }
    Ok(())
}

/// Mixing parameter of the picked node's degree in the pure birth case,
/// computed from the ages and social indices of a node path.
///
/// Nodes are indexed `l = 1..Y` in birth order with ages `A_1 = T > A_2 > ...`;
/// `A_2 := 0` when `Y = 1`.
pub fn lambda_pure_birth_from_path(
    path: &PopulationPath,
    social: &[f64],
    alpha: f64,
    beta: f64,
    picked: usize,
    t: f64,
) -> Result<f64> {
    if path.params.mu != 0.0 {
        return domain("pure birth mixing parameter requires mu = 0");
    }
    check_alive(path, picked, t)?;
    let y = path.population_at(t);
    if y == 1 {
        return Ok(0.0);
    }
    // 1-based arrays: a[l] and s[l] for l = 1..y.
    let mut a = vec![0.0; y + 1];
    let mut s = vec![0.0; y + 1];
    for l in 1..=y {
        a[l] = t - path.nodes[l - 1].birth_time;
        s[l] = social[l - 1];
    }
    let j = picked + 1;
    let ea: Vec<f64> = a.iter().map(|&x| (-beta * x).exp()).collect();
    // g[k] = sum_{l=k}^{y-1} (e^{-b A_{l+1}} - e^{-b A_l}) / (l - 1), for k >= 2.
    let mut g = vec![0.0; y + 2];
    for l in (2..y).rev() {
        g[l] = g[l + 1] + (ea[l + 1] - ea[l]) / (l - 1) as f64;
    }
    let own = s[j] * -(-beta * a[j.max(2)]).exp_m1();
    let last = -(-beta * a[y]).exp_m1() / (y - 1) as f64;
    let mut others = 0.0;
    for i in (1..=y).filter(|&i| i != j) {
        others += s[i] * (last + g[i.max(j)]);
    }
    Ok(alpha / beta * (own + others))
}

/// Mixing parameter of the picked node's degree for general `mu`, from the
/// event times, population sizes and survival of the other nodes.
pub fn lambda_general_from_path(
    path: &PopulationPath,
    social: &[f64],
    alpha: f64,
    beta: f64,
    picked: usize,
    t: f64,
) -> Result<f64> {
    check_alive(path, picked, t)?;
    let (times, pops) = path.event_table(t);
    let m = times.len();
    let y = pops[m - 1];
    if y <= 1 {
        return Ok(0.0);
    }
    // Event number (0-based) of each node's birth.
    let mut birth_event = vec![0usize; path.nodes.len()];
    for (k, e) in path.events.iter().take_while(|e| e.time <= t).enumerate() {
        if e.kind == EventKind::Birth {
            birth_event[e.node] = k + 1;
        }
    }
    // w[l] = 1{y_l > 1}/(y_l - 1) (e^{-b(T - T_{l+1})} - e^{-b(T - T_l)}),
    // suffix sums over l = k..m-2 (0-based).
    let mut suffix = vec![0.0; m + 1];
    for l in (0..m.saturating_sub(1)).rev() {
        let w = if pops[l] > 1 {
            ((-beta * (t - times[l + 1])).exp() - (-beta * (t - times[l])).exp()) / (pops[l] - 1) as f64
        } else {
            0.0
        };
        suffix[l] = suffix[l + 1] + w;
    }
    let tail = -(-beta * (t - times[m - 1])).exp_m1() / (y - 1) as f64;
    let sj = social[picked];
    let rj = birth_event[picked];
    let mut total = 0.0;
    for i in path.living_at(t).into_iter().filter(|&i| i != picked) {
        total += (social[i] + sj) * (tail + suffix[birth_event[i].max(rj)]);
    }
    Ok(alpha / beta * total)
}

/// `lambda_pure_birth_from_path` on a network realization.
pub fn lambda_t_pure_birth(real: &NetRealization, picked: usize, t: f64) -> Result<f64> {
    lambda_pure_birth_from_path(&real.path, &real.social_indices, real.net.alpha, real.net.beta, picked, t)
}

/// `lambda_general_from_path` on a network realization.
pub fn lambda_t_general(real: &NetRealization, picked: usize, t: f64) -> Result<f64> {
    lambda_general_from_path(&real.path, &real.social_indices, real.net.alpha, real.net.beta, picked, t)
}

/// Degree sample of a uniformly picked living node at `t`, redrawing the
/// network until the population survives to `t`.
pub fn draw_picked_degree<R: Rng + ?Sized>(params: &NetParams, t: f64, rng: &mut R) -> Result<DegreeSample> {
    for _ in 0..MAX_SURVIVAL_ATTEMPTS {
        let real = simulate_network_with(params, t, rng)?;
        if let Ok(s) = pick_uniform_living(&real, t, rng) {
            return Ok(s);
        }
    }
    Err(Error::Condition(format!("no surviving network in {MAX_SURVIVAL_ATTEMPTS} attempts")))
}

/// `count` independent survival-conditioned degree samples.
pub fn sample_picked_degrees(params: &NetParams, t: f64, count: usize, seed: u64) -> Result<Vec<DegreeSample>> {
    crate::rng::replicate(seed, count, |rng, _| draw_picked_degree(params, t, rng))
        .into_iter()
        .collect()
}

/// Draw `(Lambda_T, D)` with `D ~ Po(Lambda_T)`: a surviving node path, fresh
/// social indices and a uniform living pick, with no edges simulated. Uses
/// the pure birth formula when `mu = 0`.
pub fn draw_poissonized_lambda<R: Rng + ?Sized>(params: &NetParams, t: f64, rng: &mut R) -> Result<(f64, usize)> {
    let (path, _) = crate::bdp::simulate_surviving(&params.bd, t, rng, MAX_SURVIVAL_ATTEMPTS)?;
    let social: Vec<f64> = (0..path.nodes.len()).map(|_| params.social.sample(rng)).collect();
    let living = path.living_at(t);
    let j = living[rng.random_range(0..living.len())];
    let lam = if params.bd.mu == 0.0 {
        lambda_pure_birth_from_path(&path, &social, params.alpha, params.beta, j, t)?
    } else {
        lambda_general_from_path(&path, &social, params.alpha, params.beta, j, t)?
    };
    let d = if lam > 0.0 {
        rand_distr::Poisson::new(lam).map_err(|e| Error::Domain(e.to_string()))?.sample(rng) as usize
    } else {
        0
    };
    Ok((lam, d))
}

/// `count` independent draws of [`draw_poissonized_lambda`].
pub fn sample_poissonized_lambda(params: &NetParams, t: f64, count: usize, seed: u64) -> Result<Vec<(f64, usize)>> {
    crate::rng::replicate(seed, count, |rng, _| draw_poissonized_lambda(params, t, rng))
        .into_iter()
        .collect()
}

const MAX_SURVIVAL_ATTEMPTS: usize = 100_000_000;

/// Multiple-edge frequency of a uniformly picked node at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiEdgePoint {
    pub t: f64,
    pub fraction: f64,
    pub stderr: f64,
    /// Number of replicates alive at `t`.
    pub survivors: usize,
}

/// Degree samples of a uniformly picked living node at every time of `grid`,
/// one network per replicate simulated to the last grid time. Entry `k` of
/// the result holds the samples at `grid[k]` from replicates alive then.
pub fn degree_samples_on_grid(
    params: &NetParams,
    grid: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<Vec<Vec<DegreeSample>>> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) || !(grid[0] > 0.0) {
        return domain("time grid must be positive and strictly increasing");
    }
    let horizon = *grid.last().expect("nonempty grid");
    let per_rep: Vec<Result<Vec<Option<DegreeSample>>>> = crate::rng::replicate(seed, replicates, |rng, _| {
        let real = simulate_network_with(params, horizon, rng)?;
        Ok(grid.iter().map(|&t| pick_uniform_living(&real, t, rng).ok()).collect())
    });
    let mut out = vec![Vec::new(); grid.len()];
    for rep in per_rep {
        for (k, s) in rep?.into_iter().enumerate() {
            if let Some(s) = s {
                out[k].push(s);
            }
        }
    }
    Ok(out)
}

/// Fraction of surviving replicates whose picked node has a multiple edge.
pub fn multiple_edge_stats(params: &NetParams, grid: &[f64], replicates: usize, seed: u64) -> Result<Vec<MultiEdgePoint>> {
    if replicates < 1000 {
        return domain(format!("multiple-edge statistics need at least 1000 replicates, got {replicates}"));
    }
    let samples = degree_samples_on_grid(params, grid, replicates, seed)?;
    Ok(multiple_edge_points(grid, &samples))
}

/// Summarise samples from [`degree_samples_on_grid`].
pub fn multiple_edge_points(grid: &[f64], samples: &[Vec<DegreeSample>]) -> Vec<MultiEdgePoint> {
    grid.iter()
        .zip(samples)
        .map(|(&t, s)| {
            let n = s.len();
            let hits = s.iter().filter(|d| d.has_multiple_edge).count();
            let fraction = if n > 0 { hits as f64 / n as f64 } else { 0.0 };
            MultiEdgePoint {
                t,
                fraction,
                stderr: if n > 0 { (fraction * (1.0 - fraction) / n as f64).sqrt() } else { 0.0 },
                survivors: n,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdp::simulate_path;

    fn net(l: f64, m: f64, a: f64, b: f64, s: Social) -> NetParams {
        NetParams::new(BdParams::new(l, m).unwrap(), a, b, s).unwrap()
    }

    #[test]
    fn social_parse_round_trip() {
        for s in ["const:2", "exp:1.5", "lognormal:0,0.5", "uniform:0.5,2"] {
            let d: Social = s.parse().unwrap();
            assert_eq!(d.to_string().parse::<Social>().unwrap(), d);
        }
        assert!("exp:-1".parse::<Social>().is_err());
        assert!("gamma:1".parse::<Social>().is_err());
        assert!("uniform:0,1".parse::<Social>().is_err());
    }

    #[test]
    fn social_moments_and_quantiles() {
        for d in [
            Social::Constant { value: 2.0 },
            Social::Exponential { rate: 2.0 },
            Social::LogNormal { m: 0.1, s: 0.4 },
            Social::Uniform { a: 0.5, b: 1.5 },
        ] {
            assert!((d.second_moment() - d.mean().powi(2) - d.variance()).abs() < 1e-12);
            let med = d.quantile(0.5, 0.5);
            let mut rng = stream_rng(1, 0);
            let below = (0..20_000).filter(|_| d.sample(&mut rng) <= med).count();
            if d.variance() > 0.0 {
                assert!((below as f64 / 20_000.0 - 0.5).abs() < 0.02);
            }
        }
    }

    #[test]
    fn fenwick_sums_and_search() {
        let mut f = Fenwick::default();
        let v = [1.0, 2.0, 0.5, 3.0, 0.25, 4.0, 1.5];
        for x in v {
            f.push(x);
        }
        for i in 0..=v.len() {
            assert!((f.prefix(i) - v[..i].iter().sum::<f64>()).abs() < 1e-12);
        }
        f.add(3, -3.0);
        assert!((f.total() - 9.25).abs() < 1e-12);
        assert_eq!(f.find(0.5), 0);
        assert_eq!(f.find(3.4), 2);
        assert_eq!(f.find(3.6), 4);
        assert_eq!(f.find(9.0), 6);
    }

    #[test]
    fn zero_horizon_is_single_isolated_node() {
        let r = simulate_network(&net(1.0, 0.0, 1.0, 1.0, Social::default()), 0.0, 3).unwrap();
        assert_eq!(r.path.nodes.len(), 1);
        assert!(r.edges.is_empty());
    }

    #[test]
    fn alpha_zero_has_no_edges() {
        for seed in 0..20 {
            let r = simulate_network(&net(2.0, 1.0, 0.0, 1.0, Social::default()), 2.0, seed).unwrap();
            assert!(r.edges.is_empty());
        }
    }

    #[test]
    fn realization_invariants() {
        let params = net(2.0, 1.0, 1.5, 1.0, Social::default());
        for seed in 0..50 {
            let r = simulate_network(&params, 2.5, seed).unwrap();
            for e in &r.edges {
                assert_ne!(e.creator, e.target);
                let (c, d) = (&r.path.nodes[e.creator], &r.path.nodes[e.target]);
                assert!(c.alive_at(e.birth_time) && d.alive_at(e.birth_time));
                assert!(e.death_time <= c.death_time.min(d.death_time));
                assert!(e.birth_time < e.death_time);
            }
            for ev in r.edge_events.iter().filter(|ev| ev.cause == EdgeCause::NodeDeath) {
                let c = r.path.nodes[ev.creator].death_time;
                let d = r.path.nodes[ev.target].death_time;
                assert!(ev.time == c || ev.time == d);
            }
            assert!(r.edge_events.windows(2).all(|w| w[0].time <= w[1].time));
            for node in r.path.living_at(2.5) {
                let s = r.degree_sample(node, 2.5);
                assert!(s.neighbour_count <= s.degree);
                assert_eq!(s.has_multiple_edge, s.neighbour_count < s.degree);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let r = simulate_network(&net(2.0, 1.0, 1.0, 1.0, Social::default()), 1.5, 9).unwrap();
        assert_eq!(NetRealization::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn lambda_single_node_is_zero() {
        let p = BdParams::new(1.0, 0.0).unwrap();
        let path = simulate_path(&p, 0.0, 0).unwrap();
        assert_eq!(lambda_pure_birth_from_path(&path, &[1.0], 1.0, 1.0, 0, 0.0).unwrap(), 0.0);
        assert_eq!(lambda_general_from_path(&path, &[1.0], 1.0, 1.0, 0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn general_reduces_to_pure_birth() {
        let params = net(2.0, 0.0, 1.3, 0.7, Social::default());
        for seed in 0..200 {
            let r = simulate_network(&params, 1.5, seed).unwrap();
            for node in r.path.living_at(1.5) {
                let a = lambda_t_pure_birth(&r, node, 1.5).unwrap();
                let b = lambda_t_general(&r, node, 1.5).unwrap();
                assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn pure_birth_formula_rejects_deaths() {
        let r = simulate_network(&net(2.0, 1.0, 1.0, 1.0, Social::default()), 1.0, 1).unwrap();
        assert!(lambda_t_pure_birth(&r, 0, 0.5).is_err() || r.path.nodes[0].death_time <= 0.5);
    }
}
