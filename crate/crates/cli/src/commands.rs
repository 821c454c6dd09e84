//! Subcommand implementations. Each returns the artifact table and whether
//! its built-in checks passed.

use std::path::PathBuf;

use bdnet::ages::{self, AgeCdf, AgeKind};
use bdnet::bdp::{self, simulate_counts};
use bdnet::bounds::lemmas::{lemma_checks, LemmaConfig, MIN_REPLICATES};
use bdnet::bounds::{applicable_bounds, threshold_general, threshold_pure_birth, tv_curve, BoundReport};
use bdnet::contour::{bijection_failures, deflection_count_tv, tree_law_check};
use bdnet::mixpo::asymptotic_pmf;
use bdnet::netsim::{pick_uniform_living, simulate_network_with};
use bdnet::rng::{derive_seed, replicate};
use bdnet::stats::{cov_estimate, mean_estimate, var_estimate};
use clap::{Args, ValueEnum};

use crate::config::{CommonArgs, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{Cell, Table};

pub struct Outcome {
    pub table: Table,
    pub passed: bool,
}

impl Outcome {
    fn ok(table: Table) -> Self {
        Outcome { table, passed: true }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Also write each replicate's network realization as JSON into this directory.
    #[arg(long, value_name = "DIR")]
    pub replicate_json: Option<PathBuf>,
}

/// Survival-conditioned degree samples of a uniformly picked living node:
/// one row per replicate and grid time.
pub fn simulate(cfg: &RunConfig, args: &SimulateArgs) -> Result<Outcome> {
    let net = cfg.net_params()?;
    if let Some(dir) = &args.replicate_json {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display().to_string(), e))?;
    }
    let mut table = Table::new(&[
        "replicate",
        "T",
        "attempts",
        "population",
        "picked_node",
        "picked_age",
        "degree",
        "neighbour_count",
        "has_multiple_edge",
    ]);
    for (k, &t) in cfg.grid.iter().enumerate() {
        let seed = derive_seed(cfg.seed, k as u64);
        let keep_json = args.replicate_json.is_some();
        let runs = replicate(seed, cfg.reps, |rng, _| -> bdnet::Result<_> {
            let mut attempts = 0usize;
            loop {
                attempts += 1;
                let real = simulate_network_with(&net, t, rng)?;
                if let Ok(s) = pick_uniform_living(&real, t, rng) {
                    let y = real.path.population_at(t);
                    return Ok((s, attempts, y, keep_json.then(|| real.to_json())));
                }
            }
        });
        for (r, run) in runs.into_iter().enumerate() {
            let (s, attempts, y, json) = run?;
            if let (Some(dir), Some(json)) = (&args.replicate_json, json) {
                let p = dir.join(format!("T{k}_rep{r:06}.json"));
                std::fs::write(&p, json).map_err(|e| CliError::io(p.display().to_string(), e))?;
            }
            table.push(vec![
                r.into(),
                t.into(),
                attempts.into(),
                y.into(),
                s.picked_node.into(),
                s.picked_age.into(),
                s.degree.into(),
                s.neighbour_count.into(),
                s.has_multiple_edge.into(),
            ]);
        }
    }
    Ok(Outcome::ok(table))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PmfLaw {
    /// Law of the population size `Y_T`.
    Population,
    /// Limiting degree law (mixed Poisson).
    DegreeLimit,
}

#[derive(Debug, Clone, Args)]
pub struct PmfArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value = "population")]
    pub law: PmfLaw,
    /// Largest value tabulated; by default the tail beyond it is below 1e-12.
    #[arg(long)]
    pub n_max: Option<u64>,
}

pub fn pmf(cfg: &RunConfig, args: &PmfArgs) -> Result<Outcome> {
    match args.law {
        PmfLaw::Population => {
            let bd = cfg.bd_params()?;
            let mut table = Table::new(&["T", "n", "pmf"]);
            for &t in &cfg.grid {
                let n_max = match args.n_max {
                    Some(n) => n,
                    None => {
                        let q = bdp::conditional_geometric_ratio(&bd, t)?;
                        if q <= 0.0 {
                            1
                        } else {
                            ((1e-12f64.ln() / q.ln()).ceil() as u64).clamp(1, 10_000_000)
                        }
                    }
                };
                for (n, p) in bdp::pmf_vec(&bd, t, n_max)?.into_iter().enumerate() {
                    table.push(vec![t.into(), n.into(), p.into()]);
                }
            }
            Ok(Outcome::ok(table))
        }
        PmfLaw::DegreeLimit => {
            let law = asymptotic_pmf(&cfg.net_params()?)?;
            let mut table = Table::new(&["n", "pmf"]);
            let keep = args.n_max.map_or(law.probs.len(), |n| (n as usize + 1).min(law.probs.len()));
            for (n, p) in law.probs.iter().take(keep).enumerate() {
                table.push(vec![n.into(), (*p).into()]);
            }
            Ok(Outcome::ok(table))
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Closed-form moments next to Monte Carlo estimates from `reps` paths.
pub fn moments(cfg: &RunConfig) -> Result<Outcome> {
    let bd = cfg.bd_params()?;
    let mut table = Table::new(&[
        "T",
        "p0",
        "mean_y",
        "var_y",
        "mean_b",
        "var_b",
        "cov_by",
        "mean_d",
        "mc_mean_y",
        "mc_mean_y_se",
        "mc_var_y",
        "mc_var_y_se",
        "mc_mean_b",
        "mc_mean_b_se",
        "mc_var_b",
        "mc_var_b_se",
        "mc_cov_by",
        "mc_cov_by_se",
    ]);
    for (k, &t) in cfg.grid.iter().enumerate() {
        let m = bdp::moments(&bd, t)?;
        let draws = replicate(derive_seed(cfg.seed, k as u64), cfg.reps, |rng, _| simulate_counts(&bd, t, rng));
        let y: Vec<f64> = draws.iter().map(|d| d.0 as f64).collect();
        let b: Vec<f64> = draws.iter().map(|d| d.1 as f64).collect();
        let mut row: Vec<Cell> = vec![
            t.into(),
            bdp::p0_prob(&bd, t)?.into(),
            m.mean_y.into(),
            m.var_y.into(),
            m.mean_b.into(),
            m.var_b.into(),
            m.cov_by.into(),
            m.mean_d.into(),
        ];
        for e in [mean_estimate(&y), var_estimate(&y), mean_estimate(&b), var_estimate(&b), cov_estimate(&b, &y)] {
            row.push(e.value.into());
            row.push(e.stderr.into());
        }
        table.push(row);
    }
    Ok(Outcome::ok(table))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AgeLaw {
    /// Uniformly picked living individual.
    Unconditional,
    /// Uniform pick given `Y_T = y`.
    Conditional,
    /// One of the individuals other than the last.
    FirstBlock,
    /// The last individual in contour order.
    LastIndividual,
    /// Truncated exponential (pure birth only).
    PureBirth,
    /// Limit as `T` grows.
    Limit,
}

#[derive(Debug, Clone, Args)]
pub struct AgesArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value = "unconditional")]
    pub kind: AgeLaw,
    /// Population size for `--kind conditional`.
    #[arg(long)]
    pub y: Option<u64>,
    /// Number of grid intervals on `[0, T]`.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

pub fn ages(cfg: &RunConfig, args: &AgesArgs) -> Result<Outcome> {
    let bd = cfg.bd_params()?;
    if args.points < 1 {
        return Err(CliError::config("points must be at least 1"));
    }
    let kind = match args.kind {
        AgeLaw::Unconditional => Some(AgeKind::Unconditional),
        AgeLaw::Conditional => {
            let y = args.y.ok_or_else(|| CliError::config("--kind conditional needs --y"))?;
            Some(AgeKind::ConditionalGivenY { y })
        }
        AgeLaw::FirstBlock => Some(AgeKind::FirstBlock),
        AgeLaw::LastIndividual => Some(AgeKind::LastIndividual),
        AgeLaw::PureBirth => Some(AgeKind::PureBirthTruncExp),
        AgeLaw::Limit => None,
    };
    let mut table = Table::new(&["T", "t", "cdf"]);
    for &h in &cfg.grid {
        let rows = match kind {
            Some(kind) => AgeCdf::new(bd, h, kind).map_err(|e| CliError::config(e.to_string()))?.grid(args.points)?,
            None => (0..=args.points)
                .map(|i| {
                    let t = h * i as f64 / args.points as f64;
                    (t, ages::limit_age_cdf(&bd, t))
                })
                .collect(),
        };
        for (t, f) in rows {
            table.push(vec![h.into(), t.into(), f.into()]);
        }
    }
    Ok(Outcome::ok(table))
}

#[derive(Debug, Clone, Args)]
pub struct ContourArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Family-wise level of the three two-sample tests.
    #[arg(long, default_value_t = 1e-3)]
    pub level: f64,
}

/// Bijection round trip and contour-versus-path tree law tests per grid time.
pub fn contour_check(cfg: &RunConfig, args: &ContourArgs) -> Result<Outcome> {
    let bd = cfg.bd_params()?;
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::config("level must lie in (0, 1)"));
    }
    if cfg.reps < 2 {
        return Err(CliError::config("contour-check needs at least 2 replicates"));
    }
    let mut table = Table::new(&[
        "T",
        "replicates",
        "bijection_failures",
        "p_maxima",
        "p_maxima_at_height",
        "p_total_length",
        "per_test_level",
        "height_count_tv",
        "passed",
    ]);
    let mut all = true;
    for (k, &t) in cfg.grid.iter().enumerate() {
        let seed = derive_seed(cfg.seed, k as u64);
        let failures = bijection_failures(&bd, t, cfg.reps, derive_seed(seed, 0))?;
        let law = tree_law_check(&bd, t, cfg.reps, args.level, derive_seed(seed, 1))?;
        let tv = deflection_count_tv(&bd, t, cfg.reps, derive_seed(seed, 2))?;
        let passed = failures == 0 && law.passed;
        all &= passed;
        table.push(vec![
            t.into(),
            cfg.reps.into(),
            failures.into(),
            law.maxima.p_value.into(),
            law.maxima_at_deflection.p_value.into(),
            law.total_length.p_value.into(),
            law.per_test_level.into(),
            tv.into(),
            passed.into(),
        ]);
    }
    Ok(Outcome { table, passed: all })
}

fn components_text(b: &BoundReport) -> String {
    b.components
        .iter()
        .map(|(n, v)| format!("{n}={}", crate::output::format_float(*v)))
        .collect::<Vec<_>>()
        .join(";")
}

/// Tightest of the bounds, preferring those proved at this horizon.
fn tightest(bounds: &[(String, BoundReport)]) -> Option<&(String, BoundReport)> {
    let by_value = |a: &&(String, BoundReport), b: &&(String, BoundReport)| a.1.bound_value.total_cmp(&b.1.bound_value);
    bounds
        .iter()
        .filter(|(_, b)| b.validity)
        .min_by(by_value)
        .or_else(|| bounds.iter().min_by(by_value))
}

#[derive(Debug, Clone, Args)]
pub struct TvCurveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Batches for the batch-means standard error.
    #[arg(long, default_value_t = 20)]
    pub batches: usize,
}

/// Empirical TV to the limiting degree law against the tightest applicable
/// bound, one row per grid time. Fails when a valid bound falls below the
/// estimate plus three standard errors.
pub fn tv_curve_cmd(cfg: &RunConfig, args: &TvCurveArgs) -> Result<Outcome> {
    let net = cfg.net_params()?;
    if args.batches < 2 {
        return Err(CliError::config("batches must be at least 2"));
    }
    if cfg.reps < 10 * args.batches {
        return Err(CliError::config(format!(
            "tv-curve needs at least {} replicates for {} batches",
            10 * args.batches,
            args.batches
        )));
    }
    let curve = tv_curve(&net, &cfg.grid, cfg.reps, args.batches, cfg.seed)?;
    let mut table = Table::new(&[
        "T",
        "bound_name",
        "bound",
        "validity",
        "components",
        "empirical_tv",
        "tv_stderr",
        "lambda_mean",
        "dominated",
    ]);
    let mut all = true;
    for point in &curve {
        let (name, b) = tightest(&point.bounds).expect("at least one bound applies");
        let e = &point.estimate;
        let dominated = point.dominated();
        all &= dominated;
        table.push(vec![
            e.t.into(),
            name.as_str().into(),
            b.bound_value.into(),
            b.validity.into(),
            components_text(b).into(),
            e.tv.into(),
            e.stderr.into(),
            e.lambda_mean.into(),
            dominated.into(),
        ]);
    }
    Ok(Outcome { table, passed: all })
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Every applicable bound at every grid time, with its threshold.
pub fn bounds(cfg: &RunConfig) -> Result<Outcome> {
    let net = cfg.net_params()?;
    let mut table = Table::new(&["T", "bound_name", "bound", "validity", "threshold", "components"]);
    for &t in &cfg.grid {
        for (name, b) in applicable_bounds(&net, t)? {
            let threshold = match name.as_str() {
                "s1" => 0.0,
                "ss1" => threshold_pure_birth(&net.bd),
                _ => threshold_general(&net.bd).unwrap_or(f64::INFINITY),
            };
            table.push(vec![
                t.into(),
                name.as_str().into(),
                b.bound_value.into(),
                b.validity.into(),
                threshold.into(),
                components_text(&b).into(),
            ]);
        }
    }
    Ok(Outcome::ok(table))
}

#[derive(Debug, Clone, Args)]
pub struct LemmaArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Rate in the last-event lemma.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Exponent delta in the running-minimum lemma.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Exponent gamma in the running-minimum lemma.
    #[arg(long, default_value_t = 0.25)]
    pub gamma: f64,
    /// Largest event index drawn by the survivor-count lemmas.
    #[arg(long, default_value_t = 30)]
    pub max_event_index: usize,
}

pub fn lemma_table(checks: &[bdnet::bounds::lemmas::LemmaCheck]) -> Table {
    let mut table = Table::new(&["name", "T", "lhs", "lhs_stderr", "rhs", "margin", "passed", "detail"]);
    for c in checks {
        table.push(vec![
            c.name.as_str().into(),
            c.t.into(),
            c.lhs.into(),
            c.lhs_stderr.into(),
            c.rhs.into(),
            c.margin.into(),
            c.passed.into(),
            c.detail.as_str().into(),
        ]);
    }
    table
}

pub fn lemma_checks_cmd(cfg: &RunConfig, args: &LemmaArgs) -> Result<Outcome> {
    let bd = cfg.bd_params()?;
    if !bd.supercritical() {
        return Err(CliError::config("lemma checks need lambda > mu"));
    }
    if cfg.reps < MIN_REPLICATES {
        return Err(CliError::config(format!("lemma checks need at least {MIN_REPLICATES} replicates")));
    }
    let lc = LemmaConfig {
        grid: cfg.grid.clone(),
        replicates: cfg.reps,
        seed: cfg.seed,
        c: args.c,
        delta: args.delta,
        gamma: args.gamma,
        max_event_index: args.max_event_index,
    };
    let checks = lemma_checks(&bd, &lc)?;
    Ok(Outcome {
        passed: checks.iter().all(|c| c.passed),
        table: lemma_table(&checks),
    })
}
