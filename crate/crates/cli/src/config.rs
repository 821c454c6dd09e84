//! Run configuration: command-line flags override a JSON config file, which
//! overrides the built-in defaults.

use std::path::{Path, PathBuf};

use bdnet::bdp::BdParams;
use bdnet::netsim::{NetParams, Social};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BDNET_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Flags shared by every subcommand. All optional so that unset flags fall
/// through to the config file and then to the defaults.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommonArgs {
    /// JSON file with any of the fields below.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Social index law: const:c, exp:rate, lognormal:m,s or uniform:a,b.
    #[arg(long)]
    pub social: Option<String>,
    /// Single time horizon (shorthand for a one-point grid).
    #[arg(long = "T", alias = "t")]
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    /// Comma-separated, strictly increasing time grid.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; `-` for stdout. Defaults to `$BDNET_OUT_DIR/<command>.<ext>` or stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Gzip the output (implied by a `.gz` output name).
    #[arg(long)]
    pub gzip: Option<bool>,
    /// Worker threads for replicate loops; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl CommonArgs {
    /// Fields set here win over `base`.
    fn over(self, base: CommonArgs) -> CommonArgs {
        CommonArgs {
            config: self.config.or(base.config),
            lambda: self.lambda.or(base.lambda),
            mu: self.mu.or(base.mu),
            alpha: self.alpha.or(base.alpha),
            beta: self.beta.or(base.beta),
            social: self.social.or(base.social),
            horizon: self.horizon.or(base.horizon),
            grid: self.grid.or(base.grid),
            reps: self.reps.or(base.reps),
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            gzip: self.gzip.or(base.gzip),
            threads: self.threads.or(base.threads),
        }
    }
}

/// Fully resolved configuration, embedded in every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub social: Social,
    pub grid: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub format: Format,
    pub gzip: bool,
    #[serde(skip)]
    pub threads: Option<usize>,
}

pub const DEFAULT_SEED: u64 = 0;

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lambda: 2.0,
            mu: 1.0,
            alpha: 1.0,
            beta: 2.0,
            social: Social::Exponential { rate: 1.0 },
            grid: vec![2.0],
            reps: 1000,
            seed: DEFAULT_SEED,
            out: None,
            format: Format::Csv,
            gzip: false,
            threads: None,
        }
    }
}

fn read_file(path: &Path) -> Result<CommonArgs> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    /// Merge flags over the config file (if any) over the defaults, then
    /// validate.
    pub fn resolve(flags: CommonArgs) -> Result<RunConfig> {
        let file = match &flags.config {
            Some(p) => read_file(p)?,
            None => CommonArgs::default(),
        };
        let args = flags.over(file);
        let d = RunConfig::default();
        let grid = match (args.horizon, args.grid) {
            (Some(_), Some(_)) => return Err(CliError::config("give either T or grid, not both")),
            (Some(t), None) => vec![t],
            (None, Some(g)) => g,
            (None, None) => d.grid,
        };
        let social = match args.social {
            Some(s) => s.parse::<Social>().map_err(|e| CliError::config(format!("social: {e}")))?,
            None => d.social,
        };
        let cfg = RunConfig {
            lambda: args.lambda.unwrap_or(d.lambda),
            mu: args.mu.unwrap_or(d.mu),
            alpha: args.alpha.unwrap_or(d.alpha),
            beta: args.beta.unwrap_or(d.beta),
            social,
            grid,
            reps: args.reps.unwrap_or(d.reps),
            seed: args.seed.unwrap_or(d.seed),
            out: args.out,
            format: args.format.unwrap_or(d.format),
            gzip: args.gzip.unwrap_or(false),
            threads: args.threads,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(CliError::config("reps must be at least 1"));
        }
        if self.grid.is_empty() {
            return Err(CliError::config("time grid is empty"));
        }
        if self.grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(CliError::config("time grid entries must be positive and finite"));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::config("time grid must be strictly increasing"));
        }
        if self.threads == Some(0) {
            return Err(CliError::config("threads must be at least 1"));
        }
        self.net_params()?;
        Ok(())
    }

    pub fn bd_params(&self) -> Result<BdParams> {
        BdParams::new(self.lambda, self.mu).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn net_params(&self) -> Result<NetParams> {
        NetParams::new(self.bd_params()?, self.alpha, self.beta, self.social)
            .map_err(|e| CliError::config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"lambda": 3.0, "mu": 0.5, "reps": 7}"#).unwrap();
        let flags = CommonArgs {
            config: Some(path),
            mu: Some(0.25),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(flags).unwrap();
        assert_eq!((cfg.lambda, cfg.mu, cfg.reps, cfg.alpha), (3.0, 0.25, 7, 1.0));
    }

    #[test]
    fn json_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, "{\n  \"lambda\": 3.0,\n  \"mu\": x\n}").unwrap();
        let err = RunConfig::resolve(CommonArgs {
            config: Some(path),
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn rejects_bad_values() {
        for flags in [
            CommonArgs { reps: Some(0), ..Default::default() },
            CommonArgs { grid: Some(vec![2.0, 1.0]), ..Default::default() },
            CommonArgs { horizon: Some(1.0), grid: Some(vec![2.0]), ..Default::default() },
            CommonArgs { lambda: Some(-1.0), ..Default::default() },
            CommonArgs { social: Some("gamma:2".into()), ..Default::default() },
        ] {
            assert!(matches!(RunConfig::resolve(flags), Err(CliError::Config(_))));
        }
    }
}
