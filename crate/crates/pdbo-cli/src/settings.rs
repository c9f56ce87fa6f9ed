//! Run settings. The same struct is parsed from flags and from the JSON manifest given
//! with `--config`; flags win.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Built-in problem: toy1, toy2, quadratic, hyperopt.
    #[arg(long)]
    #[serde(default)]
    pub problem: Option<String>,
    /// Method for `run`: pdbo, proximal-pdbo, itd-r, aid-fp, bigsam-itd.
    #[arg(long)]
    #[serde(default)]
    pub method: Option<String>,
    /// Methods for `compare`, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub methods: Option<Vec<String>>,

    /// Outer iterations (per subproblem for proximal-pdbo; outer steps for baselines).
    #[arg(long = "T")]
    #[serde(default, rename = "T")]
    pub t: Option<usize>,
    /// Inner PGD steps per PDBO iteration.
    #[arg(long = "N")]
    #[serde(default, rename = "N")]
    pub n: Option<usize>,
    /// Proximal-PDBO subproblem count.
    #[arg(long = "K")]
    #[serde(default, rename = "K")]
    pub k: Option<usize>,
    #[arg(long)]
    #[serde(default)]
    pub dual_step: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub primal_step: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub theta: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub lambda0: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(default)]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub delta: Option<f64>,
    /// `theory` or `constant`.
    #[arg(long)]
    #[serde(default)]
    pub schedule: Option<String>,
    #[arg(long)]
    #[serde(default)]
    pub dual_bound: Option<f64>,

    #[arg(long)]
    #[serde(default)]
    pub inner_steps: Option<usize>,
    #[arg(long)]
    #[serde(default)]
    pub inner_lr: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub outer_lr: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub outer_steps: Option<usize>,
    #[arg(long)]
    #[serde(default)]
    pub fp_iters: Option<usize>,
    #[arg(long)]
    #[serde(default)]
    pub averaging: Option<f64>,

    /// Training CSV for the hyperopt problem (needs --val too).
    #[arg(long)]
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    pub val: Option<PathBuf>,

    #[arg(long)]
    #[serde(default)]
    pub record_every: Option<usize>,
    /// Restart inner PGD from the center of Y at every PDBO iteration.
    #[arg(long, action = clap::ArgAction::SetTrue)]
    #[serde(default)]
    pub no_warm_start: Option<bool>,
    /// Skip the inner-gap column (it needs an inner solve per row).
    #[arg(long, action = clap::ArgAction::SetTrue)]
    #[serde(default)]
    pub no_inner_gap: Option<bool>,
    /// Gradient-call budget; sets the iteration count of every method.
    #[arg(long)]
    #[serde(default)]
    pub budget: Option<u64>,

    #[arg(long)]
    #[serde(default)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    /// Concurrent runs (default 1).
    #[arg(long)]
    #[serde(default)]
    pub jobs: Option<usize>,
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

macro_rules! prefer {
    ($a:ident, $b:ident; $($f:ident),* $(,)?) => {
        Settings { $($f: $a.$f.or($b.$f)),* }
    };
}

impl Settings {
    /// Fields set in `self` win over `base`. Clap's `SetTrue` flags parse as
    /// `Some(false)` when absent, so those are merged with OR.
    pub fn over(self, base: Settings) -> Settings {
        let a = Settings { no_warm_start: self.no_warm_start.filter(|&v| v), no_inner_gap: self.no_inner_gap.filter(|&v| v), ..self };
        let b = base;
        prefer!(a, b;
            problem, method, methods, t, n, k, dual_step, primal_step, theta, lambda0, x0, y0, alpha,
            delta, schedule, dual_bound, inner_steps, inner_lr, outer_lr, outer_steps, fp_iters,
            averaging, train, val, record_every, no_warm_start, no_inner_gap, budget, seed, seeds,
            jobs, out,
        )
    }

    pub fn from_json_file(path: &Path) -> CliResult<Settings> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Load the manifest (if any) and apply these flags on top.
    pub fn resolve(self, config: Option<&Path>) -> CliResult<Settings> {
        match config {
            Some(p) => Ok(self.over(Settings::from_json_file(p)?)),
            None => Ok(self),
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match (&self.seeds, self.seed) {
            (Some(s), _) if !s.is_empty() => s.clone(),
            (_, Some(s)) => vec![s],
            _ => vec![0],
        }
    }

    pub fn require_out(&self) -> CliResult<&Path> {
        self.out.as_deref().ok_or_else(|| CliError::Config("missing required --out".into()))
    }

    pub fn require_problem(&self) -> CliResult<&str> {
        self.problem.as_deref().ok_or_else(|| CliError::Config("missing required --problem".into()))
    }
}
