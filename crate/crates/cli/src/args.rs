use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "owgame", version, about = "Nash equilibria of the multi-trader Obizhaeva-Wang execution game")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium trading vectors and per-agent strategies on one grid.
    Solve(Flags),
    /// Inventory paths against the continuous limits (θ > 0).
    Limits(Flags),
    /// θ = 0 paths classified by parity, with their cluster points.
    Oscillate(Flags),
    /// Per-agent cost splits and their limits along N.
    Costs(Flags),
    /// Half-grid instantaneous costs: sup deviations from the continuous profiles.
    Halfgrid(Flags),
    /// Equilibrium certificate from stationarity and seeded deviations.
    Audit(Flags),
}

impl Command {
    pub fn flags(&self) -> &Flags {
        match self {
            Self::Solve(f)
            | Self::Limits(f)
            | Self::Oscillate(f)
            | Self::Costs(f)
            | Self::Halfgrid(f)
            | Self::Audit(f) => f,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Solve(_) => "solve",
            Self::Limits(_) => "limits",
            Self::Oscillate(_) => "oscillate",
            Self::Costs(_) => "costs",
            Self::Halfgrid(_) => "halfgrid",
            Self::Audit(_) => "audit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Dense,
    #[value(alias = "closed-form")]
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    #[value(alias = "first-half")]
    First,
    #[value(alias = "second-half")]
    Second,
}

/// Flags shared by every command. Unset flags fall back to `--config`, then
/// to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Number of traders.
    #[arg(long)]
    pub n: Option<usize>,
    /// Price-impact decay rate ρ.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Horizon T.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Number of grid steps N (N+1 trading dates).
    #[arg(long = "N")]
    pub steps: Option<usize>,
    /// Instantaneous cost θ.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Initial inventories, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Trading times for an irregular grid, comma separated (solve, audit).
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Grid sizes for sweeps, comma separated.
    #[arg(long = "N-list", value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Evaluation times, comma separated.
    #[arg(long = "t-list", value_delimiter = ',')]
    pub t_list: Option<Vec<f64>>,
    /// Number of equally spaced evaluation times on [0, T].
    #[arg(long = "t-grid")]
    pub t_grid: Option<usize>,
    /// Split point c ∈ (0, 1] of the instantaneous costs.
    #[arg(long)]
    pub c: Option<f64>,
    /// Half-grid mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Seed of the deviation probe.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of seeded deviations per agent.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Solve a second time with this method and report the largest gap.
    #[arg(long = "method-check", value_enum)]
    pub method_check: Option<MethodArg>,
    /// Audit a deliberately corrupted profile.
    #[arg(long)]
    pub corrupt: bool,
    /// Output file; relative paths resolve against $OWGAME_OUTPUT_DIR when set.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON file with default values for any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}
