use std::fs;
use std::path::{Path, PathBuf};

use owgame_core::model::{DEFAULT_MAX_STEPS, ModelParams};
use owgame_core::{GridSpec, HalfGridMode, SolveMethod};
use serde::{Deserialize, Serialize};

use crate::args::{Flags, Format, MethodArg, ModeArg};
use crate::error::CliError;

pub const OUTPUT_DIR_VAR: &str = "OWGAME_OUTPUT_DIR";

/// Contents of a `--config` file. Keys mirror the flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    n: Option<usize>,
    rho: Option<f64>,
    #[serde(rename = "T")]
    horizon: Option<f64>,
    #[serde(rename = "N")]
    steps: Option<usize>,
    theta: Option<f64>,
    x: Option<Vec<f64>>,
    times: Option<Vec<f64>>,
    #[serde(rename = "N_list")]
    n_list: Option<Vec<usize>>,
    t_list: Option<Vec<f64>>,
    t_grid: Option<usize>,
    c: Option<f64>,
    mode: Option<ModeArg>,
    seed: Option<u64>,
    trials: Option<usize>,
    method: Option<MethodArg>,
    method_check: Option<MethodArg>,
    corrupt: Option<bool>,
    output: Option<PathBuf>,
    format: Option<Format>,
}

/// Fully resolved run configuration, echoed into every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub n: usize,
    pub rho: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    pub theta: f64,
    pub x: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub t_list: Vec<f64>,
    pub c: f64,
    pub mode: ModeArg,
    pub seed: u64,
    pub trials: usize,
    pub method: MethodArg,
    pub method_check: Option<MethodArg>,
    pub corrupt: bool,
    pub format: Format,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn params(&self) -> Result<ModelParams<f64>, CliError> {
        ModelParams::new(self.n, self.rho, self.horizon, self.theta, self.x.clone()).map_err(CliError::from)
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        match &self.times {
            Some(t) => GridSpec::from_times(t.clone()).map_err(|e| CliError::validation("--times", e)),
            None => GridSpec::equidistant(self.horizon, self.steps).map_err(|e| CliError::validation("--N", e)),
        }
    }

    pub fn solve_method(&self) -> SolveMethod {
        to_method(self.method)
    }

    pub fn halfgrid_mode(&self) -> HalfGridMode {
        match self.mode {
            ModeArg::First => HalfGridMode::FirstHalf,
            ModeArg::Second => HalfGridMode::SecondHalf,
        }
    }
}

pub fn to_method(m: MethodArg) -> SolveMethod {
    match m {
        MethodArg::Dense => SolveMethod::Dense,
        MethodArg::Closed => SolveMethod::ClosedForm,
    }
}

fn read_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("--config: {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("--config: {e}")))
}

fn uniform_times(count: usize, horizon: f64) -> Result<Vec<f64>, CliError> {
    if count < 2 {
        return Err(CliError::Validation("--t-grid: at least 2 points required".into()));
    }
    let last = count - 1;
    Ok((0..count)
        .map(|j| if j == last { horizon } else { horizon * j as f64 / last as f64 })
        .collect())
}

fn check(cond: bool, flag: &str, msg: &str) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{flag}: {msg}")))
    }
}

/// Merges flags over the config file over per-command defaults and checks
/// every value, naming the offending flag on failure.
pub fn resolve(command: &str, flags: &Flags) -> Result<RunConfig, CliError> {
    let file = match &flags.config {
        Some(p) => read_file_config(p)?,
        None => FileConfig::default(),
    };

    let x = flags.x.clone().or(file.x);
    let n = flags.n.or(file.n).unwrap_or_else(|| x.as_ref().map_or(2, Vec::len));
    check(n >= 2, "--n", "at least two traders required")?;
    let x = x.unwrap_or_else(|| vec![1.0; n]);
    check(x.len() == n, "--x", &format!("expected {n} inventories, got {}", x.len()))?;
    check(x.iter().all(|v| v.is_finite()), "--x", "inventories must be finite")?;

    let rho = flags.rho.or(file.rho).unwrap_or(1.0);
    check(rho.is_finite() && rho > 0.0, "--rho", "ρ > 0 required")?;
    let times = flags.times.clone().or(file.times);
    let horizon = flags
        .horizon
        .or(file.horizon)
        .or_else(|| times.as_ref().and_then(|t| t.last().copied()))
        .unwrap_or(1.0);
    check(horizon.is_finite() && horizon > 0.0, "--T", "T > 0 required")?;

    let default_theta = if command == "oscillate" { 0.0 } else { 0.1 };
    let theta = flags.theta.or(file.theta).unwrap_or(default_theta);
    check(theta.is_finite() && theta >= 0.0, "--theta", "θ ≥ 0 required")?;
    if command == "oscillate" {
        check(theta == 0.0, "--theta", "the oscillation scan needs θ = 0")?;
    }
    if command == "limits" {
        check(theta > 0.0, "--theta", "continuous limits need θ > 0; use `oscillate` for θ = 0")?;
    }

    let default_steps = if command == "audit" { 50 } else { 100 };
    let steps = flags.steps.or(file.steps).unwrap_or(default_steps);
    check(steps >= 1, "--N", "N ≥ 1 required")?;
    check(steps <= DEFAULT_MAX_STEPS, "--N", &format!("N ≤ {DEFAULT_MAX_STEPS} required"))?;
    if let Some(t) = &times {
        check(t.len() >= 2, "--times", "at least two trading times required")?;
        check((t[t.len() - 1] - horizon).abs() <= 1e-12 * horizon, "--times", "last time must equal T")?;
    }

    let default_list: &[usize] = match command {
        "limits" => &[25, 50, 100, 200],
        "oscillate" => &[100, 101],
        _ => &[100, 200, 400, 800],
    };
    let n_list = flags.n_list.clone().or(file.n_list).unwrap_or_else(|| default_list.to_vec());
    check(!n_list.is_empty(), "--N-list", "at least one N required")?;
    check(n_list.iter().all(|&m| (1..=DEFAULT_MAX_STEPS).contains(&m)), "--N-list", &format!("entries must lie in [1, {DEFAULT_MAX_STEPS}]"))?;
    if command == "halfgrid" {
        check(n_list.iter().all(|&m| m >= 2), "--N-list", "half-grid costs need N ≥ 2")?;
    }

    let t_grid = flags.t_grid.or(file.t_grid);
    let t_list = match (flags.t_list.clone().or(file.t_list), t_grid) {
        (Some(t), _) => t,
        (None, Some(k)) => uniform_times(k, horizon)?,
        (None, None) => match command {
            "halfgrid" => uniform_times(101, horizon)?,
            "oscillate" => vec![0.25 * horizon, 0.5 * horizon, 0.75 * horizon],
            _ => vec![0.0, 0.25 * horizon, 0.5 * horizon, 0.75 * horizon, horizon],
        },
    };
    check(!t_list.is_empty(), "--t-list", "at least one time required")?;
    check(t_list.iter().all(|&t| (0.0..=horizon).contains(&t)), "--t-list", "times must lie in [0, T]")?;

    let c = flags.c.or(file.c).unwrap_or(0.5);
    check(c > 0.0 && c <= 1.0, "--c", "c ∈ (0, 1] required")?;
    let trials = flags.trials.or(file.trials).unwrap_or(100);
    check(trials >= 1, "--trials", "at least one trial required")?;
    let default_format = if command == "audit" { Format::Json } else { Format::Csv };
    let default_method = if times.is_some() { MethodArg::Dense } else { MethodArg::Closed };

    Ok(RunConfig {
        command: command.to_string(),
        n,
        rho,
        horizon,
        steps: times.as_ref().map_or(steps, |t| t.len() - 1),
        theta,
        x,
        times,
        n_list,
        t_list,
        c,
        mode: flags.mode.or(file.mode).unwrap_or(ModeArg::Second),
        seed: flags.seed.or(file.seed).unwrap_or(42),
        trials,
        method: flags.method.or(file.method).unwrap_or(default_method),
        method_check: flags.method_check.or(file.method_check),
        corrupt: flags.corrupt || file.corrupt.unwrap_or(false),
        format: flags.format.or(file.format).unwrap_or(default_format),
        output: flags.output.clone().or(file.output),
    })
}

/// Target path for `--output`, honouring `$OWGAME_OUTPUT_DIR` for relative
/// paths.
pub fn output_path(output: &Path) -> PathBuf {
    if output.is_absolute() {
        return output.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_VAR) {
        Some(dir) if !dir.is_empty() => Path::new(&dir).join(output),
        _ => output.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_infer_n_from_x() {
        let flags = Flags {
            x: Some(vec![2.0, 0.0, 1.0]),
            ..Flags::default()
        };
        let c = resolve("solve", &flags).unwrap();
        assert_eq!(c.n, 3);
        assert_eq!(c.steps, 100);
        assert_eq!(c.t_list.len(), 5);
    }

    #[test]
    fn errors_name_the_flag() {
        let flags = Flags {
            n: Some(1),
            ..Flags::default()
        };
        let e = resolve("solve", &flags).unwrap_err().to_string();
        assert!(e.contains("--n"), "{e}");
        let flags = Flags {
            n: Some(3),
            x: Some(vec![1.0, 2.0]),
            ..Flags::default()
        };
        assert!(resolve("solve", &flags).unwrap_err().to_string().contains("--x"));
        let flags = Flags {
            theta: Some(0.0),
            ..Flags::default()
        };
        assert!(resolve("limits", &flags).unwrap_err().to_string().contains("oscillate"));
    }

    #[test]
    fn t_grid_includes_endpoints() {
        let flags = Flags {
            horizon: Some(2.0),
            t_grid: Some(5),
            ..Flags::default()
        };
        let c = resolve("oscillate", &flags).unwrap();
        assert_eq!(c.t_list, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(c.theta, 0.0);
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = std::env::temp_dir().join(format!("owgame-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        std::fs::write(&path, r#"{"n": 3, "x": [1, 2, 3], "theta": 0.3, "N": 7}"#).unwrap();
        let flags = Flags {
            steps: Some(9),
            config: Some(path.clone()),
            ..Flags::default()
        };
        let c = resolve("solve", &flags).unwrap();
        assert_eq!((c.n, c.steps, c.theta), (3, 9, 0.3));
        std::fs::write(&path, r#"{"bogus": 1}"#).unwrap();
        assert!(resolve("solve", &flags).is_err());
        std::fs::remove_dir_all(dir).ok();
    }
}
