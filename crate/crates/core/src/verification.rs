//! Equilibrium certificates: stationarity (KKT) spread, seeded
//! best-response probes and a closed-form versus dense cross-check.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::closed_form::NuBranch;
use crate::equilibrium::{assemble_profile, solve_equilibrium, EquilibriumVectors, SolveMethod, StrategyProfile};
use crate::error::{Error, Result};
use crate::kernel::{ExpKernelOperator, KernelAction};
use crate::linalg::{dot, norm_inf};
use crate::model::{GridSpec, ModelParams};
use crate::scalar::{compensated_sum, Scalar};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TRIALS: usize = 100;

pub const KKT_TOLERANCE: f64 = 1e-9;
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
pub const MARGIN_TOLERANCE: f64 = 1e-10;
pub const SOLVER_GAP_TOLERANCE: f64 = 1e-9;
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

/// Stationarity diagnostics of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport<T> {
    /// `(max − min)/max(1, |mean|)` of `Γ^θξ_i + Γ̃Σ_{j≠i}ξ_j`, per agent.
    pub spreads: Vec<T>,
    pub max_spread: T,
    /// Component means of the stationarity vectors.
    pub multipliers: Vec<T>,
    /// `‖(Γ^θ + (n−1)Γ̃)Σ_jξ_j − (Σ_jα_j)𝟏‖∞ / max(1, |Σ_jα_j|)`.
    pub aggregation_residual: T,
    /// `max_i |𝟏ᵀξ_i − x_i|`.
    pub liquidation_error: T,
}

fn add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

fn check_profile<T: Scalar, K: KernelAction<T>>(p: &ModelParams<T>, op: &K, profile: &StrategyProfile<T>) -> Result<()> {
    if profile.agents() != p.n {
        return Err(Error::DimensionMismatch {
            expected: p.n,
            found: profile.agents(),
        });
    }
    if profile.dates() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: profile.dates(),
        });
    }
    Ok(())
}

/// KKT diagnostics of an arbitrary profile.
pub fn kkt_audit_profile<T: Scalar, K: KernelAction<T>>(
    p: &ModelParams<T>,
    op: &K,
    profile: &StrategyProfile<T>,
) -> Result<KktReport<T>> {
    check_profile(p, op, profile)?;
    let one = T::one();
    let mut spreads = Vec::with_capacity(p.n);
    let mut multipliers = Vec::with_capacity(p.n);
    let mut liquidation_error = T::zero();
    for i in 0..p.n {
        let row = profile.row(i);
        let s = add(&op.gamma_theta(row), &op.gamma_tilde(&profile.opponents(i)));
        let mean = compensated_sum(s.iter().copied()) / T::from_usize_exact(s.len());
        let hi = s.iter().copied().fold(T::neg_infinity(), T::max);
        let lo = s.iter().copied().fold(T::infinity(), T::min);
        spreads.push((hi - lo) / one.max(mean.abs()));
        multipliers.push(mean);
        let traded = compensated_sum(row.iter().copied());
        liquidation_error = liquidation_error.max((traded - p.inventories[i]).abs());
    }
    let total = profile.aggregate();
    let lhs = add(
        &op.gamma_theta(&total),
        &op.gamma_tilde(&total)
            .into_iter()
            .map(|y| T::from_usize_exact(p.n - 1) * y)
            .collect::<Vec<_>>(),
    );
    let alpha_sum = compensated_sum(multipliers.iter().copied());
    let aggregation_residual = lhs
        .iter()
        .map(|&y| (y - alpha_sum).abs())
        .fold(T::zero(), T::max)
        / one.max(alpha_sum.abs());
    Ok(KktReport {
        max_spread: spreads.iter().copied().fold(T::zero(), T::max),
        spreads,
        multipliers,
        aggregation_residual,
        liquidation_error,
    })
}

/// KKT diagnostics of the equilibrium profile built from `vectors`.
pub fn kkt_audit<T: Scalar>(
    p: &ModelParams<T>,
    grid: &GridSpec<T>,
    vectors: &EquilibriumVectors<T>,
) -> Result<KktReport<T>> {
    let op = ExpKernelOperator::new(p, grid);
    kkt_audit_profile(p, &op, &assemble_profile(p, vectors))
}

/// Outcome of the seeded deviation test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport<T> {
    pub trials: usize,
    pub seed: u64,
    /// `min` over trials and agents of `cost(η) − cost(ξ_i)`.
    pub margin: T,
    /// `max |Δcost − ½ΔᵀΓ^θΔ| / max(1, |cost(ξ_i)|)`; zero only at an
    /// equilibrium.
    pub identity_residual: T,
}

/// Seeded feasible deviations `η = ξ_i + Δ` with `𝟏ᵀΔ = 0`, applied to each
/// agent against the others' fixed strategies. One Gaussian draw per trial
/// is shared by all agents, scaled by `0.1·max(‖ξ_i‖∞, 1/(N+1))`.
pub fn best_response_probe<T: Scalar, K: KernelAction<T>>(
    p: &ModelParams<T>,
    op: &K,
    profile: &StrategyProfile<T>,
    trials: usize,
    seed: u64,
) -> Result<ProbeReport<T>> {
    check_profile(p, op, profile)?;
    if trials == 0 {
        return Err(Error::Domain("at least one trial required".into()));
    }
    let dates = profile.dates();
    let half = T::lit(0.5);
    let one = T::one();
    let floor = one / T::from_usize_exact(dates);
    let agents: Vec<(Vec<T>, T, T)> = (0..p.n)
        .map(|i| {
            let row = profile.row(i);
            let cross = op.gamma_tilde(&profile.opponents(i));
            let base = half * op.theta_quadratic(row) + dot(row, &cross);
            let scale = T::lit(0.1) * norm_inf(row).max(floor);
            (cross, base, scale)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut margin = T::infinity();
    let mut identity_residual = T::zero();
    let mut z = vec![T::zero(); dates];
    let mut delta = vec![T::zero(); dates];
    let mut eta = vec![T::zero(); dates];
    for _ in 0..trials {
        for zk in z.iter_mut() {
            let s: f64 = StandardNormal.sample(&mut rng);
            *zk = T::lit(s);
        }
        let mean = compensated_sum(z.iter().copied()) / T::from_usize_exact(dates);
        for (i, (cross, base, scale)) in agents.iter().enumerate() {
            for ((d, e), (&zk, &xk)) in delta.iter_mut().zip(eta.iter_mut()).zip(z.iter().zip(profile.row(i))) {
                *d = *scale * (zk - mean);
                *e = xk + *d;
            }
            let cost = half * op.theta_quadratic(&eta) + dot(&eta, cross);
            let change = cost - *base;
            let quad = half * op.theta_quadratic(&delta);
            margin = margin.min(change);
            identity_residual = identity_residual.max((change - quad).abs() / one.max(base.abs()));
        }
    }
    Ok(ProbeReport {
        trials,
        seed,
        margin,
        identity_residual,
    })
}

/// Swaps the first and last trade of agent 0.
pub fn corrupt_profile<T: Scalar>(profile: &StrategyProfile<T>) -> StrategyProfile<T> {
    let mut out = profile.clone();
    if let Some(row) = out.xi.first_mut() {
        let last = row.len().saturating_sub(1);
        row.swap(0, last);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub trials: usize,
    pub seed: u64,
    /// Audit a deliberately corrupted profile instead of the equilibrium.
    pub corrupt: bool,
    /// Solve densely as well and report the closed-form gap.
    pub cross_check: bool,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            corrupt: false,
            cross_check: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport<T> {
    pub kkt_spread: T,
    pub kkt_spreads: Vec<T>,
    pub multipliers: Vec<T>,
    pub aggregation_residual: T,
    pub liquidation_error: T,
    pub residual_nu: T,
    pub residual_omega: T,
    pub perturbation_margin: T,
    pub identity_residual: T,
    /// `max |closed-form − dense|` over `ν` and `ω`; absent when the closed
    /// form does not apply or the cross-check was skipped.
    pub solver_gap: Option<T>,
    pub nu_branch: Option<NuBranch>,
    pub method: SolveMethod,
    pub trials: usize,
    pub seed: u64,
    pub corrupted: bool,
    pub pass: bool,
}

fn max_gap<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).fold(T::zero(), T::max)
}

/// Solves (closed form where it applies, dense otherwise), certifies the
/// profile and aggregates the verdict.
pub fn full_audit<T: Scalar>(p: &ModelParams<T>, grid: &GridSpec<T>, opts: &AuditOptions) -> Result<AuditReport<T>> {
    let closed = if grid.is_equidistant() {
        Some(solve_equilibrium(p, grid, SolveMethod::ClosedForm)?)
    } else {
        None
    };
    let dense = if opts.cross_check || closed.is_none() {
        Some(solve_equilibrium(p, grid, SolveMethod::Dense)?)
    } else {
        None
    };
    let solver_gap = match (&closed, &dense) {
        (Some(c), Some(d)) => Some(
            max_gap(&c.vectors.nu, &d.vectors.nu).max(max_gap(&c.vectors.omega, &d.vectors.omega)),
        ),
        _ => None,
    };
    let (residual_nu, residual_omega) = [&closed, &dense]
        .into_iter()
        .flatten()
        .fold((T::zero(), T::zero()), |(a, b), e| (a.max(e.residual_nu), b.max(e.residual_omega)));
    let eq = closed.or(dense).expect("at least one solve ran");

    let op = ExpKernelOperator::new(p, grid);
    let mut profile = assemble_profile(p, &eq.vectors);
    if opts.corrupt {
        profile = corrupt_profile(&profile);
    }
    let kkt = kkt_audit_profile(p, &op, &profile)?;
    let probe = best_response_probe(p, &op, &profile, opts.trials, opts.seed)?;

    let pass = kkt.max_spread <= T::lit(KKT_TOLERANCE)
        && residual_nu <= T::lit(RESIDUAL_TOLERANCE)
        && residual_omega <= T::lit(RESIDUAL_TOLERANCE)
        && probe.margin >= -T::lit(MARGIN_TOLERANCE)
        && solver_gap.is_none_or(|g| g <= T::lit(SOLVER_GAP_TOLERANCE));
    Ok(AuditReport {
        kkt_spread: kkt.max_spread,
        kkt_spreads: kkt.spreads,
        multipliers: kkt.multipliers,
        aggregation_residual: kkt.aggregation_residual,
        liquidation_error: kkt.liquidation_error,
        residual_nu,
        residual_omega,
        perturbation_margin: probe.margin,
        identity_residual: probe.identity_residual,
        solver_gap,
        nu_branch: eq.nu_branch,
        method: eq.method,
        trials: opts.trials,
        seed: opts.seed,
        corrupted: opts.corrupt,
        pass,
    })
}
