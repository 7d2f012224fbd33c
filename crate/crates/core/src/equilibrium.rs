//! Equilibrium vectors `ν`, `ω`, their normalizations, and strategy profiles.

use serde::{Deserialize, Serialize};

use crate::closed_form::{nu_branch, nu_closed_form, omega_closed_form, NuBranch};
use crate::error::{Error, Result};
use crate::kernel::{
    assemble_system, halfgrid_inst_weights, ExpKernelOperator, HalfGridMode, KernelAction, SystemKind,
};
use crate::linalg::{norm_inf, solve_linear, DenseMatrix, DenseSolution};
use crate::model::{GridSpec, ModelParams};
use crate::scalar::{compensated_sum, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumVectors<T> {
    pub nu: Vec<T>,
    pub omega: Vec<T>,
    pub v: Vec<T>,
    pub w: Vec<T>,
    pub sum_nu: T,
    pub sum_omega: T,
}

impl<T: Scalar> EquilibriumVectors<T> {
    pub fn from_parts(nu: Vec<T>, omega: Vec<T>) -> Result<Self> {
        if nu.len() != omega.len() {
            return Err(Error::DimensionMismatch {
                expected: nu.len(),
                found: omega.len(),
            });
        }
        let sum_nu = compensated_sum(nu.iter().copied());
        let sum_omega = compensated_sum(omega.iter().copied());
        for (name, s) in [("𝟏ᵀν", sum_nu), ("𝟏ᵀω", sum_omega)] {
            if !(s.abs() > T::zero()) || !s.is_finite() {
                return Err(Error::IllConditioned(format!("{name} = {s} cannot be normalized")));
            }
        }
        let v = nu.iter().map(|&x| x / sum_nu).collect();
        let w = omega.iter().map(|&x| x / sum_omega).collect();
        Ok(Self {
            nu,
            omega,
            v,
            w,
            sum_nu,
            sum_omega,
        })
    }

    pub fn dates(&self) -> usize {
        self.nu.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Dense,
    ClosedForm,
}

impl std::str::FromStr for SolveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Self::Dense),
            "closed" | "closed-form" => Ok(Self::ClosedForm),
            other => Err(Error::Domain(format!(
                "unknown method '{other}' (expected dense or closed)"
            ))),
        }
    }
}

impl std::fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Dense => "dense",
            Self::ClosedForm => "closed-form",
        })
    }
}

/// Solved vectors with the relative residuals of both linear systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium<T> {
    pub vectors: EquilibriumVectors<T>,
    pub method: SolveMethod,
    /// Set when the closed form produced `ν`.
    pub nu_branch: Option<NuBranch>,
    pub residual_nu: T,
    pub residual_omega: T,
}

/// LU solve of `A x = rhs` with the relative residual.
pub fn solve_dense<T: Scalar>(a: &DenseMatrix<T>, rhs: &[T]) -> Result<DenseSolution<T>> {
    solve_linear(a, rhs)
}

fn inst_full<T: Scalar>(p: &ModelParams<T>, grid: &GridSpec<T>) -> Vec<T> {
    vec![T::lit(2.0) * p.theta; grid.dates()]
}

fn tilde_weight<T: Scalar>(n: usize, kind: SystemKind) -> T {
    match kind {
        SystemKind::Symmetric => T::from_usize_exact(n - 1),
        SystemKind::Antisymmetric => -T::one(),
    }
}

/// Dense solve of one full-grid system against `𝟏`.
pub fn solve_system<T: Scalar>(p: &ModelParams<T>, grid: &GridSpec<T>, kind: SystemKind) -> Result<DenseSolution<T>> {
    let a = assemble_system(p.rho, grid, &inst_full(p, grid), tilde_weight(p.n, kind))?;
    solve_dense(&a, &vec![T::one(); grid.dates()])
}

fn solve_with_inst<T: Scalar>(p: &ModelParams<T>, grid: &GridSpec<T>, inst: &[T]) -> Result<Equilibrium<T>> {
    let ones = vec![T::one(); grid.dates()];
    let sym = assemble_system(p.rho, grid, inst, tilde_weight(p.n, SystemKind::Symmetric))?;
    let nu = solve_dense(&sym, &ones)?;
    drop(sym);
    let anti = assemble_system(p.rho, grid, inst, tilde_weight(p.n, SystemKind::Antisymmetric))?;
    let omega = solve_dense(&anti, &ones)?;
    Ok(Equilibrium {
        vectors: EquilibriumVectors::from_parts(nu.x, omega.x)?,
        method: SolveMethod::Dense,
        nu_branch: None,
        residual_nu: nu.relative_residual,
        residual_omega: omega.relative_residual,
    })
}

/// Relative residual `‖Ax − 𝟏‖∞ / (‖A‖∞‖x‖∞ + 1)` of `(Γ^θ + wΓ̃)x = 𝟏`,
/// evaluated matrix-free. Every entry of these matrices is nonnegative, so
/// `‖A‖∞` is the largest entry of `A𝟏`.
pub fn structured_residual<T: Scalar, K: KernelAction<T>>(op: &K, tilde_w: T, x: &[T]) -> T {
    let apply = |y: &[T]| -> Vec<T> {
        let a = op.gamma_theta(y);
        let b = op.gamma_tilde(y);
        a.into_iter().zip(b).map(|(u, v)| u + tilde_w * v).collect()
    };
    let ax = apply(x);
    let r = ax.iter().map(|&y| (y - T::one()).abs()).fold(T::zero(), T::max);
    let norm_a = norm_inf(&apply(&vec![T::one(); x.len()]));
    r / (norm_a * norm_inf(x) + T::one())
}

/// `ν`, `ω` on the full grid by the requested method.
pub fn solve_equilibrium<T: Scalar>(
    p: &ModelParams<T>,
    grid: &GridSpec<T>,
    method: SolveMethod,
) -> Result<Equilibrium<T>> {
    match method {
        SolveMethod::Dense => solve_with_inst(p, grid, &inst_full(p, grid)),
        SolveMethod::ClosedForm => {
            let nu = nu_closed_form(p, grid)?;
            let omega = omega_closed_form(p, grid)?;
            let op = ExpKernelOperator::new(p, grid);
            let residual_nu = structured_residual(&op, tilde_weight(p.n, SystemKind::Symmetric), &nu);
            let residual_omega = structured_residual(&op, tilde_weight(p.n, SystemKind::Antisymmetric), &omega);
            Ok(Equilibrium {
                vectors: EquilibriumVectors::from_parts(nu, omega)?,
                method,
                nu_branch: Some(nu_branch(p)),
                residual_nu,
                residual_omega,
            })
        }
    }
}

/// Equilibrium when instantaneous costs are charged on one half of the grid
/// only. Dense path.
pub fn solve_halfgrid<T: Scalar>(p: &ModelParams<T>, grid: &GridSpec<T>, mode: HalfGridMode) -> Result<Equilibrium<T>> {
    if grid.steps() < 2 {
        return Err(Error::Domain("half-grid costs need N ≥ 2".into()));
    }
    solve_with_inst(p, grid, &halfgrid_inst_weights(p.theta, grid.steps(), mode))
}

/// Trades of every agent: row `i` is `ξ*_i`, entry `k` the trade at `t_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile<T> {
    pub xi: Vec<Vec<T>>,
}

impl<T: Scalar> StrategyProfile<T> {
    pub fn new(xi: Vec<Vec<T>>) -> Result<Self> {
        let d = xi.first().map_or(0, Vec::len);
        if let Some(bad) = xi.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Ok(Self { xi })
    }

    pub fn agents(&self) -> usize {
        self.xi.len()
    }

    pub fn dates(&self) -> usize {
        self.xi.first().map_or(0, Vec::len)
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.xi[i]
    }

    /// `Σ_j ξ_j`.
    pub fn aggregate(&self) -> Vec<T> {
        let mut total = vec![T::zero(); self.dates()];
        for row in &self.xi {
            for (t, &x) in total.iter_mut().zip(row) {
                *t = *t + x;
            }
        }
        total
    }

    /// `Σ_{j≠i} ξ_j`, summed directly rather than by subtraction.
    pub fn opponents(&self, i: usize) -> Vec<T> {
        let mut total = vec![T::zero(); self.dates()];
        for (j, row) in self.xi.iter().enumerate() {
            if j != i {
                for (t, &x) in total.iter_mut().zip(row) {
                    *t = *t + x;
                }
            }
        }
        total
    }
}

/// `ξ*_i = x̄ v + (x_i − x̄) w`.
pub fn assemble_profile<T: Scalar>(p: &ModelParams<T>, vectors: &EquilibriumVectors<T>) -> StrategyProfile<T> {
    let xbar = p.mean_inventory();
    let xi = p
        .inventories
        .iter()
        .map(|&x| {
            let dev = x - xbar;
            vectors
                .v
                .iter()
                .zip(&vectors.w)
                .map(|(&v, &w)| xbar * v + dev * w)
                .collect()
        })
        .collect();
    StrategyProfile { xi }
}
