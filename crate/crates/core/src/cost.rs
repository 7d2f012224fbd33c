//! Expected execution costs of deterministic strategy profiles.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{EquilibriumVectors, StrategyProfile};
use crate::error::{Error, Result};
use crate::kernel::KernelAction;
use crate::linalg::dot;
use crate::model::ModelParams;
use crate::scalar::{compensated_sum, Scalar};

/// Cost of one agent split into transient-impact and instantaneous parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown<T> {
    pub total: T,
    /// `total − θ Σ_k ξ_k²`.
    pub impact: T,
    /// `θ Σ_{k < m_N} ξ_k²`.
    pub inst_front: T,
    /// `θ Σ_{k ≥ m_N} ξ_k²`.
    pub inst_back: T,
    pub split_c: T,
    /// `m_N = ⌈cN⌉` on the 0-based trade index.
    pub split_index: usize,
}

fn check_dim<T: Scalar, K: KernelAction<T>>(k: &K, len: usize) -> Result<()> {
    if k.dim() != len {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            found: len,
        });
    }
    Ok(())
}

/// `½ηᵀΓ^θη + ηᵀΓ̃s` for a trade vector `η` against aggregate opponent
/// trades `s`.
pub fn cost_against<T: Scalar, K: KernelAction<T>>(eta: &[T], opponents: &[T], k: &K) -> Result<T> {
    check_dim(k, eta.len())?;
    check_dim(k, opponents.len())?;
    let own = dot(eta, &k.gamma_theta(eta));
    let cross = dot(eta, &k.gamma_tilde(opponents));
    Ok(T::lit(0.5) * own + cross)
}

/// Expected cost of agent `i` (0-based) under `profile`.
pub fn cost_of_profile<T: Scalar, K: KernelAction<T>>(i: usize, profile: &StrategyProfile<T>, k: &K) -> Result<T> {
    if i >= profile.agents() {
        return Err(Error::OutOfRange(format!(
            "agent index {i} with {} agents",
            profile.agents()
        )));
    }
    cost_against(profile.row(i), &profile.opponents(i), k)
}

/// The three bilinear forms of the equilibrium cost representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadformTerms<T> {
    /// `νᵀΓ̃ν`.
    pub nu_nu: T,
    /// `ωᵀ(κ̂Γ̃ − Γ̃ᵀ)ν`.
    pub omega_nu: T,
    /// `ωᵀΓ̃ω`.
    pub omega_omega: T,
}

pub fn quadform_terms<T: Scalar, K: KernelAction<T>>(
    n: usize,
    vectors: &EquilibriumVectors<T>,
    k: &K,
) -> Result<QuadformTerms<T>> {
    check_dim(k, vectors.dates())?;
    let (nu, om) = (&vectors.nu, &vectors.omega);
    let tilde_nu = k.gamma_tilde(nu);
    let tilde_om = k.gamma_tilde(om);
    let kappa_hat = T::from_usize_exact(n - 1);
    Ok(QuadformTerms {
        nu_nu: dot(nu, &tilde_nu),
        omega_nu: kappa_hat * dot(om, &tilde_nu) - dot(nu, &tilde_om),
        omega_omega: dot(om, &tilde_om),
    })
}

/// Equilibrium cost of agent `i` from the sums of `ν`, `ω` and the three
/// bilinear forms. Valid for full-grid equilibrium vectors only.
pub fn cost_from_terms<T: Scalar>(
    i: usize,
    p: &ModelParams<T>,
    vectors: &EquilibriumVectors<T>,
    terms: &QuadformTerms<T>,
) -> Result<T> {
    let xi = *p
        .inventories
        .get(i)
        .ok_or_else(|| Error::OutOfRange(format!("agent index {i} with {} agents", p.n)))?;
    let xbar = p.mean_inventory();
    let dev = xi - xbar;
    let (sn, so) = (vectors.sum_nu, vectors.sum_omega);
    let kappa_hat = T::from_usize_exact(p.n - 1);
    let a = xbar / sn;
    let b = dev / so;
    let parts = [
        xbar * xbar / sn,
        xbar * dev * (sn + so) / (sn * so),
        dev * dev / so,
        kappa_hat * a * a * terms.nu_nu,
        a * b * terms.omega_nu,
        -b * b * terms.omega_omega,
    ];
    Ok(T::lit(0.5) * compensated_sum(parts))
}

/// Equilibrium cost of agent `i` in the quadratic-form representation.
pub fn cost_equilibrium_quadform<T: Scalar, K: KernelAction<T>>(
    i: usize,
    p: &ModelParams<T>,
    vectors: &EquilibriumVectors<T>,
    k: &K,
) -> Result<T> {
    let terms = quadform_terms(p.n, vectors, k)?;
    cost_from_terms(i, p, vectors, &terms)
}

/// `⌈cN⌉`, snapping values within a relative `1e-12` of an integer.
pub fn split_position<T: Scalar>(c: T, steps: usize) -> Result<usize> {
    if !(c > T::zero() && c < T::one()) {
        return Err(Error::Domain(format!("split c must lie in (0, 1) (got {c})")));
    }
    let x = c * T::from_usize_exact(steps);
    let r = x.round();
    let m = if (x - r).abs() <= T::lit(1e-12) * r.max(T::one()) {
        r
    } else {
        x.ceil()
    };
    Ok(m.to_usize().unwrap_or(steps).min(steps))
}

/// Total cost of agent `i` with the instantaneous part split at `⌈cN⌉`.
pub fn cost_split<T: Scalar, K: KernelAction<T>>(
    i: usize,
    p: &ModelParams<T>,
    profile: &StrategyProfile<T>,
    k: &K,
    c: T,
) -> Result<CostBreakdown<T>> {
    let steps = profile.dates().saturating_sub(1);
    let m = split_position(c, steps)?;
    let total = cost_of_profile(i, profile, k)?;
    let row = profile.row(i);
    let sq = |s: &[T]| p.theta * compensated_sum(s.iter().map(|&x| x * x));
    let inst_front = sq(&row[..m]);
    let inst_back = sq(&row[m..]);
    Ok(CostBreakdown {
        total,
        impact: total - inst_front - inst_back,
        inst_front,
        inst_back,
        split_c: c,
        split_index: m,
    })
}
