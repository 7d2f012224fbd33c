//! High-frequency behavior of the discrete equilibrium: inventory paths,
//! convergence rates for `θ > 0`, cluster points and cost limits for
//! `θ = 0`, bilinear-form limits, and half-grid experiments.
//!
//! Sweeps over `N` run in parallel with rayon; results always come back in
//! the order of the requested `N` list.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuous::{ContinuousCost, ContinuousLimit, Side};
use crate::cost::{cost_split, quadform_terms, CostBreakdown, QuadformTerms};
use crate::equilibrium::{
    assemble_profile, solve_equilibrium, solve_halfgrid, EquilibriumVectors, SolveMethod,
};
use crate::error::{Error, Result};
use crate::kernel::{ExpKernelOperator, HalfGridMode};
use crate::model::{grid_index, GridSpec, ModelParams};
use crate::scalar::Scalar;

pub use crate::continuous::terminal_w_limit;

/// Remaining inventories at one calendar time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample<T> {
    pub t: T,
    /// `n_t = ⌈Nt/T⌉`.
    pub index: usize,
    pub eta: T,
    /// `V_t`: symmetric unit-inventory path.
    pub v: T,
    /// `W_t`: zero-net-supply unit path.
    pub w: T,
    /// `X_t^{(N),i} = x̄V_t + (x_i − x̄)W_t` per agent.
    pub x: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryPath<T> {
    pub steps: usize,
    pub theta: T,
    pub samples: Vec<PathSample<T>>,
}

/// Tail sums `S_k = Σ_{j ≥ k} a_j`, so `1 − Σ_{j<k} a_j = S_k` for normalized `a`.
fn tail_sums<T: Scalar>(a: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len() + 1];
    for k in (0..a.len()).rev() {
        out[k] = out[k + 1] + a[k];
    }
    out
}

/// Remaining fraction after the first `index` trades; exactly 1 before any
/// trade.
fn remaining<T: Scalar>(tails: &[T], index: usize) -> T {
    if index == 0 {
        T::one()
    } else {
        tails[index]
    }
}

/// `V_t`, `W_t` and per-agent inventories at every time of `t_list`.
pub fn inventory_path<T: Scalar>(
    p: &ModelParams<T>,
    grid: &GridSpec<T>,
    vectors: &EquilibriumVectors<T>,
    t_list: &[T],
) -> Result<InventoryPath<T>> {
    if vectors.dates() != grid.dates() {
        return Err(Error::DimensionMismatch {
            expected: grid.dates(),
            found: vectors.dates(),
        });
    }
    let tv = tail_sums(&vectors.v);
    let tw = tail_sums(&vectors.w);
    let xbar = p.mean_inventory();
    let samples = t_list
        .iter()
        .map(|&t| {
            let gi = grid_index(t, grid)?;
            let v = remaining(&tv, gi.index);
            let w = remaining(&tw, gi.index);
            let x = p.inventories.iter().map(|&xi| xbar * v + (xi - xbar) * w).collect();
            Ok(PathSample {
                t,
                index: gi.index,
                eta: gi.eta,
                v,
                w,
                x,
            })
        })
        .collect::<Result<_>>()?;
    Ok(InventoryPath {
        steps: grid.steps(),
        theta: p.theta,
        samples,
    })
}

/// Which discrete path is compared with which continuous profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateTarget {
    /// `V^{(N)}` against `g`.
    VAgainstG,
    /// `W^{(N)}` against `f`.
    WAgainstF,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateVerdict {
    Bounded,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateDiagnostic<T> {
    pub t: T,
    pub target: RateTarget,
    /// `(N, |path − limit|)`.
    pub errors: Vec<(usize, T)>,
    /// `(N, N·|path − limit|)`.
    pub scaled: Vec<(usize, T)>,
    pub sup_scaled: T,
    /// Largest scaled error over the first `⌈len/2⌉` entries.
    pub first_half_max: T,
    pub verdict: RateVerdict,
}

/// Ratio allowed between the last scaled error and the first-half maximum.
pub const RATE_GROWTH_TOLERANCE: f64 = 1.1;

/// Scales `errors` by `N` and applies the boundedness rule: the last scaled
/// error may not exceed the first-half maximum by more than
/// [`RATE_GROWTH_TOLERANCE`], nor `cap` when given.
pub fn classify_rate<T: Scalar>(t: T, target: RateTarget, errors: Vec<(usize, T)>, cap: Option<T>) -> RateDiagnostic<T> {
    let scaled: Vec<(usize, T)> = errors
        .iter()
        .map(|&(n, e)| (n, T::from_usize_exact(n) * e))
        .collect();
    let half = scaled.len().div_ceil(2);
    let first_half_max = scaled[..half].iter().map(|s| s.1).fold(T::zero(), T::max);
    let sup_scaled = scaled.iter().map(|s| s.1).fold(T::zero(), T::max);
    let last = scaled.last().map_or(T::zero(), |s| s.1);
    let stable = last <= T::lit(RATE_GROWTH_TOLERANCE) * first_half_max;
    let capped = cap.is_none_or(|c| sup_scaled <= c);
    RateDiagnostic {
        t,
        target,
        errors,
        scaled,
        sup_scaled,
        first_half_max,
        verdict: if stable && capped {
            RateVerdict::Bounded
        } else {
            RateVerdict::Unbounded
        },
    }
}

/// One `(N, t)` row of a path sweep against the continuous limits. The
/// discrete paths hold the inventory before the trade at `t`, so `g` and `f`
/// are left limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow<T> {
    pub steps: usize,
    pub t: T,
    pub v: T,
    pub w: T,
    pub g: T,
    pub f: T,
    pub scaled_v_error: T,
    pub scaled_w_error: T,
}

fn require_positive_theta<T: Scalar>(p: &ModelParams<T>) -> Result<()> {
    if p.theta > T::zero() {
        Ok(())
    } else {
        Err(Error::Domain(
            "convergence rates need θ > 0; use the oscillation scan for θ = 0".into(),
        ))
    }
}

fn check_steps(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() {
        return Err(Error::Domain("empty N list".into()));
    }
    if n_list.contains(&0) {
        return Err(Error::Domain("N ≥ 1 required".into()));
    }
    Ok(())
}

/// Solves on every grid of `n_list` and samples `V`, `W` at `t_list`.
/// Rows are ordered by `N` (as given) and then by `t`.
pub fn limit_sweep<T: Scalar>(
    p: &ModelParams<T>,
    t_list: &[T],
    n_list: &[usize],
    method: SolveMethod,
) -> Result<Vec<LimitRow<T>>> {
    check_steps(n_list)?;
    let cl = ContinuousLimit::new(p)?;
    let per_n: Vec<Vec<LimitRow<T>>> = n_list
        .par_iter()
        .map(|&steps| {
            let grid = GridSpec::equidistant(p.horizon, steps)?;
            let eq = solve_equilibrium(p, &grid, method)?;
            let path = inventory_path(p, &grid, &eq.vectors, t_list)?;
            let nf = T::from_usize_exact(steps);
            path.samples
                .into_iter()
                .map(|s| {
                    let g = cl.g(s.t, Side::Left)?;
                    let f = cl.f(s.t, Side::Left)?;
                    Ok(LimitRow {
                        steps,
                        t: s.t,
                        v: s.v,
                        w: s.w,
                        g,
                        f,
                        scaled_v_error: nf * (s.v - g).abs(),
                        scaled_w_error: nf * (s.w - f).abs(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_n.into_iter().flatten().collect())
}

/// `N·|path − limit|` over `n_list` at time `t`, closed-form solver.
pub fn rate_diagnostic<T: Scalar>(
    p: &ModelParams<T>,
    t: T,
    n_list: &[usize],
    target: RateTarget,
    cap: Option<T>,
) -> Result<RateDiagnostic<T>> {
    Ok(rate_diagnostics(p, &[t], n_list, cap)?
        .into_iter()
        .find(|d| d.target == target)
        .expect("both targets are produced"))
}

/// Rate diagnostics for both targets at every time of `t_list`, sharing the
/// solves. Ordered by `t`, `V` before `W`.
pub fn rate_diagnostics<T: Scalar>(
    p: &ModelParams<T>,
    t_list: &[T],
    n_list: &[usize],
    cap: Option<T>,
) -> Result<Vec<RateDiagnostic<T>>> {
    require_positive_theta(p)?;
    let rows = limit_sweep(p, t_list, n_list, SolveMethod::ClosedForm)?;
    Ok(diagnostics_from_rows(&rows, t_list, cap))
}

/// Rate diagnostics from the rows of [`limit_sweep`] run with the same
/// `t_list`.
pub fn diagnostics_from_rows<T: Scalar>(rows: &[LimitRow<T>], t_list: &[T], cap: Option<T>) -> Vec<RateDiagnostic<T>> {
    let mut out = Vec::with_capacity(2 * t_list.len());
    for (k, &t) in t_list.iter().enumerate() {
        let at_t: Vec<&LimitRow<T>> = rows.iter().skip(k).step_by(t_list.len()).collect();
        let ev = at_t.iter().map(|r| (r.steps, (r.v - r.g).abs())).collect();
        let ew = at_t.iter().map(|r| (r.steps, (r.w - r.f).abs())).collect();
        out.push(classify_rate(t, RateTarget::VAgainstG, ev, cap));
        out.push(classify_rate(t, RateTarget::WAgainstF, ew, cap));
    }
    out
}

/// Table of oscillation constants at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationConstants<T> {
    pub d1: T,
    pub d2: T,
    pub a_plus: T,
    pub a_minus: T,
    pub b: T,
    pub c: T,
}

/// The eight limiting values of the `θ = 0` paths at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterPointSet<T> {
    pub t: T,
    pub beta_plus: T,
    pub beta_minus: T,
    pub gamma_plus: T,
    pub gamma_minus: T,
    pub phi_plus: T,
    pub phi_minus: T,
    pub psi_plus: T,
    pub psi_minus: T,
    pub constants: OscillationConstants<T>,
}

/// Scaled constants: every entry divided by `E(2T)`, `E(s) = e^{qρs}`,
/// `q = (n+1)/(n−1)`, so that only nonpositive exponents are evaluated.
struct ScaledConstants<T> {
    d1: T,
    d2: T,
    a_plus: T,
    b: T,
    c: T,
    scale_log: T,
}

fn scaled_constants<T: Scalar>(p: &ModelParams<T>, t: T) -> ScaledConstants<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let n = T::from_usize_exact(p.n);
    let big_t = p.horizon;
    let q = (n + one) / (n - one);
    let e = |s: T| (q * p.rho * s).exp();
    let rt = p.rho_t();
    let u = e(-big_t);
    let lead = n * ((n + one) * rt + n + three);
    let tail = (n + one) * rt + three * n + one;
    let d1 = lead + (n - one) * (n - one) * u + tail * u * u;
    let d2 = lead + (one - n * n) * u - tail * u * u;
    let a_plus = (n + one) * e(-big_t - t) + n * (n + one) * e(-t);
    let b = n * (n + one) * p.rho * (big_t - t) + two * n - two * n * e(t - big_t);
    let c = ((n + one) * p.rho * (big_t - t) + n + one) * u * u + n * (n - one) * u + two * n * e(t - two * big_t);
    ScaledConstants {
        d1,
        d2,
        a_plus,
        b,
        c,
        scale_log: two * q * p.rho * big_t,
    }
}

/// Cluster points `β±, γ±` (for `V`) and `φ±, ψ±` (for `W`) at `t`.
pub fn cluster_points<T: Scalar>(p: &ModelParams<T>, t: T) -> Result<ClusterPointSet<T>> {
    if !(t >= T::zero() && t <= p.horizon) {
        return Err(Error::OutOfRange(format!("t = {t} outside [0, {}]", p.horizon)));
    }
    let s = scaled_constants(p, t);
    let one = T::one();
    let rest = p.rho * (p.horizon - t);
    let decay_t = (-rest).exp();
    let decay_all = (-p.rho_t()).exp();
    let den_phi = one + p.rho_t() + decay_all;
    let den_psi = one + p.rho_t() - decay_all;
    let scale = s.scale_log.exp();
    Ok(ClusterPointSet {
        t,
        beta_plus: (s.a_plus + s.b + s.c) / s.d1,
        beta_minus: (-s.a_plus + s.b + s.c) / s.d1,
        gamma_plus: (s.a_plus + s.b - s.c) / s.d2,
        gamma_minus: (-s.a_plus + s.b - s.c) / s.d2,
        phi_plus: (one + rest + decay_t) / den_phi,
        phi_minus: (one + rest - decay_t) / den_phi,
        psi_plus: (one + rest + decay_t) / den_psi,
        psi_minus: (one + rest - decay_t) / den_psi,
        constants: OscillationConstants {
            d1: s.d1 * scale,
            d2: s.d2 * scale,
            a_plus: s.a_plus * scale,
            a_minus: -s.a_plus * scale,
            b: s.b * scale,
            c: s.c * scale,
        },
    })
}

/// `(N parity, n_t parity)` class of a `θ = 0` sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParityClass {
    pub steps_even: bool,
    pub index_even: bool,
}

impl ParityClass {
    pub fn label(&self) -> &'static str {
        match (self.steps_even, self.index_even) {
            (true, true) => "N-even/nt-even",
            (true, false) => "N-even/nt-odd",
            (false, true) => "N-odd/nt-even",
            (false, false) => "N-odd/nt-odd",
        }
    }
}

impl<T: Scalar> ClusterPointSet<T> {
    /// Cluster point assigned to `V`: `β` on even grids, `γ` on odd ones,
    /// with the sign given by the parity of `n_t`.
    pub fn v_target(&self, class: ParityClass) -> T {
        match (class.steps_even, class.index_even) {
            (true, true) => self.beta_plus,
            (true, false) => self.beta_minus,
            (false, true) => self.gamma_plus,
            (false, false) => self.gamma_minus,
        }
    }

    /// Cluster point assigned to `W`: `φ` on even grids, `ψ` on odd ones,
    /// with the sign given by the parity of `N − n_t`.
    pub fn w_target(&self, class: ParityClass) -> T {
        let plus = class.steps_even == class.index_even;
        match (class.steps_even, plus) {
            (true, true) => self.phi_plus,
            (true, false) => self.phi_minus,
            (false, true) => self.psi_plus,
            (false, false) => self.psi_minus,
        }
    }

    /// Distance from `v` to the nearer of the two `V` cluster points of its
    /// grid parity.
    pub fn v_nearest(&self, steps_even: bool, v: T) -> T {
        let (a, b) = if steps_even {
            (self.beta_plus, self.beta_minus)
        } else {
            (self.gamma_plus, self.gamma_minus)
        };
        (v - a).abs().min((v - b).abs())
    }

    pub fn w_nearest(&self, steps_even: bool, w: T) -> T {
        let (a, b) = if steps_even {
            (self.phi_plus, self.phi_minus)
        } else {
            (self.psi_plus, self.psi_minus)
        };
        (w - a).abs().min((w - b).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationSample<T> {
    pub steps: usize,
    pub index: usize,
    pub class: ParityClass,
    pub v: T,
    pub w: T,
    pub v_target: T,
    pub w_target: T,
    /// Distance to the nearer cluster point of the grid parity.
    pub v_nearest: T,
    pub w_nearest: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary<T> {
    pub class: ParityClass,
    pub count: usize,
    /// Largest `N` in the class and its values.
    pub last_steps: usize,
    pub last_v: T,
    pub last_w: T,
    /// Distance of the last values to the class's assigned cluster points.
    pub v_residual: T,
    pub w_residual: T,
    /// Distance of the last values to the nearer cluster point.
    pub v_nearest: T,
    pub w_nearest: T,
    /// Difference between the last two `V` values of the class.
    pub v_tail_step: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationScan<T> {
    pub t: T,
    pub clusters: ClusterPointSet<T>,
    pub samples: Vec<OscillationSample<T>>,
    /// One entry per non-empty class, in class order.
    pub classes: Vec<ClassSummary<T>>,
}

/// `V_t`, `W_t` for every `N` in `n_range` at `θ = 0`, classified by parity.
pub fn oscillation_scan<T: Scalar>(p: &ModelParams<T>, t: T, n_range: &[usize]) -> Result<OscillationScan<T>> {
    Ok(oscillation_grid(p, &[t], n_range)?.remove(0))
}

/// One oscillation scan per time of `t_list`, sharing a single solve per `N`.
pub fn oscillation_grid<T: Scalar>(p: &ModelParams<T>, t_list: &[T], n_range: &[usize]) -> Result<Vec<OscillationScan<T>>> {
    check_steps(n_range)?;
    if t_list.is_empty() {
        return Err(Error::Domain("empty t list".into()));
    }
    if p.theta != T::zero() {
        return Err(Error::Domain("the oscillation scan needs θ = 0".into()));
    }
    let clusters: Vec<ClusterPointSet<T>> = t_list.iter().map(|&t| cluster_points(p, t)).collect::<Result<_>>()?;
    let paths: Vec<InventoryPath<T>> = n_range
        .par_iter()
        .map(|&steps| {
            let grid = GridSpec::equidistant(p.horizon, steps)?;
            let eq = solve_equilibrium(p, &grid, SolveMethod::ClosedForm)?;
            inventory_path(p, &grid, &eq.vectors, t_list)
        })
        .collect::<Result<_>>()?;

    Ok(t_list
        .iter()
        .zip(clusters)
        .enumerate()
        .map(|(k, (&t, clusters))| {
            let samples: Vec<OscillationSample<T>> = paths
                .iter()
                .map(|path| {
                    let s = &path.samples[k];
                    let class = ParityClass {
                        steps_even: path.steps % 2 == 0,
                        index_even: s.index % 2 == 0,
                    };
                    OscillationSample {
                        steps: path.steps,
                        index: s.index,
                        class,
                        v: s.v,
                        w: s.w,
                        v_target: clusters.v_target(class),
                        w_target: clusters.w_target(class),
                        v_nearest: clusters.v_nearest(class.steps_even, s.v),
                        w_nearest: clusters.w_nearest(class.steps_even, s.w),
                    }
                })
                .collect();
            let classes = summarize_classes(&samples);
            OscillationScan {
                t,
                clusters,
                samples,
                classes,
            }
        })
        .collect())
}

fn summarize_classes<T: Scalar>(samples: &[OscillationSample<T>]) -> Vec<ClassSummary<T>> {
    let mut keys: Vec<ParityClass> = samples.iter().map(|s| s.class).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|class| {
            let mut members: Vec<&OscillationSample<T>> = samples.iter().filter(|s| s.class == class).collect();
            members.sort_by_key(|s| s.steps);
            let last = members[members.len() - 1];
            let v_tail_step = (members.len() >= 2).then(|| (last.v - members[members.len() - 2].v).abs());
            ClassSummary {
                class,
                count: members.len(),
                last_steps: last.steps,
                last_v: last.v,
                last_w: last.w,
                v_residual: (last.v - last.v_target).abs(),
                w_residual: (last.w - last.w_target).abs(),
                v_nearest: last.v_nearest,
                w_nearest: last.w_nearest,
                v_tail_step,
            }
        })
        .collect()
}

/// Limits of agent `i`'s `θ = 0` equilibrium cost along even and odd `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaZeroCostLimits<T> {
    pub even_limit: T,
    pub odd_limit: T,
}

pub fn theta_zero_cost_limits<T: Scalar>(p: &ModelParams<T>, i: usize) -> Result<ThetaZeroCostLimits<T>> {
    let xi = *p
        .inventories
        .get(i)
        .ok_or_else(|| Error::OutOfRange(format!("agent index {i} with {} agents", p.n)))?;
    let s = scaled_constants(p, p.horizon);
    let one = T::one();
    let n = T::from_usize_exact(p.n);
    let xbar = p.mean_inventory();
    let rt = p.rho_t();
    let u2 = (-s.scale_log).exp();
    let decay = (-rt).exp();
    let sym = n * xbar * xbar;
    let cross = n * xbar * (xi - xbar);
    Ok(ThetaZeroCostLimits {
        even_limit: sym * ((n + one) * n + (n + one) * u2) / s.d1 + cross / (decay + rt + one),
        odd_limit: sym * ((n + one) * n - (n + one) * u2) / s.d2 + cross / (rt + one - decay),
    })
}

/// Limits of the three bilinear forms.
pub fn quadform_limits<T: Scalar>(p: &ModelParams<T>, steps_even: bool) -> QuadformTerms<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let n = T::from_usize_exact(p.n);
    let rt = p.rho_t();
    let q = (n + one) / (n - one);
    if p.theta > T::zero() {
        let e = (-rt * q).exp();
        let nn = n * n;
        let np1 = n + one;
        return QuadformTerms {
            nu_nu: (n - one) / (two * nn * np1 * np1 * np1)
                * (-e * e - T::lit(4.0) * n * e + two * nn * np1 / (n - one) * rt + nn * (n + T::lit(7.0)) / (n - one)),
            omega_nu: (-(n - one) * (two * n - one) * e + n * (n + T::lit(4.0)) * (n - one) + n * np1 * (n - two) * rt)
                / (n * np1 * np1),
            omega_omega: (two * rt + one) / two,
        };
    }
    // θ = 0: numerators and denominators divided by X², X = e^{qρT}.
    let u = (-q * rt).exp();
    let u2 = u * u;
    let decay = (-rt).exp();
    let np1 = n + one;
    let three = T::lit(3.0);
    let sgn = if steps_even { one } else { -one };
    let d_big = (n + sgn * u2) * np1 * np1;
    let d_small = d_big / np1;
    let lead = n * (np1 * rt + n + three);
    let tail = np1 * rt + three * n + one;
    if steps_even {
        QuadformTerms {
            nu_nu: (lead + (n - one) * (n - one) * u + tail * u2) / (np1 * d_big),
            omega_nu: (n * n - n * np1 * decay + (two * n * n - three * n - one) * u - np1 * decay * u2
                + (three * n - two) * u2)
                / d_small
                + rt * (n - two) * (n + u2) / d_small
                + two * n * (n - two) * (one - u) * (one - u) / d_big,
            omega_omega: decay + rt + one,
        }
    } else {
        QuadformTerms {
            nu_nu: (lead - (n * n - one) * u - tail * u2) / (np1 * d_big),
            omega_nu: (n * n + n * np1 * decay - (two * n * n - three * n + one) * u - np1 * decay * u2
                - (three * n - two) * u2)
                / d_small
                + rt * (n - two) * (n - u2) / d_small
                + two * n * (n - two) * (one - u2) / d_big,
            omega_omega: -decay + rt + one,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadformRow<T> {
    pub steps: usize,
    pub values: QuadformTerms<T>,
    pub limits: QuadformTerms<T>,
    /// Relative errors in the order `νᵀΓ̃ν`, `ωᵀ(κ̂Γ̃−Γ̃ᵀ)ν`, `ωᵀΓ̃ω`.
    pub relative_errors: [T; 3],
}

/// Bilinear forms along `n_list` against their limits (closed-form solver).
pub fn quadform_limit_check<T: Scalar>(p: &ModelParams<T>, n_list: &[usize]) -> Result<Vec<QuadformRow<T>>> {
    check_steps(n_list)?;
    n_list
        .par_iter()
        .map(|&steps| {
            let grid = GridSpec::equidistant(p.horizon, steps)?;
            let eq = solve_equilibrium(p, &grid, SolveMethod::ClosedForm)?;
            let op = ExpKernelOperator::new(p, &grid);
            let values = quadform_terms(p.n, &eq.vectors, &op)?;
            let limits = quadform_limits(p, steps % 2 == 0);
            let rel = |a: T, b: T| (a - b).abs() / b.abs();
            Ok(QuadformRow {
                steps,
                values,
                limits,
                relative_errors: [
                    rel(values.nu_nu, limits.nu_nu),
                    rel(values.omega_nu, limits.omega_nu),
                    rel(values.omega_omega, limits.omega_omega),
                ],
            })
        })
        .collect()
}

/// Per-agent discrete costs on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow<T> {
    pub steps: usize,
    pub agents: Vec<CostBreakdown<T>>,
}

/// Continuous-time or oscillation targets for the discrete costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CostTargets<T> {
    Continuous { agents: Vec<ContinuousCost<T>> },
    ThetaZero { agents: Vec<ThetaZeroCostLimits<T>> },
}

pub fn cost_targets<T: Scalar>(p: &ModelParams<T>) -> Result<CostTargets<T>> {
    if p.theta > T::zero() {
        let cl = ContinuousLimit::new(p)?;
        Ok(CostTargets::Continuous {
            agents: (0..p.n).map(|i| cl.cost(i)).collect::<Result<_>>()?,
        })
    } else {
        Ok(CostTargets::ThetaZero {
            agents: (0..p.n).map(|i| theta_zero_cost_limits(p, i)).collect::<Result<_>>()?,
        })
    }
}

/// Equilibrium costs of every agent along `n_list`, split at `⌈cN⌉`.
pub fn cost_sweep<T: Scalar>(
    p: &ModelParams<T>,
    n_list: &[usize],
    c: T,
    method: SolveMethod,
) -> Result<Vec<CostRow<T>>> {
    check_steps(n_list)?;
    n_list
        .par_iter()
        .map(|&steps| {
            let grid = GridSpec::equidistant(p.horizon, steps)?;
            let eq = solve_equilibrium(p, &grid, method)?;
            let profile = assemble_profile(p, &eq.vectors);
            let op = ExpKernelOperator::new(p, &grid);
            let agents = (0..p.n)
                .map(|i| cost_split(i, p, &profile, &op, c))
                .collect::<Result<_>>()?;
            Ok(CostRow { steps, agents })
        })
        .collect()
}

/// Sup-norm deviations of half-grid paths from the continuous profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfGridRow<T> {
    pub steps: usize,
    /// `max_i sup_t |X^{(N),i}_t − X*^{,i}_t|`, skipping the jump dates of
    /// the continuous inventories.
    pub sup_inventory: T,
    /// `sup |V − g|` over mesh points in `(0, T/2]`.
    pub sup_v_first: T,
    /// `sup |V − g|` over `[T/2, T]`.
    pub sup_v_second: T,
    /// `sup |W − f|` over `[0, T/2]`.
    pub sup_w_first: T,
    /// `sup |W − f|` over `[T/2, T)`.
    pub sup_w_second: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfGridReport<T> {
    pub mode: HalfGridMode,
    pub mesh_points: usize,
    pub rows: Vec<HalfGridRow<T>>,
    /// Whether `sup_inventory` strictly decreases along the rows.
    pub inventory_decreasing: bool,
}

/// `points` equally spaced times on `[0, T]`, endpoints exact.
pub fn uniform_mesh<T: Scalar>(horizon: T, points: usize) -> Vec<T> {
    let last = points.saturating_sub(1);
    (0..points)
        .map(|j| {
            if j == last {
                horizon
            } else {
                horizon * T::from_usize_exact(j) / T::from_usize_exact(last)
            }
        })
        .collect()
}

/// Half-grid equilibria along `n_list`, compared with `f`, `g` at the times
/// of `mesh` (usually [`uniform_mesh`]).
pub fn halfgrid_convergence<T: Scalar>(
    p: &ModelParams<T>,
    n_list: &[usize],
    mode: HalfGridMode,
    mesh: &[T],
) -> Result<HalfGridReport<T>> {
    check_steps(n_list)?;
    if mesh.is_empty() {
        return Err(Error::Domain("empty evaluation mesh".into()));
    }
    let cl = ContinuousLimit::new(p)?;
    let horizon = p.horizon;
    let half_t = horizon / T::lit(2.0);
    let xbar = p.mean_inventory();
    let skip_start = xbar != T::zero();
    let skip_end = p.inventories.iter().any(|&x| x != xbar);

    let rows = n_list
        .par_iter()
        .map(|&steps| {
            let grid = GridSpec::equidistant(horizon, steps)?;
            let eq = solve_halfgrid(p, &grid, mode)?;
            let path = inventory_path(p, &grid, &eq.vectors, mesh)?;
            let mut row = HalfGridRow {
                steps,
                sup_inventory: T::zero(),
                sup_v_first: T::zero(),
                sup_v_second: T::zero(),
                sup_w_first: T::zero(),
                sup_w_second: T::zero(),
            };
            for s in &path.samples {
                let (start, end) = (s.t == T::zero(), s.t == horizon);
                let ev = (s.v - cl.g(s.t, Side::At)?).abs();
                let ew = (s.w - cl.f(s.t, Side::At)?).abs();
                if !start && s.t <= half_t {
                    row.sup_v_first = row.sup_v_first.max(ev);
                }
                if s.t >= half_t {
                    row.sup_v_second = row.sup_v_second.max(ev);
                }
                if s.t <= half_t {
                    row.sup_w_first = row.sup_w_first.max(ew);
                }
                if !end && s.t >= half_t {
                    row.sup_w_second = row.sup_w_second.max(ew);
                }
                if (start && skip_start) || (end && skip_end) {
                    continue;
                }
                for (i, &x) in s.x.iter().enumerate() {
                    let target = cl.inventory(i, s.t, Side::At)?;
                    row.sup_inventory = row.sup_inventory.max((x - target).abs());
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let inventory_decreasing = rows.windows(2).all(|w| w[1].sup_inventory < w[0].sup_inventory);
    Ok(HalfGridReport {
        mode,
        mesh_points: mesh.len(),
        rows,
        inventory_decreasing,
    })
}
