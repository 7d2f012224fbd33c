//! Impact kernel matrices `Γ^θ`, `Γ̃`, `Γ⁰`, the tridiagonal inverse of `Γ⁰`,
//! half-grid cost variants, and matrix-free kernel actions.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_succeeds, dot, DenseMatrix};
use crate::model::{GridSpec, ModelParams, DEFAULT_MAX_STEPS};
use crate::scalar::Scalar;

/// Dense kernel matrices on one grid.
///
/// `gamma_theta` is `Γ⁰ + 2θI` for the full-grid game; half-grid variants
/// replace it by `H^θ` or `J^θ` (see [`HalfGridMatrices::kernel`]).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrices<T> {
    pub gamma_theta: DenseMatrix<T>,
    pub gamma_tilde: DenseMatrix<T>,
    pub gamma_zero: DenseMatrix<T>,
}

impl<T: Scalar> KernelMatrices<T> {
    pub fn dim(&self) -> usize {
        self.gamma_zero.rows()
    }

    /// `Γ^θ + (n−1)Γ̃`.
    pub fn symmetric_system(&self, n: usize) -> DenseMatrix<T> {
        let k = T::from_usize_exact(n - 1);
        combine(&self.gamma_theta, k, &self.gamma_tilde)
    }

    /// `Γ^θ − Γ̃`.
    pub fn antisymmetric_system(&self) -> DenseMatrix<T> {
        combine(&self.gamma_theta, -T::one(), &self.gamma_tilde)
    }
}

fn combine<T: Scalar>(a: &DenseMatrix<T>, s: T, b: &DenseMatrix<T>) -> DenseMatrix<T> {
    DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] + s * b[(i, j)])
}

/// `e^{−ρ|t_i − t_j|}` for `i ≥ j`, via a lag table on equidistant grids.
struct DecayTable<'a, T> {
    lags: Option<Vec<T>>,
    times: &'a [T],
    rho: T,
}

impl<'a, T: Scalar> DecayTable<'a, T> {
    fn new(rho: T, grid: &'a GridSpec<T>) -> Self {
        let lags = grid.is_equidistant().then(|| {
            let step = grid.horizon() / T::from_usize_exact(grid.steps());
            (0..grid.dates())
                .map(|k| (-rho * T::from_usize_exact(k) * step).exp())
                .collect()
        });
        Self {
            lags,
            times: grid.times(),
            rho,
        }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> T {
        match &self.lags {
            Some(l) => l[i.abs_diff(j)],
            None => (-self.rho * (self.times[i] - self.times[j]).abs()).exp(),
        }
    }
}

fn check_cap<T: Scalar>(grid: &GridSpec<T>, cap: usize) -> Result<()> {
    if grid.steps() > cap {
        return Err(Error::Capacity {
            requested: grid.steps(),
            cap,
        });
    }
    Ok(())
}

/// Builds `Γ^θ`, `Γ̃`, `Γ⁰` with the default size cap.
pub fn build_kernel<T: Scalar>(p: &ModelParams<T>, grid: &GridSpec<T>) -> Result<KernelMatrices<T>> {
    build_kernel_with_cap(p, grid, DEFAULT_MAX_STEPS)
}

pub fn build_kernel_with_cap<T: Scalar>(
    p: &ModelParams<T>,
    grid: &GridSpec<T>,
    cap: usize,
) -> Result<KernelMatrices<T>> {
    check_cap(grid, cap)?;
    let d = grid.dates();
    let table = DecayTable::new(p.rho, grid);
    let mut gamma_zero = DenseMatrix::zeros(d, d);
    let mut gamma_tilde = DenseMatrix::zeros(d, d);
    let half = T::lit(0.5);
    for i in 0..d {
        for j in 0..i {
            let g = table.get(i, j);
            gamma_zero[(i, j)] = g;
            gamma_zero[(j, i)] = g;
            gamma_tilde[(i, j)] = g;
        }
        gamma_zero[(i, i)] = T::one();
        gamma_tilde[(i, i)] = half;
    }
    let bump = T::lit(2.0) * p.theta;
    let mut gamma_theta = gamma_zero.clone();
    for i in 0..d {
        gamma_theta[(i, i)] = gamma_theta[(i, i)] + bump;
    }
    Ok(KernelMatrices {
        gamma_theta,
        gamma_tilde,
        gamma_zero,
    })
}

/// Which linear system of the equilibrium to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemKind {
    /// `Γ^θ + (n−1)Γ̃`, solved for `ν`.
    Symmetric,
    /// `Γ^θ − Γ̃`, solved for `ω`.
    Antisymmetric,
}

/// Assembles one system matrix directly, without materializing the three
/// kernel matrices. `inst` holds the diagonal instantaneous-cost bump per date.
pub(crate) fn assemble_system<T: Scalar>(
    rho: T,
    grid: &GridSpec<T>,
    inst: &[T],
    tilde_weight: T,
) -> Result<DenseMatrix<T>> {
    check_cap(grid, DEFAULT_MAX_STEPS)?;
    let d = grid.dates();
    let table = DecayTable::new(rho, grid);
    let lower = T::one() + tilde_weight;
    let mut a = DenseMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..i {
            let g = table.get(i, j);
            a[(i, j)] = lower * g;
            a[(j, i)] = g;
        }
        a[(i, i)] = T::one() + T::lit(0.5) * tilde_weight + inst[i];
    }
    Ok(a)
}

/// Analytic inverse of `Γ⁰` on an equidistant grid (tridiagonal).
pub fn inverse_gamma_zero<T: Scalar>(grid: &GridSpec<T>, p: &ModelParams<T>) -> Result<DenseMatrix<T>> {
    grid.require_equidistant()?;
    check_cap(grid, DEFAULT_MAX_STEPS)?;
    let d = grid.dates();
    let alpha = (-p.rho * grid.horizon() / T::from_usize_exact(grid.steps())).exp();
    let scale = T::one() / (T::one() - alpha * alpha);
    let mut inv = DenseMatrix::zeros(d, d);
    for i in 0..d {
        let corner = i == 0 || i + 1 == d;
        inv[(i, i)] = if corner {
            scale
        } else {
            (T::one() + alpha * alpha) * scale
        };
        if i + 1 < d {
            inv[(i, i + 1)] = -alpha * scale;
            inv[(i + 1, i)] = -alpha * scale;
        }
    }
    Ok(inv)
}

/// Whether `xᵀAx > 0` for all `x ≠ 0`, decided by a Cholesky factorization of
/// the symmetric part.
pub fn positivity_check<T: Scalar>(a: &DenseMatrix<T>) -> Result<bool> {
    let sym = a.symmetric_part()?;
    Ok(cholesky_succeeds(&sym))
}

/// Half of the grid on which instantaneous costs are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HalfGridMode {
    /// Costs on the first `s` dates only (`J^θ`).
    FirstHalf,
    /// Costs on dates `s+1 ..= N+1` (1-based) only (`H^θ`).
    SecondHalf,
}

impl std::str::FromStr for HalfGridMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" | "first-half" => Ok(Self::FirstHalf),
            "second" | "second-half" => Ok(Self::SecondHalf),
            other => Err(Error::Domain(format!(
                "unknown half-grid mode '{other}' (expected first or second)"
            ))),
        }
    }
}

impl std::fmt::Display for HalfGridMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FirstHalf => "first-half",
            Self::SecondHalf => "second-half",
        })
    }
}

/// `s = ⌈(N+1)/2⌉`.
pub fn split_index(steps: usize) -> usize {
    (steps + 2) / 2
}

/// Per-date diagonal instantaneous cost `2θ` restricted to one half of the
/// grid (0-based positions).
pub fn halfgrid_inst_weights<T: Scalar>(theta: T, steps: usize, mode: HalfGridMode) -> Vec<T> {
    let s = split_index(steps);
    let bump = T::lit(2.0) * theta;
    (0..=steps)
        .map(|k| {
            let second = k >= s;
            match (mode, second) {
                (HalfGridMode::SecondHalf, true) | (HalfGridMode::FirstHalf, false) => bump,
                _ => T::zero(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfGridMatrices<T> {
    /// `Γ⁰ + 2θĨ`: costs on the second half.
    pub h_theta: DenseMatrix<T>,
    /// `Γ⁰ + 2θ(I − Ĩ)`: costs on the first half.
    pub j_theta: DenseMatrix<T>,
    pub gamma_tilde: DenseMatrix<T>,
    pub gamma_zero: DenseMatrix<T>,
    /// 1-based split position `s`.
    pub split_index: usize,
}

impl<T: Scalar> HalfGridMatrices<T> {
    pub fn select(&self, mode: HalfGridMode) -> &DenseMatrix<T> {
        match mode {
            HalfGridMode::FirstHalf => &self.j_theta,
            HalfGridMode::SecondHalf => &self.h_theta,
        }
    }

    /// Kernel set whose cost matrix is `H^θ` or `J^θ`.
    pub fn kernel(&self, mode: HalfGridMode) -> KernelMatrices<T> {
        KernelMatrices {
            gamma_theta: self.select(mode).clone(),
            gamma_tilde: self.gamma_tilde.clone(),
            gamma_zero: self.gamma_zero.clone(),
        }
    }
}

/// Builds both half-grid cost matrices. Use [`HalfGridMatrices::select`] to
/// pick the one for a mode.
pub fn build_halfgrid<T: Scalar>(p: &ModelParams<T>, grid: &GridSpec<T>) -> Result<HalfGridMatrices<T>> {
    if grid.steps() < 2 {
        return Err(Error::Domain("half-grid costs need N ≥ 2".into()));
    }
    let base = build_kernel(&ModelParams { theta: T::zero(), ..p.clone() }, grid)?;
    let steps = grid.steps();
    let with_bumps = |mode| {
        let w = halfgrid_inst_weights(p.theta, steps, mode);
        let mut m = base.gamma_zero.clone();
        for (k, b) in w.into_iter().enumerate() {
            m[(k, k)] = m[(k, k)] + b;
        }
        m
    };
    Ok(HalfGridMatrices {
        h_theta: with_bumps(HalfGridMode::SecondHalf),
        j_theta: with_bumps(HalfGridMode::FirstHalf),
        gamma_tilde: base.gamma_tilde,
        gamma_zero: base.gamma_zero,
        split_index: split_index(steps),
    })
}

/// Matrix-vector products with the kernel matrices.
pub trait KernelAction<T: Scalar> {
    fn dim(&self) -> usize;
    /// `Γ^θ x` (or the half-grid cost matrix).
    fn gamma_theta(&self, x: &[T]) -> Vec<T>;
    /// `Γ̃ x`.
    fn gamma_tilde(&self, x: &[T]) -> Vec<T>;
    /// `Γ̃ᵀ x`.
    fn gamma_tilde_t(&self, x: &[T]) -> Vec<T>;
    /// `xᵀΓ^θx`.
    fn theta_quadratic(&self, x: &[T]) -> T {
        dot(x, &self.gamma_theta(x))
    }
}

fn dense_apply<T: Scalar>(m: &DenseMatrix<T>, x: &[T]) -> Vec<T> {
    m.matvec(x).expect("kernel action: dimension mismatch")
}

impl<T: Scalar> KernelAction<T> for KernelMatrices<T> {
    fn dim(&self) -> usize {
        self.gamma_zero.rows()
    }
    fn gamma_theta(&self, x: &[T]) -> Vec<T> {
        dense_apply(&self.gamma_theta, x)
    }
    fn gamma_tilde(&self, x: &[T]) -> Vec<T> {
        dense_apply(&self.gamma_tilde, x)
    }
    fn gamma_tilde_t(&self, x: &[T]) -> Vec<T> {
        let d = self.dim();
        assert_eq!(x.len(), d, "kernel action: dimension mismatch");
        let mut out = vec![T::zero(); d];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.gamma_tilde.row(i)) {
                *o = *o + a * xi;
            }
        }
        out
    }
}

/// Matrix-free exponential kernel: every product costs `O(N)` through the
/// forward/backward recursions `L_i = e^{−ρΔt_i}(L_{i−1} + x_{i−1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpKernelOperator<T> {
    /// `e^{−ρ(t_k − t_{k−1})}` for `k = 1..=N`.
    decay: Vec<T>,
    /// Diagonal instantaneous-cost bump per date.
    inst: Vec<T>,
}

impl<T: Scalar> ExpKernelOperator<T> {
    pub fn new(p: &ModelParams<T>, grid: &GridSpec<T>) -> Self {
        let inst = vec![T::lit(2.0) * p.theta; grid.dates()];
        Self::with_inst(p.rho, grid, inst)
    }

    pub fn halfgrid(p: &ModelParams<T>, grid: &GridSpec<T>, mode: HalfGridMode) -> Self {
        Self::with_inst(p.rho, grid, halfgrid_inst_weights(p.theta, grid.steps(), mode))
    }

    /// Arbitrary per-date instantaneous bumps (`inst.len()` must equal the
    /// number of dates).
    pub fn with_inst(rho: T, grid: &GridSpec<T>, inst: Vec<T>) -> Self {
        assert_eq!(inst.len(), grid.dates(), "one instantaneous weight per date");
        let decay = if grid.is_equidistant() {
            let a = (-rho * grid.horizon() / T::from_usize_exact(grid.steps())).exp();
            vec![a; grid.steps()]
        } else {
            grid.times()
                .windows(2)
                .map(|w| (-rho * (w[1] - w[0])).exp())
                .collect()
        };
        Self { decay, inst }
    }

    pub fn inst_weights(&self) -> &[T] {
        &self.inst
    }

    /// Strictly lower part: `Σ_{j<i} e^{−ρ(t_i−t_j)} x_j`.
    fn lower(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); x.len()];
        for k in 1..x.len() {
            out[k] = self.decay[k - 1] * (out[k - 1] + x[k - 1]);
        }
        out
    }

    /// Strictly upper part: `Σ_{j>i} e^{−ρ(t_j−t_i)} x_j`.
    fn upper(&self, x: &[T]) -> Vec<T> {
        let d = x.len();
        let mut out = vec![T::zero(); d];
        for k in (0..d.saturating_sub(1)).rev() {
            out[k] = self.decay[k] * (out[k + 1] + x[k + 1]);
        }
        out
    }

    fn check(&self, x: &[T]) {
        assert_eq!(x.len(), self.inst.len(), "kernel action: dimension mismatch");
    }
}

impl<T: Scalar> KernelAction<T> for ExpKernelOperator<T> {
    fn dim(&self) -> usize {
        self.inst.len()
    }

    fn gamma_theta(&self, x: &[T]) -> Vec<T> {
        self.check(x);
        let lo = self.lower(x);
        let up = self.upper(x);
        (0..x.len())
            .map(|k| lo[k] + up[k] + (T::one() + self.inst[k]) * x[k])
            .collect()
    }

    fn gamma_tilde(&self, x: &[T]) -> Vec<T> {
        self.check(x);
        let half = T::lit(0.5);
        let mut lo = self.lower(x);
        for (l, &xk) in lo.iter_mut().zip(x) {
            *l = *l + half * xk;
        }
        lo
    }

    /// One pass, no allocation: `Σ(1+inst_k)x_k² + 2Σ_k x_k L_k`.
    fn theta_quadratic(&self, x: &[T]) -> T {
        self.check(x);
        let mut lower = T::zero();
        let mut cross = T::zero();
        let mut diag = T::zero();
        for k in 0..x.len() {
            if k > 0 {
                lower = self.decay[k - 1] * (lower + x[k - 1]);
            }
            cross = cross + x[k] * lower;
            diag = diag + (T::one() + self.inst[k]) * x[k] * x[k];
        }
        diag + T::lit(2.0) * cross
    }

    fn gamma_tilde_t(&self, x: &[T]) -> Vec<T> {
        self.check(x);
        let half = T::lit(0.5);
        let mut up = self.upper(x);
        for (u, &xk) in up.iter_mut().zip(x) {
            *u = *u + half * xk;
        }
        up
    }
}

/// Writes a matrix as CSV, row-major, 17 significant digits, no header.
pub fn write_matrix_csv<T: Scalar, W: Write>(m: &DenseMatrix<T>, mut out: W) -> std::io::Result<()> {
    for i in 0..m.rows() {
        let line = m
            .row(i)
            .iter()
            .map(|v| format!("{:.16e}", v.to_f64_lossy()))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn setup(n: usize, theta: f64, rho: f64, steps: usize) -> (ModelParams<f64>, GridSpec<f64>) {
        let p = ModelParams::new(n, rho, 1.0, theta, vec![1.0; n]).unwrap();
        (p, GridSpec::equidistant(1.0, steps).unwrap())
    }

    #[test]
    fn two_by_two_kernel() {
        let (p, g) = setup(2, 0.0, 1.0, 1);
        let k = build_kernel(&p, &g).unwrap();
        let e = (-1.0_f64).exp();
        assert_eq!(k.gamma_zero[(0, 0)], 1.0);
        assert_abs_diff_eq!(k.gamma_zero[(0, 1)], e, epsilon = 1e-16);
        assert_abs_diff_eq!(k.gamma_zero[(1, 0)], e, epsilon = 1e-16);

        let (p, g) = setup(2, 0.5, 1.0, 1);
        let k = build_kernel(&p, &g).unwrap();
        assert_eq!(k.gamma_theta[(0, 0)], 2.0);
        assert_eq!(k.gamma_theta[(1, 1)], 2.0);
        assert_abs_diff_eq!(k.gamma_theta[(1, 0)], e, epsilon = 1e-16);
    }

    #[test]
    fn gamma_tilde_three_dates() {
        let (p, g) = setup(2, 0.0, 1.0, 2);
        let k = build_kernel(&p, &g).unwrap();
        let h = (-0.5_f64).exp();
        let e = (-1.0_f64).exp();
        let expect = [[0.5, 0.0, 0.0], [h, 0.5, 0.0], [e, h, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(k.gamma_tilde[(i, j)], expect[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn symmetry_and_decomposition_are_exact() {
        for (steps, rho) in [(7, 1.0), (40, 3.0), (101, 0.2)] {
            let (p, g) = setup(3, 0.2, rho, steps);
            let k = build_kernel(&p, &g).unwrap();
            let d = k.dim();
            for i in 0..d {
                for j in 0..d {
                    assert_eq!(k.gamma_theta[(i, j)], k.gamma_theta[(j, i)]);
                    assert_eq!(k.gamma_zero[(i, j)], k.gamma_tilde[(i, j)] + k.gamma_tilde[(j, i)]);
                }
            }
        }
    }

    #[test]
    fn irregular_grid_uses_time_differences() {
        let p = ModelParams::new(2, 2.0, 1.0, 0.0, vec![1.0, 1.0]).unwrap();
        let g = GridSpec::from_times(vec![0.0, 0.1, 0.7]).unwrap();
        let k = build_kernel(&p, &g).unwrap();
        assert_abs_diff_eq!(k.gamma_zero[(2, 0)], (-1.4_f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(k.gamma_zero[(1, 2)], (-1.2_f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn capacity_is_enforced() {
        let (p, g) = setup(2, 0.0, 1.0, 30);
        assert!(matches!(
            build_kernel_with_cap(&p, &g, 20),
            Err(Error::Capacity { requested: 30, cap: 20 })
        ));
    }

    #[test]
    fn kms_inverse_two_by_two() {
        let (p, g) = setup(2, 0.0, 1.0, 1);
        let inv = inverse_gamma_zero(&g, &p).unwrap();
        let a = (-1.0_f64).exp();
        let s = 1.0 / (1.0 - a * a);
        assert_abs_diff_eq!(inv[(0, 0)], s, epsilon = 1e-15);
        assert_abs_diff_eq!(inv[(0, 1)], -a * s, epsilon = 1e-15);
        assert_abs_diff_eq!(inv[(1, 1)], s, epsilon = 1e-15);
    }

    #[test]
    fn kms_inverse_rejects_irregular_grid() {
        let p = ModelParams::new(2, 1.0, 1.0, 0.0, vec![1.0, 1.0]).unwrap();
        let g = GridSpec::from_times(vec![0.0, 0.1, 0.7]).unwrap();
        assert_eq!(inverse_gamma_zero(&g, &p), Err(Error::NonEquidistant));
    }

    #[test]
    fn positivity_examples() {
        let (p, g) = setup(3, 0.1, 1.0, 10);
        let k = build_kernel(&p, &g).unwrap();
        assert!(positivity_check(&k.gamma_theta).unwrap());
        let (p, g) = setup(5, 0.0, 1.0, 10);
        let k = build_kernel(&p, &g).unwrap();
        assert!(positivity_check(&k.antisymmetric_system()).unwrap());
        assert!(positivity_check(&k.symmetric_system(5)).unwrap());
        assert!(!positivity_check(&DenseMatrix::<f64>::identity(4).scaled(-1.0)).unwrap());
        assert!(positivity_check(&DenseMatrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn halfgrid_split_and_bumps() {
        let (p, g) = setup(2, 1.0, 1.0, 3);
        let h = build_halfgrid(&p, &g).unwrap();
        assert_eq!(h.split_index, 2);
        let m = h.select(HalfGridMode::SecondHalf);
        let diag: Vec<f64> = (0..4).map(|k| m[(k, k)]).collect();
        assert_eq!(diag, vec![1.0, 1.0, 3.0, 3.0]);
        let m = h.select(HalfGridMode::FirstHalf);
        let diag: Vec<f64> = (0..4).map(|k| m[(k, k)]).collect();
        assert_eq!(diag, vec![3.0, 3.0, 1.0, 1.0]);
        assert_eq!(split_index(4), 3);
        assert!(build_halfgrid(&p, &GridSpec::equidistant(1.0, 1).unwrap()).is_err());
    }

    #[test]
    fn halfgrid_pair_identity() {
        let (p, g) = setup(2, 0.3, 1.0, 5);
        let h = build_halfgrid(&p, &g).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let id = if i == j { 0.6 } else { 0.0 };
                let r = h.h_theta[(i, j)] + h.j_theta[(i, j)] - 2.0 * h.gamma_zero[(i, j)] - id;
                assert!(r.abs() < 1e-15);
            }
        }
        let (p, g) = setup(2, 0.0, 1.0, 5);
        let h = build_halfgrid(&p, &g).unwrap();
        assert_eq!(h.h_theta, h.gamma_zero);
        assert_eq!(h.j_theta, h.gamma_zero);
    }

    #[test]
    fn structured_operator_matches_dense() {
        let p = ModelParams::new(3, 1.3, 2.0, 0.4, vec![1.0; 3]).unwrap();
        for g in [
            GridSpec::equidistant(2.0, 17).unwrap(),
            GridSpec::from_times(vec![0.0, 0.05, 0.3, 0.31, 1.2, 2.0]).unwrap(),
        ] {
            let k = build_kernel(&p, &g).unwrap();
            let op = ExpKernelOperator::new(&p, &g);
            let x: Vec<f64> = (0..g.dates()).map(|i| ((i * 7) % 5) as f64 - 1.7).collect();
            let pairs = [
                (k.gamma_theta(&x), op.gamma_theta(&x)),
                (k.gamma_tilde(&x), op.gamma_tilde(&x)),
                (k.gamma_tilde_t(&x), op.gamma_tilde_t(&x)),
            ];
            for (a, b) in pairs {
                for (u, v) in a.iter().zip(&b) {
                    assert_abs_diff_eq!(u, v, epsilon = 1e-13);
                }
            }
            assert_abs_diff_eq!(k.theta_quadratic(&x), op.theta_quadratic(&x), epsilon = 1e-12);
        }
    }

    #[test]
    fn structured_halfgrid_matches_dense() {
        let p = ModelParams::new(2, 1.0, 1.0, 0.7, vec![1.0, -1.0]).unwrap();
        let g = GridSpec::equidistant(1.0, 9).unwrap();
        let h = build_halfgrid(&p, &g).unwrap();
        let x: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        for mode in [HalfGridMode::FirstHalf, HalfGridMode::SecondHalf] {
            let dense = h.kernel(mode).gamma_theta(&x);
            let fast = ExpKernelOperator::halfgrid(&p, &g, mode).gamma_theta(&x);
            for (u, v) in dense.iter().zip(&fast) {
                assert_abs_diff_eq!(u, v, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn assembled_systems_match_kernel_combinations() {
        let (p, g) = setup(4, 0.2, 1.0, 12);
        let k = build_kernel(&p, &g).unwrap();
        let inst = vec![0.4; 13];
        let sym = assemble_system(1.0, &g, &inst, 3.0).unwrap();
        let anti = assemble_system(1.0, &g, &inst, -1.0).unwrap();
        let ks = k.symmetric_system(4);
        let ka = k.antisymmetric_system();
        for i in 0..13 {
            for j in 0..13 {
                assert_abs_diff_eq!(sym[(i, j)], ks[(i, j)], epsilon = 1e-15);
                assert_abs_diff_eq!(anti[(i, j)], ka[(i, j)], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn csv_dump_round_trips() {
        let (p, g) = setup(2, 0.1, 1.0, 2);
        let k = build_kernel(&p, &g).unwrap();
        let mut buf = Vec::new();
        write_matrix_csv(&k.gamma_theta, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let parsed: Vec<Vec<f64>> = text
            .lines()
            .map(|l| l.split(',').map(|s| s.parse().unwrap()).collect())
            .collect();
        assert_eq!(parsed.len(), 3);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(parsed[i][j], k.gamma_theta[(i, j)]);
            }
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("second".parse::<HalfGridMode>().unwrap(), HalfGridMode::SecondHalf);
        assert_eq!("first-half".parse::<HalfGridMode>().unwrap(), HalfGridMode::FirstHalf);
        assert!("middle".parse::<HalfGridMode>().is_err());
    }
}
