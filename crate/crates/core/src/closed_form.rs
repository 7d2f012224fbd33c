//! Explicit equilibrium vectors on equidistant grids.
//!
//! `ν` is the solution of a tridiagonal system `Bν = u`. Its determinant
//! minors grow like `m₊^k`, which overflows `f64` for `N` in the hundreds,
//! so every quantity here is stored divided by the matching power of `m₊`
//! and only ratios of magnitude at most one are ever raised to a power.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::SystemKind;
use crate::linalg::DenseMatrix;
use crate::model::{derived_scalars, GridSpec, ModelParams};
use crate::scalar::{signed_pow, Scalar};

/// Root and coefficient data of the tridiagonal system behind `ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormContext<T> {
    pub steps: usize,
    pub n: usize,
    pub alpha: T,
    pub kappa: T,
    /// `R = √(s² − 4α²κ(κ+1−n))`, `s = 1 + α²(κ−n) + κ`.
    pub r_disc: T,
    pub m_plus: T,
    pub m_minus: T,
    pub c_plus: T,
    pub c_minus: T,
    pub d_plus: T,
    pub d_minus: T,
    /// `δ_k / m₊^k` for `k = 0..=N+1`.
    pub delta_scaled: Vec<T>,
    /// `φ_k / m₊^{N+2−k}` for `k = 2..=N+2` (stored from index 0).
    pub phi_scaled: Vec<T>,
}

impl<T: Scalar> ClosedFormContext<T> {
    pub fn new(p: &ModelParams<T>, grid: &GridSpec<T>) -> Result<Self> {
        grid.require_equidistant()?;
        let steps = grid.steps();
        let ds = derived_scalars(p, grid);
        let (a, k) = (ds.alpha, ds.kappa);
        let n = T::from_usize_exact(p.n);
        let one = T::one();
        let two = T::lit(2.0);
        let a2 = a * a;
        let e = k + one - n;

        let s = one + a2 * (k - n) + k;
        let r_disc = (s * s - T::lit(4.0) * a2 * k * e).max(T::zero()).sqrt();
        let m_plus = (s + r_disc) / two;
        let m_minus = a2 * k * e / m_plus;
        if !(r_disc > T::zero()) {
            return Err(Error::IllConditioned(format!(
                "characteristic roots coincide (α = {a}, κ = {k}, n = {})",
                p.n
            )));
        }

        // The textbook forms (q ± R)/2R cancel catastrophically on one
        // branch; both coefficients below are the cancellation-free variants.
        let q = one - a2 * (k + n) + k;
        let c_plus = if q >= T::zero() {
            (q + r_disc) / (two * r_disc)
        } else {
            two * a2 * k * n * (one - a2) / (r_disc * (r_disc - q))
        };
        let c_minus = one - c_plus;
        let qp = one + (one - a2) * k - a2 * (two - n);
        let d_minus = two * a2 * e * (one - a2) / (r_disc * (r_disc + qp));
        let d_plus = one - d_minus;

        let r = m_minus / m_plus;
        let mut delta_scaled: Vec<T> = (0..=steps)
            .map(|j| c_plus + c_minus * signed_pow(r, j))
            .collect();
        delta_scaled.push(r_disc * (d_plus * c_plus - d_minus * c_minus * signed_pow(r, steps)) / m_plus);
        let phi_scaled = (2..=steps + 2)
            .map(|j| d_plus + d_minus * signed_pow(r, steps + 2 - j))
            .collect();

        Ok(Self {
            steps,
            n: p.n,
            alpha: a,
            kappa: k,
            r_disc,
            m_plus,
            m_minus,
            c_plus,
            c_minus,
            d_plus,
            d_minus,
            delta_scaled,
            phi_scaled,
        })
    }

    /// `m₋/m₊`, of magnitude below one.
    pub fn root_ratio(&self) -> T {
        self.m_minus / self.m_plus
    }

    /// `δ_{N+1} / m₊^{N+1}`.
    pub fn scaled_determinant(&self) -> T {
        self.delta_scaled[self.steps + 1]
    }

    /// Raw minor `δ_k`, or `None` if it is not representable.
    pub fn delta(&self, k: usize) -> Option<T> {
        let v = *self.delta_scaled.get(k)? * signed_pow(self.m_plus, k);
        v.is_finite().then_some(v)
    }

    /// Raw `φ_k` for `k ∈ 2..=N+2`, or `None` if out of range or not representable.
    pub fn phi(&self, k: usize) -> Option<T> {
        if k < 2 {
            return None;
        }
        let v = *self.phi_scaled.get(k - 2)? * signed_pow(self.m_plus, self.steps + 2 - k);
        v.is_finite().then_some(v)
    }
}

/// Formula family used for `ν`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NuBranch {
    /// Generic two-root formula.
    General,
    /// `κ = n − 1`, where the generic denominators vanish.
    KappaDegenerate,
    /// `κ` within `1e-6` (relative) of `n − 1` but not at it: dense solve.
    DenseFallback,
}

const DEGENERATE_TOL: f64 = 1e-9;
const FALLBACK_TOL: f64 = 1e-6;

pub fn nu_branch<T: Scalar>(p: &ModelParams<T>) -> NuBranch {
    let two = T::lit(2.0);
    let n = T::from_usize_exact(p.n);
    let kappa = two * p.theta + (n - T::one()) / two;
    let gap = (kappa - (n - T::one())).abs();
    let scale = kappa.max(T::one());
    if gap <= T::lit(DEGENERATE_TOL) * scale {
        NuBranch::KappaDegenerate
    } else if gap < T::lit(FALLBACK_TOL) * scale {
        NuBranch::DenseFallback
    } else {
        NuBranch::General
    }
}

/// `ω_i = [(1−α)κ̃ + α(α(κ̃−1)/κ̃)^{N+1−i}] / [κ̃(κ̃ − α(κ̃−1))]`.
pub fn omega_closed_form<T: Scalar>(p: &ModelParams<T>, grid: &GridSpec<T>) -> Result<Vec<T>> {
    grid.require_equidistant()?;
    let ds = derived_scalars(p, grid);
    let (a, kt) = (ds.alpha, ds.kappa_tilde);
    let one = T::one();
    let denom = kt * (kt - a * (kt - one));
    if !(denom > T::zero()) {
        return Err(Error::IllConditioned(format!(
            "ω denominator κ̃(κ̃ − α(κ̃−1)) = {denom} is not positive"
        )));
    }
    let ratio = a * (kt - one) / kt;
    let steps = grid.steps();
    Ok((0..=steps)
        .map(|i| ((one - a) * kt + a * signed_pow(ratio, steps - i)) / denom)
        .collect())
}

/// `ν` on an equidistant grid, choosing the branch from [`nu_branch`].
pub fn nu_closed_form<T: Scalar>(p: &ModelParams<T>, grid: &GridSpec<T>) -> Result<Vec<T>> {
    grid.require_equidistant()?;
    match nu_branch(p) {
        NuBranch::KappaDegenerate => Ok(nu_degenerate(p, grid)),
        NuBranch::DenseFallback => {
            Ok(crate::equilibrium::solve_system(p, grid, SystemKind::Symmetric)?.x)
        }
        NuBranch::General => nu_general(&ClosedFormContext::new(p, grid)?),
    }
}

/// `κ = n − 1` closed form with `ϑ = α(n−1)/(n−α²)`.
fn nu_degenerate<T: Scalar>(p: &ModelParams<T>, grid: &GridSpec<T>) -> Vec<T> {
    let a = derived_scalars(p, grid).alpha;
    let one = T::one();
    let n = T::from_usize_exact(p.n);
    let vt = a * (n - one) / (n - a * a);
    let steps = grid.steps();
    let lead = one / (n + a);
    let mut nu = Vec::with_capacity(steps + 1);
    nu.push((one + (n - a * a) / (n * (n - one)) * signed_pow(vt, steps + 1)) * lead);
    for i in 2..=steps + 1 {
        nu.push((one - a + signed_pow(vt, steps + 2 - i) * (one - a * a) / (n - one)) * lead);
    }
    nu
}

fn nu_general<T: Scalar>(cx: &ClosedFormContext<T>) -> Result<Vec<T>> {
    let steps = cx.steps;
    let (a, k) = (cx.alpha, cx.kappa);
    let one = T::one();
    let n = T::from_usize_exact(cx.n);
    let e = k + one - n;
    let (mp, mm) = (cx.m_plus, cx.m_minus);
    let r = cx.root_ratio();

    let det = cx.scaled_determinant();
    if !det.is_finite() || det.abs() < T::min_positive_value().sqrt() {
        return Err(Error::IllConditioned(format!(
            "scaled determinant {det:e} (n = {}, κ = {k}, α = {a}, N = {steps})",
            cx.n
        )));
    }
    // Normalized bracket [m₊]^N; [m₋]^N is base·r^N.
    let base = (one - a) / (mp * det);
    let br = [base, base * signed_pow(r, steps)];
    let m = [mp, mm];
    let c = [cx.c_plus, cx.c_minus];
    let d = [cx.d_plus, cx.d_minus];
    let c1 = a * (a + one) / (k + one - a * (k - n));

    // Root gaps m_σ − ακ and m_σ − αe; the small one of each pair comes
    // from the characteristic polynomial evaluated at ακ or αe.
    let p_ak = -a * k * (one - a) * (k * (one - a) + one + a * n);
    let p_ae = -a * e * (one - a) * (e * (one - a) + a + n);
    let gap_k = [-p_ak / (a * k - mm), mm - a * k];
    let gap_e = [mp - a * e, -p_ae / (a * e - mp)];
    let bk = a * k / mp;
    let be = a * e / mp;

    let mut nu = vec![T::zero(); steps + 1];
    nu[0] = (0..2)
        .map(|s| d[s] * (m[s] - a * a * k) / gap_k[s] * br[s])
        .sum::<T>()
        + c1 * base * signed_pow(bk, steps);
    nu[steps] = (0..2)
        .map(|s| c[s] * (m[s] - a * a * e) / gap_e[s] * br[s])
        .sum::<T>()
        + n * c1 * base * signed_pow(be, steps);
    let interior = (one - a)
        * (0..2)
            .map(|s| c[s] * d[s] * (a * e / gap_e[s] + m[s] / gap_k[s]) * br[s])
            .sum::<T>();
    for i in 2..=steps {
        let tail_e = n * c1 * base * (d[0] + d[1] * signed_pow(r, steps + 1 - i)) * signed_pow(be, i - 1);
        let tail_k = c1 * base * (c[0] + c[1] * signed_pow(r, i - 1)) * signed_pow(bk, steps + 1 - i);
        nu[i - 1] = interior + tail_e + tail_k;
    }
    if let Some(i) = nu.iter().position(|x| !x.is_finite()) {
        return Err(Error::IllConditioned(format!(
            "non-finite ν component at position {} (n = {}, κ = {k}, N = {steps})",
            i + 1,
            cx.n
        )));
    }
    Ok(nu)
}

/// The tridiagonal matrix `B = (1−α²)(I + Γ⁻¹((n−1)Γ̃ + 2θI))`.
pub fn tridiagonal_system<T: Scalar>(p: &ModelParams<T>, grid: &GridSpec<T>) -> Result<DenseMatrix<T>> {
    grid.require_equidistant()?;
    let ds = derived_scalars(p, grid);
    let (a, k) = (ds.alpha, ds.kappa);
    let one = T::one();
    let n = T::from_usize_exact(p.n);
    let a2 = a * a;
    let d = grid.dates();
    let mut b = DenseMatrix::zeros(d, d);
    for i in 0..d {
        b[(i, i)] = if i + 1 == d {
            one - a2 + k
        } else if i == 0 {
            one - n * a2 + k
        } else {
            one + a2 * (k - n) + k
        };
        if i + 1 < d {
            b[(i, i + 1)] = -a * k;
            b[(i + 1, i)] = -a * (k + one - n);
        }
    }
    if d == 1 {
        b[(0, 0)] = one - n * a2 + k;
    }
    Ok(b)
}

/// Right-hand side `u = (1−α, (1−α)², …, (1−α)², 1−α)` with `Bν = u`.
pub fn tridiagonal_rhs<T: Scalar>(alpha: T, dates: usize) -> Vec<T> {
    let g = T::one() - alpha;
    (0..dates)
        .map(|i| if i == 0 || i + 1 == dates { g } else { g * g })
        .collect()
}

/// `B⁻¹` from the minors via the tridiagonal inverse formula, evaluated in
/// scaled form so it stays finite for any `N`.
pub fn tridiagonal_inverse<T: Scalar>(cx: &ClosedFormContext<T>) -> DenseMatrix<T> {
    let d = cx.steps + 1;
    let one = T::one();
    let n = T::from_usize_exact(cx.n);
    let up = cx.alpha * cx.kappa / cx.m_plus;
    let down = cx.alpha * (cx.kappa + one - n) / cx.m_plus;
    let scale = one / (cx.m_plus * cx.scaled_determinant());
    // 1-based: B⁻¹_ij = (ακ)^{j−i} δ_{i−1} φ_{j+1} / δ_{N+1} for i ≤ j.
    DenseMatrix::from_fn(d, d, |i0, j0| {
        let (i, j) = (i0 + 1, j0 + 1);
        if i <= j {
            signed_pow(up, j - i) * cx.delta_scaled[i - 1] * cx.phi_scaled[j - 1] * scale
        } else {
            signed_pow(down, i - j) * cx.delta_scaled[j - 1] * cx.phi_scaled[i - 1] * scale
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_system;
    use crate::kernel::{build_kernel, inverse_gamma_zero};
    use crate::linalg::LuFactorization;

    fn setup(n: usize, theta: f64, rho_t: f64, steps: usize) -> (ModelParams<f64>, GridSpec<f64>) {
        let p = ModelParams::new(n, rho_t, 1.0, theta, vec![1.0; n]).unwrap();
        (p, GridSpec::equidistant(1.0, steps).unwrap())
    }

    fn max_gap(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn omega_terminal_value_is_inverse_kappa_tilde() {
        for steps in [1, 5, 300] {
            let (p, g) = setup(2, 0.25, 1.0, steps);
            let w = omega_closed_form(&p, &g).unwrap();
            assert!((w[steps] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn omega_alternates_without_instantaneous_cost() {
        let (p, g) = setup(3, 0.0, 1.0, 6);
        let w = omega_closed_form(&p, &g).unwrap();
        let a = (-1.0_f64 / 6.0).exp();
        let shift = (1.0 - a) * 0.5;
        let denom = 0.5 * (0.5 + 0.5 * a);
        for (i, wi) in w.iter().enumerate() {
            let sign = if (6 - i) % 2 == 0 { 1.0 } else { -1.0 };
            let expect = (shift + a * sign * a.powi((6 - i) as i32)) / denom;
            assert!((wi - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn omega_matches_dense_solve() {
        let (p, g) = setup(2, 0.1, 2.0, 50);
        let dense = solve_system(&p, &g, SystemKind::Antisymmetric).unwrap().x;
        assert!(max_gap(&dense, &omega_closed_form(&p, &g).unwrap()) < 1e-10);
    }

    #[test]
    fn nu_matches_dense_solve() {
        for (n, theta, rho_t, steps) in [
            (4, 0.2, 1.0, 80),
            (2, 0.0, 1.0, 2),
            (10, 0.0, 2.0, 300),
            (5, 1.0, 0.5, 200),
            (2, 0.05, 1.0, 7),
            (3, 0.1, 1.0, 1),
            (10, 3.0, 1.0, 150),
        ] {
            let (p, g) = setup(n, theta, rho_t, steps);
            let dense = solve_system(&p, &g, SystemKind::Symmetric).unwrap().x;
            let cf = nu_closed_form(&p, &g).unwrap();
            let scale = dense.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
            assert!(
                max_gap(&dense, &cf) <= 1e-10 * scale,
                "n={n} θ={theta} ρT={rho_t} N={steps}: {}",
                max_gap(&dense, &cf)
            );
        }
    }

    #[test]
    fn degenerate_branch_matches_dense() {
        for n in [2, 3, 5, 10] {
            let (p, g) = setup(n, (n as f64 - 1.0) / 4.0, 1.0, 60);
            assert_eq!(nu_branch(&p), NuBranch::KappaDegenerate);
            let dense = solve_system(&p, &g, SystemKind::Symmetric).unwrap().x;
            assert!(max_gap(&dense, &nu_closed_form(&p, &g).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn degenerate_partial_sums() {
        // Σ_{i≤m} ν_i at κ = n−1 in closed form.
        let (n, steps, m) = (3usize, 6usize, 3usize);
        let (p, g) = setup(n, 0.5, 1.0, steps);
        let nu = nu_closed_form(&p, &g).unwrap();
        let a = (-1.0_f64 / steps as f64).exp();
        let nf = n as f64;
        let vt = a * (nf - 1.0) / (nf - a * a);
        let nn = steps as i32;
        let mf = m as f64;
        let expect = ((1.0 - a) * mf
            + a
            + a * (a * a - nf) / (nf * (nf + a)) * vt.powi(nn + 1)
            + a * (1.0 + a) / (nf + a) * vt.powi(nn + 1 - m as i32))
            / (nf + a);
        let sum: f64 = nu[..m].iter().sum();
        assert!((sum - expect).abs() < 1e-14, "{sum} vs {expect}");
    }

    #[test]
    fn near_degenerate_uses_dense_and_far_uses_formula() {
        let (p, _) = setup(3, 0.5 + 5e-8, 1.0, 10);
        assert_eq!(nu_branch(&p), NuBranch::DenseFallback);
        let (p, _) = setup(3, 0.5 + 2e-6, 1.0, 10);
        assert_eq!(nu_branch(&p), NuBranch::General);
        let (p, g) = setup(3, 0.5 + 5e-8, 1.0, 40);
        let dense = solve_system(&p, &g, SystemKind::Symmetric).unwrap().x;
        assert_eq!(nu_closed_form(&p, &g).unwrap(), dense);
    }

    #[test]
    fn large_grids_stay_finite() {
        for (n, theta) in [(10, 0.0), (2, 0.05), (10, 2.0), (3, 0.1)] {
            let (p, g) = setup(n, theta, 1.0, 20_000);
            let nu = nu_closed_form(&p, &g).unwrap();
            assert!(nu.iter().all(|x| x.is_finite()));
            let w = omega_closed_form(&p, &g).unwrap();
            assert!(w.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn roots_solve_characteristic_equation() {
        for n in [2usize, 3, 5, 10] {
            for theta in [0.0, 0.05, 0.5, 4.0] {
                for steps in [1, 10, 1000] {
                    let (p, g) = setup(n, theta, 1.0, steps);
                    let cx = ClosedFormContext::new(&p, &g).unwrap();
                    let (a, k, nf) = (cx.alpha, cx.kappa, n as f64);
                    let s = 1.0 + a * a * (k - nf) + k;
                    let prod = a * a * k * (k + 1.0 - nf);
                    assert!(cx.r_disc > 0.0);
                    for m in [cx.m_plus, cx.m_minus] {
                        assert!((m * m - s * m + prod).abs() <= 1e-12 * (m * m + (s * m).abs() + prod.abs()), "n={n} θ={theta} N={steps} m={m} s={s}");
                    }
                    assert!(cx.root_ratio().abs() < 1.0);
                }
            }
        }
    }

    #[test]
    fn minors_match_leading_determinants() {
        for (n, theta) in [(2, 0.0), (3, 0.1), (5, 0.5), (4, 2.0)] {
            let (p, g) = setup(n, theta, 1.0, 9);
            let b = tridiagonal_system(&p, &g).unwrap();
            let cx = ClosedFormContext::new(&p, &g).unwrap();
            for k in 1..=10 {
                let minor = DenseMatrix::from_fn(k, k, |i, j| b[(i, j)]);
                let det = LuFactorization::factor(&minor).unwrap().determinant();
                let got = cx.delta(k).unwrap();
                assert!((det - got).abs() <= 1e-11 * det.abs().max(1.0), "k={k}: {det} vs {got}");
            }
            assert_eq!(cx.delta(0), Some(1.0));
        }
    }

    #[test]
    fn phi_satisfies_backward_recursion() {
        let (p, g) = setup(3, 0.2, 1.0, 8);
        let b = tridiagonal_system(&p, &g).unwrap();
        let cx = ClosedFormContext::new(&p, &g).unwrap();
        let d = 9;
        let phi = |k: usize| cx.phi(k).unwrap();
        assert!((phi(d + 1) - 1.0).abs() < 1e-14);
        assert!((phi(d) - b[(d - 1, d - 1)]).abs() < 1e-13);
        for k in 2..d {
            // φ_k = b_kk φ_{k+1} − b_{k,k+1} b_{k+1,k} φ_{k+2} (1-based)
            let rec = b[(k - 1, k - 1)] * phi(k + 1) - b[(k - 1, k)] * b[(k, k - 1)] * phi(k + 2);
            assert!((phi(k) - rec).abs() < 1e-12 * rec.abs().max(1.0));
        }
    }

    #[test]
    fn tridiagonal_system_matches_kernel_expression() {
        let (p, g) = setup(4, 0.3, 1.0, 12);
        let k = build_kernel(&p, &g).unwrap();
        let inv = inverse_gamma_zero(&g, &p).unwrap();
        let a = (-1.0_f64 / 12.0).exp();
        let mut inner = k.gamma_tilde.scaled(3.0);
        for i in 0..13 {
            inner[(i, i)] += 0.6;
        }
        let expect = DenseMatrix::identity(13)
            .add_scaled(1.0, &inv.matmul(&inner).unwrap())
            .unwrap()
            .scaled(1.0 - a * a);
        let b = tridiagonal_system(&p, &g).unwrap();
        assert!(b.add_scaled(-1.0, &expect).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn tridiagonal_inverse_reproduces_nu() {
        for (n, theta, steps) in [(2, 0.0, 5), (3, 0.1, 30), (10, 0.7, 700)] {
            let (p, g) = setup(n, theta, 1.0, steps);
            let cx = ClosedFormContext::new(&p, &g).unwrap();
            let binv = tridiagonal_inverse(&cx);
            let u = tridiagonal_rhs(cx.alpha, steps + 1);
            let via_inverse = binv.matvec(&u).unwrap();
            let nu = nu_closed_form(&p, &g).unwrap();
            assert!(max_gap(&via_inverse, &nu) < 1e-11, "n={n} N={steps}");
            if steps < 50 {
                let b = tridiagonal_system(&p, &g).unwrap();
                let id = b.matmul(&binv).unwrap();
                assert!(id.add_scaled(-1.0, &DenseMatrix::identity(steps + 1)).unwrap().max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kms_inverse_properties() {
        let (p, g) = setup(2, 0.0, 1.0, 50);
        let k = build_kernel(&p, &g).unwrap();
        let inv = inverse_gamma_zero(&g, &p).unwrap();
        let prod = k.gamma_zero.matmul(&inv).unwrap();
        assert!(prod.add_scaled(-1.0, &DenseMatrix::identity(51)).unwrap().max_abs() < 1e-12);
        let a = (-1.0_f64 / 50.0).exp();
        let row = inv.matvec(&vec![1.0; 51]).unwrap();
        let u = tridiagonal_rhs(a, 51);
        for (x, y) in row.iter().zip(&u) {
            assert!(((1.0 - a * a) * x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn single_precision_tracks_double() {
        let p32 = ModelParams::new(3, 1.0_f32, 1.0, 0.1, vec![1.0; 3]).unwrap();
        let g32 = GridSpec::equidistant(1.0_f32, 200).unwrap();
        let (p64, g64) = setup(3, 0.1, 1.0, 200);
        let a = nu_closed_form(&p32, &g32).unwrap();
        let b = nu_closed_form(&p64, &g64).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((*x as f64 - y).abs() < 1e-4 * y.abs().max(1.0));
        }
    }
}
