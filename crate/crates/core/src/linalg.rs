//! Small dense linear algebra kernel: row-major matrices, LU with partial
//! pivoting, and a Cholesky-based positivity test.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn diagonal(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self + s * other`, elementwise.
    pub fn add_scaled(&self, s: T, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + s * b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| dot(self.row(i), x))
            .collect())
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[T], y: &[T]) -> Result<T> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: x.len(),
            });
        }
        let ay = self.matvec(y)?;
        Ok(dot(x, &ay))
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &a| acc.max(a.abs()))
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().fold(T::zero(), |s, &a| s + a.abs()))
            .fold(T::zero(), T::max)
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetric_part(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let half = T::lit(0.5);
        Ok(Self::from_fn(self.rows, self.cols, |i, j| {
            half * (self[(i, j)] + self[(j, i)])
        }))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: other.rows,
            });
        }
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.cols,
            });
        }
        Ok(())
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

pub fn norm_inf<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, &a| acc.max(a.abs()))
}

/// LU factorization `PA = LU` with partial (row) pivoting.
#[derive(Debug, Clone)]
pub struct LuFactorization<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
    swaps: usize,
}

impl<T: Scalar> LuFactorization<T> {
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.rows,
                found: a.cols,
            });
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;

        // Right-looking LU in panels of PANEL columns: the panel is factored
        // unblocked, then the trailing rows receive one fused rank-PANEL update.
        let mut k0 = 0;
        while k0 < n {
            let kb = PANEL.min(n - k0);
            let k_end = k0 + kb;
            for j in k0..k_end {
                let (p, pivot_abs) = (j..n)
                    .map(|i| (i, lu[(i, j)].abs()))
                    .fold((j, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
                if pivot_abs == T::zero() || !pivot_abs.is_finite() {
                    return Err(Error::Singular {
                        column: j,
                        pivot: pivot_abs.to_f64_lossy(),
                    });
                }
                if p != j {
                    swap_rows(&mut lu, p, j);
                    perm.swap(p, j);
                    swaps += 1;
                }
                let (upper, lower) = lu.data.split_at_mut((j + 1) * n);
                let pivot_row = &upper[j * n..(j + 1) * n];
                let pivot = pivot_row[j];
                for row in lower.chunks_exact_mut(n) {
                    let factor = row[j] / pivot;
                    row[j] = factor;
                    for c in j + 1..k_end {
                        row[c] = row[c] - factor * pivot_row[c];
                    }
                }
            }
            if k_end < n {
                // U12: forward substitution with the unit lower panel block.
                for j in k0..k_end {
                    let (upper, lower) = lu.data.split_at_mut((j + 1) * n);
                    let src = &upper[j * n + k_end..(j + 1) * n];
                    for r in 0..(k_end - j - 1) {
                        let row = &mut lower[r * n..(r + 1) * n];
                        let factor = row[j];
                        for (x, &u) in row[k_end..].iter_mut().zip(src) {
                            *x = *x - factor * u;
                        }
                    }
                }
                let (upper, lower) = lu.data.split_at_mut(k_end * n);
                let panel_rows: Vec<&[T]> = (k0..k_end)
                    .map(|j| &upper[j * n + k_end..(j + 1) * n])
                    .collect();
                for row in lower.chunks_exact_mut(n) {
                    let (head, tail) = row.split_at_mut(k_end);
                    trailing_update(&head[k0..k_end], &panel_rows, tail);
                }
            }
            k0 = k_end;
        }
        Ok(Self { lu, perm, swaps })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] = x[i] - s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s = dot(&row[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }

    pub fn determinant(&self) -> T {
        let diag = (0..self.dim()).fold(T::one(), |acc, i| acc * self.lu[(i, i)]);
        if self.swaps % 2 == 1 {
            -diag
        } else {
            diag
        }
    }

    pub fn inverse(&self) -> Result<DenseMatrix<T>> {
        let n = self.dim();
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e)?;
            for (i, &c) in col.iter().enumerate() {
                inv[(i, j)] = c;
            }
        }
        Ok(inv)
    }
}

const PANEL: usize = 8;

#[inline]
fn trailing_update<T: Scalar>(factors: &[T], panel: &[&[T]], tail: &mut [T]) {
    if let ([l0, l1, l2, l3, l4, l5, l6, l7], [u0, u1, u2, u3, u4, u5, u6, u7]) = (factors, panel) {
        let (l0, l1, l2, l3) = (*l0, *l1, *l2, *l3);
        let (l4, l5, l6, l7) = (*l4, *l5, *l6, *l7);
        let m = tail.len();
        let (u0, u1, u2, u3) = (&u0[..m], &u1[..m], &u2[..m], &u3[..m]);
        let (u4, u5, u6, u7) = (&u4[..m], &u5[..m], &u6[..m], &u7[..m]);
        for k in 0..m {
            let x = &mut tail[k];
            let lo = l0 * u0[k] + l1 * u1[k] + l2 * u2[k] + l3 * u3[k];
            let hi = l4 * u4[k] + l5 * u5[k] + l6 * u6[k] + l7 * u7[k];
            *x = *x - (lo + hi);
        }
    } else if let ([l0, l1, l2, l3], [u0, u1, u2, u3]) = (factors, panel) {
        let (l0, l1, l2, l3) = (*l0, *l1, *l2, *l3);
        for ((((x, &a), &b), &c), &d) in tail.iter_mut().zip(*u0).zip(*u1).zip(*u2).zip(*u3) {
            *x = *x - l0 * a - l1 * b - l2 * c - l3 * d;
        }
    } else {
        for (&l, u) in factors.iter().zip(panel) {
            for (x, &a) in tail.iter_mut().zip(*u) {
                *x = *x - l * a;
            }
        }
    }
}

fn swap_rows<T: Scalar>(m: &mut DenseMatrix<T>, a: usize, b: usize) {
    let n = m.cols;
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let (first, second) = m.data.split_at_mut(hi * n);
    first[lo * n..(lo + 1) * n].swap_with_slice(&mut second[..n]);
}

/// Solution of a dense system together with its relative residual
/// `‖Ax − b‖∞ / (‖A‖∞‖x‖∞ + ‖b‖∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSolution<T> {
    pub x: Vec<T>,
    pub relative_residual: T,
}

pub fn solve_linear<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<DenseSolution<T>> {
    let x = LuFactorization::factor(a)?.solve(b)?;
    let relative_residual = relative_residual(a, &x, b)?;
    Ok(DenseSolution {
        x,
        relative_residual,
    })
}

pub fn relative_residual<T: Scalar>(a: &DenseMatrix<T>, x: &[T], b: &[T]) -> Result<T> {
    let ax = a.matvec(x)?;
    let r = ax
        .iter()
        .zip(b)
        .fold(T::zero(), |acc, (&u, &v)| acc.max((u - v).abs()));
    let scale = a.norm_inf() * norm_inf(x) + norm_inf(b);
    Ok(if scale > T::zero() { r / scale } else { r })
}

/// Attempts a Cholesky factorization of a symmetric matrix; `true` iff it
/// is positive definite to working precision.
pub fn cholesky_succeeds<T: Scalar>(a: &DenseMatrix<T>) -> bool {
    if !a.is_square() {
        return false;
    }
    let n = a.rows;
    let mut l = DenseMatrix::<T>::zeros(n, n);
    for j in 0..n {
        let lj = l.row(j);
        let d = a[(j, j)] - dot(&lj[..j], &lj[..j]);
        if !(d > T::zero()) || !d.is_finite() {
            return false;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let s = dot(&l.row(i)[..j], &l.row(j)[..j]);
            l[(i, j)] = (a[(i, j)] - s) / djj;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample() -> DenseMatrix<f64> {
        DenseMatrix::from_rows(&[
            vec![2.0, 1.0, 1.0],
            vec![4.0, -6.0, 0.0],
            vec![-2.0, 7.0, 2.0],
        ])
        .unwrap()
    }

    #[test]
    fn lu_solves_small_system() {
        let a = sample();
        let sol = solve_linear(&a, &[5.0, -2.0, 9.0]).unwrap();
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.x[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.x[2], 2.0, epsilon = 1e-14);
        assert!(sol.relative_residual < 1e-15);
    }

    #[test]
    fn identity_system_returns_rhs() {
        let sol = solve_linear(&DenseMatrix::<f64>::identity(4), &[1.0; 4]).unwrap();
        assert_eq!(sol.x, vec![1.0; 4]);
    }

    #[test]
    fn determinant_tracks_row_swaps() {
        let lu = LuFactorization::factor(&sample()).unwrap();
        assert_abs_diff_eq!(lu.determinant(), -16.0, epsilon = 1e-12);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = sample();
        let inv = LuFactorization::factor(&a).unwrap().inverse().unwrap();
        let prod = a.matmul(&inv).unwrap();
        let err = prod.add_scaled(-1.0, &DenseMatrix::identity(3)).unwrap().max_abs();
        assert!(err < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(
            LuFactorization::factor(&a),
            Err(Error::Singular { column: 1, .. })
        ));
    }

    #[test]
    fn cholesky_detects_definiteness() {
        assert!(cholesky_succeeds(&DenseMatrix::<f64>::identity(3)));
        assert!(!cholesky_succeeds(&DenseMatrix::<f64>::identity(3).scaled(-1.0)));
        let indefinite = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(!cholesky_succeeds(&indefinite));
    }

    #[test]
    fn blocked_factorization_on_ragged_sizes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 5, 8, 9, 17, 63, 130] {
            let a = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos()).collect();
            let b = a.matvec(&x).unwrap();
            let sol = solve_linear(&a, &b).unwrap();
            assert!(sol.relative_residual < 1e-14, "n={n}");
            let inv = LuFactorization::factor(&a).unwrap().inverse().unwrap();
            let prod = a.matmul(&inv).unwrap();
            let err = prod.add_scaled(-1.0, &DenseMatrix::identity(n)).unwrap().max_abs();
            assert!(err < 1e-10, "n={n}: {err}");
        }
    }
}
