//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the library can run on: `f32` or `f64`.
///
/// All tolerances quoted in the documentation assume `f64`; `f32` runs are
/// supported for the closed forms and continuous limits but lose roughly
/// eight digits.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the target type cannot
    /// represent finite `f64` values at all, which never happens for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("scalar conversion from f64")
    }

    #[inline]
    fn from_usize_exact(k: usize) -> Self {
        Self::from_usize(k).expect("scalar conversion from usize")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `base^k` with the sign of negative bases resolved by the parity of `k`.
///
/// `powi` already does this for most inputs; the explicit split keeps the
/// result exact in sign for the alternating ratios that appear when the
/// instantaneous cost vanishes.
#[inline]
pub(crate) fn signed_pow<T: Scalar>(base: T, k: usize) -> T {
    let magnitude = pow_abs(base.abs(), k);
    if base < T::zero() && k % 2 == 1 {
        -magnitude
    } else {
        magnitude
    }
}

#[inline]
fn pow_abs<T: Scalar>(base: T, k: usize) -> T {
    match i32::try_from(k) {
        Ok(e) => base.powi(e),
        Err(_) => base.powf(T::from_usize_exact(k)),
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<T: Scalar, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut sum = T::zero();
    let mut carry = T::zero();
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry = carry + ((sum - t) + x);
        } else {
            carry = carry + ((x - t) + sum);
        }
        sum = t;
    }
    sum + carry
}
