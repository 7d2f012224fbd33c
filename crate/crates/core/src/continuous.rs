//! Continuous-time equilibrium: inventory profiles `f`, `g` and the
//! impact / block cost constants.
//!
//! The profiles and costs involve `E(s) = exp(ρ(n+1)s/(n−1))`. All formulas
//! are evaluated after dividing through by the largest power of `E(T)` so
//! that nothing overflows inside the admitted parameter range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Scalar;

/// Largest admitted exponent `ρT(n+1)/(n−1)`.
pub const MAX_EXPONENT: f64 = 700.0;

/// Which value to report at a jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// Value at `t` (post-jump).
    #[default]
    At,
    /// Left limit `t⁻`; at `t = 0` this is the initial value 1.
    Left,
}

/// Per-agent continuous-time cost decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousCost<T> {
    /// `𝓘`.
    pub impact: T,
    /// `𝓑₀`.
    pub block_initial: T,
    /// `𝓑_T`.
    pub block_terminal: T,
    pub total: T,
}

/// Continuous-time reference for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousLimit<T> {
    params: ModelParams<T>,
    /// `ρ(n+1)/(n−1)`.
    growth: T,
    /// Block-cost coefficient at `t = 0`, `(n−1)/2`.
    pub theta0: T,
    /// Block-cost coefficient at `t = T`, `1/2`.
    pub theta_t: T,
}

impl<T: Scalar> ContinuousLimit<T> {
    pub fn new(p: &ModelParams<T>) -> Result<Self> {
        let n = T::from_usize_exact(p.n);
        let one = T::one();
        let growth = p.rho * (n + one) / (n - one);
        let exponent = growth * p.horizon;
        if !(exponent <= T::lit(MAX_EXPONENT)) {
            return Err(Error::Overflow(format!(
                "ρT(n+1)/(n−1) = {exponent} exceeds {MAX_EXPONENT}"
            )));
        }
        Ok(Self {
            params: p.clone(),
            growth,
            theta0: (n - one) / T::lit(2.0),
            theta_t: T::lit(0.5),
        })
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    fn check_time(&self, t: T) -> Result<()> {
        let horizon = self.params.horizon;
        if !(t >= T::zero() && t <= horizon) {
            return Err(Error::OutOfRange(format!("t = {t} outside [0, {horizon}]")));
        }
        Ok(())
    }

    /// `f(t) = (ρ(T−t)+1)/(ρT+1)` on `[0,T)`, `f(T) = 0`.
    pub fn f(&self, t: T, side: Side) -> Result<T> {
        self.check_time(t)?;
        let p = &self.params;
        if t == p.horizon && side == Side::At {
            return Ok(T::zero());
        }
        Ok((p.rho * (p.horizon - t) + T::one()) / (p.rho_t() + T::one()))
    }

    /// `g(t)` on `[0,T]`; the left limit at `0` is 1.
    pub fn g(&self, t: T, side: Side) -> Result<T> {
        self.check_time(t)?;
        if t == T::zero() && side == Side::Left {
            return Ok(T::one());
        }
        let p = &self.params;
        let one = T::one();
        let n = T::from_usize_exact(p.n);
        let inv_e = (-self.growth * p.horizon).exp();
        let rel = (self.growth * (t - p.horizon)).exp();
        let num = n * (p.rho * t + one) * (n + one) + T::lit(2.0) * n * rel - (n - one) * inv_e;
        Ok(one - num / self.scaled_den())
    }

    /// `[n((ρT+1)(n+1)+2)E(T) − (n−1)] / E(T)`.
    fn scaled_den(&self) -> T {
        let p = &self.params;
        let one = T::one();
        let n = T::from_usize_exact(p.n);
        let inv_e = (-self.growth * p.horizon).exp();
        n * ((p.rho_t() + one) * (n + one) + T::lit(2.0)) - (n - one) * inv_e
    }

    /// `X*_t = f(t)(x_i − x̄) + g(t)x̄` for agent `i` (0-based).
    pub fn inventory(&self, i: usize, t: T, side: Side) -> Result<T> {
        let xi = self.inventory_of(i)?;
        let xbar = self.params.mean_inventory();
        Ok(self.f(t, side)? * (xi - xbar) + self.g(t, side)? * xbar)
    }

    fn inventory_of(&self, i: usize) -> Result<T> {
        self.params
            .inventories
            .get(i)
            .copied()
            .ok_or_else(|| Error::OutOfRange(format!("agent index {i} with {} agents", self.params.n)))
    }

    /// `𝓘`, `𝓑₀`, `𝓑_T` and their sum for agent `i` (0-based).
    pub fn cost(&self, i: usize) -> Result<ContinuousCost<T>> {
        let p = &self.params;
        let xi = self.inventory_of(i)?;
        let xbar = p.mean_inventory();
        let dev = xi - xbar;
        let one = T::one();
        let two = T::lit(2.0);
        let quarter = T::lit(0.25);
        let n = T::from_usize_exact(p.n);
        let rt = p.rho_t();
        let inv_e = (-self.growth * p.horizon).exp();
        let den = self.scaled_den();

        let bracket = ((rt + T::lit(0.5)) * (n + one) + T::lit(3.0))
            - two * (n - one) / (n * n) * (n * inv_e + quarter * inv_e * inv_e);
        let impact = n / (rt + one) * xbar * dev + xbar * xbar * n * n * n * (n + one) * bracket / (den * den);
        let lead = inv_e + n;
        let block_initial = (n - one) * (n + one) * (n + one) * lead * lead * xbar * xbar / (T::lit(4.0) * den * den);
        let block_terminal = dev * dev / (T::lit(4.0) * (rt + one) * (rt + one));
        Ok(ContinuousCost {
            impact,
            block_initial,
            block_terminal,
            total: impact + block_initial + block_terminal,
        })
    }
}

pub fn eval_f<T: Scalar>(t: T, p: &ModelParams<T>, side: Side) -> Result<T> {
    ContinuousLimit::new(p)?.f(t, side)
}

pub fn eval_g<T: Scalar>(t: T, p: &ModelParams<T>, side: Side) -> Result<T> {
    ContinuousLimit::new(p)?.g(t, side)
}

pub fn continuous_inventory<T: Scalar>(i: usize, t: T, p: &ModelParams<T>, side: Side) -> Result<T> {
    ContinuousLimit::new(p)?.inventory(i, t, side)
}

pub fn continuous_cost<T: Scalar>(i: usize, p: &ModelParams<T>) -> Result<ContinuousCost<T>> {
    ContinuousLimit::new(p)?.cost(i)
}

/// `W_T` limit `1/((2θ+½)(ρT+1))`.
pub fn terminal_w_limit<T: Scalar>(p: &ModelParams<T>) -> T {
    T::one() / ((T::lit(2.0) * p.theta + T::lit(0.5)) * (p.rho_t() + T::one()))
}
