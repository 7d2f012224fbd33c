//! Model parameters, trading grids and grid-index arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Economic parameters of one game instance. The impact scale is fixed to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    /// Number of traders, at least 2.
    pub n: usize,
    /// Decay rate of transient impact (1/time).
    pub rho: T,
    /// Trading horizon.
    pub horizon: T,
    /// Instantaneous cost coefficient.
    pub theta: T,
    /// Initial inventories, one per trader (positive = shares to sell).
    pub inventories: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Builds and validates a parameter set.
    pub fn new(n: usize, rho: T, horizon: T, theta: T, inventories: Vec<T>) -> Result<Self> {
        validate_params(Self {
            n,
            rho,
            horizon,
            theta,
            inventories,
        })
    }

    /// `ρT`.
    pub fn rho_t(&self) -> T {
        self.rho * self.horizon
    }

    pub fn mean_inventory(&self) -> T {
        self.inventories.iter().copied().sum::<T>() / T::from_usize_exact(self.n)
    }

    /// Same parameters with a different instantaneous cost.
    pub fn with_theta(&self, theta: T) -> Result<Self> {
        validate_params(Self {
            theta,
            ..self.clone()
        })
    }

    /// Same parameters with a different number of traders; the inventories
    /// are replaced by `inventories`.
    pub fn with_traders(&self, n: usize, inventories: Vec<T>) -> Result<Self> {
        validate_params(Self {
            n,
            inventories,
            ..self.clone()
        })
    }
}

/// Returns `p` unchanged if every parameter invariant holds.
pub fn validate_params<T: Scalar>(p: ModelParams<T>) -> Result<ModelParams<T>> {
    if p.n < 2 {
        return Err(Error::Domain(format!("n ≥ 2 required (got n = {})", p.n)));
    }
    if !(p.rho > T::zero()) || !p.rho.is_finite() {
        return Err(Error::Domain(format!("ρ > 0 required (got ρ = {})", p.rho)));
    }
    if !(p.horizon > T::zero()) || !p.horizon.is_finite() {
        return Err(Error::Domain(format!("T > 0 required (got T = {})", p.horizon)));
    }
    if !(p.theta >= T::zero()) || !p.theta.is_finite() {
        return Err(Error::Domain(format!("θ ≥ 0 required (got θ = {})", p.theta)));
    }
    if p.inventories.len() != p.n {
        return Err(Error::Domain(format!(
            "inventories must have length n = {} (got {})",
            p.n,
            p.inventories.len()
        )));
    }
    if let Some(k) = p.inventories.iter().position(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("inventory x[{k}] is not finite")));
    }
    Ok(p)
}

/// Default cap on the number of grid steps for dense matrix construction.
pub const DEFAULT_MAX_STEPS: usize = 20_000;

/// Trading dates `0 = t_0 < t_1 < … < t_N = T`.
///
/// [`GridSpec::equidistant`] builds the grid `t_k = kT/N` used by the closed
/// form and all limit results. [`GridSpec::from_times`] accepts any strictly
/// increasing grid; only the dense solver supports those.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    times: Vec<T>,
    equidistant: bool,
}

impl<T: Scalar> GridSpec<T> {
    pub fn equidistant(horizon: T, steps: usize) -> Result<Self> {
        if steps < 1 {
            return Err(Error::Domain("N ≥ 1 required".into()));
        }
        if !(horizon > T::zero()) {
            return Err(Error::Domain(format!("T > 0 required (got T = {horizon})")));
        }
        let n = T::from_usize_exact(steps);
        let mut times: Vec<T> = (0..=steps)
            .map(|k| T::from_usize_exact(k) * horizon / n)
            .collect();
        times[steps] = horizon;
        Ok(Self {
            times,
            equidistant: true,
        })
    }

    /// A grid consisting of the single date `t_0 = 0` (`N = 0`). Useful only
    /// as the degenerate one-trade case of the dense solver.
    pub fn single_date() -> Self {
        Self {
            times: vec![T::zero()],
            equidistant: false,
        }
    }

    /// Arbitrary strictly increasing dates starting at 0.
    pub fn from_times(times: Vec<T>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Domain("a grid needs at least two dates".into()));
        }
        if times[0] != T::zero() {
            return Err(Error::Domain("grid must start at t_0 = 0".into()));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!(
                "grid dates must be strictly increasing (violated at index {})",
                k + 1
            )));
        }
        Ok(Self {
            times,
            equidistant: false,
        })
    }

    /// Number of steps `N`; the grid has `N + 1` dates.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dates(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn horizon(&self) -> T {
        self.times[self.times.len() - 1]
    }

    pub fn is_equidistant(&self) -> bool {
        self.equidistant
    }

    pub(crate) fn require_equidistant(&self) -> Result<()> {
        if self.equidistant {
            Ok(())
        } else {
            Err(Error::NonEquidistant)
        }
    }
}

/// Position of calendar time `t` on an equidistant grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridIndex<T> {
    /// `n_t = ⌈Nt/T⌉`.
    pub index: usize,
    /// `η_t = n_t − Nt/T ∈ [0, 1)`.
    pub eta: T,
}

/// `n_t = ⌈Nt/T⌉` and its fractional offset `η_t`.
///
/// `Nt/T` is snapped to the nearest integer when it lies within a relative
/// `1e-12` of it, so grid-aligned times map to their exact index.
pub fn grid_index<T: Scalar>(t: T, grid: &GridSpec<T>) -> Result<GridIndex<T>> {
    let horizon = grid.horizon();
    if !(t >= T::zero() && t <= horizon) {
        return Err(Error::OutOfRange(format!("t = {t} outside [0, {horizon}]")));
    }
    let steps = grid.steps();
    if grid.is_equidistant() {
        let scaled = T::from_usize_exact(steps) * t / horizon;
        let nearest = scaled.round();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) * nearest.max(T::one());
        let (index, eta) = if (scaled - nearest).abs() <= tol {
            (nearest, T::zero())
        } else {
            let c = scaled.ceil();
            (c, c - scaled)
        };
        let index = index.to_usize().unwrap_or(steps).min(steps);
        Ok(GridIndex { index, eta })
    } else {
        // First date at or after t.
        let times = grid.times();
        let index = times.partition_point(|&s| s < t);
        Ok(GridIndex {
            index: index.min(steps),
            eta: T::zero(),
        })
    }
}

/// Scalars derived from the parameters on an equidistant grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedScalars<T> {
    /// `α = exp(−ρT/N)`.
    pub alpha: T,
    /// `κ = 2θ + (n − 1)/2`.
    pub kappa: T,
    /// `κ̃ = 2θ + 1/2`.
    pub kappa_tilde: T,
    /// `κ̂ = n − 1`.
    pub kappa_hat: T,
    /// Mean initial inventory.
    pub xbar: T,
}

pub fn derived_scalars<T: Scalar>(p: &ModelParams<T>, grid: &GridSpec<T>) -> DerivedScalars<T> {
    let two = T::lit(2.0);
    let n = T::from_usize_exact(p.n);
    let steps = T::from_usize_exact(grid.steps());
    DerivedScalars {
        alpha: (-p.rho * grid.horizon() / steps).exp(),
        kappa: two * p.theta + (n - T::one()) / two,
        kappa_tilde: two * p.theta + T::lit(0.5),
        kappa_hat: n - T::one(),
        xbar: p.mean_inventory(),
    }
}
