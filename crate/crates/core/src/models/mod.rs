//! Catalog of class-(Sigma) processes and auxiliary positive martingales.
//!
//! Every sampler is a pure function of `(seed, grid, params)` and returns a
//! [`PathBundle`] holding the submartingale `X` and its increasing process
//! `A` on the grid.

mod brownian;
mod levy;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked in
use num_traits::Float;

use crate::engine::TimeGrid;
use crate::error::{Error, Result};

pub use brownian::{bridge_max, StoppedReflected};
pub use levy::{c_of_alpha, symmetric_stable, v_alpha, LevyModel};

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub grid: TimeGrid,
    /// The submartingale `X` at every grid point.
    pub x: Vec<f64>,
    /// The increasing process `A` at every grid point.
    pub a: Vec<f64>,
    /// Driving process (Brownian path, Levy path), when the model has one.
    pub aux: Option<Vec<f64>>,
    /// Exact infimum of `X` over each closed step `[t_k, t_{k+1}]`, for
    /// samplers that know it. Length `n_steps`.
    pub step_min: Option<Vec<f64>>,
    /// Exact supremum of `X` over each closed step. Length `n_steps`.
    pub step_max: Option<Vec<f64>>,
}

impl PathBundle {
    pub fn x_at(&self, t: f64) -> Result<f64> {
        Ok(self.x[self.grid.index_at(t)?])
    }

    pub fn a_at(&self, t: f64) -> Result<f64> {
        Ok(self.a[self.grid.index_at(t)?])
    }

    /// Martingale part `N = X - A` at grid index `k`.
    pub fn n_at(&self, k: usize) -> f64 {
        self.x[k] - self.a[k]
    }

    pub fn terminal_x(&self) -> f64 {
        self.x[self.grid.n_steps()]
    }

    /// Lowest value of `X` seen during step `k` (exact when the sampler
    /// provides step minima, otherwise the smaller endpoint).
    pub fn min_on_step(&self, k: usize) -> f64 {
        match &self.step_min {
            Some(m) => m[k],
            None => self.x[k].min(self.x[k + 1]),
        }
    }

    /// Highest value of `X` seen during step `k`.
    pub fn max_on_step(&self, k: usize) -> f64 {
        match &self.step_max {
            Some(m) => m[k],
            None => self.x[k].max(self.x[k + 1]),
        }
    }

    /// Checks the class-(Sigma) path invariants: `X >= 0`, `A` nondecreasing
    /// from 0, and every increase of `A` larger than `da_tol` happens on a
    /// step where `X` visits `[0, zero_band]`.
    pub fn validate(&self, check: &SupportCheck) -> core::result::Result<(), String> {
        let n = self.grid.n_points();
        if self.x.len() != n || self.a.len() != n {
            return Err(format!("expected {n} grid values, got x: {}, a: {}", self.x.len(), self.a.len()));
        }
        if self.a[0] != 0.0 {
            return Err(format!("A_0 = {} != 0", self.a[0]));
        }
        for k in 0..n {
            if !(self.x[k].is_finite() && self.x[k] >= 0.0) {
                return Err(format!("x[{k}] = {} is not a finite nonnegative value", self.x[k]));
            }
        }
        for k in 0..n - 1 {
            let da = self.a[k + 1] - self.a[k];
            if da < 0.0 {
                return Err(format!("A decreases on step {k}"));
            }
            if da > check.da_tol && self.min_on_step(k) > check.zero_band {
                return Err(format!(
                    "A increases by {da:e} on step {k} while X stays above the zero band ({})",
                    check.zero_band
                ));
            }
        }
        Ok(())
    }
}

/// Tolerances for the support condition of `dA` on `{X = 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportCheck {
    pub zero_band: f64,
    pub da_tol: f64,
}

impl SupportCheck {
    pub const DA_TOL: f64 = 1e-12;

    /// `zero_band = 2 sqrt(dt)`, `da_tol = 1e-12`.
    pub fn for_grid(grid: &TimeGrid) -> Self {
        Self { zero_band: 2.0 * grid.dt().sqrt(), da_tol: Self::DA_TOL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModelFlags {
    pub continuous_paths: bool,
    pub positive_jumps_only: bool,
    pub a_infinity_infinite: bool,
    pub class_d: bool,
    pub strictly_positive: bool,
}

impl ModelFlags {
    pub fn is_consistent(&self) -> bool {
        !(self.class_d && self.a_infinity_infinite) && !(self.strictly_positive && self.a_infinity_infinite)
    }
}

/// Named process generators.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaModel {
    /// `|W|` with its local time at 0, through `(S - B, S)`.
    ReflectedBm,
    /// Drawdown `S - M` of a Brownian motion `M`, `A = S`, `aux = M`.
    Drawdown,
    /// Reflected Brownian motion frozen once it reaches the barrier.
    StoppedReflected(StoppedReflected),
    /// `exp(W_t - t/2)`, used for the put / last-passage parity.
    ExpMartingale,
    /// `exp(W_t - t/2)` viewed as a strictly positive martingale.
    GeometricBm,
    /// `v(Y - x0)` for a symmetric alpha-stable Levy process `Y`.
    StableLevy(LevyModel),
}

impl SigmaModel {
    pub fn stopped_reflected(barrier: f64) -> Result<Self> {
        Ok(Self::StoppedReflected(StoppedReflected::new(barrier)?))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ReflectedBm => "reflected_bm",
            Self::Drawdown => "drawdown",
            Self::StoppedReflected(_) => "stopped_reflected",
            Self::ExpMartingale => "exp_martingale",
            Self::GeometricBm => "geometric_bm",
            Self::StableLevy(_) => "stable_levy",
        }
    }

    pub fn flags(&self) -> ModelFlags {
        match self {
            Self::ReflectedBm | Self::Drawdown => {
                ModelFlags { continuous_paths: true, a_infinity_infinite: true, ..ModelFlags::default() }
            }
            Self::StoppedReflected(_) => ModelFlags { continuous_paths: true, class_d: true, ..ModelFlags::default() },
            Self::ExpMartingale | Self::GeometricBm => {
                ModelFlags { continuous_paths: true, strictly_positive: true, ..ModelFlags::default() }
            }
            Self::StableLevy(_) => ModelFlags { a_infinity_infinite: true, ..ModelFlags::default() },
        }
    }

    /// `X_0`, deterministic for every model in the catalog.
    pub fn initial_x(&self) -> f64 {
        match self {
            Self::ExpMartingale | Self::GeometricBm => 1.0,
            Self::StableLevy(m) => m.v(-m.level),
            _ => 0.0,
        }
    }

    /// Band around 0 within which `X` counts as visiting zero on the grid.
    pub fn zero_band(&self, grid: &TimeGrid) -> f64 {
        match self {
            Self::StableLevy(m) => m.v(m.band(grid.dt())),
            _ => 2.0 * grid.dt().sqrt(),
        }
    }

    pub fn support_check(&self, grid: &TimeGrid) -> SupportCheck {
        SupportCheck { zero_band: self.zero_band(grid), da_tol: SupportCheck::DA_TOL }
    }

    pub fn sample(&self, seed: u64, grid: &TimeGrid) -> Result<PathBundle> {
        match self {
            Self::ReflectedBm => Ok(brownian::sample_reflected_bm(seed, grid)),
            Self::Drawdown => Ok(brownian::sample_drawdown(seed, grid)),
            Self::StoppedReflected(m) => Ok(m.sample(seed, grid)),
            Self::ExpMartingale => Ok(brownian::sample_exponential_martingale(seed, grid)),
            Self::GeometricBm => Ok(brownian::sample_geometric_bm(seed, grid)),
            Self::StableLevy(m) => Ok(m.sample(seed, grid)),
        }
    }

    pub fn require_a_infinite(&self) -> Result<()> {
        if self.flags().a_infinity_infinite {
            Ok(())
        } else {
            Err(Error::UnsupportedModel { model: self.name(), reason: "requires A_inf = inf almost surely" })
        }
    }
}

pub use brownian::{sample_drawdown, sample_exponential_martingale, sample_geometric_bm, sample_reflected_bm};
