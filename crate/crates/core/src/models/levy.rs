use alloc::vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // unused when std is linked in
use num_traits::Float;
use rand_distr::{Distribution, Exp1, Open01};

use super::PathBundle;
use crate::engine::{path_rng, PathRng, TimeGrid};
use crate::error::{Error, Result};
use crate::pathfunc::occupation_curve;
use crate::quad::{cosine_tail, integrate, Tolerance};

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(alloc::format!("stability index must lie in (1, 2), got {alpha}")))
    }
}

/// `c(alpha) = (1/pi) int_0^inf (1 - cos u) / u^alpha du`, so that
/// `v(x) = c(alpha) |x|^(alpha - 1)` for `Psi(xi) = |xi|^alpha`.
///
/// The integral is split at `L = (m + 1/2) pi`: `[0, L]` by adaptive
/// Gauss-Kronrod (with `1 - cos u = 2 sin^2(u/2)`), `int_L^inf u^-alpha` in
/// closed form, and the cosine tail as an accelerated alternating series.
pub fn c_of_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    const HALF_PERIODS: usize = 16;
    let tol = Tolerance { abs: 1e-15, rel: 1e-13, max_intervals: 4000 };
    let big_l = (HALF_PERIODS as f64 + 0.5) * PI;
    let head = integrate(
        |u| {
            if u <= 0.0 {
                0.0
            } else {
                let s = (0.5 * u).sin();
                2.0 * s * s * u.powf(-alpha)
            }
        },
        0.0,
        big_l,
        tol,
    )?;
    let power_tail = big_l.powf(1.0 - alpha) / (alpha - 1.0);
    let cos_tail = cosine_tail(|u| u.powf(-alpha), HALF_PERIODS, tol)?;
    let total = head.value + power_tail - cos_tail.value;
    let err = head.abs_err + cos_tail.abs_err;
    if !(total.is_finite() && total > 0.0) || err > 1e-9 * total {
        return Err(Error::Quadrature {
            reason: "c(alpha) integral not resolved to 1e-9 relative accuracy",
            estimate: total,
            abs_err: err,
            intervals: head.intervals + cos_tail.intervals,
        });
    }
    Ok(total / PI)
}

/// `v(x) = (1/pi) int_0^inf (1 - cos(xi x)) / |xi|^alpha dxi`.
pub fn v_alpha(x: f64, alpha: f64) -> Result<f64> {
    Ok(c_of_alpha(alpha)? * x.abs().powf(alpha - 1.0))
}

/// Chambers-Mallows-Stuck draw of a standard symmetric alpha-stable
/// variable, characteristic function `exp(-|xi|^alpha)`.
pub fn symmetric_stable(rng: &mut PathRng, alpha: f64) -> f64 {
    let u: f64 = Open01.sample(rng);
    let w: f64 = Exp1.sample(rng);
    let v = PI * (u - 0.5);
    let head = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    head * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// `X = v(Y - level)` for a symmetric alpha-stable process `Y` started at 0,
/// with `A` the occupation-density estimate of the local time of `Y` at
/// `level`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    pub alpha: f64,
    pub level: f64,
    pub c_alpha: f64,
    /// Occupation band half-width in units of the step scale `dt^(1/alpha)`.
    pub band_mult: f64,
    /// Multiplier on the occupation-density normalization `1 / (2 band)`.
    pub occupation_scale: f64,
}

impl LevyModel {
    pub const DEFAULT_BAND_MULT: f64 = 2.0;

    pub fn new(alpha: f64, level: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !level.is_finite() {
            return Err(Error::InvalidParameter("level must be finite".into()));
        }
        Ok(Self {
            alpha,
            level,
            c_alpha: c_of_alpha(alpha)?,
            band_mult: Self::DEFAULT_BAND_MULT,
            occupation_scale: 1.0,
        })
    }

    pub fn with_band_mult(mut self, band_mult: f64) -> Result<Self> {
        if !(band_mult.is_finite() && band_mult > 0.0) {
            return Err(Error::InvalidParameter("band multiplier must be > 0".into()));
        }
        self.band_mult = band_mult;
        Ok(self)
    }

    pub fn with_occupation_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter("occupation scale must be > 0".into()));
        }
        self.occupation_scale = scale;
        Ok(self)
    }

    pub fn v(&self, x: f64) -> f64 {
        self.c_alpha * x.abs().powf(self.alpha - 1.0)
    }

    /// Typical size of one increment of `Y` over `dt`.
    pub fn step_scale(&self, dt: f64) -> f64 {
        dt.powf(1.0 / self.alpha)
    }

    pub fn band(&self, dt: f64) -> f64 {
        self.band_mult * self.step_scale(dt)
    }

    pub fn sample(&self, seed: u64, grid: &TimeGrid) -> PathBundle {
        let n = grid.n_steps();
        let scale = self.step_scale(grid.dt());
        let mut rng = path_rng(seed);
        let mut y = vec![0.0; n + 1];
        for k in 0..n {
            y[k + 1] = y[k] + scale * symmetric_stable(&mut rng, self.alpha);
        }
        let x = y.iter().map(|&v| self.v(v - self.level)).collect();
        let band = self.band(grid.dt());
        let a = occupation_curve(&y, grid.dt(), self.level, band, self.occupation_scale / (2.0 * band));
        PathBundle { grid: *grid, x, a, aux: Some(y), step_min: None, step_max: None }
    }
}
