//! Weight functions `f` with closed-form tail integrals `G(x) = int_x^inf f`.

#[allow(unused_imports)] // unused when std is linked in
use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightFn {
    /// `f(x) = exp(-rate x)`.
    Exp { rate: f64 },
    /// `f(x) = 1` on `[0, width]`, 0 beyond.
    Indicator { width: f64 },
    /// `f(x) = (1 + x)^-2`.
    InverseSquare,
    /// `f(x) = value` everywhere; integrable only when `value = 0`.
    Constant { value: f64 },
}

impl WeightFn {
    pub const EXP: WeightFn = WeightFn::Exp { rate: 1.0 };

    pub fn exp(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("rate must be > 0, got {rate}")));
        }
        Ok(Self::Exp { rate })
    }

    pub fn indicator(width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("width must be > 0, got {width}")));
        }
        Ok(Self::Indicator { width })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exp { .. } => "exp",
            Self::Indicator { .. } => "indicator",
            Self::InverseSquare => "inv_square",
            Self::Constant { .. } => "constant",
        }
    }

    pub fn f(&self, x: f64) -> f64 {
        match *self {
            Self::Exp { rate } => (-rate * x).exp(),
            Self::Indicator { width } => {
                if (0.0..=width).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::InverseSquare => 1.0 / ((1.0 + x) * (1.0 + x)),
            Self::Constant { value } => value,
        }
    }

    /// `G(x) = int_x^inf f(y) dy` for `x >= 0`.
    pub fn tail(&self, x: f64) -> f64 {
        match *self {
            Self::Exp { rate } => (-rate * x).exp() / rate,
            Self::Indicator { width } => (width - x).max(0.0),
            Self::InverseSquare => 1.0 / (1.0 + x),
            Self::Constant { value } => {
                if value == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `G(0)`.
    pub fn total(&self) -> f64 {
        self.tail(0.0)
    }

    pub fn is_integrable(&self) -> bool {
        self.total().is_finite()
    }

    /// Whether `G / f` stays bounded on `[0, inf)`.
    pub fn bounded_ratio(&self) -> bool {
        matches!(self, Self::Exp { .. })
    }

    pub fn strictly_positive(&self) -> bool {
        match *self {
            Self::Exp { .. } | Self::InverseSquare => true,
            Self::Indicator { .. } => false,
            Self::Constant { value } => value > 0.0,
        }
    }

    /// `G(a) + f(a) x`, the value of the `M^f` martingale when `A_inf = inf`.
    pub fn mf(&self, a: f64, x: f64) -> f64 {
        self.tail(a) + self.f(a) * x
    }
}
