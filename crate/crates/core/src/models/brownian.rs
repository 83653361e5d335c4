use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked in
use num_traits::Float;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};

use super::PathBundle;
use crate::engine::{path_rng, PathRng, TimeGrid};
use crate::error::{Error, Result};

/// Maximum of a Brownian bridge from `y0` to `y1` over a step of length
/// `dt`, given an `Exp(1)` variate: inverts
/// `P[max > m] = exp(-2 (m - y0)(m - y1) / dt)`.
#[inline]
pub fn bridge_max(y0: f64, y1: f64, dt: f64, exp1: f64) -> f64 {
    let d = y1 - y0;
    0.5 * (y0 + y1 + (d * d + 2.0 * dt * exp1).sqrt())
}

struct LevyPair {
    x: Vec<f64>,
    a: Vec<f64>,
    step_min: Vec<f64>,
    b: Option<Vec<f64>>,
}

/// Brownian motion `B` on the grid together with its running supremum `S`,
/// where `S` includes the exact bridge maximum inside every step. Then
/// `(S - B, S)` has the joint law of `(|W|, L^0(W))` at every grid time, and
/// `S - B` hits zero inside a step exactly when `S` grows on it.
fn levy_pair(rng: &mut PathRng, grid: &TimeGrid, keep_driver: bool) -> LevyPair {
    let n = grid.n_steps();
    let dt = grid.dt();
    let sd = dt.sqrt();
    let mut x = vec![0.0; n + 1];
    let mut a = vec![0.0; n + 1];
    let mut step_min = vec![0.0; n];
    let mut driver = if keep_driver { Some(vec![0.0; n + 1]) } else { None };
    let (mut b, mut s) = (0.0_f64, 0.0_f64);
    for k in 0..n {
        let z: f64 = StandardNormal.sample(rng);
        let e: f64 = Exp1.sample(rng);
        let b1 = b + sd * z;
        let m = bridge_max(b, b1, dt, e);
        if m > s {
            step_min[k] = 0.0;
            s = m;
        } else {
            step_min[k] = s - m;
        }
        b = b1;
        x[k + 1] = s - b;
        a[k + 1] = s;
        if let Some(d) = driver.as_mut() {
            d[k + 1] = b;
        }
    }
    LevyPair { x, a, step_min, b: driver }
}

/// Reflected Brownian motion `X = S - B` with local time `A = S`.
pub fn sample_reflected_bm(seed: u64, grid: &TimeGrid) -> PathBundle {
    let mut rng = path_rng(seed);
    let p = levy_pair(&mut rng, grid, false);
    PathBundle { grid: *grid, x: p.x, a: p.a, aux: None, step_min: Some(p.step_min), step_max: None }
}

/// Drawdown of a Brownian motion `M` from its running supremum; `aux = M`.
pub fn sample_drawdown(seed: u64, grid: &TimeGrid) -> PathBundle {
    let mut rng = path_rng(seed);
    let p = levy_pair(&mut rng, grid, true);
    PathBundle { grid: *grid, x: p.x, a: p.a, aux: p.b, step_min: Some(p.step_min), step_max: None }
}

/// `exp(W_t - t/2)` with exact per-step maxima. `A = 0`.
pub fn sample_exponential_martingale(seed: u64, grid: &TimeGrid) -> PathBundle {
    let mut rng = path_rng(seed);
    let n = grid.n_steps();
    let dt = grid.dt();
    let sd = dt.sqrt();
    let mut x = vec![1.0; n + 1];
    let mut step_max = vec![1.0; n];
    let mut y = 0.0_f64;
    for k in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = Exp1.sample(&mut rng);
        let y1 = y + sd * z - 0.5 * dt;
        // the bridge of a drifted Brownian motion does not depend on the drift
        step_max[k] = bridge_max(y, y1, dt, e).exp();
        y = y1;
        x[k + 1] = y.exp();
    }
    PathBundle { grid: *grid, x, a: vec![0.0; n + 1], aux: None, step_min: None, step_max: Some(step_max) }
}

pub fn sample_geometric_bm(seed: u64, grid: &TimeGrid) -> PathBundle {
    sample_exponential_martingale(seed, grid)
}

/// Reflected Brownian motion stopped when it reaches `barrier`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppedReflected {
    pub barrier: f64,
}

impl StoppedReflected {
    pub fn new(barrier: f64) -> Result<Self> {
        if !(barrier.is_finite() && barrier > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("barrier must be > 0, got {barrier}")));
        }
        Ok(Self { barrier })
    }

    /// Survival probability of the hitting time of `b` by `|W|` beyond `t`
    /// is about `(4/pi) exp(-pi^2 t / (8 b^2))`; below `t = 3 b^2` more than
    /// a few percent of the paths are still running at the horizon.
    pub fn horizon_is_short(&self, grid: &TimeGrid) -> bool {
        grid.t_end() < 3.0 * self.barrier * self.barrier
    }

    /// Runs the `(S - B, S)` construction and freezes `X` at the barrier at
    /// the end of the first step on which it reaches `barrier`. Crossings
    /// strictly inside a step are detected with the Brownian bridge
    /// probability `exp(-2 (b - X_k)(b - X_{k+1}) / dt)`.
    pub fn sample(&self, seed: u64, grid: &TimeGrid) -> PathBundle {
        let b_lvl = self.barrier;
        let n = grid.n_steps();
        let dt = grid.dt();
        let sd = dt.sqrt();
        let mut rng = path_rng(seed);
        let mut x = vec![0.0; n + 1];
        let mut a = vec![0.0; n + 1];
        let mut step_min = vec![0.0; n];
        let (mut b, mut s) = (0.0_f64, 0.0_f64);
        let mut frozen_from = None;
        for k in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let e: f64 = Exp1.sample(&mut rng);
            let u: f64 = Open01.sample(&mut rng);
            let b1 = b + sd * z;
            let m = bridge_max(b, b1, dt, e);
            let x0 = s - b;
            let mut hit = false;
            if m > s {
                step_min[k] = 0.0;
                s = m;
            } else {
                step_min[k] = s - m;
                let x1 = s - b1;
                hit = x1 >= b_lvl || u < (-2.0 * (b_lvl - x0) * (b_lvl - x1) / dt).exp();
            }
            b = b1;
            x[k + 1] = s - b;
            a[k + 1] = s;
            if hit || x[k + 1] >= b_lvl {
                frozen_from = Some(k + 1);
                break;
            }
        }
        if let Some(j) = frozen_from {
            let a_stop = a[j];
            x[j..].fill(b_lvl);
            a[j..].fill(a_stop);
            step_min[j..].fill(b_lvl);
        }
        PathBundle { grid: *grid, x, a, aux: None, step_min: Some(step_min), step_max: None }
    }
}
