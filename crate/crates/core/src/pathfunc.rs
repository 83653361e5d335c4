//! Path functionals: last passages, local-time estimators, class (C)
//! penalisation weights.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked in
use num_traits::Float;

use crate::engine::{Engine, TimeGrid};
use crate::error::{Error, Result};
use crate::models::{PathBundle, SigmaModel};
use crate::weight::WeightFn;

/// Last-passage and first-return times on one path; `None` stands for the
/// `+inf` sentinel (no visit on the simulated horizon).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LastPassage {
    /// Last visit of zero.
    pub g: Option<f64>,
    /// Last visit of `[0, a]`.
    pub g_a: Option<f64>,
    /// First visit of `[0, a]` strictly after `t`.
    pub d_t_a: Option<f64>,
}

/// Visit threshold on grid points: level `0` is widened to the zero band.
fn point_threshold(level: f64, zero_band: f64) -> f64 {
    if level == 0.0 {
        level + zero_band
    } else {
        level
    }
}

/// Grid index at which the last visit of `[0, level]` is registered.
///
/// Paths carrying exact step minima are scanned step by step and a visit on
/// step `k` registers at `k + 1`; other paths are scanned point by point
/// with the zero band applied at level 0.
pub fn last_visit_index(path: &PathBundle, level: f64, zero_band: f64) -> Option<usize> {
    match &path.step_min {
        Some(m) => m.iter().rposition(|&v| v <= level).map(|k| k + 1),
        None => {
            let thr = point_threshold(level, zero_band);
            path.x.iter().rposition(|&v| v <= thr)
        }
    }
}

/// Grid index at which the first visit of `[0, level]` after grid index `k_t`
/// is registered. A path survives to `k_u` iff the result is `None` or `> k_u`.
pub fn first_return_index(path: &PathBundle, level: f64, zero_band: f64, k_t: usize) -> Option<usize> {
    match &path.step_min {
        Some(m) => m[k_t.min(m.len())..].iter().position(|&v| v <= level).map(|j| k_t + j + 1),
        None => {
            let thr = point_threshold(level, zero_band);
            path.x[k_t + 1..].iter().position(|&v| v <= thr).map(|j| k_t + 1 + j)
        }
    }
}

pub fn detect_last_passage(path: &PathBundle, level: f64, zero_band: f64, t: f64) -> Result<LastPassage> {
    if !(zero_band >= 0.0) || !(level >= 0.0) {
        return Err(Error::InvalidParameter(format!("level and zero band must be >= 0, got {level} and {zero_band}")));
    }
    let k_t = path.grid.index_at(t)?;
    let time = |k: usize| path.grid.time(k);
    Ok(LastPassage {
        g: last_visit_index(path, 0.0, zero_band).map(time),
        g_a: last_visit_index(path, level, zero_band).map(time),
        d_t_a: first_return_index(path, level, zero_band, k_t).map(time),
    })
}

/// Which coordinate of a path an estimator reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    X,
    Aux,
}

fn coordinate(path: &PathBundle, c: Coordinate) -> Result<&[f64]> {
    match c {
        Coordinate::X => Ok(&path.x),
        Coordinate::Aux => {
            path.aux.as_deref().ok_or_else(|| Error::InvalidParameter("path has no auxiliary coordinate".into()))
        }
    }
}

/// Left-point occupation curve `kappa * sum_{j < k} 1{|v_j - level| <= band} dt`.
pub fn occupation_curve(values: &[f64], dt: f64, level: f64, band: f64, kappa: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let inc = kappa * dt;
    let mut count = 0usize;
    for k in 1..values.len() {
        if (values[k - 1] - level).abs() <= band {
            count += 1;
        }
        out[k] = count as f64 * inc;
    }
    out
}

fn warn_if_unresolved(values: &[f64], band: f64) {
    if values.len() < 2 {
        return;
    }
    let mean_step = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (values.len() - 1) as f64;
    if band < mean_step {
        log::warn!("band {band:e} is below the mean step size {mean_step:e}; the estimate is dominated by noise");
    }
}

/// Occupation-density estimate of the local time at `level`:
/// `scale / (2 band) * int_0^t 1{|v_s - level| <= band} ds`.
pub fn local_time_occupation(
    path: &PathBundle,
    coord: Coordinate,
    level: f64,
    band: f64,
    scale: f64,
) -> Result<Vec<f64>> {
    if !(band > 0.0) {
        return Err(Error::InvalidParameter(format!("band must be > 0, got {band}")));
    }
    let v = coordinate(path, coord)?;
    warn_if_unresolved(v, band);
    Ok(occupation_curve(v, path.grid.dt(), level, band, scale / (2.0 * band)))
}

/// Downcrossing estimate of the local time of `X` at `level`:
/// `scale * (band - zero_band) * #{completed passages of X from
/// >= level + band down to <= level + zero_band}`.
pub fn local_time_downcrossings(
    path: &PathBundle,
    level: f64,
    band: f64,
    zero_band: f64,
    scale: f64,
) -> Result<Vec<f64>> {
    if !(band > zero_band && zero_band >= 0.0) {
        return Err(Error::InvalidParameter(format!("need band > zero_band >= 0, got {band} and {zero_band}")));
    }
    warn_if_unresolved(&path.x, band);
    let hi = level + band;
    let lo = level + zero_band;
    let unit = scale * (band - zero_band);
    let mut out = vec![0.0; path.x.len()];
    let mut armed = path.x[0] >= hi;
    let mut count = 0usize;
    for k in 1..path.x.len() {
        if armed && path.min_on_step(k - 1) <= lo {
            count += 1;
            armed = false;
        }
        if path.x[k] >= hi {
            armed = true;
        }
        out[k] = count as f64 * unit;
    }
    Ok(out)
}

/// Multipliers fitted against the exact local time of reflected Brownian
/// motion (`dt = 1e-4`, `band = 2 sqrt(dt)`, `10^4` paths, least squares at
/// `t = 1`).
pub const OCCUPATION_SCALE_BM: f64 = 1.0130320465254317;
pub const DOWNCROSSING_SCALE_BM: f64 = 1.3223684930877928;

/// Least-squares multipliers of both estimators against the exact `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTimeCalibration {
    pub occupation: f64,
    pub downcrossing: f64,
}

/// Fits `kappa` minimizing `sum (A_i - kappa * raw_i)^2` at the grid horizon
/// on reflected Brownian motion, for both estimators.
pub fn calibrate_local_time(
    engine: &Engine<'_>,
    grid: &TimeGrid,
    n_paths: usize,
    band: f64,
    zero_band: f64,
) -> Result<LocalTimeCalibration> {
    let end = grid.n_steps();
    let values = engine.sample(&SigmaModel::ReflectedBm, grid, n_paths, 3, &|p, out| {
        out[0] = p.a[end];
        out[1] = local_time_occupation(p, Coordinate::X, 0.0, band, 1.0)?[end];
        out[2] = local_time_downcrossings(p, 0.0, band, zero_band, 1.0)?[end];
        Ok(())
    })?;
    let fit = |j: usize| {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..values.n_paths() {
            let r = values.row(i);
            num += r[0] * r[j];
            den += r[j] * r[j];
        }
        num / den
    };
    Ok(LocalTimeCalibration { occupation: fit(1), downcrossing: fit(2) })
}

/// Occupation multiplier for a stable Levy model chosen so that
/// `E[v(Y_T - x0)] - v(x0) = E[L_T]` at the grid horizon.
pub fn calibrate_levy_occupation(
    engine: &Engine<'_>,
    model: &SigmaModel,
    grid: &TimeGrid,
    n_paths: usize,
) -> Result<f64> {
    let SigmaModel::StableLevy(levy) = model else {
        return Err(Error::UnsupportedModel {
            model: model.name(),
            reason: "Levy occupation calibration needs the stable Levy model",
        });
    };
    let unit = SigmaModel::StableLevy(levy.clone().with_occupation_scale(1.0)?);
    let end = grid.n_steps();
    let values = engine.sample(&unit, grid, n_paths, 2, &|p, out| {
        out[0] = p.x[end];
        out[1] = p.a[end];
        Ok(())
    })?;
    let lhs = values.estimate(0).mean - levy.v(levy.level);
    Ok(lhs / values.estimate(1).mean)
}

/// Nonnegative killing rate with compact support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KillingRate {
    Zero,
    /// `height` on `[lo, hi]`, 0 elsewhere.
    Indicator {
        lo: f64,
        hi: f64,
        height: f64,
    },
}

impl KillingRate {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Indicator { lo, hi, height } => {
                if (lo..=hi).contains(&x) {
                    height
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Zero => Ok(()),
            Self::Indicator { lo, hi, height } if lo.is_finite() && hi.is_finite() && lo <= hi && height >= 0.0 => {
                Ok(())
            }
            _ => Err(Error::InvalidParameter("killing rate must be nonnegative with compact support".into())),
        }
    }

    /// Trapezoid-rule `int_0^{t_k} q(X_s) ds` at every grid point.
    pub fn integral_curve(&self, path: &PathBundle) -> Vec<f64> {
        let dt = path.grid.dt();
        let mut out = vec![0.0; path.x.len()];
        if matches!(self, Self::Zero) {
            return out;
        }
        let mut prev = self.eval(path.x[0]);
        for k in 1..path.x.len() {
            let cur = self.eval(path.x[k]);
            out[k] = out[k - 1] + 0.5 * dt * (prev + cur);
            prev = cur;
        }
        out
    }
}

/// Class (C) functionals: bounded, nonincreasing, adapted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassC {
    /// `F_t = phi(A_t)` with `phi` integrable and nonincreasing.
    DecreasingOfA(WeightFn),
    /// `F_t = exp(-lambda A_t - int_0^t q(X_s) ds)`.
    FeynmanKac { lambda: f64, q: KillingRate },
}

impl ClassC {
    pub fn decreasing_of_a(phi: WeightFn) -> Result<Self> {
        if !phi.is_integrable() {
            return Err(Error::InvalidParameter(format!("phi = {} is not integrable on [0, inf)", phi.name())));
        }
        Ok(Self::DecreasingOfA(phi))
    }

    pub fn feynman_kac(lambda: f64, q: KillingRate) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
        }
        q.validate()?;
        Ok(Self::FeynmanKac { lambda, q })
    }

    /// `F_t` at every grid point.
    pub fn curve(&self, path: &PathBundle) -> Vec<f64> {
        match self {
            Self::DecreasingOfA(phi) => path.a.iter().map(|&a| phi.f(a)).collect(),
            Self::FeynmanKac { lambda, q } => {
                let killed = q.integral_curve(path);
                path.a.iter().zip(&killed).map(|(&a, &k)| (-lambda * a - k).exp()).collect()
            }
        }
    }

    pub fn evaluate(&self, path: &PathBundle, k: usize) -> f64 {
        match self {
            Self::DecreasingOfA(phi) => phi.f(path.a[k]),
            Self::FeynmanKac { .. } => self.curve(path)[k],
        }
    }

    /// `phi` with `F_inf = phi(A_inf)`, when the functional has that shape.
    pub fn terminal_profile(&self) -> Option<WeightFn> {
        match *self {
            Self::DecreasingOfA(phi) => Some(phi),
            Self::FeynmanKac { lambda, q: KillingRate::Zero } => Some(WeightFn::Exp { rate: lambda }),
            Self::FeynmanKac { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sample_reflected_bm;

    fn flat_path(value: f64, n: usize) -> PathBundle {
        PathBundle {
            grid: TimeGrid::new(1.0, n).unwrap(),
            x: vec![value; n + 1],
            a: vec![0.0; n + 1],
            aux: None,
            step_min: None,
            step_max: None,
        }
    }

    #[test]
    fn zero_path_last_passage_is_horizon() {
        let p = flat_path(0.0, 100);
        let lp = detect_last_passage(&p, 0.0, 0.02, 0.5).unwrap();
        assert_eq!(lp.g, Some(1.0));
        assert_eq!(lp.d_t_a, Some(0.51));
    }

    #[test]
    fn positive_path_never_passes_zero() {
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let p = crate::models::sample_geometric_bm(4, &grid);
        let lp = detect_last_passage(&p, 0.0, 0.0, 0.5).unwrap();
        assert_eq!(lp.g, None);
        assert_eq!(lp.d_t_a, None);
    }

    #[test]
    fn returns_respect_the_horizon() {
        let grid = TimeGrid::new(3.0, 3000).unwrap();
        for seed in 0..30 {
            let p = sample_reflected_bm(seed, &grid);
            let k_t = 1000;
            for &a in &[0.0, 0.3] {
                let d = first_return_index(&p, a, 0.0, k_t);
                if let Some(d) = d {
                    assert!(d > k_t);
                }
                let k_u = d.map_or(grid.n_steps(), |d| d - 1);
                assert!(p.x[k_t + 1..=k_u].iter().all(|&v| v > a));
            }
            let g0 = last_visit_index(&p, 0.0, 0.0);
            let g1 = last_visit_index(&p, 0.5, 0.0);
            assert!(g0 <= g1);
        }
    }

    #[test]
    fn occupation_outside_band_is_zero() {
        let p = flat_path(1.0, 50);
        let c = local_time_occupation(&p, Coordinate::X, 0.0, 0.1, 1.0).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
        assert!(local_time_occupation(&p, Coordinate::X, 0.0, 0.0, 1.0).is_err());
        assert!(local_time_occupation(&p, Coordinate::Aux, 0.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn monotone_path_has_no_downcrossings() {
        let n = 200;
        let mut p = flat_path(0.0, n);
        p.x = (0..=n).map(|k| k as f64 * 0.01).collect();
        let c = local_time_downcrossings(&p, 0.0, 0.05, 0.0, 1.0).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn downcrossings_are_translation_invariant() {
        let grid = TimeGrid::new(1.0, 10_000).unwrap();
        let band = 2.0 * grid.dt().sqrt();
        for seed in 0..10 {
            let mut p = sample_reflected_bm(seed, &grid);
            p.step_min = None;
            let base = local_time_downcrossings(&p, 0.0, band, 0.25 * band, 1.0).unwrap();
            let shift = 10.0 * band;
            let mut q = p.clone();
            q.x.iter_mut().for_each(|v| *v += shift);
            let moved = local_time_downcrossings(&q, shift, band, 0.25 * band, 1.0).unwrap();
            assert_eq!(base, moved);
        }
    }

    #[test]
    fn class_c_examples() {
        let grid = TimeGrid::new(1.0, 500).unwrap();
        let p = sample_reflected_bm(9, &grid);
        let by_a = ClassC::decreasing_of_a(WeightFn::EXP).unwrap();
        let fk = ClassC::feynman_kac(1.0, KillingRate::Zero).unwrap();
        assert_eq!(by_a.evaluate(&p, 0), 1.0);
        for k in 0..grid.n_points() {
            assert!((by_a.evaluate(&p, k) - (-p.a[k]).exp()).abs() < 1e-15);
            assert!((fk.evaluate(&p, k) - (-p.a[k]).exp()).abs() < 1e-15);
        }
        let mut two = flat_path(2.0, 100);
        two.a = (0..=100).map(|k| k as f64 * 0.01).collect();
        let q = KillingRate::Indicator { lo: 0.0, hi: 1.0, height: 1.0 };
        let fk = ClassC::feynman_kac(0.5, q).unwrap();
        for k in 0..=100 {
            assert!((fk.evaluate(&two, k) - (-0.5 * two.a[k]).exp()).abs() < 1e-15);
        }
        assert!(ClassC::decreasing_of_a(WeightFn::Constant { value: 1.0 }).is_err());
        assert!(ClassC::feynman_kac(0.0, KillingRate::Zero).is_err());
    }
}
