//! Expectations under the sigma-finite measure `Q`: the `M^f` martingales,
//! the image law of `A_inf`, horizon-limit estimators of `Q` on events, the
//! `e^{-A}(1 + X)`-weighted sampler, and the identity verifiers.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked in
use num_traits::Float;

use crate::engine::{pairwise_sum, Engine, McEstimate, TimeGrid, Z95};
use crate::error::{Error, Result};
use crate::models::{PathBundle, SigmaModel};
use crate::pathfunc::{first_return_index, last_visit_index};
use crate::quad::{integrate_to_infinity, Tolerance};
use crate::weight::WeightFn;

/// A path functional measurable at some fixed time, e.g. `1{X_s <= c}`.
pub type PathFn<'a> = dyn Fn(&PathBundle) -> f64 + Sync + 'a;

/// Seed streams: the two sides of an identity never share paths.
pub(crate) const LHS_STREAM: u64 = 0x6c68;
pub(crate) const RHS_STREAM: u64 = 0x7268;

/// Sample size and step shared by every estimator in one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
}

impl McConfig {
    pub fn new(n_paths: usize, dt: f64) -> Self {
        Self { n_paths, dt }
    }

    pub fn grid(&self, t_end: f64) -> Result<TimeGrid> {
        TimeGrid::with_step(t_end, self.dt)
    }
}

/// Comparison of two Monte Carlo estimates of the same quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub lhs: McEstimate,
    pub rhs: McEstimate,
    pub z_score: f64,
    pub pass: bool,
    /// `(u, lhs at horizon u)`, increasing in `u`; empty for horizon-free checks.
    pub horizon_curve: Vec<(f64, McEstimate)>,
}

impl IdentityReport {
    pub const Z_MAX: f64 = 3.0;

    pub fn new(lhs: McEstimate, rhs: McEstimate, horizon_curve: Vec<(f64, McEstimate)>) -> Self {
        let z_score = lhs.z_score(&rhs);
        Self { lhs, rhs, z_score, pass: z_score <= Self::Z_MAX, horizon_curve }
    }

    /// Whether the horizon curve is nonincreasing up to overlap of 95% intervals.
    pub fn curve_monotone(&self) -> bool {
        self.horizon_curve.windows(2).all(|w| w[1].1.mean <= w[0].1.mean || w[1].1.overlaps(&w[0].1))
    }
}

/// `M^f_t = G(A_t) + f(A_t) X_t`, valid when `A_inf = inf` almost surely.
pub fn mf_value(model: &SigmaModel, path: &PathBundle, w: &WeightFn, t: f64) -> Result<f64> {
    model.require_a_infinite()?;
    let k = path.grid.index_at(t)?;
    Ok(w.mf(path.a[k], path.x[k]))
}

/// `E[M^f_t]` at each `t` with the exact starting value `G(0) + f(0) X_0` as
/// target.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessReport {
    pub target: f64,
    pub curve: Vec<(f64, McEstimate)>,
    pub max_z: f64,
    pub pass: bool,
}

pub fn mf_flatness(
    engine: &Engine<'_>,
    model: &SigmaModel,
    w: &WeightFn,
    t_list: &[f64],
    mc: McConfig,
) -> Result<FlatnessReport> {
    model.require_a_infinite()?;
    let t_max = check_increasing(t_list)?;
    let grid = mc.grid(t_max)?;
    let idx = indices(&grid, t_list)?;
    let values = engine.sample(model, &grid, mc.n_paths, idx.len(), &|p, out| {
        for (o, &k) in out.iter_mut().zip(&idx) {
            *o = w.mf(p.a[k], p.x[k]);
        }
        Ok(())
    })?;
    let target = w.mf(0.0, model.initial_x());
    let curve: Vec<_> = t_list.iter().enumerate().map(|(j, &t)| (t, values.estimate(j))).collect();
    let max_z = curve.iter().map(|(_, e)| e.z_against(target)).fold(0.0, f64::max);
    Ok(FlatnessReport { target, curve, max_z, pass: max_z <= IdentityReport::Z_MAX })
}

/// `Q[phi(A_inf)] = X_0 phi(0) + int_0^inf phi`, by adaptive quadrature.
pub fn q_terminal_expectation(phi: &dyn Fn(f64) -> f64, x0: f64) -> Result<f64> {
    let tol = Tolerance { abs: 1e-15, rel: 1e-11, max_intervals: 20_000 };
    let q = integrate_to_infinity(phi, 0.0, tol).map_err(|e| match e {
        Error::Quadrature { reason, .. } => {
            Error::InvalidParameter(format!("phi is not integrable on [0, inf): {reason}"))
        }
        other => other,
    })?;
    Ok(x0 * phi(0.0) + q.value)
}

/// Horizon curve `u -> E[Gamma 1{d_t^a > u} X_u]`, which decreases to
/// `Q[Gamma 1{g^a <= t}]` as `u` grows.
pub fn q_event_estimate(
    engine: &Engine<'_>,
    model: &SigmaModel,
    gamma: &PathFn<'_>,
    t: f64,
    horizons: &[f64],
    level: f64,
    mc: McConfig,
) -> Result<Vec<(f64, McEstimate)>> {
    model.require_a_infinite()?;
    let u_max = check_increasing(horizons)?;
    if !(horizons[0] > t) {
        return Err(Error::InvalidParameter(format!("horizons must exceed t = {t}")));
    }
    let grid = mc.grid(u_max)?;
    let k_t = grid.index_at(t)?;
    let idx = indices(&grid, horizons)?;
    let zero_band = model.zero_band(&grid);
    let values = engine.sample(model, &grid, mc.n_paths, idx.len(), &|p, out| {
        let g = gamma(p);
        let back = first_return_index(p, level, zero_band, k_t);
        for (o, &k_u) in out.iter_mut().zip(&idx) {
            let survives = back.is_none_or(|d| d > k_u);
            *o = if survives && g != 0.0 { g * p.x[k_u] } else { 0.0 };
        }
        Ok(())
    })?;
    Ok(horizons.iter().enumerate().map(|(j, &u)| (u, values.estimate(j))).collect())
}

/// `Q[Gamma 1{g <= t}] = E[Gamma X_t]`.
pub fn verify_master_identity(
    engine: &Engine<'_>,
    model: &SigmaModel,
    gamma: &PathFn<'_>,
    t: f64,
    horizons: &[f64],
    mc: McConfig,
) -> Result<IdentityReport> {
    verify_identity(engine, model, gamma, t, horizons, 0.0, mc)
}

/// `Q[Gamma 1{g^a <= t}] = E[Gamma (X_t - a)_+]`.
pub fn verify_level_identity(
    engine: &Engine<'_>,
    model: &SigmaModel,
    a: f64,
    gamma: &PathFn<'_>,
    t: f64,
    horizons: &[f64],
    mc: McConfig,
) -> Result<IdentityReport> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("level must be > 0, got {a}")));
    }
    verify_identity(engine, model, gamma, t, horizons, a, mc)
}

fn verify_identity(
    engine: &Engine<'_>,
    model: &SigmaModel,
    gamma: &PathFn<'_>,
    t: f64,
    horizons: &[f64],
    level: f64,
    mc: McConfig,
) -> Result<IdentityReport> {
    let curve = q_event_estimate(&engine.substream(LHS_STREAM), model, gamma, t, horizons, level, mc)?;
    let rhs = if t == 0.0 {
        McEstimate::exact(gamma_at_zero(model, level))
    } else {
        let grid = mc.grid(t)?;
        let k = grid.n_steps();
        engine.substream(RHS_STREAM).run_mc(model, &grid, mc.n_paths, &|p| gamma(p) * (p.x[k] - level).max(0.0))?
    };
    let lhs = curve.last().map(|c| c.1).unwrap_or(McEstimate::exact(0.0));
    Ok(IdentityReport::new(lhs, rhs, curve))
}

fn gamma_at_zero(model: &SigmaModel, level: f64) -> f64 {
    (model.initial_x() - level).max(0.0)
}

/// `E[w_t R_t] / E[w_t]` with `w_t = e^{-A_t}(1 + X_t)`, the expectation of
/// `R_t` under the probability `e^{-A_inf} Q`, at each `t`. `R` receives the
/// path and the grid index of `t`.
pub fn weighted_q_statistic(
    engine: &Engine<'_>,
    model: &SigmaModel,
    r: &(dyn Fn(&PathBundle, usize) -> f64 + Sync),
    t_list: &[f64],
    mc: McConfig,
) -> Result<Vec<(f64, McEstimate)>> {
    model.require_a_infinite()?;
    if model.initial_x() != 0.0 {
        return Err(Error::UnsupportedModel { model: model.name(), reason: "the weighted sampler needs X_0 = 0" });
    }
    let t_max = check_increasing(t_list)?;
    let grid = mc.grid(t_max)?;
    let idx = indices(&grid, t_list)?;
    let m = idx.len();
    let values = engine.sample(model, &grid, mc.n_paths, 2 * m, &|p, out| {
        for (j, &k) in idx.iter().enumerate() {
            let w = (-p.a[k]).exp() * (1.0 + p.x[k]);
            out[j] = w;
            out[m + j] = w * r(p, k);
        }
        Ok(())
    })?;
    Ok(t_list.iter().enumerate().map(|(j, &t)| (t, values.ratio(m + j, j))).collect())
}

/// Weighted empirical law of `A_T` against `Exp(lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageLawReport {
    pub target: f64,
    pub quadrature: f64,
    pub ks_distance: f64,
    /// Kish effective sample size of the weights.
    pub effective_n: f64,
}

/// Kolmogorov distance between the law of `A_T` under the weights
/// `e^{-lambda A_T}(1 + X_T)` (normalized) and `Exp(lambda)`, plus the
/// quadrature value of `Q[e^{-lambda A_inf}]`.
pub fn image_law_check(
    engine: &Engine<'_>,
    model: &SigmaModel,
    lambda: f64,
    t_end: f64,
    mc: McConfig,
) -> Result<ImageLawReport> {
    model.require_a_infinite()?;
    let phi = WeightFn::exp(lambda)?;
    let quadrature = q_terminal_expectation(&|x| phi.f(x), model.initial_x())?;
    let grid = mc.grid(t_end)?;
    let k = grid.n_steps();
    let values = engine.sample(model, &grid, mc.n_paths, 2, &|p, out| {
        out[0] = p.a[k];
        out[1] = (-lambda * p.a[k]).exp() * (1.0 + p.x[k]);
        Ok(())
    })?;
    let mut pairs: Vec<(f64, f64)> = (0..values.n_paths()).map(|i| (values.row(i)[0], values.row(i)[1])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let total = pairwise_sum(&weights);
    let sq: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let effective_n = total * total / pairwise_sum(&sq);
    let mut cum = 0.0;
    let mut ks: f64 = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let x = pairs[i].0;
        let below = cum / total;
        while i < pairs.len() && pairs[i].0 == x {
            cum += pairs[i].1;
            i += 1;
        }
        let cdf = 1.0 - (-lambda * x).exp();
        ks = ks.max((cum / total - cdf).abs()).max((below - cdf).abs());
    }
    Ok(ImageLawReport { target: 1.0 / lambda, quadrature, ks_distance: ks, effective_n })
}

/// `E[X_inf Gamma 1{g <= t}] = E[Gamma X_t]` for a uniformly integrable
/// model, with `X_inf` read at the end of the grid.
pub fn verify_class_d(
    engine: &Engine<'_>,
    model: &SigmaModel,
    gamma: &PathFn<'_>,
    t: f64,
    t_end: f64,
    mc: McConfig,
) -> Result<IdentityReport> {
    if !model.flags().class_d {
        return Err(Error::UnsupportedModel { model: model.name(), reason: "requires a class (D) model" });
    }
    if !(t_end > t) {
        return Err(Error::InvalidParameter(format!("t_end = {t_end} must exceed t = {t}")));
    }
    let grid = mc.grid(t_end)?;
    if let SigmaModel::StoppedReflected(m) = model {
        if m.horizon_is_short(&grid) {
            log::warn!("t_end = {t_end} is short for barrier {}; X_inf is biased low", m.barrier);
        }
    }
    let k_t = grid.index_at(t)?;
    let zero_band = model.zero_band(&grid);
    let lhs = engine.substream(LHS_STREAM).run_mc(model, &grid, mc.n_paths, &|p| {
        let before = last_visit_index(p, 0.0, zero_band).is_none_or(|g| g <= k_t);
        if before {
            p.terminal_x() * gamma(p)
        } else {
            0.0
        }
    })?;
    let rhs = engine.substream(RHS_STREAM).run_mc(model, &grid, mc.n_paths, &|p| gamma(p) * p.x[k_t])?;
    Ok(IdentityReport::new(lhs, rhs, Vec::new()))
}

/// `E[Gamma_s X_t] = E[Gamma_s X_s]` for a strictly positive martingale
/// (`M_t(1) = X_t`), `s < t`.
pub fn verify_positive_martingale(
    engine: &Engine<'_>,
    model: &SigmaModel,
    gamma: &PathFn<'_>,
    s: f64,
    t: f64,
    mc: McConfig,
) -> Result<IdentityReport> {
    if !model.flags().strictly_positive {
        return Err(Error::UnsupportedModel { model: model.name(), reason: "requires a strictly positive model" });
    }
    if !(0.0 <= s && s < t) {
        return Err(Error::InvalidParameter(format!("need 0 <= s < t, got s = {s}, t = {t}")));
    }
    let grid = mc.grid(t)?;
    let k_s = grid.index_at(s)?;
    let k_t = grid.n_steps();
    let side = |stream: u64, k: usize| {
        let values = engine.substream(stream).sample(model, &grid, mc.n_paths, 1, &|p, out| {
            if p.x.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::ContractViolation {
                    path_index: 0,
                    reason: "strictly positive model produced a zero value".into(),
                });
            }
            out[0] = gamma(p) * p.x[k];
            Ok(())
        })?;
        Ok::<_, Error>(values.estimate(0))
    };
    let lhs = side(LHS_STREAM, k_t)?;
    let rhs = side(RHS_STREAM, k_s)?;
    Ok(IdentityReport::new(lhs, rhs, Vec::new()))
}

/// `K P[g_K <= t] = E[(K - M_t)_+]` for the exponential martingale, where
/// `g_K` is the last passage at `K`. On each path the event is scored as "no
/// visit of `K` in `(t, u]`", times the probability `1 - min(M_u / K, 1)` of
/// never reaching `K` after `u` when `tail_correction` is set.
pub fn put_parity_check(
    engine: &Engine<'_>,
    k: f64,
    t: f64,
    horizons: &[f64],
    tail_correction: bool,
    mc: McConfig,
) -> Result<IdentityReport> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("strike must be > 0, got {k}")));
    }
    let u_max = check_increasing(horizons)?;
    if !(horizons[0] > t && t > 0.0) {
        return Err(Error::InvalidParameter(format!("need 0 < t < min horizon, got t = {t}")));
    }
    let model = SigmaModel::ExpMartingale;
    let grid = mc.grid(u_max)?;
    let k_t = grid.index_at(t)?;
    let idx = indices(&grid, horizons)?;
    let values = engine.substream(LHS_STREAM).sample(&model, &grid, mc.n_paths, idx.len(), &|p, out| {
        // First step after t on which the path reaches K.
        let hit = (k_t..grid.n_steps()).find(|&j| p.max_on_step(j) >= k);
        for (o, &k_u) in out.iter_mut().zip(&idx) {
            let clear = hit.is_none_or(|j| j >= k_u);
            let tail = if tail_correction { 1.0 - (p.x[k_u] / k).min(1.0) } else { 1.0 };
            *o = if clear { k * tail } else { 0.0 };
        }
        Ok(())
    })?;
    let curve: Vec<_> = horizons.iter().enumerate().map(|(j, &u)| (u, values.estimate(j))).collect();
    let rhs_grid = mc.grid(t)?;
    let end = rhs_grid.n_steps();
    let rhs = engine.substream(RHS_STREAM).run_mc(&model, &rhs_grid, mc.n_paths, &|p| (k - p.x[end]).max(0.0))?;
    let lhs = curve[curve.len() - 1].1;
    Ok(IdentityReport::new(lhs, rhs, curve))
}

/// Whether `|e_{i+1}| <= |e_i|` over the last three points, up to `Z95`
/// combined standard errors, where `e_i = estimate_i - target_i`.
pub fn errors_nonincreasing(errors: &[(f64, f64)]) -> bool {
    let n = errors.len();
    let tail = &errors[n.saturating_sub(3)..];
    tail.windows(2).all(|w| {
        let (e0, s0) = w[0];
        let (e1, s1) = w[1];
        e1.abs() <= e0.abs() + Z95 * (s0 * s0 + s1 * s1).sqrt()
    })
}

pub(crate) fn check_increasing(list: &[f64]) -> Result<f64> {
    if list.is_empty() {
        return Err(Error::InvalidParameter("time list must not be empty".into()));
    }
    if list.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(format!("times must be finite, >= 0 and strictly increasing: {list:?}")));
    }
    Ok(list[list.len() - 1])
}

pub(crate) fn indices(grid: &TimeGrid, times: &[f64]) -> Result<Vec<usize>> {
    times.iter().map(|&t| grid.index_at(t)).collect()
}
