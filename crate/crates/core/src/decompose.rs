//! Decomposition `Z_t = M_t(z_inf) + E[Z_inf | F_t] + xi_t` of a
//! nonnegative supermartingale, checked in expectation through the mass
//! balance `E[Z_t] = Q[z_inf] + E[Z_inf] + E[xi_t]`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)] // unused when std is linked in
use num_traits::Float;

use crate::engine::{Engine, McEstimate};
use crate::error::{Error, Result};
use crate::models::{PathBundle, SigmaModel};
use crate::qcalc::{
    check_increasing, indices, q_terminal_expectation, IdentityReport, McConfig, LHS_STREAM, RHS_STREAM,
};
use crate::weight::WeightFn;

/// Supermartingales with a known decomposition, in terms of the
/// reflected-Brownian-type pair `(X, A)` with `A_inf = inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CatalogEntry {
    /// `M^f` with `f = e^{-x}`: `z_inf = e^{-A_inf}`, `Z_inf = 0`, `xi = 0`.
    MfExp,
    /// `Z = 1`: `z_inf = 0`, `Z_inf = 1`, `xi = 0`.
    ConstantOne,
    /// `Z_t = e^{-A_t}`: `z_inf = 0`, `Z_inf = 0`, `xi_t = e^{-A_t}`.
    ExpMinusA,
}

impl CatalogEntry {
    pub const ALL: [CatalogEntry; 3] = [Self::ConstantOne, Self::ExpMinusA, Self::MfExp];

    pub fn name(&self) -> &'static str {
        match self {
            Self::MfExp => "mf_exp",
            Self::ConstantOne => "constant_one",
            Self::ExpMinusA => "exp_minus_a",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn value(&self, a: f64, x: f64) -> f64 {
        match self {
            Self::MfExp => WeightFn::EXP.mf(a, x),
            Self::ConstantOne => 1.0,
            Self::ExpMinusA => (-a).exp(),
        }
    }

    fn parts(&self) -> AnalyticParts {
        match self {
            Self::MfExp => AnalyticParts { z_inf: 1.0, z_terminal: 0.0, xi: 0.0 },
            Self::ConstantOne => AnalyticParts { z_inf: 0.0, z_terminal: 1.0, xi: 0.0 },
            Self::ExpMinusA => AnalyticParts { z_inf: 0.0, z_terminal: 0.0, xi: 1.0 },
        }
    }

    pub fn is_martingale(&self) -> bool {
        !matches!(self, Self::ExpMinusA)
    }
}

/// Coefficients of a catalog decomposition: `z_inf = z_inf * e^{-A_inf}`,
/// `Z_inf = z_terminal` (a constant), `xi_t = xi * e^{-A_t}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnalyticParts {
    pub z_inf: f64,
    pub z_terminal: f64,
    pub xi: f64,
}

impl AnalyticParts {
    /// `M_t(z_inf) = z_inf e^{-A_t}(1 + X_t)`.
    pub fn m_of_z_inf(&self, a: f64, x: f64) -> f64 {
        self.z_inf * WeightFn::EXP.mf(a, x)
    }

    pub fn xi_at(&self, a: f64) -> f64 {
        self.xi * (-a).exp()
    }

    /// `Q[z_inf]` by the image law.
    pub fn q_z_inf(&self, x0: f64) -> Result<f64> {
        Ok(self.z_inf * q_terminal_expectation(&|x| (-x).exp(), x0)?)
    }

    /// `Q[e^{-A_inf} z_inf]`, the limit of the weighted ratio `Z_t / X_t`.
    pub fn weighted_z_inf(&self, x0: f64) -> Result<f64> {
        Ok(self.z_inf * q_terminal_expectation(&|x| (-2.0 * x).exp(), x0)?)
    }
}

pub type SupermartingaleFn = dyn Fn(&PathBundle, usize) -> f64 + Send + Sync;

/// A nonnegative supermartingale `Z_t`, evaluated at grid index `k`.
pub enum SupermartingaleSpec {
    /// Nonnegative combination of catalog entries.
    Catalog { name: String, terms: Vec<(f64, CatalogEntry)> },
    /// Arbitrary process; only the invariant checks apply.
    Custom { name: String, evaluate: Box<SupermartingaleFn> },
}

impl fmt::Debug for SupermartingaleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Catalog { name, terms } => {
                f.debug_struct("Catalog").field("name", name).field("terms", terms).finish()
            }
            Self::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish_non_exhaustive(),
        }
    }
}

impl SupermartingaleSpec {
    pub fn catalog(entry: CatalogEntry) -> Self {
        Self::Catalog { name: entry.name().into(), terms: alloc::vec![(1.0, entry)] }
    }

    pub fn mixture(name: &str, terms: Vec<(f64, CatalogEntry)>) -> Result<Self> {
        if terms.is_empty() || terms.iter().any(|(c, _)| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidParameter("mixture weights must be finite and >= 0".into()));
        }
        Ok(Self::Catalog { name: name.into(), terms })
    }

    pub fn custom(name: &str, evaluate: Box<SupermartingaleFn>) -> Self {
        Self::Custom { name: name.into(), evaluate }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Catalog { name, .. } | Self::Custom { name, .. } => name,
        }
    }

    pub fn evaluate(&self, path: &PathBundle, k: usize) -> f64 {
        match self {
            Self::Catalog { terms, .. } => terms.iter().map(|(c, e)| c * e.value(path.a[k], path.x[k])).sum(),
            Self::Custom { evaluate, .. } => evaluate(path, k),
        }
    }

    /// `Z_k - M_k(z_inf)`, summed entry by entry so that the cancellation
    /// inside each catalog entry is exact.
    pub fn residual(&self, path: &PathBundle, k: usize) -> f64 {
        let (a, x) = (path.a[k], path.x[k]);
        match self {
            Self::Catalog { terms, .. } => {
                terms.iter().map(|(c, e)| c * (e.value(a, x) - e.parts().m_of_z_inf(a, x))).sum()
            }
            Self::Custom { evaluate, .. } => evaluate(path, k),
        }
    }

    /// `Z_k - M_k(z_inf) - xi_k`, entry by entry; for catalog specs this is
    /// the constant `E[Z_inf | F_k] = Z_inf`.
    fn terminal_part(&self, path: &PathBundle, k: usize) -> f64 {
        let (a, x) = (path.a[k], path.x[k]);
        match self {
            Self::Catalog { terms, .. } => terms
                .iter()
                .map(|(c, e)| {
                    let p = e.parts();
                    c * (e.value(a, x) - p.m_of_z_inf(a, x) - p.xi_at(a))
                })
                .sum(),
            Self::Custom { evaluate, .. } => evaluate(path, k),
        }
    }

    pub fn analytic_parts(&self) -> Option<AnalyticParts> {
        match self {
            Self::Catalog { terms, .. } => Some(terms.iter().fold(AnalyticParts::default(), |acc, (c, e)| {
                let p = e.parts();
                AnalyticParts {
                    z_inf: acc.z_inf + c * p.z_inf,
                    z_terminal: acc.z_terminal + c * p.z_terminal,
                    xi: acc.xi + c * p.xi,
                }
            })),
            Self::Custom { .. } => None,
        }
    }

    pub fn is_martingale(&self) -> Option<bool> {
        match self {
            Self::Catalog { terms, .. } => Some(terms.iter().all(|(c, e)| *c == 0.0 || e.is_martingale())),
            Self::Custom { .. } => None,
        }
    }
}

/// `E[Z_t] = Q[z_inf] + E[Z_inf] + E[xi_t]` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBalance {
    pub t: f64,
    pub lhs: McEstimate,
    pub rhs: McEstimate,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompResult {
    /// `E[w Z_T / X_T; X_T > 0] / E[w]` at the horizon, `w = e^{-A}(1 + X)`.
    pub z_inf_estimate: McEstimate,
    /// Its limit `Q[e^{-A_inf} z_inf]`, for catalog specs.
    pub z_inf_target: Option<f64>,
    /// Share of the weight sitting on `X_T = 0`, left out of the ratio.
    pub excluded_weight: f64,
    /// `Q[z_inf]`, for catalog specs.
    pub q_z_inf: Option<f64>,
    /// Estimate of `E[Z_inf]`.
    pub z_terminal_estimate: McEstimate,
    /// `E[Z_t]` along `t_list`.
    pub expectation_curve: Vec<(f64, McEstimate)>,
    /// `E[M_t(z_inf)]` along `t_list`, for catalog specs.
    pub m_curve: Vec<(f64, McEstimate)>,
    /// `E[xi_t] = E[Z_t] - E[M_t(z_inf)] - E[Z_inf]` along `t_list`.
    pub xi_curve: Vec<(f64, McEstimate)>,
    pub mass_balance: Vec<MassBalance>,
    pub supermartingale_ok: bool,
    pub nonnegative_ok: bool,
    pub pass: bool,
}

/// Runs the decomposition of `spec` on `model` along `t_list`, with `Z_inf`
/// read at `horizon`.
///
/// For catalog specs `Z_inf` is estimated through `Z_T - M_T(z_inf) - xi_T`:
/// plain Monte Carlo of `Z_T` would not converge to `E[Z_inf]` when `Z` is
/// not uniformly integrable (`E[M^f_T] = 1` for every `T` although
/// `M^f_T -> 0`). Custom specs fall back to plain Monte Carlo of `Z_T`.
pub fn decompose(
    engine: &Engine<'_>,
    spec: &SupermartingaleSpec,
    model: &SigmaModel,
    t_list: &[f64],
    horizon: f64,
    mc: McConfig,
) -> Result<DecompResult> {
    model.require_a_infinite()?;
    let x0 = model.initial_x();
    if x0 != 0.0 {
        return Err(Error::UnsupportedModel { model: model.name(), reason: "the decomposition needs X_0 = 0" });
    }
    let t_max = check_increasing(t_list)?;
    if !(horizon >= t_max) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be >= max(t_list) = {t_max}")));
    }
    let parts = spec.analytic_parts();
    let p = parts.unwrap_or_default();
    let grid = mc.grid(horizon)?;
    let idx = indices(&grid, t_list)?;
    let m = idx.len();
    let end = grid.n_steps();

    // Columns: Z_t, M_t(z_inf) and Z_t - M_t(z_inf) per t, the min of Z
    // over the grid, then the weight at the horizon, its part on {X_T > 0},
    // and weight * Z_T / X_T.
    let w0 = 3 * m;
    let main = engine.substream(LHS_STREAM).sample(model, &grid, mc.n_paths, w0 + 4, &|path, out| {
        for (j, &k) in idx.iter().enumerate() {
            out[j] = spec.evaluate(path, k);
            out[m + j] = p.m_of_z_inf(path.a[k], path.x[k]);
            out[2 * m + j] = spec.residual(path, k);
        }
        out[w0] = (0..=end).map(|k| spec.evaluate(path, k)).fold(f64::INFINITY, f64::min);
        let (a, x) = (path.a[end], path.x[end]);
        let w = (-a).exp() * (1.0 + x);
        out[w0 + 1] = w;
        out[w0 + 2] = if x > 0.0 { w } else { 0.0 };
        out[w0 + 3] = if x > 0.0 { w * spec.evaluate(path, end) / x } else { 0.0 };
        Ok(())
    })?;
    // Independent paths for Z_inf and xi, so the two sides of the mass
    // balance do not share noise. Columns: Z_inf estimate, then
    // Z_inf + xi_t per t.
    let side = engine.substream(RHS_STREAM).sample(model, &grid, mc.n_paths, m + 1, &|path, out| {
        let z_inf = spec.terminal_part(path, end);
        out[0] = z_inf;
        for (j, &k) in idx.iter().enumerate() {
            out[1 + j] = z_inf + p.xi_at(path.a[k]);
        }
        Ok(())
    })?;

    let expectation_curve: Vec<(f64, McEstimate)> =
        t_list.iter().enumerate().map(|(j, &t)| (t, main.estimate(j))).collect();
    let m_curve: Vec<(f64, McEstimate)> = t_list.iter().enumerate().map(|(j, &t)| (t, main.estimate(m + j))).collect();
    let z_terminal_estimate = side.estimate(0);
    let xi_curve: Vec<(f64, McEstimate)> = (0..m)
        .map(|j| {
            let d = main.estimate(2 * m + j);
            let mean = d.mean - z_terminal_estimate.mean;
            (t_list[j], McEstimate { mean, stderr: d.combined_stderr(&z_terminal_estimate), n: d.n })
        })
        .collect();

    let full = crate::engine::pairwise_sum(&main.column(w0 + 1));
    let kept = crate::engine::pairwise_sum(&main.column(w0 + 2));
    let excluded_weight = 1.0 - kept / full;
    let z_inf_estimate = main.ratio(w0 + 3, w0 + 2);

    let q_z_inf = parts.map(|p| p.q_z_inf(x0)).transpose()?;
    let z_inf_target = parts.map(|p| p.weighted_z_inf(x0)).transpose()?;
    let mass_balance: Vec<MassBalance> = match q_z_inf {
        Some(q) => (0..m)
            .map(|j| {
                let lhs = main.estimate(j);
                let s = side.estimate(1 + j);
                let rhs = McEstimate { mean: q + s.mean, ..s };
                MassBalance { t: t_list[j], lhs, rhs, z_score: lhs.z_score(&rhs) }
            })
            .collect(),
        None => Vec::new(),
    };

    let supermartingale_ok = (1..m).all(|j| {
        let diff: Vec<f64> = (0..main.n_paths()).map(|i| main.row(i)[j] - main.row(i)[j - 1]).collect();
        let d = McEstimate::from_values(&diff);
        d.mean <= IdentityReport::Z_MAX * d.stderr
    });
    let tol = |e: &McEstimate| e.mean >= -IdentityReport::Z_MAX * e.stderr;
    let pathwise_nonneg = main.column(w0).iter().all(|&v| v >= 0.0);
    let nonnegative_ok = pathwise_nonneg
        && tol(&z_terminal_estimate)
        && xi_curve.iter().all(|(_, e)| tol(e))
        && (parts.is_none() || tol(&z_inf_estimate));
    let balance_ok = mass_balance.iter().all(|b| b.z_score <= IdentityReport::Z_MAX);
    Ok(DecompResult {
        z_inf_estimate,
        z_inf_target,
        excluded_weight,
        q_z_inf,
        z_terminal_estimate,
        expectation_curve,
        m_curve,
        xi_curve,
        mass_balance,
        supermartingale_ok,
        nonnegative_ok,
        pass: supermartingale_ok && nonnegative_ok && balance_ok,
    })
}

/// Comparison of `E[Z_0]` with `Q[lim Z_t / X_t]` for a nonnegative
/// martingale `Z`; equality characterises `Z = M(z_inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacterizationReport {
    /// `E[Z_t]` at the first time of the list.
    pub expectation: McEstimate,
    pub q_z_inf: f64,
    /// `E[Z] - Q[z_inf]`, which equals `E[Z_inf]` by the mass balance.
    pub gap: McEstimate,
    pub z_score: f64,
    pub is_mf_type: bool,
}

const CHARACTERIZATION_STREAM: u64 = 0x6368;

pub fn mf_characterization_check(
    engine: &Engine<'_>,
    spec: &SupermartingaleSpec,
    model: &SigmaModel,
    t_list: &[f64],
    mc: McConfig,
) -> Result<CharacterizationReport> {
    model.require_a_infinite()?;
    let parts = spec.analytic_parts().ok_or_else(|| {
        Error::Precondition(format!("`{}` has no known z_inf; only catalog specs can be classified", spec.name()))
    })?;
    let t_max = check_increasing(t_list)?;
    let grid = mc.grid(t_max)?;
    let idx = indices(&grid, t_list)?;
    let values = engine.substream(CHARACTERIZATION_STREAM).sample(model, &grid, mc.n_paths, idx.len(), &|p, out| {
        for (o, &k) in out.iter_mut().zip(&idx) {
            *o = spec.evaluate(p, k);
        }
        Ok(())
    })?;
    for j in 1..idx.len() {
        let diff: Vec<f64> = (0..values.n_paths()).map(|i| values.row(i)[j] - values.row(i)[0]).collect();
        let d = McEstimate::from_values(&diff);
        if d.z_against(0.0) > IdentityReport::Z_MAX {
            return Err(Error::Precondition(format!(
                "`{}` is not a martingale: E[Z] moves by {} between t = {} and t = {}",
                spec.name(),
                d.mean,
                t_list[0],
                t_list[j]
            )));
        }
    }
    let expectation = values.estimate(0);
    let q_z_inf = parts.q_z_inf(model.initial_x())?;
    let gap = McEstimate { mean: expectation.mean - q_z_inf, ..expectation };
    let z_score = expectation.z_against(q_z_inf);
    Ok(CharacterizationReport { expectation, q_z_inf, gap, z_score, is_mf_type: z_score <= IdentityReport::Z_MAX })
}
