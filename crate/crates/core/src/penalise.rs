//! Penalisation: `E[F_t X_t] -> Q[F_inf]`, weak convergence of the
//! penalised probabilities, and the domination hypothesis `F_t X_t <= M^f_t`.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked in
use num_traits::Float;

use crate::engine::{Engine, McEstimate};
use crate::error::{Error, Result};
use crate::models::{PathBundle, SigmaModel};
use crate::pathfunc::{ClassC, KillingRate};
use crate::qcalc::{
    check_increasing, errors_nonincreasing, indices, q_terminal_expectation, IdentityReport, McConfig, LHS_STREAM,
    RHS_STREAM,
};
use crate::weight::WeightFn;

/// A penalisation experiment `t -> E[F_t X_t]` with its exact limit.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalisationRun {
    pub model: SigmaModel,
    pub functional: ClassC,
    pub t_list: Vec<f64>,
    /// `Q[F_inf] = X_0 phi(0) + int phi` for `F_inf = phi(A_inf)`.
    pub target: f64,
}

impl PenalisationRun {
    pub fn new(model: SigmaModel, functional: ClassC, t_list: Vec<f64>) -> Result<Self> {
        model.require_a_infinite()?;
        check_increasing(&t_list)?;
        let phi = terminal_profile(&functional)?;
        let target = q_terminal_expectation(&|x| phi.f(x), model.initial_x())?;
        Ok(Self { model, functional, t_list, target })
    }
}

fn terminal_profile(functional: &ClassC) -> Result<WeightFn> {
    functional.terminal_profile().ok_or_else(|| {
        Error::InvalidParameter("the limit F_inf must have the form phi(A_inf) to have an exact target".into())
    })
}

/// Estimates along `t_list` against a target.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveReport {
    pub target: McEstimate,
    pub curve: Vec<(f64, McEstimate)>,
    /// z-score of the last point against the target.
    pub final_z: f64,
    /// `|estimate - target|` nonincreasing over the last three points.
    pub trend_ok: bool,
    pub pass: bool,
}

impl CurveReport {
    fn new(target: McEstimate, curve: Vec<(f64, McEstimate)>) -> Self {
        let last = curve[curve.len() - 1].1;
        let final_z = last.z_score(&target);
        let errors: Vec<(f64, f64)> =
            curve.iter().map(|(_, e)| (e.mean - target.mean, e.combined_stderr(&target))).collect();
        let trend_ok = errors_nonincreasing(&errors);
        Self { target, curve, final_z, trend_ok, pass: final_z <= IdentityReport::Z_MAX && trend_ok }
    }
}

pub fn penalisation_curve(engine: &Engine<'_>, run: &PenalisationRun, mc: McConfig) -> Result<CurveReport> {
    Ok(penalisation_curves(engine, core::slice::from_ref(run), mc)?.remove(0))
}

/// Several runs on one model and one `t_list`, evaluated on shared paths.
pub fn penalisation_curves(engine: &Engine<'_>, runs: &[PenalisationRun], mc: McConfig) -> Result<Vec<CurveReport>> {
    let first = runs.first().ok_or_else(|| Error::InvalidParameter("no penalisation runs given".into()))?;
    if runs.iter().any(|r| r.model != first.model || r.t_list != first.t_list) {
        return Err(Error::InvalidParameter("runs evaluated together must share model and t_list".into()));
    }
    let grid = mc.grid(check_increasing(&first.t_list)?)?;
    let idx = indices(&grid, &first.t_list)?;
    let m = idx.len();
    let values = engine.sample(&first.model, &grid, mc.n_paths, m * runs.len(), &|p, out| {
        for (r, run) in runs.iter().enumerate() {
            let f = run.functional.curve(p);
            for (j, &k) in idx.iter().enumerate() {
                out[r * m + j] = f[k] * p.x[k];
            }
        }
        Ok(())
    })?;
    Ok(runs
        .iter()
        .enumerate()
        .map(|(r, run)| {
            let curve = run.t_list.iter().enumerate().map(|(j, &t)| (t, values.estimate(r * m + j))).collect();
            CurveReport::new(McEstimate::exact(run.target), curve)
        })
        .collect())
}

/// Pathwise check of `f(A_t) B_t X_t <= M^f_t` with `B_t = exp(-int q(X))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominationReport {
    pub min_slack: f64,
    pub max_slack: f64,
    pub checks: usize,
}

pub fn domination_check(
    engine: &Engine<'_>,
    model: &SigmaModel,
    f: WeightFn,
    q: KillingRate,
    t_list: &[f64],
    mc: McConfig,
) -> Result<DominationReport> {
    model.require_a_infinite()?;
    let functional = ClassC::feynman_kac(1.0, q)?;
    let grid = mc.grid(check_increasing(t_list)?)?;
    let idx = indices(&grid, t_list)?;
    let values = engine.sample(model, &grid, mc.n_paths, 2, &|p, out| {
        let killed = match functional {
            ClassC::FeynmanKac { q, .. } => q.integral_curve(p),
            ClassC::DecreasingOfA(_) => unreachable!(),
        };
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &k in &idx {
            let ft = f.f(p.a[k]) * (-killed[k]).exp();
            let slack = f.mf(p.a[k], p.x[k]) - ft * p.x[k];
            lo = lo.min(slack);
            hi = hi.max(slack);
        }
        out[0] = lo;
        out[1] = hi;
        Ok(())
    })?;
    let min_slack = values.column(0).into_iter().fold(f64::INFINITY, f64::min);
    let max_slack = values.column(1).into_iter().fold(f64::NEG_INFINITY, f64::max);
    if min_slack < -1e-12 {
        return Err(Error::Invariant(format!("domination F_t X_t <= M^f_t violated by {}", -min_slack)));
    }
    Ok(DominationReport { min_slack, max_slack, checks: mc.n_paths * idx.len() })
}

/// Events `Lambda_s` of the form "coordinate compared to a threshold at time `s`".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Always,
    XAtMost(f64),
    XAbove(f64),
    AAtLeast(f64),
    ABelow(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub s: f64,
}

impl Event {
    pub fn new(kind: EventKind, s: f64) -> Self {
        Self { kind, s }
    }

    pub fn indicator(&self, path: &PathBundle, k_s: usize) -> f64 {
        let (x, a) = (path.x[k_s], path.a[k_s]);
        let hit = match self.kind {
            EventKind::Always => true,
            EventKind::XAtMost(c) => x <= c,
            EventKind::XAbove(c) => x > c,
            EventKind::AAtLeast(c) => a >= c,
            EventKind::ABelow(c) => a < c,
        };
        if hit {
            1.0
        } else {
            0.0
        }
    }

    /// The complementary event, or `None` for the whole space.
    pub fn complement(&self) -> Option<Self> {
        let kind = match self.kind {
            EventKind::Always => return None,
            EventKind::XAtMost(c) => EventKind::XAbove(c),
            EventKind::XAbove(c) => EventKind::XAtMost(c),
            EventKind::AAtLeast(c) => EventKind::ABelow(c),
            EventKind::ABelow(c) => EventKind::AAtLeast(c),
        };
        Some(Self { kind, s: self.s })
    }
}

/// `Q_t[Lambda_s] = E[F_t X_t 1_Lambda] / E[F_t X_t]` along `t_list`, against
/// `Q_inf[Lambda_s] = E[1_Lambda M^phi_s] / Q[phi(A_inf)]`, where
/// `M^phi_s = G(A_s) + phi(A_s) X_s` is the density of `phi(A_inf) Q` on
/// the sigma-field at time `s`.
pub fn weak_limit_check(
    engine: &Engine<'_>,
    run: &PenalisationRun,
    event: &Event,
    mc: McConfig,
) -> Result<CurveReport> {
    if !(run.target > 0.0) {
        return Err(Error::InvalidParameter("Q[F_inf] must be > 0 to normalise the limit".into()));
    }
    let s = event.s;
    if !(s >= 0.0 && s < run.t_list[0]) {
        return Err(Error::InvalidParameter(format!("need 0 <= s < min(t_list), got s = {s}")));
    }
    let phi = terminal_profile(&run.functional)?;
    let grid = mc.grid(check_increasing(&run.t_list)?)?;
    let k_s = grid.index_at(s)?;
    let idx = indices(&grid, &run.t_list)?;
    let m = idx.len();
    let values = engine.substream(LHS_STREAM).sample(&run.model, &grid, mc.n_paths, 2 * m, &|p, out| {
        let f = run.functional.curve(p);
        let hit = event.indicator(p, k_s);
        for (j, &k) in idx.iter().enumerate() {
            let w = f[k] * p.x[k];
            out[j] = w;
            out[m + j] = w * hit;
        }
        Ok(())
    })?;
    let curve = run.t_list.iter().enumerate().map(|(j, &t)| (t, values.ratio(m + j, j))).collect();
    let target = if s == 0.0 {
        McEstimate::exact(phi.mf(0.0, run.model.initial_x()) / run.target)
    } else {
        let sgrid = mc.grid(s)?;
        let end = sgrid.n_steps();
        engine
            .substream(RHS_STREAM)
            .run_mc(&run.model, &sgrid, mc.n_paths, &|p| event.indicator(p, end) * phi.mf(p.a[end], p.x[end]))?
            .scale(1.0 / run.target)
    };
    Ok(CurveReport::new(target, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn exp_run(rate: f64, model: SigmaModel) -> PenalisationRun {
        let f = ClassC::decreasing_of_a(WeightFn::exp(rate).unwrap()).unwrap();
        PenalisationRun::new(model, f, vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn targets_follow_image_law() {
        assert!((exp_run(2.0, SigmaModel::ReflectedBm).target - 0.5).abs() < 1e-10);
        assert!((exp_run(1.0, SigmaModel::Drawdown).target - 1.0).abs() < 1e-10);
    }

    #[test]
    fn run_needs_unbounded_a() {
        let f = ClassC::decreasing_of_a(WeightFn::EXP).unwrap();
        let stopped = SigmaModel::stopped_reflected(1.0).unwrap();
        assert!(PenalisationRun::new(stopped, f, vec![1.0]).is_err());
    }

    #[test]
    fn complementary_events_sum_to_one() {
        let e = Engine::sequential(21);
        let run = exp_run(1.0, SigmaModel::ReflectedBm);
        let mc = McConfig::new(500, 0.01);
        for kind in [EventKind::XAtMost(0.3), EventKind::AAtLeast(0.2)] {
            let ev = Event::new(kind, 0.5);
            let a = weak_limit_check(&e, &run, &ev, mc).unwrap();
            let b = weak_limit_check(&e, &run, &ev.complement().unwrap(), mc).unwrap();
            for ((_, x), (_, y)) in a.curve.iter().zip(&b.curve) {
                assert!((x.mean + y.mean - 1.0).abs() < 1e-12);
            }
            // The targets are estimates of E[M_s] / Q[phi(A_inf)] = 1 split in two.
            let tol = 4.0 * (a.target.stderr + b.target.stderr);
            assert!((a.target.mean + b.target.mean - 1.0).abs() < tol);
        }
        assert!(Event::new(EventKind::Always, 0.5).complement().is_none());
    }

    #[test]
    fn weak_limit_at_time_zero_is_exact() {
        let e = Engine::sequential(22);
        let run = exp_run(1.0, SigmaModel::ReflectedBm);
        let r = weak_limit_check(&e, &run, &Event::new(EventKind::Always, 0.0), McConfig::new(200, 0.01)).unwrap();
        assert_eq!(r.target.stderr, 0.0);
        assert!((r.target.mean - 1.0).abs() < 1e-10);
        for (_, m) in &r.curve {
            assert_eq!(m.mean, 1.0);
        }
    }

    #[test]
    fn weak_limit_rejects_late_event() {
        let e = Engine::sequential(1);
        let run = exp_run(1.0, SigmaModel::ReflectedBm);
        assert!(weak_limit_check(&e, &run, &Event::new(EventKind::Always, 1.0), McConfig::new(10, 0.01)).is_err());
    }

    #[test]
    fn domination_slack_nonnegative() {
        let e = Engine::sequential(23);
        let q = KillingRate::Indicator { lo: 0.0, hi: 1.0, height: 1.0 };
        let r = domination_check(
            &e,
            &SigmaModel::ReflectedBm,
            WeightFn::EXP,
            q,
            &[0.5, 1.0, 2.0],
            McConfig::new(300, 0.01),
        )
        .unwrap();
        assert!(r.min_slack >= -1e-12);
        assert!(r.max_slack >= r.min_slack);
        assert_eq!(r.checks, 900);
    }

    #[test]
    fn curves_share_paths() {
        let e = Engine::sequential(24);
        let runs = [exp_run(1.0, SigmaModel::ReflectedBm), exp_run(2.0, SigmaModel::ReflectedBm)];
        let mc = McConfig::new(300, 0.01);
        let both = penalisation_curves(&e, &runs, mc).unwrap();
        let single = penalisation_curve(&e, &runs[1], mc).unwrap();
        assert_eq!(both[1], single);
        let other = exp_run(1.0, SigmaModel::Drawdown);
        assert!(penalisation_curves(&e, &[runs[0].clone(), other], mc).is_err());
    }
}
