//! Dispatch from a validated configuration to the verifiers.

use std::collections::BTreeMap;

use sigma_core::decompose::{decompose, mf_characterization_check};
use sigma_core::pathfunc::ClassC;
use sigma_core::penalise::{penalisation_curve, weak_limit_check, CurveReport, Event, PenalisationRun};
use sigma_core::qcalc::{
    image_law_check, mf_flatness, put_parity_check, q_terminal_expectation, verify_class_d, verify_level_identity,
    verify_master_identity, verify_positive_martingale, IdentityReport,
};
use sigma_core::{Engine, McEstimate, PathBundle, Result};

use crate::config::{Experiment, RunConfig};

/// One long-format output row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub series: String,
    pub t: Option<f64>,
    pub u: Option<f64>,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub n: Option<usize>,
    pub target: Option<f64>,
}

impl Row {
    fn mc(series: &str, t: Option<f64>, u: Option<f64>, e: &McEstimate, target: Option<f64>) -> Self {
        Self {
            series: series.into(),
            t,
            u,
            estimate: e.mean,
            stderr: Some(e.stderr),
            n: (e.n > 0).then_some(e.n),
            target,
        }
    }

    fn exact(series: &str, t: Option<f64>, value: f64, target: Option<f64>) -> Self {
        Self { series: series.into(), t, u: None, estimate: value, stderr: None, n: None, target }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub z_scores: BTreeMap<String, f64>,
    pub target: Option<f64>,
    pub pass: bool,
}

/// Relative accuracy required of the image-law quadrature.
pub const IMAGE_LAW_RTOL: f64 = 1e-8;
/// Largest Kolmogorov distance accepted for the weighted law of `A_T`.
pub const IMAGE_LAW_KS_MAX: f64 = 0.02;

fn gamma_fn(ev: Event) -> impl Fn(&PathBundle) -> f64 + Sync {
    move |p: &PathBundle| {
        let k = p.grid.index_at(ev.s).expect("event time validated against the grid");
        ev.indicator(p, k)
    }
}

fn identity(out: &mut Outcome, r: &IdentityReport, t: f64, rhs_t: f64, horizons: bool) {
    for (u, e) in &r.horizon_curve {
        out.rows.push(Row::mc("lhs", Some(t), Some(*u), e, None));
    }
    if !horizons {
        out.rows.push(Row::mc("lhs", Some(t), None, &r.lhs, None));
    }
    out.rows.push(Row::mc("rhs", Some(rhs_t), None, &r.rhs, None));
    out.z_scores.insert("identity".into(), r.z_score);
    out.pass = r.pass && (!horizons || r.curve_monotone());
}

fn curve(out: &mut Outcome, series: &str, r: &CurveReport) {
    for (t, e) in &r.curve {
        out.rows.push(Row::mc(series, Some(*t), None, e, Some(r.target.mean)));
    }
    if r.target.stderr > 0.0 {
        out.rows.push(Row::mc("target", None, None, &r.target, None));
    }
    out.target = Some(r.target.mean);
    out.z_scores.insert("final".into(), r.final_z);
    out.pass = r.pass;
}

pub fn run_experiment(cfg: &RunConfig, engine: &Engine<'_>) -> Result<Outcome> {
    let model = &cfg.model;
    let mc = cfg.mc;
    let mut out = Outcome::default();
    match &cfg.experiment {
        Experiment::MasterIdentity { t, horizons, gamma } => {
            let r = verify_master_identity(engine, model, &gamma_fn(*gamma), *t, horizons, mc)?;
            identity(&mut out, &r, *t, *t, true);
        }
        Experiment::LevelIdentity { a, t, horizons, gamma } => {
            let r = verify_level_identity(engine, model, *a, &gamma_fn(*gamma), *t, horizons, mc)?;
            identity(&mut out, &r, *t, *t, true);
        }
        Experiment::ClassD { t, t_end, gamma } => {
            let r = verify_class_d(engine, model, &gamma_fn(*gamma), *t, *t_end, mc)?;
            identity(&mut out, &r, *t, *t, false);
        }
        Experiment::PositiveMartingale { s, t, gamma } => {
            let r = verify_positive_martingale(engine, model, &gamma_fn(*gamma), *s, *t, mc)?;
            identity(&mut out, &r, *t, *s, false);
        }
        Experiment::PutParity { k, t, horizons, tail_correction } => {
            let r = put_parity_check(engine, *k, *t, horizons, *tail_correction, mc)?;
            identity(&mut out, &r, *t, *t, false);
            out.pass = r.pass;
        }
        Experiment::Penalise { phi, t_list } => {
            let run = PenalisationRun::new(model.clone(), ClassC::decreasing_of_a(*phi)?, t_list.clone())?;
            curve(&mut out, "penalised", &penalisation_curve(engine, &run, mc)?);
        }
        Experiment::WeakLimit { phi, t_list, event } => {
            let run = PenalisationRun::new(model.clone(), ClassC::decreasing_of_a(*phi)?, t_list.clone())?;
            curve(&mut out, "q_t", &weak_limit_check(engine, &run, event, mc)?);
        }
        Experiment::Decompose { spec, t_list, horizon } => {
            let r = decompose(engine, spec, model, t_list, *horizon, mc)?;
            for (t, e) in &r.expectation_curve {
                out.rows.push(Row::mc("expectation", Some(*t), None, e, None));
            }
            for (t, e) in &r.m_curve {
                out.rows.push(Row::mc("m_part", Some(*t), None, e, None));
            }
            for (t, e) in &r.xi_curve {
                out.rows.push(Row::mc("xi", Some(*t), None, e, None));
            }
            for b in &r.mass_balance {
                out.rows.push(Row::mc("mass_balance_rhs", Some(b.t), None, &b.rhs, None));
                out.z_scores.insert(format!("mass_balance_t{}", b.t), b.z_score);
            }
            out.rows.push(Row::mc("z_inf_weighted", Some(*horizon), None, &r.z_inf_estimate, r.z_inf_target));
            out.rows.push(Row::exact("excluded_weight", Some(*horizon), r.excluded_weight, None));
            out.rows.push(Row::mc("z_terminal", Some(*horizon), None, &r.z_terminal_estimate, None));
            if let Some(q) = r.q_z_inf {
                out.rows.push(Row::exact("q_z_inf", None, q, None));
            }
            out.pass = r.pass;
            if spec.is_martingale() == Some(true) {
                let c = mf_characterization_check(engine, spec, model, t_list, mc)?;
                out.rows.push(Row::mc("characterization_gap", None, None, &c.gap, None));
                out.rows.push(Row::exact("mf_type", None, if c.is_mf_type { 1.0 } else { 0.0 }, None));
            }
        }
        Experiment::MfFlatness { weight, t_list } => {
            let r = mf_flatness(engine, model, weight, t_list, mc)?;
            for (t, e) in &r.curve {
                out.rows.push(Row::mc("mf", Some(*t), None, e, Some(r.target)));
            }
            out.target = Some(r.target);
            out.z_scores.insert("max".into(), r.max_z);
            out.pass = r.pass;
        }
        Experiment::ImageLaw { phi, cross_check } => {
            let x0 = model.initial_x();
            let target = x0 * phi.f(0.0) + phi.total();
            let q = q_terminal_expectation(&|x| phi.f(x), x0)?;
            out.rows.push(Row::exact("quadrature", None, q, Some(target)));
            out.target = Some(target);
            out.pass = ((q - target) / target).abs() <= IMAGE_LAW_RTOL;
            if let Some((lambda, t_end)) = cross_check {
                let r = image_law_check(engine, model, *lambda, *t_end, mc)?;
                out.rows.push(Row::exact("ks_distance", Some(*t_end), r.ks_distance, Some(IMAGE_LAW_KS_MAX)));
                out.rows.push(Row::exact("effective_n", Some(*t_end), r.effective_n, None));
                out.pass &= r.ks_distance <= IMAGE_LAW_KS_MAX;
            }
        }
    }
    Ok(out)
}
