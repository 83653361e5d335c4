//! Flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, lists are comma separated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use sigma_core::decompose::{CatalogEntry, SupermartingaleSpec};
use sigma_core::penalise::{Event, EventKind};
use sigma_core::qcalc::McConfig;
use sigma_core::{LevyModel, SigmaModel, WeightFn};

/// A configuration problem, with the offending line when there is one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(line: Option<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { line, message: message.into() })
}

/// Raw key/value pairs with the line each came from.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return err(Some(line), format!("expected `key = value`, found `{content}`"));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return err(Some(line), "empty key");
            }
            if let Some((first, _)) = entries.insert(key.clone(), (line, value.trim().to_string())) {
                return err(Some(line), format!("duplicate key `{key}` (first set on line {first})"));
            }
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: String) {
        let line = self.entries.get(key).map_or(0, |e| e.0);
        self.entries.insert(key.to_string(), (line, value));
    }

    pub fn echo(&self) -> BTreeMap<String, String> {
        self.entries.iter().map(|(k, (_, v))| (k.clone(), v.clone())).collect()
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.0).filter(|&l| l > 0)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.1.as_str())
    }

    fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError { line: None, message: format!("missing required key `{key}`") })
    }

    fn num(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Some(x)),
                _ => err(self.line(key), format!("`{key}` must be a finite number, got `{v}`")),
            },
        }
    }

    fn num_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn req_num(&self, key: &str) -> Result<f64, ConfigError> {
        self.require(key)?;
        Ok(self.num(key)?.expect("present"))
    }

    fn positive(&self, key: &str, default: Option<f64>) -> Result<f64, ConfigError> {
        let v = match default {
            Some(d) => self.num_or(key, d)?,
            None => self.req_num(key)?,
        };
        if v > 0.0 {
            Ok(v)
        } else {
            err(self.line(key), format!("`{key}` must be > 0, got {v}"))
        }
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let v = self.require(key)?;
        let items: Result<Vec<f64>, _> = v.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let items = match items {
            Ok(xs) if !xs.is_empty() && xs.iter().all(|x| x.is_finite() && *x >= 0.0) => xs,
            _ => {
                return err(
                    self.line(key),
                    format!("`{key}` must be a comma-separated list of numbers >= 0, got `{v}`"),
                )
            }
        };
        if items.windows(2).any(|w| w[1] <= w[0]) {
            return err(self.line(key), format!("`{key}` must be strictly increasing"));
        }
        Ok(items)
    }

    fn boolean(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => err(self.line(key), format!("`{key}` must be true or false, got `{v}`")),
        }
    }

    fn integer(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<u64>()
                .map(Some)
                .or_else(|_| err(self.line(key), format!("`{key}` must be a nonnegative integer, got `{v}`"))),
        }
    }
}

pub const EXPERIMENTS: [&str; 10] = [
    "class-d",
    "decompose",
    "image-law",
    "level-identity",
    "master-identity",
    "mf-flatness",
    "penalise",
    "positive-martingale",
    "put-parity",
    "weak-limit",
];

/// Experiment with its validated parameters.
#[derive(Debug)]
pub enum Experiment {
    MasterIdentity { t: f64, horizons: Vec<f64>, gamma: Event },
    LevelIdentity { a: f64, t: f64, horizons: Vec<f64>, gamma: Event },
    ClassD { t: f64, t_end: f64, gamma: Event },
    PositiveMartingale { s: f64, t: f64, gamma: Event },
    PutParity { k: f64, t: f64, horizons: Vec<f64>, tail_correction: bool },
    Penalise { phi: WeightFn, t_list: Vec<f64> },
    WeakLimit { phi: WeightFn, t_list: Vec<f64>, event: Event },
    Decompose { spec: SupermartingaleSpec, t_list: Vec<f64>, horizon: f64 },
    MfFlatness { weight: WeightFn, t_list: Vec<f64> },
    ImageLaw { phi: WeightFn, cross_check: Option<(f64, f64)> },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::MasterIdentity { .. } => "master-identity",
            Self::LevelIdentity { .. } => "level-identity",
            Self::ClassD { .. } => "class-d",
            Self::PositiveMartingale { .. } => "positive-martingale",
            Self::PutParity { .. } => "put-parity",
            Self::Penalise { .. } => "penalise",
            Self::WeakLimit { .. } => "weak-limit",
            Self::Decompose { .. } => "decompose",
            Self::MfFlatness { .. } => "mf-flatness",
            Self::ImageLaw { .. } => "image-law",
        }
    }
}

/// A fully validated run.
#[derive(Debug)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub model: SigmaModel,
    pub mc: McConfig,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    pub echo: BTreeMap<String, String>,
}

const COMMON_KEYS: [&str; 8] = ["experiment", "model", "n_paths", "master_seed", "dt", "t_end", "n_steps", "output"];

fn allowed_keys(experiment: &str, model: &str) -> Vec<&'static str> {
    let mut keys: Vec<&'static str> = COMMON_KEYS.to_vec();
    keys.extend(match model {
        "stopped_reflected" => &["barrier"][..],
        "stable_levy" => &["alpha", "x0", "band_mult", "occupation_scale"][..],
        _ => &[][..],
    });
    let event = ["event", "event_level", "s"];
    keys.extend(match experiment {
        "master-identity" => [&["t", "horizons"][..], &event[..]].concat(),
        "level-identity" => [&["a", "t", "horizons"][..], &event[..]].concat(),
        "class-d" => [&["t"][..], &event[..]].concat(),
        "positive-martingale" => [&["t"][..], &event[..]].concat(),
        "put-parity" => vec!["k", "t", "horizons", "tail_correction"],
        "penalise" => vec!["phi", "lambda", "width", "t_list"],
        "weak-limit" => [&["phi", "lambda", "width", "t_list"][..], &event[..]].concat(),
        "decompose" => vec!["spec", "t_list", "horizon"],
        "mf-flatness" => vec!["weight", "lambda", "width", "t_list"],
        "image-law" => vec!["phi", "lambda", "width", "cross_check", "ks_t_end"],
        _ => vec![],
    });
    keys
}

impl RunConfig {
    pub fn from_file(path: &Path, seed_override: Option<&str>) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).or_else(|e| err(None, format!("cannot read {}: {e}", path.display())))?;
        let mut raw = RawConfig::parse(&text)?;
        if let Some(seed) = seed_override {
            raw.set("master_seed", seed.to_string());
        }
        Self::from_raw(&raw)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let exp_name = raw.require("experiment")?;
        if !EXPERIMENTS.contains(&exp_name) {
            return err(raw.line("experiment"), format!("unknown experiment `{exp_name}`"));
        }
        let default_model = match exp_name {
            "class-d" => "stopped_reflected",
            "positive-martingale" => "geometric_bm",
            "put-parity" => "exp_martingale",
            _ => "reflected_bm",
        };
        let model_name = raw.get("model").unwrap_or(default_model);
        let allowed = allowed_keys(exp_name, model_name);
        for (key, (line, _)) in &raw.entries {
            if !allowed.contains(&key.as_str()) {
                return err(Some(*line).filter(|&l| l > 0), format!("unknown key `{key}` for experiment `{exp_name}`"));
            }
        }
        let model = parse_model(raw, model_name)?;
        let n_paths = match raw.integer("n_paths")? {
            Some(n) if n >= 2 => n as usize,
            Some(n) => return err(raw.line("n_paths"), format!("`n_paths` must be >= 2, got {n}")),
            None => 10_000,
        };
        let dt = match (raw.num("n_steps")?, raw.num("t_end")?, raw.num("dt")?) {
            (Some(n), Some(t), None) if n >= 1.0 && t > 0.0 => t / n.round(),
            (Some(_), _, Some(_)) => {
                return err(raw.line("n_steps"), "give either `dt` or `t_end` with `n_steps`, not both")
            }
            (Some(_), None, None) => return err(raw.line("n_steps"), "`n_steps` needs `t_end`"),
            (Some(_), Some(_), None) => return err(raw.line("n_steps"), "`n_steps` must be >= 1 and `t_end` > 0"),
            _ => raw.positive("dt", Some(1e-3))?,
        };
        let master_seed = raw.integer("master_seed")?.unwrap_or(0);
        let experiment = parse_experiment(raw, exp_name, &model, dt)?;
        check_model_fits(raw, &experiment, &model)?;
        Ok(Self {
            experiment,
            model,
            mc: McConfig::new(n_paths, dt),
            master_seed,
            output: raw.get("output").map(PathBuf::from),
            echo: raw.echo(),
        })
    }
}

fn parse_model(raw: &RawConfig, name: &str) -> Result<SigmaModel, ConfigError> {
    let line = raw.line("model");
    let model = match name {
        "reflected_bm" => SigmaModel::ReflectedBm,
        "drawdown" => SigmaModel::Drawdown,
        "exp_martingale" => SigmaModel::ExpMartingale,
        "geometric_bm" => SigmaModel::GeometricBm,
        "stopped_reflected" => SigmaModel::stopped_reflected(raw.positive("barrier", Some(1.0))?)
            .or_else(|e| err(raw.line("barrier"), e.to_string()))?,
        "stable_levy" => {
            let alpha = raw.num_or("alpha", 1.5)?;
            let built = LevyModel::new(alpha, raw.num_or("x0", 0.0)?)
                .and_then(|m| {
                    m.with_band_mult(raw.num_or("band_mult", LevyModel::DEFAULT_BAND_MULT).unwrap_or(f64::NAN))
                })
                .and_then(|m| m.with_occupation_scale(raw.num_or("occupation_scale", 1.0).unwrap_or(f64::NAN)));
            SigmaModel::StableLevy(built.or_else(|e| err(raw.line("alpha").or(line), e.to_string()))?)
        }
        other => return err(line, format!("unknown model `{other}`")),
    };
    Ok(model)
}

fn parse_weight(raw: &RawConfig, key: &str) -> Result<WeightFn, ConfigError> {
    let name = raw.get(key).unwrap_or("exp");
    let w = match name {
        "exp" => WeightFn::exp(raw.positive("lambda", Some(1.0))?),
        "indicator" => WeightFn::indicator(raw.positive("width", Some(1.0))?),
        "inv_square" => Ok(WeightFn::InverseSquare),
        other => return err(raw.line(key), format!("unknown {key} `{other}`")),
    };
    w.or_else(|e| err(raw.line(key), e.to_string()))
}

fn parse_event(raw: &RawConfig, s_default: f64) -> Result<Event, ConfigError> {
    let s = raw.num_or("s", s_default)?;
    if s < 0.0 {
        return err(raw.line("s"), "`s` must be >= 0");
    }
    let name = raw.get("event").unwrap_or("always");
    let level = || raw.req_num("event_level").map_err(|e| ConfigError { line: e.line.or(raw.line("event")), ..e });
    let kind = match name {
        "always" => EventKind::Always,
        "x_at_most" => EventKind::XAtMost(level()?),
        "x_above" => EventKind::XAbove(level()?),
        "a_at_least" => EventKind::AAtLeast(level()?),
        "a_below" => EventKind::ABelow(level()?),
        other => return err(raw.line("event"), format!("unknown event `{other}`")),
    };
    Ok(Event::new(kind, s))
}

fn parse_spec(raw: &RawConfig) -> Result<SupermartingaleSpec, ConfigError> {
    let text = raw.get("spec").unwrap_or("mf_exp");
    let line = raw.line("spec");
    if let Some(entry) = CatalogEntry::from_name(text) {
        return Ok(SupermartingaleSpec::catalog(entry));
    }
    // Mixture: `name:weight, name:weight, ...`
    let mut terms = Vec::new();
    for part in text.split(',') {
        let Some((name, w)) = part.trim().split_once(':') else {
            return err(line, format!("unknown spec `{text}`"));
        };
        let entry = CatalogEntry::from_name(name.trim())
            .ok_or_else(|| ConfigError { line, message: format!("unknown catalog entry `{}`", name.trim()) })?;
        let w: f64 = w.trim().parse().or_else(|_| err(line, format!("bad mixture weight `{w}`")))?;
        terms.push((w, entry));
    }
    SupermartingaleSpec::mixture(text, terms).or_else(|e| err(line, e.to_string()))
}

fn on_grid(raw: &RawConfig, key: &str, value: f64, dt: f64) -> Result<(), ConfigError> {
    let k = (value / dt).round();
    if (k * dt - value).abs() > 1e-6 * dt {
        return err(raw.line(key), format!("`{key}` = {value} is not a multiple of dt = {dt}"));
    }
    Ok(())
}

fn parse_experiment(raw: &RawConfig, name: &str, model: &SigmaModel, dt: f64) -> Result<Experiment, ConfigError> {
    let times = |key: &str| -> Result<Vec<f64>, ConfigError> {
        let xs = raw.list(key)?;
        for &x in &xs {
            on_grid(raw, key, x, dt)?;
        }
        Ok(xs)
    };
    let time = |key: &str, default: Option<f64>| -> Result<f64, ConfigError> {
        let v = match default {
            Some(d) => raw.num_or(key, d)?,
            None => raw.req_num(key)?,
        };
        if v < 0.0 {
            return err(raw.line(key), format!("`{key}` must be >= 0"));
        }
        on_grid(raw, key, v, dt)?;
        Ok(v)
    };
    let after = |key: &str, xs: &[f64], t: f64| -> Result<(), ConfigError> {
        if xs[0] <= t {
            return err(raw.line(key), format!("`{key}` must all exceed t = {t}"));
        }
        Ok(())
    };
    let event_before = |ev: &Event, t: f64| -> Result<(), ConfigError> {
        on_grid(raw, "s", ev.s, dt)?;
        if ev.s > t {
            return err(raw.line("s"), format!("`s` = {} must not exceed t = {t}", ev.s));
        }
        Ok(())
    };
    let exp = match name {
        "master-identity" | "level-identity" => {
            let t = time("t", Some(1.0))?;
            let horizons = times("horizons")?;
            after("horizons", &horizons, t)?;
            let gamma = parse_event(raw, t)?;
            event_before(&gamma, t)?;
            if name == "master-identity" {
                Experiment::MasterIdentity { t, horizons, gamma }
            } else {
                Experiment::LevelIdentity { a: raw.positive("a", None)?, t, horizons, gamma }
            }
        }
        "class-d" => {
            let t = time("t", Some(2.0))?;
            let t_end = time("t_end", Some(20.0))?;
            if t_end <= t {
                return err(raw.line("t_end"), "`t_end` must exceed `t`");
            }
            let gamma = parse_event(raw, t)?;
            event_before(&gamma, t)?;
            Experiment::ClassD { t, t_end, gamma }
        }
        "positive-martingale" => {
            let t = time("t", Some(2.0))?;
            let gamma = parse_event(raw, t / 2.0)?;
            event_before(&gamma, t)?;
            if gamma.s >= t {
                return err(raw.line("s"), "`s` must be < `t`");
            }
            Experiment::PositiveMartingale { s: gamma.s, t, gamma }
        }
        "put-parity" => {
            let t = time("t", Some(1.0))?;
            if t <= 0.0 {
                return err(raw.line("t"), "`t` must be > 0");
            }
            let horizons = times("horizons")?;
            after("horizons", &horizons, t)?;
            Experiment::PutParity {
                k: raw.positive("k", Some(1.0))?,
                t,
                horizons,
                tail_correction: raw.boolean("tail_correction", true)?,
            }
        }
        "penalise" | "weak-limit" => {
            let phi = parse_weight(raw, "phi")?;
            let t_list = times("t_list")?;
            if name == "penalise" {
                Experiment::Penalise { phi, t_list }
            } else {
                let event = parse_event(raw, 0.0)?;
                on_grid(raw, "s", event.s, dt)?;
                if event.s >= t_list[0] {
                    return err(raw.line("s"), "`s` must be < min(t_list)");
                }
                Experiment::WeakLimit { phi, t_list, event }
            }
        }
        "decompose" => {
            let t_list = times("t_list")?;
            let horizon = time("horizon", Some(t_list[t_list.len() - 1]))?;
            if horizon < t_list[t_list.len() - 1] {
                return err(raw.line("horizon"), "`horizon` must be >= max(t_list)");
            }
            Experiment::Decompose { spec: parse_spec(raw)?, t_list, horizon }
        }
        "mf-flatness" => Experiment::MfFlatness { weight: parse_weight(raw, "weight")?, t_list: times("t_list")? },
        "image-law" => {
            let phi = parse_weight(raw, "phi")?;
            let cross_check = if raw.boolean("cross_check", false)? {
                let WeightFn::Exp { rate } = phi else {
                    return err(raw.line("cross_check"), "the weighted-law cross-check needs `phi = exp`");
                };
                Some((rate, time("ks_t_end", Some(100.0))?))
            } else {
                None
            };
            Experiment::ImageLaw { phi, cross_check }
        }
        _ => unreachable!("experiment names are validated first"),
    };
    let _ = model;
    Ok(exp)
}

fn check_model_fits(raw: &RawConfig, exp: &Experiment, model: &SigmaModel) -> Result<(), ConfigError> {
    let flags = model.flags();
    let line = raw.line("model");
    let need = |ok: bool, what: &str| if ok { Ok(()) } else { err(line, format!("model `{}` {what}", model.name())) };
    match exp {
        Experiment::ClassD { .. } => need(flags.class_d, "is not of class (D)"),
        Experiment::PositiveMartingale { .. } => need(flags.strictly_positive, "is not strictly positive"),
        Experiment::PutParity { .. } => {
            need(matches!(model, SigmaModel::ExpMartingale), "is not the exponential martingale")
        }
        Experiment::Decompose { .. } | Experiment::Penalise { .. } | Experiment::WeakLimit { .. } => {
            need(flags.a_infinity_infinite, "does not have A_inf = inf")?;
            need(model.initial_x() == 0.0 || !matches!(exp, Experiment::Decompose { .. }), "does not start at 0")
        }
        Experiment::ImageLaw { cross_check: Some(_), .. } => {
            need(flags.a_infinity_infinite && model.initial_x() == 0.0, "does not have A_inf = inf and X_0 = 0")
        }
        Experiment::ImageLaw { cross_check: None, .. } => Ok(()),
        Experiment::MasterIdentity { .. } | Experiment::LevelIdentity { .. } | Experiment::MfFlatness { .. } => {
            need(flags.a_infinity_infinite, "does not have A_inf = inf")
        }
    }
}
