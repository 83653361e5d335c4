//! `results.csv` and `summary.json`.

use std::fs;
use std::io;
use std::path::Path;

use serde_json::json;

use crate::config::RunConfig;
use crate::experiments::Outcome;

pub const CSV_HEADER: [&str; 9] = ["experiment", "series", "t", "u", "estimate", "stderr", "n", "target", "pass"];

/// 17 significant digits, `.` as decimal separator.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_csv(path: &Path, cfg: &RunConfig, outcome: &Outcome) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    let name = cfg.experiment.name();
    for r in &outcome.rows {
        w.write_record([
            name.to_string(),
            r.series.clone(),
            opt(r.t),
            opt(r.u),
            fmt_f64(r.estimate),
            opt(r.stderr),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            opt(r.target),
            String::new(),
        ])?;
    }
    w.write_record([name, "verdict", "", "", "", "", "", "", if outcome.pass { "true" } else { "false" }])?;
    w.flush()
}

pub fn write_summary(path: &Path, cfg: &RunConfig, outcome: &Outcome, runtime_seconds: f64) -> io::Result<()> {
    let mut value = json!({
        "pass": outcome.pass,
        "experiment": cfg.experiment.name(),
        "z_scores": outcome.z_scores,
        "runtime_seconds": runtime_seconds,
        "config_echo": cfg.echo,
        "artifact_version": env!("CARGO_PKG_VERSION"),
    });
    if let Some(t) = outcome.target {
        value["target"] = json!(t);
    }
    let text = serde_json::to_string_pretty(&value).map_err(io::Error::other)?;
    fs::write(path, text + "\n")
}
