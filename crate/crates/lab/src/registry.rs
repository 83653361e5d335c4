//! Named catalog entries addressable from configuration files.

use sigma_core::decompose::CatalogEntry;

use crate::config::EXPERIMENTS;

/// `kind name params-schema` lines, sorted.
pub fn registry_lines() -> Vec<String> {
    let mut lines: Vec<String> = [
        ("model", "drawdown", "-"),
        ("model", "exp_martingale", "-"),
        ("model", "geometric_bm", "-"),
        ("model", "reflected_bm", "-"),
        ("model", "stable_levy", "alpha:(1,2) x0:real band_mult:>0 occupation_scale:>0"),
        ("model", "stopped_reflected", "barrier:>0"),
        ("weight", "exp", "lambda:>0"),
        ("weight", "indicator", "width:>0"),
        ("weight", "inv_square", "-"),
        ("phi", "exp", "lambda:>0"),
        ("phi", "indicator", "width:>0"),
        ("phi", "inv_square", "-"),
        ("spec", "mixture", "entry:weight,..."),
        ("event", "always", "s:>=0"),
        ("event", "x_at_most", "event_level:real s:>=0"),
        ("event", "x_above", "event_level:real s:>=0"),
        ("event", "a_at_least", "event_level:real s:>=0"),
        ("event", "a_below", "event_level:real s:>=0"),
    ]
    .iter()
    .map(|(k, n, p)| format!("{k} {n} {p}"))
    .collect();
    lines.extend(CatalogEntry::ALL.iter().map(|e| format!("spec {} -", e.name())));
    lines.extend(EXPERIMENTS.iter().map(|e| format!("experiment {e} {}", experiment_schema(e))));
    lines.sort();
    lines
}

fn experiment_schema(name: &str) -> &'static str {
    match name {
        "master-identity" => "t horizons event event_level s",
        "level-identity" => "a t horizons event event_level s",
        "class-d" => "t t_end event event_level s",
        "positive-martingale" => "t event event_level s",
        "put-parity" => "k t horizons tail_correction",
        "penalise" => "phi lambda width t_list",
        "weak-limit" => "phi lambda width t_list event event_level s",
        "decompose" => "spec t_list horizon",
        "mf-flatness" => "weight lambda width t_list",
        "image-law" => "phi lambda width cross_check ks_t_end",
        _ => "-",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_and_complete() {
        let lines = registry_lines();
        let mut sorted = lines.clone();
        sorted.sort();
        assert_eq!(lines, sorted);
        assert!(lines.iter().any(|l| l.starts_with("model reflected_bm")));
        assert!(lines.iter().any(|l| l.starts_with("weight exp")));
        assert!(lines.iter().all(|l| l.split(' ').count() >= 3));
    }
}
