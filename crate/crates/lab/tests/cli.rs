use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sigma-lab"));
    c.env_remove("SIGMA_LAB_SEED");
    c
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(cfg: &Path, out: &Path, workers: usize) -> Output {
    bin()
        .args(["run", cfg.to_str().unwrap(), "--workers", &workers.to_string(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap()
}

fn summary(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

const SMALL_MASTER: &str =
    "experiment = master-identity\nn_paths = 2000\ndt = 0.01\nmaster_seed = 5\nt = 1\nhorizons = 2, 5\n";

#[test]
fn passing_run_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "m.cfg", SMALL_MASTER);
    let out = dir.path().join("out");
    let o = run(&cfg, &out, 1);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("experiment,series,t,u,estimate,stderr,n,target,pass"));
    let s = summary(&out);
    assert_eq!(s["pass"], true);
    assert_eq!(s["experiment"], "master-identity");
    assert!(s["runtime_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(s["config_echo"]["master_seed"], "5");
}

#[test]
fn failed_check_exits_one() {
    // Far from the limit: E[F_t X_t] at t <= 1 is well below 1 / lambda.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "p.cfg",
        "experiment = penalise\nn_paths = 2000\ndt = 0.01\nmaster_seed = 1\nphi = exp\nlambda = 1\nt_list = 0.5, 1\n",
    );
    let out = dir.path().join("out");
    assert_eq!(run(&cfg, &out, 1).status.code(), Some(1));
    assert_eq!(summary(&out)["pass"], false);
}

#[test]
fn config_errors_exit_two_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown key", "experiment = master-identity\nt = 1\nhorizons = 2\nbogus = 3\n", "line 4"),
        ("bad number", "experiment = master-identity\nt = one\nhorizons = 2\n", "line 2"),
        ("duplicate", "experiment = penalise\nphi = exp\nphi = exp\nt_list = 1\n", "line 3"),
        ("wrong model", "experiment = class-d\nmodel = reflected_bm\nt = 1\nt_end = 2\n", "line 2"),
    ];
    for (i, (what, text, needle)) in cases.iter().enumerate() {
        let cfg = write_cfg(dir.path(), &format!("bad{i}.cfg"), text);
        let out = dir.path().join(format!("out{i}"));
        let o = run(&cfg, &out, 1);
        assert_eq!(o.status.code(), Some(2), "{what}");
        assert!(!out.exists(), "{what}: output written");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{what}: {err}");
    }
    let missing = run(&dir.path().join("missing.cfg"), &dir.path().join("o"), 1);
    assert_eq!(missing.status.code(), Some(2));
    let zero = run(&write_cfg(dir.path(), "ok.cfg", SMALL_MASTER), &dir.path().join("z"), 0);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "m.cfg", SMALL_MASTER);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert_eq!(run(&cfg, &blocker, 1).status.code(), Some(3));
}

#[test]
fn list_is_stable_and_complete() {
    let a = bin().arg("list").output().unwrap();
    let b = bin().arg("list").output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    for needle in
        ["model reflected_bm", "model stable_levy", "weight exp", "experiment master-identity", "experiment image-law"]
    {
        assert!(text.contains(needle), "missing {needle}");
    }
}

#[test]
fn closed_form_targets_in_summary() {
    let dir = tempfile::tempdir().unwrap();
    let image = write_cfg(dir.path(), "i.cfg", "experiment = image-law\nphi = exp\nlambda = 1\n");
    let out = dir.path().join("i");
    assert_eq!(run(&image, &out, 1).status.code(), Some(0));
    assert!((summary(&out)["target"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    let pen = write_cfg(
        dir.path(),
        "p.cfg",
        "experiment = penalise\nn_paths = 500\ndt = 0.01\nphi = exp\nlambda = 2\nt_list = 1, 2, 4\n",
    );
    let out = dir.path().join("p");
    let code = run(&pen, &out, 1).status.code();
    assert!(matches!(code, Some(0 | 1)));
    assert!((summary(&out)["target"].as_f64().unwrap() - 0.5).abs() < 1e-10);
}

#[test]
fn output_is_reproducible_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "m.cfg", SMALL_MASTER);
    let csv = |name: &str, w: usize| {
        let out = dir.path().join(name);
        run(&cfg, &out, w);
        std::fs::read(out.join("results.csv")).unwrap()
    };
    let first = csv("a", 1);
    assert_eq!(first, csv("b", 1));
    assert_eq!(first, csv("c", 8));
}

#[test]
fn seed_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "m.cfg", SMALL_MASTER);
    let go = |name: &str, seed: Option<&str>| {
        let out = dir.path().join(name);
        let mut c = bin();
        if let Some(s) = seed {
            c.env("SIGMA_LAB_SEED", s);
        }
        c.args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).output().unwrap();
        std::fs::read(out.join("results.csv")).unwrap()
    };
    let base = go("a", None);
    assert_eq!(base, go("b", Some("5")));
    assert_ne!(base, go("c", Some("6")));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        sigma_lab::RunConfig::from_file(&path, None).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert_eq!(n, sigma_lab::config::EXPERIMENTS.len());
}
