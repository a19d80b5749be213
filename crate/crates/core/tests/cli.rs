//! End-to-end runs of the `shiftcocycle` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_shiftcocycle");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_INDUCED: &str = "k_grid = [2, 3]\ntrials = 6\nj_grid = [10, 50]\nj_max = 50\n";

#[test]
fn empty_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "empty.toml", "k_grid = []\n");
    let o = run(&["norm-sweep", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_keys_and_scenarios_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "typo.toml", "trails = 5\n");
    assert_eq!(run(&["kac", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(run(&["kac", "--scenario", "nope"]).status.code(), Some(2));
    let bad_p = write_config(dir.path(), "p.toml", "p = 1.5\n");
    assert_eq!(run(&["exponent", "--config", &bad_p]).status.code(), Some(2));
    assert_eq!(run(&["exponent", "--scenario", "custom"]).status.code(), Some(2));
}

#[test]
fn csv_starts_with_provenance_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "kac.toml", SMALL_INDUCED);
    let o = run(&["kac", "--config", &cfg, "--seed", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# command=kac scenario=zk");
    assert!(lines[1].starts_with("# config_sha256="));
    assert!(lines[1].ends_with(" seed=9"));
    let hash = lines[1]["# config_sha256=".len()..].split(' ').next().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert!(lines.len() > 3);
    let width = lines[2].split(',').count();
    assert!(lines[3..].iter().all(|l| l.split(',').count() == width));
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "induced.toml", SMALL_INDUCED);
    for cmd in ["induced", "kac"] {
        let one = run(&[cmd, "--config", &cfg, "--threads", "1"]);
        let three = run(&[cmd, "--config", &cfg, "--threads", "3"]);
        assert!(one.status.success() && three.status.success());
        assert_eq!(one.stdout, three.stdout, "{cmd}");
    }
}

#[test]
fn out_writes_report_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ns.toml", "k_grid = [2, 4]\n");
    let out = dir.path().join("nested/ns.json");
    let o = run(&["norm-sweep", "--config", &cfg, "--format", "json", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["command"], "norm-sweep");
    let rows = report["rows"].as_array().unwrap();
    assert!(!rows.is_empty() && rows.iter().all(|r| r[0] == 2 || r[0] == 4));
    let side: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("nested/ns.json.summary.json")).unwrap()).unwrap();
    assert_eq!(side["config_hash"], report["config_hash"]);
    assert_eq!(side["rows"].as_u64(), Some(rows.len() as u64));
    assert_eq!(side["summary"], report["summary"]);
}

#[test]
fn hash_ignores_output_path_but_not_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "b.toml", "k_grid = [2]\n");
    let hash = |extra: &[&str]| {
        let mut args = vec!["norm-sweep", "--config", &cfg];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert!(o.status.success());
        let path = extra.iter().position(|a| *a == "--out").map(|i| extra[i + 1].to_string());
        let text = match path {
            Some(p) => fs::read_to_string(p).unwrap(),
            None => stdout(&o),
        };
        text.lines().nth(1).unwrap().to_string()
    };
    let out = dir.path().join("x.csv");
    assert_eq!(hash(&[]), hash(&["--out", out.to_str().unwrap()]));
    assert_ne!(hash(&[]), hash(&["--seed", "2"]));
}

#[test]
fn custom_cocycle_from_json() {
    let dir = tempfile::tempdir().unwrap();
    let cocycle = dir.path().join("a.json");
    let a = shiftcocycle::cocycle::build_a_sigma_1(2.0).unwrap();
    fs::write(&cocycle, serde_json::to_string(&a).unwrap()).unwrap();
    let cfg = write_config(dir.path(), "c.toml", "n = 20000\ntrials = 8\n");
    let o = run(&[
        "exponent",
        "--config",
        &cfg,
        "--scenario",
        "custom",
        "--cocycle",
        cocycle.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let top = report["summary"]["results"][0]["top"].as_f64().unwrap();
    assert!((top - 0.5 * 2f64.ln()).abs() < 0.02, "{top}");

    fs::write(&cocycle, "{\"not\": \"a cocycle\"}").unwrap();
    let bad = run(&["exponent", "--config", &cfg, "--scenario", "custom", "--cocycle", cocycle.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn every_scenario_runs_with_small_settings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "small.toml",
        "k_grid = [2, 3]\neta_grid = [0.5, 1.0]\nsigma_grid = [2.0]\nalpha_grid = [0.5]\nj_grid = [10, 40]\n\
         j_max = 40\ntrials = 4\nn = 2000\nsamples = 5\nsample_trials = 2000\n",
    );
    for (cmd, scenarios) in [
        ("exponent", &["diagonal", "perturbation"][..]),
        ("norm-sweep", &["bk", "lk"][..]),
        ("boundary", &["eta-sweep"][..]),
        ("exchange", &["exchange", "fiber-bunching"][..]),
        ("induced", &["cj", "abramov"][..]),
        ("kac", &["zk", "wk"][..]),
    ] {
        for s in scenarios {
            let o = run(&[cmd, "--config", &cfg, "--scenario", s]);
            assert!(o.status.success(), "{cmd} {s}: {}", String::from_utf8_lossy(&o.stderr));
            assert!(stdout(&o).starts_with(&format!("# command={cmd} scenario={s}\n")));
        }
    }
}
