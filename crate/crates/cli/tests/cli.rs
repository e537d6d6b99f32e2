use std::path::Path;
use std::process::{Command, Output};

use wildstable_cli::config::ExperimentConfig;
use wildstable_cli::{simulate, CacheSource};

fn wildstable(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wildstable"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn solve_alpha_prints_exponent_and_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[initial]\nkind = \"pareto-uniform\"\n",
    );
    let out = wildstable(&["--config", &cfg, "solve-alpha"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    let alpha = v["spectral"]["alpha"].as_f64().unwrap();
    assert!((alpha - 1.4376951081602667).abs() < 1e-9);
    let c = v["constants"]["c_scale"].as_f64().unwrap();
    assert!((c - 0.9412477).abs() < 1e-6, "{c}");
}

#[test]
fn unknown_keys_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[run]\nreplicate = 10\n");
    let out = wildstable(&["--config", &cfg, "solve-alpha"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicate"));
}

#[test]
fn invalid_model_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[model]\ndelta = 0.7\n");
    assert_eq!(
        wildstable(&["--config", &cfg, "solve-alpha"], dir.path())
            .status
            .code(),
        Some(2)
    );
    let cfg = write(dir.path(), "d.toml", "[model]\nd = 2\n");
    assert_eq!(
        wildstable(&["--config", &cfg, "solve-alpha"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn key_not_used_by_initial_kind_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[initial]\nkind = \"pareto-uniform\"\nlambda = 2.0\n",
    );
    let out = wildstable(&["--config", &cfg, "--out", "o", "simulate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn over_budget_run_is_resource_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[initial]\nkind = \"radial-stable\"\n[run]\nt = 30.0\nreplicates = 1000\n",
    );
    let out = wildstable(&["--config", &cfg, "--out", "o", "simulate"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("node budget"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn simulate_then_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[initial]\nkind = \"radial-stable\"\n[run]\nt = 1.5\nreplicates = 3000\ncache_size = 500\ndepth = 200\n",
    );
    let out = wildstable(&["--config", &cfg, "--out", "o", "simulate"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ecf: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o/ecf.json")).unwrap()).unwrap();
    assert_eq!(ecf["n_samples"], 3000);
    assert_eq!(ecf["ecf"][0]["re"], 1.0);
    assert!(
        ecf["comparison"]["sup_distance"]["distance"]
            .as_f64()
            .unwrap()
            < 0.1
    );

    let out = wildstable(
        &["--out", "d", "diagnose", "--input", "o/samples.csv"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let diag: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("d/diagnostics.json")).unwrap())
            .unwrap();
    assert_eq!(diag["n_samples"], 3000);
    assert!(diag["isotropy"].is_null());
}

#[test]
fn dsmc_samples_have_velocity_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[initial]\nkind = \"pareto-uniform\"\n[run]\nmethod = \"dsmc\"\nscheme = \"bird\"\nt = 0.5\nparticles = 2000\ncache_size = 300\ndepth = 100\n",
    );
    let out = wildstable(&["--config", &cfg, "--out", "o", "simulate"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("o/samples.csv")).unwrap();
    assert!(csv.starts_with("particle,v1,v2,v3\n"));
    assert_eq!(csv.lines().count(), 2001);
    let out = wildstable(
        &["--out", "d", "diagnose", "--input", "o/samples.csv"],
        dir.path(),
    );
    assert!(out.status.success());
    let diag: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("d/diagnostics.json")).unwrap())
            .unwrap();
    assert!(diag["isotropy"]["max_sigma"].as_f64().is_some());
}

#[test]
fn stationary_cache_round_trips_into_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[initial]\nkind = \"radial-stable\"\n[run]\nt = 0.5\nreplicates = 1000\ncache_size = 400\ndepth = 100\n",
    );
    let out = wildstable(&["--config", &cfg, "--out", "s", "stationary"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let built = wildstable(&["--config", &cfg, "--out", "a", "simulate"], dir.path());
    let cached = wildstable(
        &[
            "--config",
            &cfg,
            "--out",
            "b",
            "simulate",
            "--cache",
            "s/m_infinity.txt",
        ],
        dir.path(),
    );
    assert!(built.status.success() && cached.status.success());
    // The exported cache holds the same draws the simulation builds for itself.
    assert_eq!(
        std::fs::read(dir.path().join("a/ecf.json")).unwrap(),
        std::fs::read(dir.path().join("b/ecf.json")).unwrap()
    );
}

#[test]
fn point_mixture_has_no_comparison() {
    let cfg = ExperimentConfig::parse(
        "[initial]\nkind = \"point-mixture\"\npoints = [[1.0, 0.0, 0.0, 1.0], [2.0, 1.0, 0.0, 0.0]]\n[run]\nt = 1.0\nreplicates = 1000\n",
    )
    .unwrap();
    let out = simulate(&cfg, CacheSource::Build).unwrap();
    let v: serde_json::Value = serde_json::from_slice(out.get("ecf.json").unwrap()).unwrap();
    assert!(v["comparison"].is_null());
    assert!(v["comparison_note"].is_string());
}

#[test]
fn in_process_runs_are_thread_count_independent() {
    let check =
        wildstable_cli::reproducibility(&wildstable_cli::reproducibility_config(3)).unwrap();
    assert!(check.passed, "{check:?}");
}

#[test]
fn selfcheck_detects_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let out = wildstable(
        &[
            "--out",
            "s",
            "selfcheck",
            "--inject-fault",
            "delta-sign-flip",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("A1 FAIL")), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("s/selfcheck.json")).unwrap())
            .unwrap();
    assert_eq!(report["passed"], false);
    assert!(report["unexpected_failures"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v == "A1"));
}

#[test]
fn selfcheck_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = wildstable(&["--out", "a", "--seed", "5", "selfcheck"], dir.path());
    let b = wildstable(&["--out", "b", "--seed", "5", "selfcheck"], dir.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(b.status.success());
    assert_eq!(
        std::fs::read(dir.path().join("a/selfcheck.json")).unwrap(),
        std::fs::read(dir.path().join("b/selfcheck.json")).unwrap()
    );
}
