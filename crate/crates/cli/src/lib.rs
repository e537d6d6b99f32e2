//! Command implementations behind the `wildstable` binary.
//!
//! Each command renders its outputs in memory first and only then writes
//! them, so a failed run leaves no partial files behind.

pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use wildstable::acceptance::{
    run_criterion, Outcome, Scale, SuiteConfig, CRITERIA, KNOWN_UNATTAINABLE,
};
use wildstable::collision::InjectedFault;
use wildstable::diagnostics::{
    cf_sup_distance_to, default_rho_grid, empirical_cf, hill_tail_index, isotropy_check,
    tail_constant_process, CfPoint, IsotropyReport, SupDistance, TailConstants,
};
use wildstable::evolution::{run_dsmc_with, sample_projection_batch, DsmcScheme};
use wildstable::spectral::{c_constants, k_alpha, SpectralInfo, StableConstants};
use wildstable::stablelaws::{cf_stationary_radius, StationaryLaw};
use wildstable::RandomStream;

use config::{build_initial, build_model, build_run, ExperimentConfig, Method};

/// Version of every JSON document written by the tool.
pub const SCHEMA_VERSION: u32 = 1;

/// Mixed into the run seed for the fixed-point cache so it never shares streams with the run.
const CACHE_SALT: u64 = 0x5851_F42D_4C95_7F2D;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] wildstable::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status: 2 configuration, 3 numerical, 4 resource, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use wildstable::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Library(E::Argument(_) | E::Domain(_) | E::Parse(_) | E::Unsupported(_)) => 2,
            CliError::Library(E::Numerical(_) | E::State(_)) => 3,
            CliError::Library(E::Resource(_)) => 4,
            CliError::Library(_) | CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Files produced by a command, keyed by file name.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Artifacts {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Artifacts {
    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes =
            serde_json::to_vec_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        bytes.push(b'\n');
        self.files.insert(name.to_string(), bytes);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    /// Write everything into `dir`; on any failure remove what was written.
    pub fn write_to(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Err(e) = std::fs::write(&path, bytes) {
                for done in &written {
                    let _ = std::fs::remove_file(done);
                }
                let _ = std::fs::remove_file(&path);
                return Err(io(&path)(e));
            }
            written.push(path);
        }
        Ok(written)
    }
}

#[derive(Serialize)]
struct SolveReport {
    schema_version: u32,
    command: &'static str,
    d: usize,
    delta: f64,
    spectral: SpectralInfo,
    k_alpha: f64,
    constants: Option<StableConstants>,
}

/// Exponent of the model plus, when an initial law is configured, its constants.
pub fn solve_alpha(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let model = build_model(&cfg.model)?;
    let alpha = model.spectral.alpha;
    let constants = match &cfg.initial {
        Some(section) => {
            let data = build_initial(section, cfg.model.d, alpha)?;
            match data.implied_spec() {
                Ok(spec) => Some(c_constants(&spec)?),
                Err(wildstable::Error::Unsupported(_)) => None,
                Err(e) => return Err(e.into()),
            }
        }
        None => None,
    };
    let report = SolveReport {
        schema_version: SCHEMA_VERSION,
        command: "solve-alpha",
        d: cfg.model.d,
        delta: cfg.model.delta,
        spectral: model.spectral,
        k_alpha: k_alpha(alpha)?,
        constants,
    };
    let mut out = Artifacts::default();
    out.json("alpha.json", &report)?;
    Ok(out)
}

#[derive(Serialize)]
struct Comparison {
    constants: StableConstants,
    cache_size: usize,
    depth: usize,
    stationary: Vec<f64>,
    sup_distance: SupDistance,
}

#[derive(Serialize)]
struct SimulateReport {
    schema_version: u32,
    command: &'static str,
    method: &'static str,
    scheme: Option<&'static str>,
    d: usize,
    delta: f64,
    alpha: f64,
    t: f64,
    seed: u64,
    direction: Vec<f64>,
    n_samples: usize,
    node_budget: Option<usize>,
    truncated: Option<usize>,
    truncation_bound: Option<f64>,
    ecf: Vec<CfPoint>,
    comparison: Option<Comparison>,
    comparison_note: Option<String>,
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> CliResult<Vec<u8>> {
    let err = |e: csv::Error| CliError::Config(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for (i, row) in rows.enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|x| format!("{x:?}")));
        w.write_record(&rec).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Config(e.to_string()))
}

/// Optional source of fixed-point draws for the comparison block.
pub enum CacheSource<'a> {
    Build,
    File(&'a Path),
}

/// Evolve the configured initial law and compare its CF with the stationary one.
pub fn simulate(cfg: &ExperimentConfig, cache: CacheSource<'_>) -> CliResult<Artifacts> {
    let model = build_model(&cfg.model)?;
    let d = cfg.model.d;
    let section = cfg
        .initial
        .as_ref()
        .ok_or_else(|| CliError::Config("simulate needs an [initial] section".into()))?;
    let data = build_initial(section, d, model.spectral.alpha)?;
    let plan = build_run(&cfg.run, d)?;
    let params = &model.params;
    let mut out = Artifacts::default();

    let (projections, node_budget, truncated, truncation_bound, scheme) = match plan.method {
        Method::Tree => {
            let batch = sample_projection_batch(
                plan.t,
                &plan.direction,
                &data,
                params,
                plan.replicates,
                plan.seed,
                plan.node_budget,
            )?;
            let header = vec!["replicate".to_string(), "projection".to_string()];
            out.files.insert(
                "samples.csv".into(),
                csv_bytes(&header, batch.samples.iter().map(|x| vec![*x]))?,
            );
            (
                batch.samples,
                Some(plan.node_budget),
                Some(batch.truncated),
                Some(batch.truncation_bound),
                None,
            )
        }
        Method::Dsmc => {
            let mut rng = RandomStream::new(plan.seed, 0);
            let ensemble =
                run_dsmc_with(plan.particles, plan.t, &data, params, plan.scheme, &mut rng)?;
            let mut header = vec!["particle".to_string()];
            header.extend((1..=d).map(|k| format!("v{k}")));
            out.files.insert(
                "samples.csv".into(),
                csv_bytes(&header, ensemble.rows().map(<[f64]>::to_vec))?,
            );
            let name = match plan.scheme {
                DsmcScheme::Nanbu => "nanbu",
                DsmcScheme::Bird => "bird",
            };
            (
                ensemble.projections(&plan.direction),
                None,
                None,
                None,
                Some(name),
            )
        }
    };
    let estimate = empirical_cf(&projections, &plan.rho_grid)?;

    let alpha = data.alpha();
    let (comparison, comparison_note) = if (alpha - model.spectral.alpha).abs() > 1e-9 {
        (
            None,
            Some(
                "initial exponent differs from the model exponent; no stationary limit to compare"
                    .into(),
            ),
        )
    } else {
        match data.implied_spec() {
            Err(wildstable::Error::Unsupported(msg)) => (None, Some(msg)),
            Err(e) => return Err(e.into()),
            Ok(spec) => {
                let constants = c_constants(&spec)?;
                let law = match cache {
                    CacheSource::Build => StationaryLaw::build(
                        params,
                        constants.c_scale,
                        alpha,
                        plan.cache_size,
                        plan.depth,
                        plan.seed ^ CACHE_SALT,
                    )?,
                    CacheSource::File(path) => {
                        StationaryLaw::import_cache(constants.c_scale, alpha, path)?
                    }
                };
                let stationary = plan
                    .rho_grid
                    .iter()
                    .map(|r| cf_stationary_radius(&law, *r))
                    .collect();
                let sup_distance = cf_sup_distance_to(&estimate, |r| cf_stationary_radius(&law, r));
                let comparison = Comparison {
                    constants,
                    cache_size: law.m_samples().len(),
                    depth: plan.depth,
                    stationary,
                    sup_distance,
                };
                (Some(comparison), None)
            }
        }
    };

    let report = SimulateReport {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        method: match plan.method {
            Method::Tree => "tree",
            Method::Dsmc => "dsmc",
        },
        scheme,
        d,
        delta: cfg.model.delta,
        alpha,
        t: plan.t,
        seed: plan.seed,
        direction: plan.direction.as_slice().to_vec(),
        n_samples: projections.len(),
        node_budget,
        truncated,
        truncation_bound,
        ecf: estimate.points(),
        comparison,
        comparison_note,
    };
    out.json("ecf.json", &report)?;
    Ok(out)
}

#[derive(Serialize)]
struct StationaryReport {
    schema_version: u32,
    command: &'static str,
    alpha: f64,
    depth: usize,
    count: usize,
    seed: u64,
    mean: f64,
    std_dev: f64,
    max: f64,
}

/// Build the fixed-point cache for the configured model.
pub fn stationary(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let model = build_model(&cfg.model)?;
    let plan = build_run(&cfg.run, cfg.model.d)?;
    let alpha = model.spectral.alpha;
    let seed = plan.seed ^ CACHE_SALT;
    let law = StationaryLaw::build(&model.params, 1.0, alpha, plan.cache_size, plan.depth, seed)?;
    let m = law.m_samples();
    let n = m.len() as f64;
    let mean = m.iter().sum::<f64>() / n;
    let var = m.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let report = StationaryReport {
        schema_version: SCHEMA_VERSION,
        command: "stationary",
        alpha,
        depth: plan.depth,
        count: m.len(),
        seed: plan.seed,
        mean,
        std_dev: var.sqrt(),
        max: m.iter().copied().fold(0.0, f64::max),
    };
    let mut cache = String::new();
    for x in m {
        cache.push_str(&format!("{x:?}\n"));
    }
    let mut out = Artifacts::default();
    out.files
        .insert("m_infinity.txt".into(), cache.into_bytes());
    out.json("stationary.json", &report)?;
    Ok(out)
}

#[derive(Serialize)]
struct DiagnoseReport {
    schema_version: u32,
    command: &'static str,
    input_columns: Vec<String>,
    n_samples: usize,
    alpha: f64,
    ecf: Vec<CfPoint>,
    hill_k: Option<usize>,
    hill_tail_index: Option<f64>,
    tail_constants: TailConstants,
    isotropy: Option<IsotropyReport>,
}

/// Statistics of a samples CSV written by `simulate`.
///
/// A `projection` column is analysed directly; otherwise every column except
/// the leading index is a velocity coordinate and the last one is projected.
pub fn diagnose(csv_path: &Path, alpha: f64, rho_grid: Option<Vec<f64>>) -> CliResult<Artifacts> {
    let mut reader =
        csv::Reader::from_path(csv_path).map_err(|e| CliError::Config(e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Config(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 2 {
        return Err(CliError::Config(
            "samples file needs an index column and at least one value column".into(),
        ));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Config(e.to_string()))?;
        let row = record
            .iter()
            .skip(1)
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("row {}: {e}", line + 2)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Config("samples file has no rows".into()));
    }
    let projection_col = headers.iter().skip(1).position(|h| h == "projection");
    let (samples, isotropy) = match projection_col {
        Some(k) => (rows.iter().map(|r| r[k]).collect::<Vec<_>>(), None),
        None => {
            let last = headers.len() - 2;
            let iso = if rows[0].len() >= 2 {
                Some(isotropy_check(&rows)?)
            } else {
                None
            };
            (rows.iter().map(|r| r[last]).collect(), iso)
        }
    };
    let grid = rho_grid.unwrap_or_else(default_rho_grid);
    let ecf = empirical_cf(&samples, &grid)?;
    let hill_k = (samples.len() / 100).max(10);
    let hill = hill_tail_index(&samples, hill_k).ok();
    let tails = tail_constant_process(&samples, alpha, &[0.01, 0.02, 0.05, 0.1, 0.2])?;
    let report = DiagnoseReport {
        schema_version: SCHEMA_VERSION,
        command: "diagnose",
        input_columns: headers,
        n_samples: samples.len(),
        alpha,
        ecf: ecf.points(),
        hill_k: hill.map(|_| hill_k),
        hill_tail_index: hill,
        tail_constants: tails,
        isotropy,
    };
    let mut out = Artifacts::default();
    out.json("diagnostics.json", &report)?;
    Ok(out)
}

/// Outcome of the thread-count reproducibility check.
#[derive(Clone, Debug, Serialize)]
pub struct ReproducibilityCheck {
    pub passed: bool,
    pub repeat_identical: bool,
    pub thread_counts_identical: bool,
}

/// Run `simulate` twice on one thread and once on four, comparing bytes.
pub fn reproducibility(cfg: &ExperimentConfig) -> CliResult<ReproducibilityCheck> {
    let pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))
    };
    let single = pool(1)?;
    let quad = pool(4)?;
    let first = single.install(|| simulate(cfg, CacheSource::Build))?;
    let second = single.install(|| simulate(cfg, CacheSource::Build))?;
    let wide = quad.install(|| simulate(cfg, CacheSource::Build))?;
    let repeat_identical = first == second;
    let thread_counts_identical = first == wide;
    Ok(ReproducibilityCheck {
        passed: repeat_identical && thread_counts_identical,
        repeat_identical,
        thread_counts_identical,
    })
}

/// Small tree-route configuration used by the self check.
pub fn reproducibility_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::parse(
        "[initial]\nkind = \"radial-stable\"\n[run]\nt = 2.0\nreplicates = 4000\ncache_size = 1000\ndepth = 200\n",
    )
    .expect("built-in configuration parses");
    cfg.run.seed = seed;
    cfg
}

#[derive(Serialize)]
struct SelfCheckReport<'a> {
    schema_version: u32,
    command: &'static str,
    scale: Scale,
    seed: u64,
    /// No failures beyond the known-unattainable criteria.
    passed: bool,
    failed: &'a [String],
    unexpected_failures: &'a [String],
    known_unattainable: &'a [&'static str],
    criteria: &'a [Outcome],
    reproducibility: &'a ReproducibilityCheck,
}

/// Reduced-scale acceptance run. `on_line` receives one line per criterion as it finishes.
pub fn selfcheck(
    seed: u64,
    fault: InjectedFault,
    mut on_line: impl FnMut(&str),
) -> CliResult<SelfCheck> {
    let mut suite = SuiteConfig::new(Scale::Reduced, seed);
    suite.fault = fault;
    let mut outcomes = Vec::new();
    for id in CRITERIA {
        let outcome = run_criterion(id, &suite).expect("known criterion");
        on_line(&outcome.summary_line());
        outcomes.push(outcome);
    }
    let repro = reproducibility(&reproducibility_config(seed))?;
    on_line(&format!(
        "A10 {} reproducibility; repeat_identical={}; thread_counts_identical={}",
        if repro.passed { "PASS" } else { "FAIL" },
        repro.repeat_identical,
        repro.thread_counts_identical
    ));
    let mut failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.id.to_string())
        .collect();
    if !repro.passed {
        failed.push("A10".into());
    }
    let unexpected_failures: Vec<String> = failed
        .iter()
        .filter(|id| !KNOWN_UNATTAINABLE.contains(&id.as_str()))
        .cloned()
        .collect();
    let report = SelfCheckReport {
        schema_version: SCHEMA_VERSION,
        command: "selfcheck",
        scale: Scale::Reduced,
        seed,
        passed: unexpected_failures.is_empty(),
        failed: &failed,
        unexpected_failures: &unexpected_failures,
        known_unattainable: &KNOWN_UNATTAINABLE,
        criteria: &outcomes,
        reproducibility: &repro,
    };
    let mut artifacts = Artifacts::default();
    artifacts.json("selfcheck.json", &report)?;
    Ok(SelfCheck { artifacts, failed })
}

/// Report of a self check; `failed` lists the criteria that did not hold.
pub struct SelfCheck {
    pub artifacts: Artifacts,
    pub failed: Vec<String>,
}

impl SelfCheck {
    /// Failures other than the known-unattainable criteria.
    pub fn unexpected(&self) -> Vec<&str> {
        self.failed
            .iter()
            .map(String::as_str)
            .filter(|id| !KNOWN_UNATTAINABLE.contains(id))
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.unexpected().is_empty()
    }
}
