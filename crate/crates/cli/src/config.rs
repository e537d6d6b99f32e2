//! Experiment configuration file.
//!
//! ```toml
//! [model]
//! d = 3
//! delta = 0.25
//! cross_section = { kind = "isotropic" }   # or "power" / "table"
//!
//! [initial]
//! kind = "radial-stable"   # pareto-uniform, discrete-stable, pareto-directional, point-mixture
//! lambda = 1.0             # alpha defaults to the solved exponent
//!
//! [run]
//! method = "tree"          # or "dsmc"
//! t = 8.0
//! replicates = 100000
//! seed = 7
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use wildstable::cascade::DEFAULT_DEPTH;
use wildstable::collision::{CrossSection, ModelParams};
use wildstable::diagnostics::default_rho_grid;
use wildstable::evolution::{DsmcScheme, DEFAULT_NODE_BUDGET};
use wildstable::rotations::UnitVector;
use wildstable::spectral::{solve_alpha, SpectralInfo};
use wildstable::stablelaws::{InitialData, InitialKind, DEFAULT_CACHE_SIZE};

use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelSection,
    pub initial: Option<InitialSection>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_dim")]
    pub d: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub cross_section: CrossSectionSection,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            d: default_dim(),
            delta: default_delta(),
            cross_section: CrossSectionSection::Isotropic,
        }
    }
}

fn default_dim() -> usize {
    3
}

fn default_delta() -> f64 {
    0.25
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CrossSectionSection {
    #[default]
    Isotropic,
    /// `|z|^exponent` on `|z| <= cutoff`.
    Power {
        exponent: f64,
        #[serde(default = "one")]
        cutoff: f64,
    },
    /// Two-column `(z, b)` text file.
    Table { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKindName {
    RadialStable,
    DiscreteStable,
    ParetoUniform,
    ParetoDirectional,
    PointMixture,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKindName,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    /// Rows `[weight, theta_1, ..., theta_d]`.
    pub atoms: Option<Vec<Vec<f64>>>,
    /// Rows `[weight, x_1, ..., x_d]`.
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default = "yes")]
    pub centered: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Tree,
    Dsmc,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    #[default]
    Nanbu,
    Bird,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "default_count")]
    pub replicates: usize,
    #[serde(default = "default_count")]
    pub particles: usize,
    pub rho_grid: Option<Vec<f64>>,
    pub direction: Option<Vec<f64>>,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_cache")]
    pub cache_size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub node_budget: usize,
    #[serde(default)]
    pub scheme: SchemeName,
}

impl Default for RunSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

fn default_count() -> usize {
    10_000
}

fn default_depth() -> usize {
    DEFAULT_DEPTH
}

fn default_cache() -> usize {
    DEFAULT_CACHE_SIZE
}

fn default_seed() -> u64 {
    1
}

fn default_budget() -> usize {
    DEFAULT_NODE_BUDGET
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

fn config_error(e: wildstable::Error) -> CliError {
    match e {
        wildstable::Error::Numerical(_) | wildstable::Error::State(_) => CliError::Library(e),
        wildstable::Error::Resource(_) => CliError::Library(e),
        other => CliError::Config(other.to_string()),
    }
}

/// Checked model with its exponent.
pub struct Model {
    pub params: ModelParams,
    pub spectral: SpectralInfo,
}

pub fn build_model(section: &ModelSection) -> Result<Model, CliError> {
    let d = section.d;
    let cs = match &section.cross_section {
        CrossSectionSection::Isotropic => CrossSection::isotropic(d),
        CrossSectionSection::Power { exponent, cutoff } => {
            CrossSection::truncated_power(d, *exponent, *cutoff)
        }
        CrossSectionSection::Table { path } => CrossSection::load_tabulated(d, path),
    }
    .map_err(config_error)?;
    let params = ModelParams::new(d, section.delta, cs).map_err(config_error)?;
    let spectral = solve_alpha(&params).map_err(CliError::Library)?;
    Ok(Model { params, spectral })
}

fn unit_rows(rows: &[Vec<f64>], d: usize, what: &str) -> Result<Vec<(f64, UnitVector)>, CliError> {
    rows.iter()
        .map(|row| {
            if row.len() != d + 1 {
                return Err(CliError::Config(format!(
                    "each {what} row needs a weight and {d} coordinates"
                )));
            }
            let dir = UnitVector::new(row[1..].to_vec()).map_err(config_error)?;
            Ok((row[0], dir))
        })
        .collect()
}

pub fn build_initial(
    section: &InitialSection,
    d: usize,
    solved_alpha: f64,
) -> Result<InitialData, CliError> {
    let alpha = section.alpha.unwrap_or(solved_alpha);
    let unused = |key: &str, present: bool| {
        if present {
            Err(CliError::Config(format!(
                "key `{key}` is not used by this initial kind"
            )))
        } else {
            Ok(())
        }
    };
    let kind = match section.kind {
        InitialKindName::RadialStable => {
            unused("atoms", section.atoms.is_some())?;
            unused("points", section.points.is_some())?;
            InitialKind::RadialStable {
                lambda: section.lambda.unwrap_or(1.0),
            }
        }
        InitialKindName::ParetoUniform => {
            unused("lambda", section.lambda.is_some())?;
            unused("atoms", section.atoms.is_some())?;
            unused("points", section.points.is_some())?;
            InitialKind::ParetoUniform
        }
        InitialKindName::DiscreteStable | InitialKindName::ParetoDirectional => {
            unused("lambda", section.lambda.is_some())?;
            unused("points", section.points.is_some())?;
            let rows = section
                .atoms
                .as_ref()
                .ok_or_else(|| CliError::Config("this initial kind needs `atoms`".into()))?;
            let atoms = unit_rows(rows, d, "atoms")?;
            if section.kind == InitialKindName::DiscreteStable {
                InitialKind::DiscreteSymmetricStable { atoms }
            } else {
                InitialKind::ParetoDirectional { directions: atoms }
            }
        }
        InitialKindName::PointMixture => {
            unused("lambda", section.lambda.is_some())?;
            unused("atoms", section.atoms.is_some())?;
            let rows = section
                .points
                .as_ref()
                .ok_or_else(|| CliError::Config("point-mixture needs `points`".into()))?;
            let mut points = Vec::new();
            for row in rows {
                if row.len() != d + 1 {
                    return Err(CliError::Config(format!(
                        "each points row needs a weight and {d} coordinates"
                    )));
                }
                points.push((row[0], row[1..].to_vec()));
            }
            InitialKind::PointMixture { points }
        }
    };
    let data = InitialData::new(kind, d, alpha, section.centered).map_err(config_error)?;
    data.validate().map_err(config_error)?;
    Ok(data)
}

/// Everything a run needs, validated before any sampling starts.
pub struct RunPlan {
    pub method: Method,
    pub t: f64,
    pub replicates: usize,
    pub particles: usize,
    pub rho_grid: Vec<f64>,
    pub direction: UnitVector,
    pub depth: usize,
    pub cache_size: usize,
    pub seed: u64,
    pub node_budget: usize,
    pub scheme: DsmcScheme,
}

pub fn build_run(section: &RunSection, d: usize) -> Result<RunPlan, CliError> {
    if !(section.t.is_finite() && section.t >= 0.0) {
        return Err(CliError::Config(
            "run.t must be finite and non-negative".into(),
        ));
    }
    if section.method == Method::Tree && section.replicates < wildstable::evolution::MIN_REPLICATES
    {
        return Err(CliError::Config(format!(
            "run.replicates must be at least {}",
            wildstable::evolution::MIN_REPLICATES
        )));
    }
    if section.method == Method::Dsmc && section.particles < 2 {
        return Err(CliError::Config("run.particles must be at least 2".into()));
    }
    if section.depth == 0 || section.cache_size == 0 {
        return Err(CliError::Config(
            "run.depth and run.cache_size must be positive".into(),
        ));
    }
    if section.node_budget == 0 {
        return Err(CliError::Config("run.node_budget must be positive".into()));
    }
    let rho_grid = section.rho_grid.clone().unwrap_or_else(default_rho_grid);
    if rho_grid.is_empty() || rho_grid.iter().any(|r| !r.is_finite()) {
        return Err(CliError::Config(
            "run.rho_grid must be a non-empty list of finite numbers".into(),
        ));
    }
    let direction = match &section.direction {
        Some(v) if v.len() != d => {
            return Err(CliError::Config(format!(
                "run.direction must have {d} components"
            )));
        }
        Some(v) => UnitVector::new(v.clone()).map_err(config_error)?,
        None => UnitVector::last(d),
    };
    Ok(RunPlan {
        method: section.method,
        t: section.t,
        replicates: section.replicates,
        particles: section.particles,
        rho_grid,
        direction,
        depth: section.depth,
        cache_size: section.cache_size,
        seed: section.seed,
        node_budget: section.node_budget,
        scheme: match section.scheme {
            SchemeName::Nanbu => DsmcScheme::Nanbu,
            SchemeName::Bird => DsmcScheme::Bird,
        },
    })
}
