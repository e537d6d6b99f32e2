//! The verification suite A1-A9, shared by the `acceptance` test target and
//! the `selfcheck` command. Reproducibility of the command-line runner (A10)
//! lives with the runner.
//!
//! At [`Scale::Full`] sample sizes and tolerances are the published ones. At
//! [`Scale::Reduced`] sample sizes shrink and every Monte Carlo tolerance
//! widens by `4 / sqrt(n)` for the reduced sample size `n`, or by one
//! standard error when it is already stated in standard errors;
//! deterministic tolerances are unchanged.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::cascade::{eval_psi_process, run_tree, weight_stats, DEFAULT_DEPTH};
use crate::collision::{sample_kernel, InjectedFault, ModelParams};
use crate::diagnostics::{
    cf_sup_distance, cf_sup_distance_to, default_rho_grid, empirical_cf, hill_tail_index,
    isotropy_check, ks_two_sample,
};
use crate::evolution::{estimate_cf_evolution, evolve_dsmc, DsmcScheme, ParticleEnsemble};
use crate::rotations::{sample_haar, sample_haar_oracle, Rotation, UnitVector};
use crate::spectral::{c_constants, evaluate_s, k_alpha, solve_alpha, StableSpec};
use crate::stablelaws::{
    sample_m_infinity_many, stationary_into, InitialData, StationaryLaw, DEFAULT_CACHE_SIZE,
};
use crate::{RandomStream, Result};

const DELTA: f64 = 0.25;
const DIM: usize = 3;

/// Sample sizes of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scale {
    Full,
    Reduced,
}

#[derive(Clone, Copy, Debug)]
struct Sizes {
    kernel_draws: usize,
    tree_replicates: usize,
    cache_size: usize,
    hill_samples: usize,
    stationary_particles: usize,
    route_replicates: usize,
    route_particles: usize,
    martingale_replicates: usize,
    fixed_point_draws: usize,
    haar_samples: usize,
    psi_replicates: usize,
}

impl Sizes {
    fn of(scale: Scale) -> Self {
        match scale {
            Scale::Full => Self {
                kernel_draws: 100_000,
                tree_replicates: 100_000,
                cache_size: DEFAULT_CACHE_SIZE,
                hill_samples: 1_000_000,
                stationary_particles: 100_000,
                route_replicates: 100_000,
                route_particles: 100_000,
                martingale_replicates: 100_000,
                fixed_point_draws: 100_000,
                haar_samples: 100_000,
                psi_replicates: 10_000,
            },
            Scale::Reduced => Self {
                kernel_draws: 20_000,
                tree_replicates: 2_500,
                cache_size: 4_000,
                hill_samples: 200_000,
                stationary_particles: 20_000,
                route_replicates: 10_000,
                route_particles: 10_000,
                martingale_replicates: 10_000,
                fixed_point_draws: 20_000,
                haar_samples: 10_000,
                psi_replicates: 2_000,
            },
        }
    }
}

/// Settings shared by all criteria.
#[derive(Clone, Copy, Debug)]
pub struct SuiteConfig {
    pub scale: Scale,
    pub seed: u64,
    pub fault: InjectedFault,
}

impl SuiteConfig {
    pub fn new(scale: Scale, seed: u64) -> Self {
        Self {
            scale,
            seed,
            fault: InjectedFault::None,
        }
    }

    fn sizes(&self) -> Sizes {
        Sizes::of(self.scale)
    }

    /// A Monte Carlo tolerance, widened at reduced scale.
    fn mc_tolerance(&self, published: f64, reduced_n: usize) -> f64 {
        match self.scale {
            Scale::Full => published,
            Scale::Reduced => published + 4.0 / (reduced_n as f64).sqrt(),
        }
    }

    /// A tolerance in units of the Monte Carlo standard error. These do not
    /// shrink with `n`, so the reduced run adds one standard error to absorb
    /// the maximum over many entries.
    fn sigma_tolerance(&self, published: f64) -> f64 {
        match self.scale {
            Scale::Full => published,
            Scale::Reduced => published + 1.0,
        }
    }

    /// Independent seed for sub-task `k` of criterion `id`.
    fn seed_for(&self, id: u64, k: u64) -> u64 {
        self.seed
            .wrapping_add(id.wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add(k.wrapping_mul(0xD1B5_4A32_D192_ED03))
    }

    fn model(&self) -> Result<ModelParams> {
        Ok(ModelParams::isotropic(DIM, DELTA)?.with_injected_fault(self.fault))
    }
}

/// One measured quantity and the bound it is held to.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    /// `"<="`, `">="`, `">"` or `"info"`.
    pub relation: &'static str,
    pub bound: f64,
}

impl Metric {
    fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: "<=",
            bound,
        }
    }

    fn above(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: ">",
            bound,
        }
    }

    fn info(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: "info",
            bound: f64::NAN,
        }
    }

    fn holds(&self) -> bool {
        match self.relation {
            "<=" => self.value <= self.bound,
            ">=" => self.value >= self.bound,
            ">" => self.value > self.bound,
            _ => true,
        }
    }
}

/// Result of one criterion.
#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub metrics: Vec<Metric>,
    pub error: Option<String>,
    /// Wall-clock time; excluded from serialized reports so they stay reproducible.
    #[serde(skip)]
    pub elapsed: Duration,
    #[serde(skip)]
    pub time_limit: Duration,
}

impl Outcome {
    /// One human-readable line.
    pub fn summary_line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut line = format!(
            "{} {verdict} {} ({:.1}s, limit {}s)",
            self.id,
            self.title,
            self.elapsed.as_secs_f64(),
            self.time_limit.as_secs()
        );
        for m in &self.metrics {
            if m.relation == "info" {
                line.push_str(&format!("; {}={:.6}", m.name, m.value));
            } else {
                line.push_str(&format!(
                    "; {}={:.6} {} {:.6}",
                    m.name, m.value, m.relation, m.bound
                ));
            }
        }
        if let Some(err) = &self.error {
            line.push_str(&format!("; error: {err}"));
        }
        line
    }
}

/// Criteria that miss their thresholds at the prescribed sample sizes because of
/// finite-time and finite-depth bias. They still run at full thresholds and are
/// reported as failures, but callers treat them separately from regressions.
pub const KNOWN_UNATTAINABLE: [&str; 2] = ["A4", "A9"];

/// Identifiers of the library-side criteria.
pub const CRITERIA: [&str; 9] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9"];

type CriterionFn = fn(&SuiteConfig) -> Result<Vec<Metric>>;

/// Run one criterion by identifier.
pub fn run_criterion(id: &str, cfg: &SuiteConfig) -> Option<Outcome> {
    let (title, limit, f): (&'static str, u64, CriterionFn) = match id {
        "A1" => ("kernel identity", 10, kernel_identity),
        "A2" => ("spectral oracle", 5, spectral_oracle),
        "A3" => ("stationary self-consistency", 600, self_consistency),
        "A4" => ("attraction of Pareto data", 600, pareto_attraction),
        "A5" => ("stationarity under particle dynamics", 120, stationarity),
        "A6" => ("tree and particle routes agree", 300, route_equivalence),
        "A7" => ("martingale and fixed point", 180, martingale_fixed_point),
        "A8" => ("Haar sampling", 60, haar_correctness),
        "A9" => ("Psi-process limit", 180, psi_limit),
        _ => return None,
    };
    let id: &'static str = CRITERIA.iter().find(|c| **c == id).copied()?;
    let time_limit = Duration::from_secs(limit);
    let start = Instant::now();
    let result = f(cfg);
    let elapsed = start.elapsed();
    let (metrics, error) = match result {
        Ok(m) => (m, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let within_time = cfg.scale == Scale::Reduced || elapsed <= time_limit;
    let passed = error.is_none() && within_time && metrics.iter().all(Metric::holds);
    Some(Outcome {
        id,
        title,
        passed,
        metrics,
        error,
        elapsed,
        time_limit,
    })
}

/// All library-side criteria in order.
pub fn run_suite(cfg: &SuiteConfig) -> Vec<Outcome> {
    CRITERIA
        .iter()
        .filter_map(|id| run_criterion(id, cfg))
        .collect()
}

fn kernel_identity(cfg: &SuiteConfig) -> Result<Vec<Metric>> {
    let params = cfg.model()?;
    let n = cfg.sizes().kernel_draws;
    let mut rng = RandomStream::new(cfg.seed_for(1, 0), 0);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let k = sample_kernel(&params, &mut rng);
        let a = k.rot_minus.last_column();
        let b = k.rot_plus.last_column();
        let mut sq = 0.0;
        for i in 0..DIM {
            let target = if i == DIM - 1 { 1.0 } else { 0.0 };
            let r = k.r_minus * a[i] + k.r_plus * b[i] - target;
            sq += r * r;
        }
        worst = worst.max(sq.sqrt());
    }
    Ok(vec![Metric::at_most("max_residual", worst, 1e-10)])
}

/// `S(s)` for `d = 3`, `b = 1`, `delta = 1/4` by direct integration against uniform `cos psi`.
fn closed_form_s(s: f64) -> f64 {
    (0.75f64.powf(s) + (1.0 - 0.25f64.powf(s + 2.0)) / 0.9375) / (0.5 * s + 1.0) - 1.0
}

fn closed_form_alpha() -> f64 {
    let (mut lo, mut hi) = (1e-4, 2.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if closed_form_s(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn spectral_oracle(cfg: &SuiteConfig) -> Result<Vec<Metric>> {
    let params = cfg.model()?;
    let info = solve_alpha(&params)?;
    let oracle = closed_form_alpha();
    let mut worst = 0.0f64;
    for s in [0.5, 1.0, 1.5, 2.0, 3.0] {
        worst = worst.max((evaluate_s(s, &params)? - closed_form_s(s)).abs());
    }
    Ok(vec![
        Metric::info("alpha", info.alpha),
        Metric::at_most("alpha_vs_closed_form", (info.alpha - oracle).abs(), 1e-3),
        Metric::at_most("S_vs_closed_form", worst, 1e-9),
        Metric::at_most("S2_error", (evaluate_s(2.0, &params)? + 0.1875).abs(), 1e-9),
    ])
}

fn fixed_point_cache(
    cfg: &SuiteConfig,
    params: &ModelParams,
    alpha: f64,
    c: f64,
) -> Result<StationaryLaw> {
    StationaryLaw::build(
        params,
        c,
        alpha,
        cfg.sizes().cache_size,
        DEFAULT_DEPTH,
        cfg.seed_for(0, 1),
    )
}

fn diagonal_direction() -> UnitVector {
    UnitVector::new(vec![1.0; DIM]).expect("nonzero")
}

fn self_consistency(cfg: &SuiteConfig) -> Result<Vec<Metric>> {
    let params = cfg.model()?;
    let alpha = solve_alpha(&params)?.alpha;
    let n = cfg.sizes().tree_replicates;
    let data = InitialData::radial_stable(DIM, alpha, 1.0)?;
    let constants = c_constants(&data.implied_spec()?)?;
    let evolved = estimate_cf_evolution(
        8.0,
        &default_rho_grid(),
        &diagonal_direction(),
        &data,
        &params,
        n,
        cfg.seed_for(3, 0),
    )?;
    let law = fixed_point_cache(cfg, &params, alpha, constants.c_scale)?;
    let tol = cfg.mc_tolerance(0.02, n);
    let scale_fit = cf_sup_distance_to(&evolved.estimate, |r| {
        crate::stablelaws::cf_stationary_radius(&law, r)
    });
    let gamma_sine_law = law.with_scale(constants.c_gamma_sine)?;
    let gamma_sine_fit = cf_sup_distance_to(&evolved.estimate, |r| {
        crate::stablelaws::cf_stationary_radius(&gamma_sine_law, r)
    });
    Ok(vec![
        Metric::info("c_scale", constants.c_scale),
        Metric::info("c_gamma_sine", constants.c_gamma_sine),
        Metric::at_most("sup_distance", scale_fit.distance, tol),
        Metric::above(
            "sup_distance_with_gamma_sine_constant",
            gamma_sine_fit.distance,
            tol,
        ),
        Metric::info("truncated_trees", evolved.truncated as f64),
    ])
}

fn pareto_attraction(cfg: &SuiteConfig) -> Result<Vec<Metric>> {
    let params = cfg.model()?;
    let alpha = solve_alpha(&params)?.alpha;
    let sizes = cfg.sizes();
    let n = sizes.tree_replicates;
    let data = InitialData::pareto_uniform(DIM, alpha)?;
    let c = c_constants(&data.implied_spec()?)?.c_scale;
    let unit_case = c_constants(&StableSpec::uniform_spectral(
        1.0,
        DIM,
        1.0 / k_alpha(1.0)?,
    )?)?
    .c_scale;
    let evolved = estimate_cf_evolution(
        8.0,
        &default_rho_grid(),
        &diagonal_direction(),
        &data,
        &params,
        n,
        cfg.seed_for(4, 0),
    )?;
    let law = fixed_point_cache(cfg, &params, alpha, c)?;
    let fit = cf_sup_distance_to(&evolved.estimate, |r| {
        crate::stablelaws::cf_stationary_radius(&law, r)
    });

    let m = sizes.hill_samples;
    let e = diagonal_direction();
    let seed = cfg.seed_for(4, 1);
    let projections: Vec<f64> = (0..m as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; DIM],
            |x, i| {
                let mut rng = RandomStream::new(seed, i);
                stationary_into(&law, &mut rng, x);
                e.dot(x)
            },
        )
        .collect();
    let hill = hill_tail_index(&projections, m / 100)?;
    Ok(vec![
        Metric::at_most(
            "c_scale_at_alpha_one_vs_pi_over_4",
            (unit_case - PI / 4.0).abs(),
            1e-12,
        ),
        Metric::info("c_scale", c),
        Metric::at_most("sup_distance", fit.distance, cfg.mc_tolerance(0.03, n)),
        Metric::info("hill_index", hill),
        Metric::at_most("hill_relative_error", (hill / alpha - 1.0).abs(), 0.10),
    ])
}

fn stationarity(cfg: &SuiteConfig) -> Result<Vec<Metric>> {
    let params = cfg.model()?;
    let alpha = solve_alpha(&params)?.alpha;
    let n = cfg.sizes().stationary_particles;
    let law = fixed_point_cache(cfg, &params, alpha, 1.0)?;
    let mut rng = RandomStream::new(cfg.seed_for(5, 0), 0);
    let mut ensemble = ParticleEnsemble::from_stationary(n, &law, DIM, &mut rng)?;
    let e = diagonal_direction();
    let grid = default_rho_grid();
    let before = empirical_cf(&ensemble.projections(&e), &grid)?;
    evolve_dsmc(&mut ensemble, 1.0, &params, DsmcScheme::Nanbu, &mut rng)?;
    let after = empirical_cf(&ensemble.projections(&e), &grid)?;
    let gap = cf_sup_distance(&before, &after)?;
    Ok(vec![Metric::at_most(
        "sup_distance",
        gap.distance,
        cfg.mc_tolerance(0.02, n),
    )])
}

fn route_equivalence(cfg: &SuiteConfig) -> Result<Vec<Metric>> {
    let params = cfg.model()?;
    let alpha = solve_alpha(&params)?.alpha;
    let sizes = cfg.sizes();
    let tol = cfg.mc_tolerance(0.02, sizes.route_particles.min(sizes.route_replicates));
    let grid = default_rho_grid();
    let e = diagonal_direction();
    let cases = [
        ("radial", InitialData::radial_stable(DIM, alpha, 1.0)?),
        ("pareto", InitialData::pareto_uniform(DIM, alpha)?),
    ];
    let mut metrics = Vec::new();
    for (k, (label, data)) in cases.iter().enumerate() {
        let mut rng = RandomStream::new(cfg.seed_for(6, 10 + k as u64), 0);
        let mut ensemble = ParticleEnsemble::from_initial(sizes.route_particles, data, &mut rng)?;
        let mut now = 0.0;
        for (j, t) in [0.5, 2.0].into_iter().enumerate() {
            evolve_dsmc(&mut ensemble, t - now, &params, DsmcScheme::Nanbu, &mut rng)?;
            now = t;
            let particles = empirical_cf(&ensemble.projections(&e), &grid)?;
            let tree = estimate_cf_evolution(
                t,
                &grid,
                &e,
                data,
                &params,
                sizes.route_replicates,
                cfg.seed_for(6, 2 * k as u64 + j as u64),
            )?;
            let gap = cf_sup_distance(&particles, &tree.estimate)?;
            metrics.push(Metric::at_most(format!("{label}_t{t}"), gap.distance, tol));
        }
    }
    Ok(metrics)
}

fn martingale_fixed_point(cfg: &SuiteConfig) -> Result<Vec<Metric>> {
    let params = cfg.model()?;
    let info = solve_alpha(&params)?;
    let alpha = info.alpha;
    let sizes = cfg.sizes();
    let mut metrics = Vec::new();

    for (k, n) in [10usize, 100].into_iter().enumerate() {
        let seed = cfg.seed_for(7, k as u64);
        let ms: Vec<f64> = (0..sizes.martingale_replicates as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = RandomStream::new(seed, i);
                weight_stats(&run_tree(n, &params, &mut rng), alpha).map(|s| s.m)
            })
            .collect::<Result<_>>()?;
        let (mean, sd) = mean_sd(&ms);
        let sigma = sd / (ms.len() as f64).sqrt();
        metrics.push(Metric::at_most(
            format!("mean_M{n}_deviation_in_sigma"),
            (mean - 1.0).abs() / sigma,
            cfg.sigma_tolerance(4.0),
        ));
    }

    let draws = sample_m_infinity_many(
        &params,
        alpha,
        sizes.fixed_point_draws,
        DEFAULT_DEPTH,
        cfg.seed_for(7, 5),
    )?;
    let second = draws.iter().map(|m| m * m).sum::<f64>() / draws.len() as f64;
    let cross = params
        .expect_over_cos_psi(
            |c| {
                let minus = (1.0 - DELTA).powi(2) * (1.0 - c).max(0.0) * 0.5;
                let plus = ((1.0 + DELTA * DELTA) + (1.0 - DELTA * DELTA) * c) * 0.5;
                (minus * plus).powf(0.5 * alpha)
            },
            1e-12,
        )?
        .value;
    let predicted = 2.0 * cross / -evaluate_s(2.0 * alpha, &params)?;
    metrics.push(Metric::info("second_moment", second));
    metrics.push(Metric::info("second_moment_predicted", predicted));
    metrics.push(Metric::at_most(
        "second_moment_relative_error",
        (second / predicted - 1.0).abs(),
        0.05,
    ));

    // Left side from the first half of the draws, right side from kernel
    // draws paired with disjoint draws from the second half.
    let half = draws.len() / 2;
    let (left, right) = draws.split_at(half);
    let pairs = right.len() / 2;
    let mut rng = RandomStream::new(cfg.seed_for(7, 6), 0);
    let radii: Vec<(f64, f64)> = (0..pairs)
        .map(|_| {
            let k = sample_kernel(&params, &mut rng);
            (k.r_minus.powf(alpha), k.r_plus.powf(alpha))
        })
        .collect();
    for xi in [0.5, 1.0, 2.0] {
        let lhs: Vec<(f64, f64)> = left.iter().map(|m| (xi * m).sin_cos()).collect();
        let rhs: Vec<(f64, f64)> = radii
            .iter()
            .enumerate()
            .map(|(k, (a, b))| (xi * (a * right[2 * k] + b * right[2 * k + 1])).sin_cos())
            .collect();
        let (l_mean, l_var) = complex_mean_var(&lhs);
        let (r_mean, r_var) = complex_mean_var(&rhs);
        let residual = ((l_mean.0 - r_mean.0).powi(2) + (l_mean.1 - r_mean.1).powi(2)).sqrt();
        let sigma = (l_var / lhs.len() as f64 + r_var / rhs.len() as f64).sqrt();
        metrics.push(Metric::at_most(
            format!("fixed_point_residual_xi{xi}_in_sigma"),
            residual / sigma,
            cfg.sigma_tolerance(4.0),
        ));
    }
    Ok(metrics)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean of `cos + i sin` pairs given as `(sin, cos)`, and `E|z - mean|^2`.
fn complex_mean_var(zs: &[(f64, f64)]) -> ((f64, f64), f64) {
    let n = zs.len() as f64;
    let re = zs.iter().map(|z| z.1).sum::<f64>() / n;
    let im = zs.iter().map(|z| z.0).sum::<f64>() / n;
    let var = zs
        .iter()
        .map(|z| (z.1 - re).powi(2) + (z.0 - im).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    ((re, im), var)
}

fn haar_correctness(cfg: &SuiteConfig) -> Result<Vec<Metric>> {
    let n = cfg.sizes().haar_samples;
    let mut metrics = Vec::new();
    for d in 3..=5usize {
        let mut rng = RandomStream::new(cfg.seed_for(8, d as u64), 0);
        let mut oracle_rng = RandomStream::new(cfg.seed_for(8, 100 + d as u64), 0);
        let mut trace = (Vec::with_capacity(n), Vec::with_capacity(n));
        let mut corner = (Vec::with_capacity(n), Vec::with_capacity(n));
        let mut columns = Vec::with_capacity(n);
        for _ in 0..n {
            let h = sample_haar(d, &mut rng)?;
            let o = sample_haar_oracle(d, &mut oracle_rng)?;
            trace.0.push((0..d).map(|i| h.get(i, i)).sum::<f64>());
            trace.1.push((0..d).map(|i| o.get(i, i)).sum::<f64>());
            corner.0.push(h.get(0, d - 1));
            corner.1.push(o.get(0, d - 1));
            columns.push(h.last_column());
        }
        metrics.push(Metric::above(
            format!("d{d}_trace_ks_p"),
            ks_two_sample(&trace.0, &trace.1)?.p_value,
            0.01,
        ));
        metrics.push(Metric::above(
            format!("d{d}_corner_ks_p"),
            ks_two_sample(&corner.0, &corner.1)?.p_value,
            0.01,
        ));
        metrics.push(Metric::at_most(
            format!("d{d}_second_moment_sigma"),
            isotropy_check(&columns)?.max_sigma,
            cfg.sigma_tolerance(3.0),
        ));
    }
    Ok(metrics)
}

fn psi_limit(cfg: &SuiteConfig) -> Result<Vec<Metric>> {
    let params = cfg.model()?;
    let alpha = solve_alpha(&params)?.alpha;
    let n = cfg.sizes().psi_replicates;
    let seed = cfg.seed_for(9, 0);
    let identity = Rotation::identity(DIM);
    let psi: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RandomStream::new(seed, i);
            let tree = run_tree(300, &params, &mut rng);
            eval_psi_process(
                &tree,
                alpha,
                |r| {
                    if r.get(DIM - 1, DIM - 1) > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                },
                &identity,
            )
        })
        .collect::<Result<_>>()?;
    let limit: Vec<f64> =
        sample_m_infinity_many(&params, alpha, n, DEFAULT_DEPTH, cfg.seed_for(9, 1))?
            .into_iter()
            .map(|m| 0.5 * m)
            .collect();
    let ks = ks_two_sample(&psi, &limit)?;
    let (psi_mean, psi_sd) = mean_sd(&psi);
    let (_, limit_sd) = mean_sd(&limit);
    Ok(vec![
        Metric::info("psi_mean", psi_mean),
        Metric::info("psi_sd", psi_sd),
        Metric::info("limit_sd", limit_sd),
        Metric::info("ks_statistic", ks.statistic),
        Metric::above("ks_p", ks.p_value, 0.01),
    ])
}
