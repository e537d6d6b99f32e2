//! Stable samplers, test data in a normal domain of attraction, and the
//! stationary scale mixtures `mu_inf^c` of radially symmetric stable laws.
//!
//! Conventions: a one-dimensional draw with `skew = 0` has characteristic
//! function `exp(-scale |rho|^alpha)`. A one-sided draw (`skew = 1`,
//! `alpha < 1`) has Laplace transform `exp(-scale s^alpha / cos(pi alpha / 2))`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::cascade::{sample_m_infinity, DEFAULT_DEPTH};
use crate::collision::ModelParams;
use crate::rotations::UnitVector;
use crate::spectral::{k_alpha, StableSpec};
use crate::{Error, RandomStream, Result};

/// Default number of cached fixed-point draws.
pub const DEFAULT_CACHE_SIZE: usize = 10_000;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::arg(format!(
            "stable index must lie in (0, 2), got {alpha}"
        )))
    }
}

/// Chambers-Mallows-Stuck draw of a one-dimensional stable law.
pub fn sample_stable_1d<R: Rng + ?Sized>(
    alpha: f64,
    scale: f64,
    skew: f64,
    rng: &mut R,
) -> Result<f64> {
    check_alpha(alpha)?;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::arg("stable scale must be positive and finite"));
    }
    if !(-1.0..=1.0).contains(&skew) {
        return Err(Error::arg("skewness must lie in [-1, 1]"));
    }
    if alpha == 1.0 && skew != 0.0 {
        return Err(Error::Unsupported(
            "skewed stable laws with alpha = 1".into(),
        ));
    }
    Ok(scale.powf(1.0 / alpha) * standard_stable(alpha, skew, rng))
}

fn standard_stable<R: Rng + ?Sized>(alpha: f64, skew: f64, rng: &mut R) -> f64 {
    let v = loop {
        let v = PI * (rng.random::<f64>() - 0.5);
        if v.abs() < FRAC_PI_2 {
            break v;
        }
    };
    let w: f64 = Exp1.sample(rng);
    if alpha == 1.0 {
        return v.tan();
    }
    let zeta = skew * (FRAC_PI_2 * alpha).tan();
    let shift = zeta.atan() / alpha;
    let factor = (1.0 + zeta * zeta).powf(0.5 / alpha);
    let a = alpha * (v + shift);
    factor * a.sin() / v.cos().powf(1.0 / alpha) * ((v - a).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive `(alpha/2)`-stable draw with `E exp(-s A) = exp(-s^{alpha/2})`.
fn subordinator<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let half = 0.5 * alpha;
    let scale = (FRAC_PI_2 * half).cos();
    scale.powf(1.0 / half) * standard_stable(half, 1.0, rng)
}

/// Radially symmetric stable vector with CF `exp(-lambda |xi|^alpha)`:
/// `X = lambda^{1/alpha} sqrt(2A) G` with `A` from [`subordinator`] and `G`
/// standard Gaussian, since `E exp(i xi . sqrt(2A) G) = E exp(-A |xi|^2)`.
pub fn sample_radial_stable<R: Rng + ?Sized>(
    d: usize,
    alpha: f64,
    lambda: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::arg("radial scale must be positive and finite"));
    }
    let mut out = vec![0.0; d];
    radial_stable_into(alpha, lambda, rng, &mut out);
    Ok(out)
}

fn radial_stable_into<R: Rng + ?Sized>(alpha: f64, lambda: f64, rng: &mut R, out: &mut [f64]) {
    let radius = lambda.powf(1.0 / alpha) * (2.0 * subordinator(alpha, rng)).sqrt();
    for x in out.iter_mut() {
        let g: f64 = StandardNormal.sample(rng);
        *x = radius * g;
    }
}

fn uniform_sphere_into<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut norm = 0.0;
        for x in out.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *x = g;
            norm += g * g;
        }
        if norm > 1e-300 {
            let inv = norm.sqrt().recip();
            out.iter_mut().for_each(|x| *x *= inv);
            return;
        }
    }
}

/// `r` with `P{r > t} = t^{-alpha}` for `t >= 1`.
fn pareto_radius<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u.powf(-1.0 / alpha);
        }
    }
}

/// Shape of the initial velocity law.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialKind {
    /// CF `exp(-lambda |xi|^alpha)`.
    RadialStable { lambda: f64 },
    /// Sum over atoms of `theta_k S_k`, `S_k` symmetric with CF `exp(-2 w_k |rho|^alpha)`.
    DiscreteSymmetricStable { atoms: Vec<(f64, UnitVector)> },
    /// `r Theta` with Pareto radius and uniform direction.
    ParetoUniform,
    /// `r eps theta_k` with Pareto radius, random sign `eps`, and `theta_k`
    /// chosen with probability proportional to its weight.
    ParetoDirectional { directions: Vec<(f64, UnitVector)> },
    /// `eps x_k` with random sign, `x_k` chosen with probability proportional to its weight.
    PointMixture { points: Vec<(f64, Vec<f64>)> },
}

/// A symmetric initial law `mu_0` on `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    kind: InitialKind,
    d: usize,
    alpha: f64,
    centered: bool,
    cumulative: Vec<f64>,
}

impl InitialData {
    pub fn new(kind: InitialKind, d: usize, alpha: f64, centered: bool) -> Result<Self> {
        check_alpha(alpha)?;
        if d == 0 {
            return Err(Error::arg("dimension must be positive"));
        }
        let weights: Vec<f64> = match &kind {
            InitialKind::RadialStable { lambda } => {
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(Error::arg("radial scale must be positive and finite"));
                }
                Vec::new()
            }
            InitialKind::ParetoUniform => Vec::new(),
            InitialKind::DiscreteSymmetricStable { atoms }
            | InitialKind::ParetoDirectional { directions: atoms } => {
                if atoms.is_empty() {
                    return Err(Error::arg("direction list is empty"));
                }
                if atoms.iter().any(|(_, u)| u.dim() != d) {
                    return Err(Error::arg("direction has the wrong dimension"));
                }
                atoms.iter().map(|(w, _)| *w).collect()
            }
            InitialKind::PointMixture { points } => {
                if points.is_empty() {
                    return Err(Error::arg("point mixture is empty"));
                }
                if points
                    .iter()
                    .any(|(_, x)| x.len() != d || x.iter().any(|v| !v.is_finite()))
                {
                    return Err(Error::arg(
                        "mixture point has the wrong dimension or is not finite",
                    ));
                }
                points.iter().map(|(w, _)| *w).collect()
            }
        };
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::arg("weights must be positive and finite"));
        }
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(Self {
            kind,
            d,
            alpha,
            centered,
            cumulative,
        })
    }

    pub fn radial_stable(d: usize, alpha: f64, lambda: f64) -> Result<Self> {
        Self::new(InitialKind::RadialStable { lambda }, d, alpha, true)
    }

    pub fn pareto_uniform(d: usize, alpha: f64) -> Result<Self> {
        Self::new(InitialKind::ParetoUniform, d, alpha, true)
    }

    pub fn kind(&self) -> &InitialKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn centered(&self) -> bool {
        self.centered
    }

    /// Errors when the law is declared non-centered but has a finite mean.
    pub fn validate(&self) -> Result<()> {
        if self.alpha > 1.0 && !self.centered {
            return Err(Error::arg("initial data with alpha > 1 must be centered"));
        }
        Ok(())
    }

    /// The stable law whose normal domain of attraction contains this law.
    pub fn implied_spec(&self) -> Result<StableSpec> {
        let (alpha, d) = (self.alpha, self.d);
        match &self.kind {
            InitialKind::RadialStable { lambda } => StableSpec::radial(alpha, d, *lambda),
            InitialKind::DiscreteSymmetricStable { atoms } => {
                StableSpec::discrete_symmetric(alpha, d, atoms.clone())
            }
            // t^alpha P{u.X > t} = E (Theta.u)_+^alpha, i.e. Lambda = u_S / k_alpha.
            InitialKind::ParetoUniform => {
                StableSpec::uniform_spectral(alpha, d, 1.0 / k_alpha(alpha)?)
            }
            // t^alpha P{u.X > t} = sum p_k |theta_k.u|^alpha / 2.
            InitialKind::ParetoDirectional { directions } => {
                let k = k_alpha(alpha)?;
                let total: f64 = directions.iter().map(|(w, _)| w).sum();
                let atoms = directions
                    .iter()
                    .map(|(w, u)| (w / total / (2.0 * k), u.clone()))
                    .collect();
                StableSpec::discrete_symmetric(alpha, d, atoms)
            }
            InitialKind::PointMixture { .. } => Err(Error::Unsupported(
                "a point mixture lies in no stable domain of attraction with alpha < 2".into(),
            )),
        }
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }

    pub(crate) fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let alpha = self.alpha;
        match &self.kind {
            InitialKind::RadialStable { lambda } => radial_stable_into(alpha, *lambda, rng, out),
            InitialKind::DiscreteSymmetricStable { atoms } => {
                out.iter_mut().for_each(|x| *x = 0.0);
                for (w, theta) in atoms {
                    let s = (2.0 * w).powf(1.0 / alpha) * standard_stable(alpha, 0.0, rng);
                    for (x, t) in out.iter_mut().zip(theta.as_slice()) {
                        *x += s * t;
                    }
                }
            }
            InitialKind::ParetoUniform => {
                uniform_sphere_into(rng, out);
                let r = pareto_radius(alpha, rng);
                out.iter_mut().for_each(|x| *x *= r);
            }
            InitialKind::ParetoDirectional { directions } => {
                let k = self.pick(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let r = sign * pareto_radius(alpha, rng);
                for (x, t) in out.iter_mut().zip(directions[k].1.as_slice()) {
                    *x = r * t;
                }
            }
            InitialKind::PointMixture { points } => {
                let k = self.pick(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                for (x, p) in out.iter_mut().zip(&points[k].1) {
                    *x = sign * p;
                }
            }
        }
    }
}

/// One draw from `mu_0`.
pub fn sample_initial<R: Rng + ?Sized>(data: &InitialData, rng: &mut R) -> Result<Vec<f64>> {
    data.validate()?;
    let mut out = vec![0.0; data.d];
    data.sample_into(rng, &mut out);
    Ok(out)
}

/// The stationary law `mu_inf^c`: a mixture over `u ~ M_inf` of radial
/// stable laws with CF `exp(-c u |xi|^alpha)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryLaw {
    c: f64,
    alpha: f64,
    m_samples: Arc<Vec<f64>>,
}

impl StationaryLaw {
    /// Wrap existing fixed-point draws.
    pub fn from_samples(c: f64, alpha: f64, m_samples: Vec<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::arg("stationary scale must be positive and finite"));
        }
        if m_samples.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::arg(
                "fixed-point draws must be finite and non-negative",
            ));
        }
        Ok(Self {
            c,
            alpha,
            m_samples: Arc::new(m_samples),
        })
    }

    /// Draw `count` copies of `M_inf` at `depth`, replicate `i` on stream `i`.
    pub fn build(
        params: &ModelParams,
        c: f64,
        alpha: f64,
        count: usize,
        depth: usize,
        seed: u64,
    ) -> Result<Self> {
        let samples = sample_m_infinity_many(params, alpha, count, depth, seed)?;
        Self::from_samples(c, alpha, samples)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn m_samples(&self) -> &[f64] {
        &self.m_samples
    }

    /// Same fixed-point draws with a different scale.
    pub fn with_scale(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::arg("stationary scale must be positive and finite"));
        }
        Ok(Self {
            c,
            alpha: self.alpha,
            m_samples: Arc::clone(&self.m_samples),
        })
    }

    /// Write the cached draws one per line.
    pub fn export_cache(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for m in self.m_samples.iter() {
            writeln!(out, "{m:?}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Read draws written by [`StationaryLaw::export_cache`].
    pub fn import_cache(c: f64, alpha: f64, path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            samples.push(
                line.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("cache line {}: {e}", lineno + 1)))?,
            );
        }
        Self::from_samples(c, alpha, samples)
    }
}

/// `count` independent fixed-point draws, deterministic for any thread count.
pub fn sample_m_infinity_many(
    params: &ModelParams,
    alpha: f64,
    count: usize,
    depth: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RandomStream::new(seed, i);
            sample_m_infinity(params, alpha, depth, &mut rng)
        })
        .collect()
}

/// Default depth used for cached fixed-point draws.
pub const DEFAULT_CACHE_DEPTH: usize = DEFAULT_DEPTH;

/// One draw of `mu_inf^c`.
pub fn sample_stationary<R: Rng + ?Sized>(
    law: &StationaryLaw,
    d: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if law.m_samples.is_empty() {
        return Err(Error::State(
            "stationary law has no cached fixed-point draws".into(),
        ));
    }
    let mut out = vec![0.0; d];
    stationary_into(law, rng, &mut out);
    Ok(out)
}

pub(crate) fn stationary_into<R: Rng + ?Sized>(law: &StationaryLaw, rng: &mut R, out: &mut [f64]) {
    let u = law.m_samples[rng.random_range(0..law.m_samples.len())];
    if u == 0.0 {
        out.iter_mut().for_each(|x| *x = 0.0);
    } else {
        radial_stable_into(law.alpha, law.c * u, rng, out);
    }
}

/// `int exp(-c u |xi|^alpha) m(du)` averaged over the cached draws.
pub fn cf_stationary(law: &StationaryLaw, xi: &[f64]) -> f64 {
    cf_stationary_radius(law, xi.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// [`cf_stationary`] as a function of `|xi|`.
pub fn cf_stationary_radius(law: &StationaryLaw, radius: f64) -> f64 {
    if radius == 0.0 || law.m_samples.is_empty() {
        return 1.0;
    }
    let base = law.c * radius.abs().powf(law.alpha);
    law.m_samples.iter().map(|u| (-base * u).exp()).sum::<f64>() / law.m_samples.len() as f64
}
