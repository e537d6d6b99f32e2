//! Inelastic Maxwell collision model.
//!
//! A [`CrossSection`] `b(z)` weights scattering directions by the cosine `z`
//! between the outgoing direction and the relative velocity. Its projected
//! density `Pi b(z) = b(z) (1 - z^2)^{(d-3)/2} / B_d` is the law of `cos psi`.
//! The Fourier-side kernel `(r-, r+, R-, R+)` is assembled from `psi`, two
//! independent SO(d-1) rotations and the plane rotations `Z_{-psi-}`, `Z_{psi+}`.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::quadrature::{integrate, integrate_with_breaks, Quadrature};
use crate::rotations::{
    mat_mul_into, rotation_taking_ed_to, Rotation, SubgroupSampler, UnitVector,
};
use crate::{Error, Result};

const NORMALIZATION_TOLERANCE: f64 = 1e-12;
const INITIAL_CDF_CELLS: usize = 2048;
const MAX_CDF_CELLS: usize = 1 << 17;
const CDF_INTERPOLATION_TOLERANCE: f64 = 1e-6;
/// Cells allowed to fall back to exact inversion near a density singularity.
const MAX_EXACT_CELLS: usize = 64;

/// Shape of a cross section before scaling.
#[derive(Clone, Debug, PartialEq)]
pub enum CrossSectionKind {
    /// `b(z) = 1`.
    Isotropic,
    /// `b(z) = |z|^exponent` for `|z| <= cutoff`, zero beyond.
    TruncatedPower { exponent: f64, cutoff: f64 },
    /// Piecewise-linear interpolation of `(z, b(z))` nodes, zero outside the table.
    Tabulated { z: Vec<f64>, b: Vec<f64> },
}

/// Angular cross section `b` on `(-1, 1)` in dimension `d`, times `scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossSection {
    d: usize,
    kind: CrossSectionKind,
    scale: f64,
}

impl CrossSection {
    pub fn isotropic(d: usize) -> Result<Self> {
        Self::new(d, CrossSectionKind::Isotropic, 1.0)
    }

    pub fn truncated_power(d: usize, exponent: f64, cutoff: f64) -> Result<Self> {
        Self::new(
            d,
            CrossSectionKind::TruncatedPower { exponent, cutoff },
            1.0,
        )
    }

    pub fn tabulated(d: usize, z: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Self::new(d, CrossSectionKind::Tabulated { z, b }, 1.0)
    }

    pub fn new(d: usize, kind: CrossSectionKind, scale: f64) -> Result<Self> {
        if d < 3 {
            return Err(Error::arg(format!(
                "the kinetic model needs d >= 3, got {d}"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::arg(
                "cross-section scale must be positive and finite",
            ));
        }
        match &kind {
            CrossSectionKind::Isotropic => {}
            CrossSectionKind::TruncatedPower { exponent, cutoff } => {
                if !(exponent.is_finite() && *exponent > -1.0) {
                    return Err(Error::Domain(format!(
                        "power exponent {exponent} is not integrable (need > -1)"
                    )));
                }
                if !(*cutoff > 0.0 && *cutoff <= 1.0) {
                    return Err(Error::arg("power cutoff must lie in (0, 1]"));
                }
            }
            CrossSectionKind::Tabulated { z, b } => {
                if z.len() != b.len() || z.len() < 2 {
                    return Err(Error::arg(
                        "tabulated cross section needs >= 2 (z, b) pairs",
                    ));
                }
                if z.iter().any(|&x| !(x > -1.0 && x < 1.0)) {
                    return Err(Error::arg(
                        "tabulated z values must lie strictly inside (-1, 1)",
                    ));
                }
                if z.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::arg("tabulated z values must be strictly increasing"));
                }
                if b.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
                    return Err(Error::arg(
                        "tabulated b values must be finite and non-negative",
                    ));
                }
            }
        }
        Ok(Self { d, kind, scale })
    }

    /// Parse a whitespace-separated two-column `(z, b(z))` table. Blank lines
    /// and lines starting with `#` are ignored.
    pub fn parse_tabulated(d: usize, text: &str) -> Result<Self> {
        let mut z = Vec::new();
        let mut b = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            z.push(parse(cols[0])?);
            b.push(parse(cols[1])?);
        }
        Self::tabulated(d, z, b)
    }

    pub fn load_tabulated(d: usize, path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_tabulated(d, &text)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> &CrossSectionKind {
        &self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::arg(
                "cross-section scale must be positive and finite",
            ));
        }
        self.scale = scale;
        Ok(self)
    }

    /// `b(z)` including the scale factor.
    pub fn eval(&self, z: f64) -> f64 {
        let shape = match &self.kind {
            CrossSectionKind::Isotropic => 1.0,
            CrossSectionKind::TruncatedPower { exponent, cutoff } => {
                if z.abs() <= *cutoff {
                    z.abs().powf(*exponent)
                } else {
                    0.0
                }
            }
            CrossSectionKind::Tabulated { z: zs, b } => {
                let n = zs.len();
                if z < zs[0] || z > zs[n - 1] {
                    0.0
                } else {
                    let k = zs.partition_point(|&x| x <= z).clamp(1, n - 1);
                    let t = (z - zs[k - 1]) / (zs[k] - zs[k - 1]);
                    b[k - 1] + t * (b[k] - b[k - 1])
                }
            }
        };
        self.scale * shape
    }

    /// Points in `[-1, 1]` where `b` has kinks, jumps or singularities.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![-1.0, 1.0];
        match &self.kind {
            CrossSectionKind::Isotropic => {}
            CrossSectionKind::TruncatedPower { cutoff, .. } => {
                pts.extend([-cutoff, 0.0, *cutoff]);
            }
            CrossSectionKind::Tabulated { z, .. } => pts.extend(z.iter().copied()),
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Scattering-angle breakpoints `acos(z)` in increasing order on `[0, pi]`.
    fn angle_breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .breakpoints()
            .iter()
            .map(|z| z.clamp(-1.0, 1.0).acos())
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `int_{-1}^{1} b(z) (1 - z^2)^{(d-3)/2} dz`, computed in the angle
    /// variable `z = cos(eta)` where the weight becomes `sin^{d-2}(eta)`.
    pub fn weighted_mass(&self) -> Result<f64> {
        let power = (self.d - 2) as i32;
        let q = integrate_with_breaks(
            |eta: f64| self.eval(eta.cos()) * eta.sin().powi(power),
            &self.angle_breakpoints(),
            NORMALIZATION_TOLERANCE,
        )?;
        Ok(q.value)
    }
}

/// `B_d = int_0^1 sqrt(z^{-1} (1-z)^{d-3}) dz`, evaluated after substituting
/// `z = u^2`, which removes the `z^{-1/2}` endpoint singularity.
pub fn sphere_projection_constant(d: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::arg("B_d is defined for d >= 3"));
    }
    let half = 0.5 * (d as f64 - 3.0);
    let q = integrate(|u: f64| 2.0 * (1.0 - u * u).powf(half), 0.0, 1.0, 1e-14)?;
    Ok(q.value)
}

/// The projected density `Pi b` of a cross section.
#[derive(Clone, Debug)]
pub struct ProjectedDensity {
    cross_section: CrossSection,
    b_d: f64,
}

impl ProjectedDensity {
    pub fn eval(&self, z: f64) -> f64 {
        if !(z > -1.0 && z < 1.0) {
            return 0.0;
        }
        let d = self.cross_section.d;
        let weight = if d == 3 {
            1.0
        } else {
            (1.0 - z * z).powf(0.5 * (d as f64 - 3.0))
        };
        self.cross_section.eval(z) * weight / self.b_d
    }

    /// The constant `B_d` used in the denominator.
    pub fn b_d(&self) -> f64 {
        self.b_d
    }

    /// Total mass; 1 when the cross section is normalized.
    pub fn total_mass(&self) -> Result<f64> {
        Ok(self.cross_section.weighted_mass()? / self.b_d)
    }
}

pub fn projected_density(cs: &CrossSection) -> Result<ProjectedDensity> {
    let mass = cs.weighted_mass()?;
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::Domain(
            "cross section has zero or non-finite mass".into(),
        ));
    }
    Ok(ProjectedDensity {
        cross_section: cs.clone(),
        b_d: sphere_projection_constant(cs.d)?,
    })
}

/// Rescale so that `int b(z) (1-z^2)^{(d-3)/2} dz = B_d`.
pub fn normalize_cross_section(cs: &CrossSection) -> Result<CrossSection> {
    let mass = cs.weighted_mass()?;
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::Domain(
            "cross section has zero or non-finite mass".into(),
        ));
    }
    let target = sphere_projection_constant(cs.d)?;
    let rel = (mass - target).abs() / target;
    if rel <= 1e-14 {
        return Ok(cs.clone());
    }
    cs.clone().with_scale(cs.scale * target / mass)
}

/// Inverse-CDF table for the scattering angle on a uniform grid in `psi`,
/// interpolated by monotone cubic Hermite segments. The few cells next to a
/// singularity of the density, where no cubic is accurate enough, are
/// inverted exactly by bisection on the integrated density.
#[derive(Clone, Debug)]
struct AngleTable {
    step: f64,
    cdf: Vec<f64>,
    slope: Vec<f64>,
    exact_cells: Vec<bool>,
    cross_section: CrossSection,
    normalizer: f64,
    breaks: Vec<f64>,
}

impl AngleTable {
    fn build(cs: &CrossSection, b_d: f64) -> Result<Self> {
        let breaks = cs.angle_breakpoints();
        let mut cells = INITIAL_CDF_CELLS;
        loop {
            let mut table = Self::tabulate(cs, b_d, &breaks, cells)?;
            let errors = table.midpoint_errors()?;
            let failing: Vec<usize> = (0..cells)
                .filter(|&k| errors[k] >= CDF_INTERPOLATION_TOLERANCE)
                .collect();
            if failing.len() <= MAX_EXACT_CELLS {
                for k in failing {
                    table.exact_cells[k] = true;
                }
                return Ok(table);
            }
            if cells >= MAX_CDF_CELLS {
                let worst = errors.iter().copied().fold(0.0, f64::max);
                return Err(Error::Numerical(format!(
                    "scattering-angle CDF did not converge (interpolation error {worst:e} at {cells} cells)"
                )));
            }
            cells *= 2;
        }
    }

    fn density(&self, eta: f64) -> f64 {
        let power = (self.cross_section.d - 2) as i32;
        self.cross_section.eval(eta.cos()) * eta.sin().powi(power) / self.normalizer
    }

    fn integral(&self, a: f64, b: f64) -> Result<f64> {
        let mut pts = vec![a];
        pts.extend(self.breaks.iter().copied().filter(|&x| x > a && x < b));
        pts.push(b);
        Ok(integrate_with_breaks(|eta| self.density(eta), &pts, 1e-13)?.value)
    }

    fn tabulate(cs: &CrossSection, b_d: f64, breaks: &[f64], cells: usize) -> Result<Self> {
        let step = PI / cells as f64;
        let mut table = Self {
            step,
            cdf: Vec::with_capacity(cells + 1),
            slope: Vec::new(),
            exact_cells: vec![false; cells],
            cross_section: cs.clone(),
            normalizer: b_d,
            breaks: breaks.to_vec(),
        };
        let mut acc = 0.0;
        table.cdf.push(0.0);
        for k in 0..cells {
            acc += table.integral(k as f64 * step, (k + 1) as f64 * step)?;
            table.cdf.push(acc);
        }
        let total = acc;
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Domain("scattering-angle density has no mass".into()));
        }
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Numerical(format!(
                "projected density integrates to {total}, expected 1"
            )));
        }
        table.normalizer *= total;
        table.cdf.iter_mut().for_each(|c| *c /= total);
        let secants: Vec<f64> = table.cdf.windows(2).map(|w| (w[1] - w[0]) / step).collect();
        let mut slope: Vec<f64> = (0..=cells)
            .map(|k| table.density(k as f64 * step))
            .collect();
        for k in 0..=cells {
            if !slope[k].is_finite() {
                let left = if k > 0 { secants[k - 1] } else { 0.0 };
                let right = if k < cells { secants[k] } else { 0.0 };
                slope[k] = 3.0 * left.max(right);
            }
        }
        // Fritsch-Carlson limiter keeps each Hermite segment monotone.
        for k in 0..cells {
            let delta = secants[k];
            if delta <= 0.0 {
                slope[k] = 0.0;
                slope[k + 1] = 0.0;
                continue;
            }
            let a = slope[k] / delta;
            let b = slope[k + 1] / delta;
            let r = a.hypot(b);
            if r > 3.0 {
                slope[k] = 3.0 * a / r * delta;
                slope[k + 1] = 3.0 * b / r * delta;
            }
        }
        table.slope = slope;
        Ok(table)
    }

    fn hermite(&self, k: usize, t: f64) -> f64 {
        let h = self.step;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.cdf[k]
            + h10 * h * self.slope[k]
            + h01 * self.cdf[k + 1]
            + h11 * h * self.slope[k + 1]
    }

    fn midpoint_errors(&self) -> Result<Vec<f64>> {
        let cells = self.cdf.len() - 1;
        (0..cells)
            .map(|k| {
                let a = k as f64 * self.step;
                let exact = self.cdf[k] + self.integral(a, a + 0.5 * self.step)?;
                Ok((self.hermite(k, 0.5) - exact).abs())
            })
            .collect()
    }

    fn invert(&self, u: f64) -> f64 {
        let cells = self.cdf.len() - 1;
        let k = (self.cdf.partition_point(|&c| c <= u).max(1) - 1).min(cells - 1);
        let a = k as f64 * self.step;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..52 {
            let mid = 0.5 * (lo + hi);
            let value = if self.exact_cells[k] {
                // A failed quadrature here can only under-resolve the
                // cell; fall back to the Hermite value in that case.
                self.integral(a, a + mid * self.step)
                    .map(|q| self.cdf[k] + q)
                    .unwrap_or_else(|_| self.hermite(k, mid))
            } else {
                self.hermite(k, mid)
            };
            if value < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        (k as f64 + 0.5 * (lo + hi)) * self.step
    }
}

#[derive(Clone, Debug)]
enum AngleSampler {
    /// `cos psi` uniform on (-1, 1).
    Uniform,
    /// `(1 + cos psi)/2 ~ Beta((d-1)/2, (d-1)/2)`.
    Beta(Beta<f64>),
    Table(AngleTable),
}

/// Test-only perturbations of the kernel, used to confirm that the
/// verification suite detects a broken model.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InjectedFault {
    #[default]
    None,
    /// Flip the sign of the inelasticity inside the kernel angles.
    DeltaSignFlip,
}

#[derive(Debug)]
struct ModelSamplers {
    angle: AngleSampler,
    subgroup: SubgroupSampler,
    density: ProjectedDensity,
}

/// Dimension, inelasticity and (normalized) cross section of the model.
#[derive(Clone, Debug)]
pub struct ModelParams {
    d: usize,
    delta: f64,
    cross_section: CrossSection,
    samplers: Arc<ModelSamplers>,
    fault: InjectedFault,
}

impl ModelParams {
    /// Validate, normalize the cross section, and tabulate the angle sampler.
    pub fn new(d: usize, delta: f64, cross_section: CrossSection) -> Result<Self> {
        if d < 3 {
            return Err(Error::arg(format!(
                "the kinetic model needs d >= 3, got {d}"
            )));
        }
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::arg(format!(
                "inelasticity must lie in (0, 1/2), got {delta}"
            )));
        }
        if cross_section.d != d {
            return Err(Error::arg(
                "cross-section dimension does not match the model",
            ));
        }
        let cross_section = normalize_cross_section(&cross_section)?;
        let density = projected_density(&cross_section)?;
        let angle = match cross_section.kind {
            CrossSectionKind::Isotropic if d == 3 => AngleSampler::Uniform,
            CrossSectionKind::Isotropic => {
                let shape = 0.5 * (d as f64 - 1.0);
                AngleSampler::Beta(Beta::new(shape, shape).expect("positive shape"))
            }
            _ => AngleSampler::Table(AngleTable::build(&cross_section, density.b_d)?),
        };
        Ok(Self {
            d,
            delta,
            samplers: Arc::new(ModelSamplers {
                angle,
                subgroup: SubgroupSampler::new(d)?,
                density,
            }),
            cross_section,
            fault: InjectedFault::None,
        })
    }

    /// Isotropic cross section `b = 1`.
    pub fn isotropic(d: usize, delta: f64) -> Result<Self> {
        Self::new(d, delta, CrossSection::isotropic(d)?)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cross_section(&self) -> &CrossSection {
        &self.cross_section
    }

    pub fn projected_density(&self) -> &ProjectedDensity {
        &self.samplers.density
    }

    #[doc(hidden)]
    pub fn with_injected_fault(mut self, fault: InjectedFault) -> Self {
        self.fault = fault;
        self
    }

    #[doc(hidden)]
    pub fn injected_fault(&self) -> InjectedFault {
        self.fault
    }

    /// `E[f(cos psi)]` by quadrature over the scattering angle.
    pub fn expect_over_cos_psi<F: Fn(f64) -> f64>(&self, f: F, abs_tol: f64) -> Result<Quadrature> {
        let power = (self.d - 2) as i32;
        let b_d = self.samplers.density.b_d;
        integrate_with_breaks(
            |eta: f64| {
                let w = self.cross_section.eval(eta.cos()) * eta.sin().powi(power) / b_d;
                if w == 0.0 {
                    0.0
                } else {
                    f(eta.cos()) * w
                }
            },
            &self.cross_section.angle_breakpoints(),
            abs_tol,
        )
    }

    pub(crate) fn subgroup(&self) -> &SubgroupSampler {
        &self.samplers.subgroup
    }

    fn angle_delta(&self) -> f64 {
        match self.fault {
            InjectedFault::None => self.delta,
            InjectedFault::DeltaSignFlip => -self.delta,
        }
    }
}

/// Scattering angle in `(0, pi)` whose cosine has density `Pi b`.
pub fn sample_psi<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> f64 {
    loop {
        let psi = match &params.samplers.angle {
            AngleSampler::Uniform => (2.0 * rng.random::<f64>() - 1.0).acos(),
            AngleSampler::Beta(beta) => (2.0 * beta.sample(rng) - 1.0).clamp(-1.0, 1.0).acos(),
            AngleSampler::Table(table) => table.invert(rng.random::<f64>()),
        };
        if psi > 0.0 && psi < PI {
            return psi;
        }
    }
}

/// Radii and angles derived from one scattering angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelAngles {
    pub r_minus: f64,
    pub r_plus: f64,
    pub psi_minus: f64,
    pub psi_plus: f64,
}

/// `r-`, `r+`, `psi-`, `psi+` for scattering angle `psi` and inelasticity `delta`.
pub fn kernel_components(psi: f64, delta: f64) -> Result<KernelAngles> {
    if !(0.0..=PI).contains(&psi) {
        return Err(Error::arg(format!(
            "scattering angle {psi} outside [0, pi]"
        )));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::arg(format!(
            "inelasticity must lie in (0, 1/2), got {delta}"
        )));
    }
    Ok(kernel_components_unchecked(psi.cos(), delta))
}

fn kernel_components_unchecked(c: f64, delta: f64) -> KernelAngles {
    let one_minus = (1.0 - c).max(0.0);
    let plus_sq = ((1.0 + delta * delta) + (1.0 - delta * delta) * c).max(0.0);
    let r_minus = std::f64::consts::FRAC_1_SQRT_2 * (1.0 - delta) * one_minus.sqrt();
    let r_plus = std::f64::consts::FRAC_1_SQRT_2 * plus_sq.sqrt();
    let cos_minus = (0.5 * one_minus).sqrt().min(1.0);
    let cos_plus = if plus_sq > 0.0 {
        (std::f64::consts::FRAC_1_SQRT_2 * ((1.0 + delta) + (1.0 - delta) * c) / plus_sq.sqrt())
            .clamp(-1.0, 1.0)
    } else {
        1.0
    };
    KernelAngles {
        r_minus,
        r_plus,
        psi_minus: cos_minus.acos(),
        psi_plus: cos_plus.acos(),
    }
}

/// One draw of the Fourier-side collision event.
#[derive(Clone, Debug)]
pub struct KernelSample {
    pub r_minus: f64,
    pub r_plus: f64,
    pub rot_minus: Rotation,
    pub rot_plus: Rotation,
    /// The generating scattering angle.
    pub psi: f64,
}

/// Scratch buffers for allocation-free kernel draws in tight loops.
#[derive(Clone, Debug)]
pub(crate) struct KernelScratch {
    u1: Vec<f64>,
    u2: Vec<f64>,
    block: Vec<f64>,
    tmp: Vec<f64>,
    pub minus: Vec<f64>,
    pub plus: Vec<f64>,
}

impl KernelScratch {
    pub fn new(d: usize) -> Self {
        Self {
            u1: vec![0.0; d * d],
            u2: vec![0.0; d * d],
            block: vec![0.0; (d - 1) * (d - 1)],
            tmp: vec![0.0; d * d],
            minus: vec![0.0; d * d],
            plus: vec![0.0; d * d],
        }
    }
}

/// `U1 Z_angle` into `out`, touching only columns 0 and d-1 of `U1`.
fn left_times_plane(d: usize, u1: &[f64], angle: f64, out: &mut [f64]) {
    out.copy_from_slice(u1);
    let (s, c) = angle.sin_cos();
    for row in 0..d {
        let a0 = u1[row * d];
        let al = u1[row * d + d - 1];
        out[row * d] = c * a0 + s * al;
        out[row * d + d - 1] = -s * a0 + c * al;
    }
}

/// Draw `(r-, r+)`, writing `R-` and `R+` into `scratch.minus`/`scratch.plus`.
pub(crate) fn sample_kernel_into<R: Rng + ?Sized>(
    params: &ModelParams,
    scratch: &mut KernelScratch,
    rng: &mut R,
) -> (f64, f64, f64) {
    let d = params.d;
    let psi = sample_psi(params, rng);
    let radii = kernel_components_unchecked(psi.cos(), params.delta);
    let angles = kernel_components_unchecked(psi.cos(), params.angle_delta());
    let sub = params.subgroup();
    sub.fill(&mut scratch.u1, &mut scratch.block, rng);
    sub.fill(&mut scratch.u2, &mut scratch.block, rng);
    // The minus fragment points to the opposite side of e_d from Z_psi e_d,
    // so it uses the reflected angle -psi-.
    left_times_plane(d, &scratch.u1, -angles.psi_minus, &mut scratch.tmp);
    mat_mul_into(d, &scratch.tmp, &scratch.u2, &mut scratch.minus);
    left_times_plane(d, &scratch.u1, angles.psi_plus, &mut scratch.tmp);
    mat_mul_into(d, &scratch.tmp, &scratch.u2, &mut scratch.plus);
    (radii.r_minus, radii.r_plus, psi)
}

/// Radii only; the rotations do not influence the weights of a tree.
pub(crate) fn sample_radii<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> (f64, f64) {
    let psi = sample_psi(params, rng);
    let a = kernel_components_unchecked(psi.cos(), params.delta);
    (a.r_minus, a.r_plus)
}

/// `(r-, r+, R-, R+)` with `R- = U1 Z_{-psi-} U2` and `R+ = U1 Z_{psi+} U2`.
pub fn sample_kernel<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> KernelSample {
    let mut scratch = KernelScratch::new(params.d);
    let (r_minus, r_plus, psi) = sample_kernel_into(params, &mut scratch, rng);
    KernelSample {
        r_minus,
        r_plus,
        rot_minus: Rotation::from_raw(params.d, scratch.minus),
        rot_plus: Rotation::from_raw(params.d, scratch.plus),
        psi,
    }
}

/// Outgoing direction `n` with law `b(sigma . rel_dir) u_S(d sigma)`.
pub fn sample_scattering_direction<R: Rng + ?Sized>(
    params: &ModelParams,
    rel_dir: &UnitVector,
    rng: &mut R,
) -> Result<UnitVector> {
    let d = params.d;
    if rel_dir.dim() != d {
        return Err(Error::arg("relative direction has the wrong dimension"));
    }
    let frame = rotation_taking_ed_to(rel_dir)?;
    Ok(
        UnitVector::new(frame.apply(&local_scattering_direction(params, rng)))
            .expect("rotation of a unit vector"),
    )
}

/// `U1 Z_psi U2 e_d` expressed in the frame where the relative velocity is `e_d`.
fn local_scattering_direction<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> Vec<f64> {
    let d = params.d;
    let psi = sample_psi(params, rng);
    let u1 = params.subgroup().sample(rng);
    // U2 fixes e_d, and Z_psi e_d = (-sin psi, 0, .., 0, cos psi).
    let mut z = vec![0.0; d];
    z[0] = -psi.sin();
    z[d - 1] = psi.cos();
    u1.apply(&z)
}

/// Inelastic collision rule:
/// `v' = (v+w)/2 + (delta/2)(v-w) + ((1-delta)/2)|v-w| n`,
/// `w' = (v+w)/2 - (delta/2)(v-w) - ((1-delta)/2)|v-w| n`.
pub fn collide(v: &[f64], w: &[f64], n: &[f64], delta: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(
        v.len() == w.len() && v.len() == n.len(),
        "dimension mismatch"
    );
    let speed = v
        .iter()
        .zip(w)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let mut out_v = Vec::with_capacity(v.len());
    let mut out_w = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let mean = 0.5 * (v[i] + w[i]);
        let kick = 0.5 * delta * (v[i] - w[i]) + 0.5 * (1.0 - delta) * speed * n[i];
        out_v.push(mean + kick);
        out_w.push(mean - kick);
    }
    (out_v, out_w)
}
