//! The convex function `S(s) = E[(r-)^s + (r+)^s] - 1`, the exponent `alpha`
//! solving `S(alpha) = 0`, and the constants attached to a stable law.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::collision::{sphere_projection_constant, ModelParams};
use crate::quadrature::integrate;
use crate::rotations::UnitVector;
use crate::{Error, Result};

const S_TOLERANCE: f64 = 1e-12;
const ALPHA_LOWER: f64 = 1e-4;
const ALPHA_UPPER: f64 = 2.0;
const ROOT_TOLERANCE: f64 = 1e-8;
const GAMMA_CANDIDATES: [f64; 4] = [1.1, 1.25, 1.5, 2.0];
const FULLNESS_TOLERANCE: f64 = 1e-8;

/// `S(s)` evaluated by adaptive quadrature against the law of `cos psi`.
pub fn evaluate_s(s: f64, params: &ModelParams) -> Result<f64> {
    Ok(evaluate_s_with_error(s, params)?.0)
}

fn evaluate_s_with_error(s: f64, params: &ModelParams) -> Result<(f64, f64)> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::arg(format!("S(s) needs finite s >= 0, got {s}")));
    }
    let delta = params.delta();
    let half = 0.5 * s;
    let q = params.expect_over_cos_psi(
        |c| {
            let minus = (1.0 - delta).powi(2) * (1.0 - c).max(0.0) * 0.5;
            let plus = ((1.0 + delta * delta) + (1.0 - delta * delta) * c).max(0.0) * 0.5;
            minus.powf(half) + plus.powf(half)
        },
        S_TOLERANCE,
    )?;
    Ok((q.value - 1.0, q.error))
}

/// The exponent and its witnesses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralInfo {
    pub alpha: f64,
    /// Some `gamma > 1` with `S(alpha * gamma) < 0`.
    pub gamma_witness: f64,
    pub s_at_two_alpha: f64,
    /// Largest quadrature error estimate seen while solving.
    pub quadrature_error: f64,
}

/// Unique root of `S` in `(0, 2)`, by bisection.
pub fn solve_alpha(params: &ModelParams) -> Result<SpectralInfo> {
    let (s_hi, mut err) = evaluate_s_with_error(ALPHA_UPPER, params)?;
    if s_hi >= 0.0 {
        return Err(Error::Numerical(format!(
            "S(2) = {s_hi} is not negative; quadrature cannot be trusted"
        )));
    }
    let (s_lo, e) = evaluate_s_with_error(ALPHA_LOWER, params)?;
    err = err.max(e);
    if s_lo <= 0.0 {
        return Err(Error::Numerical(format!(
            "S({ALPHA_LOWER}) = {s_lo} is not positive; no sign change to bracket"
        )));
    }
    let (mut lo, mut hi) = (ALPHA_LOWER, ALPHA_UPPER);
    let mut value_at_mid = f64::NAN;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (v, e) = evaluate_s_with_error(mid, params)?;
        err = err.max(e);
        value_at_mid = v;
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi || v == 0.0 {
            break;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let s_alpha = evaluate_s(alpha, params).unwrap_or(value_at_mid);
    if s_alpha.abs() > ROOT_TOLERANCE {
        return Err(Error::Numerical(format!(
            "bisection ended with |S(alpha)| = {}",
            s_alpha.abs()
        )));
    }
    let mut gamma_witness = None;
    for gamma in GAMMA_CANDIDATES {
        if evaluate_s(alpha * gamma, params)? < 0.0 {
            gamma_witness = Some(gamma);
            break;
        }
    }
    let gamma_witness = gamma_witness
        .ok_or_else(|| Error::Numerical("no gamma > 1 with S(alpha gamma) < 0 found".into()))?;
    Ok(SpectralInfo {
        alpha,
        gamma_witness,
        s_at_two_alpha: evaluate_s(2.0 * alpha, params)?,
        quadrature_error: err,
    })
}

/// Whether the `p alpha` moment of the fixed point is finite, i.e. `S(p alpha) < 0`.
pub fn moment_criterion(p: f64, info: &SpectralInfo, params: &ModelParams) -> Result<bool> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::arg(format!("moment order must exceed 1, got {p}")));
    }
    Ok(evaluate_s(p * info.alpha, params)? < 0.0)
}

/// `k_alpha = 2 Gamma(alpha) sin(alpha pi / 2) / pi`.
pub fn k_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(2.0 * ln_gamma(alpha).exp() * (0.5 * PI * alpha).sin() / PI)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::arg(format!(
            "stable index must lie in (0, 2), got {alpha}"
        )))
    }
}

/// `E|theta . e|^alpha` for `theta` uniform on the unit sphere of `R^d`, by
/// quadrature against the density `(1 - z^2)^{(d-3)/2} / B_d` of `theta . e`.
pub fn sphere_abs_moment(alpha: f64, d: usize) -> Result<f64> {
    let b_d = sphere_projection_constant(d)?;
    let half = 0.5 * (d as f64 - 3.0);
    // Symmetric in z, so integrate over (0, 1) and double.
    let q = integrate(
        |z: f64| 2.0 * z.powf(alpha) * (1.0 - z * z).powf(half) / b_d,
        0.0,
        1.0,
        1e-14,
    )?;
    Ok(q.value)
}

/// The spectral part of a symmetric stable law.
#[derive(Clone, Debug, PartialEq)]
pub enum SpectralMeasure {
    /// Rotation invariant, with characteristic function `exp(-lambda |xi|^alpha)`.
    Radial { lambda: f64 },
    /// Atoms of mass `weight` at each of `+direction` and `-direction`.
    DiscreteSymmetric(Vec<(f64, UnitVector)>),
}

/// A centered symmetric alpha-stable law on `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct StableSpec {
    alpha: f64,
    d: usize,
    spectral: SpectralMeasure,
}

impl StableSpec {
    pub fn radial(alpha: f64, d: usize, lambda: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::arg("radial scale must be positive and finite"));
        }
        Ok(Self {
            alpha,
            d,
            spectral: SpectralMeasure::Radial { lambda },
        })
    }

    /// Law whose spectral measure is `mass` times the uniform measure on the sphere.
    pub fn uniform_spectral(alpha: f64, d: usize, mass: f64) -> Result<Self> {
        Self::radial(alpha, d, mass * sphere_abs_moment(alpha, d)?)
    }

    pub fn discrete_symmetric(alpha: f64, d: usize, atoms: Vec<(f64, UnitVector)>) -> Result<Self> {
        check_alpha(alpha)?;
        if atoms.is_empty() {
            return Err(Error::arg(
                "discrete spectral measure needs at least one atom",
            ));
        }
        for (w, theta) in &atoms {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::arg("atom weights must be positive and finite"));
            }
            if theta.dim() != d {
                return Err(Error::arg("atom direction has the wrong dimension"));
            }
        }
        Ok(Self {
            alpha,
            d,
            spectral: SpectralMeasure::DiscreteSymmetric(atoms),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn spectral(&self) -> &SpectralMeasure {
        &self.spectral
    }

    /// Not supported on any hyperplane.
    pub fn is_full(&self) -> bool {
        match &self.spectral {
            SpectralMeasure::Radial { .. } => true,
            SpectralMeasure::DiscreteSymmetric(atoms) => {
                if atoms.len() < self.d {
                    return false;
                }
                let m = DMatrix::from_fn(self.d, atoms.len(), |i, j| atoms[j].1.as_slice()[i]);
                let sv = m.singular_values();
                sv.iter().copied().fold(f64::INFINITY, f64::min) > FULLNESS_TOLERANCE
            }
        }
    }

    fn require_full(&self) -> Result<()> {
        if self.is_full() {
            Ok(())
        } else {
            Err(Error::Domain(
                "spectral measure is supported on a hyperplane".into(),
            ))
        }
    }

    /// `int |xi . theta|^alpha Lambda(d theta)`, the exponent of the characteristic function.
    pub fn cf_exponent(&self, xi: &[f64]) -> f64 {
        match &self.spectral {
            SpectralMeasure::Radial { lambda } => {
                lambda
                    * xi.iter()
                        .map(|x| x * x)
                        .sum::<f64>()
                        .sqrt()
                        .powf(self.alpha)
            }
            SpectralMeasure::DiscreteSymmetric(atoms) => atoms
                .iter()
                .map(|(w, theta)| 2.0 * w * theta.dot(xi).abs().powf(self.alpha))
                .sum(),
        }
    }

    /// `E exp(i xi . X)`; real for a symmetric law.
    pub fn cf(&self, xi: &[f64]) -> f64 {
        (-self.cf_exponent(xi)).exp()
    }
}

/// `phi(B_u) = k_alpha int (theta . u)_+^alpha Lambda(d theta)`, the Levy
/// measure of the half-space `{y : y . u > 1}`.
pub fn phi_ball(spec: &StableSpec, u: &UnitVector) -> Result<f64> {
    spec.require_full()?;
    if u.dim() != spec.d {
        return Err(Error::arg("direction has the wrong dimension"));
    }
    let k = k_alpha(spec.alpha)?;
    Ok(match &spec.spectral {
        SpectralMeasure::Radial { lambda } => k * 0.5 * lambda,
        SpectralMeasure::DiscreteSymmetric(atoms) => {
            k * atoms
                .iter()
                .map(|(w, theta)| w * theta.dot(u.as_slice()).abs().powf(spec.alpha))
                .sum::<f64>()
        }
    })
}

/// Sphere averages of the Levy measure of half-spaces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StableConstants {
    /// `int phi(B_sigma) u_S(d sigma)`.
    pub c_defc: f64,
    /// `(2 / k_alpha) c_defc`: the averaged one-dimensional CF scale of projections.
    pub c_scale: f64,
    /// `c_defc / (Gamma(alpha) sin(pi alpha / 2))`, equal to `c_scale / pi`.
    pub c_gamma_sine: f64,
}

pub fn c_constants(spec: &StableSpec) -> Result<StableConstants> {
    spec.require_full()?;
    let alpha = spec.alpha;
    let k = k_alpha(alpha)?;
    // For a fixed theta, sigma . theta has the projected law of a uniform
    // direction, so each atom contributes E|z|^alpha / 2 per unit of mass.
    let c_defc = match &spec.spectral {
        SpectralMeasure::Radial { lambda } => 0.5 * k * lambda,
        SpectralMeasure::DiscreteSymmetric(atoms) => {
            let moment = sphere_abs_moment(alpha, spec.d)?;
            k * moment * atoms.iter().map(|(w, _)| w).sum::<f64>()
        }
    };
    let gamma_sine_prefactor = 1.0 / (ln_gamma(alpha).exp() * (0.5 * PI * alpha).sin());
    Ok(StableConstants {
        c_defc,
        c_scale: 2.0 / k * c_defc,
        c_gamma_sine: gamma_sine_prefactor * c_defc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    fn closed_form_s(s: f64) -> f64 {
        (0.75f64.powf(s) + (1.0 - 0.25f64.powf(s + 2.0)) / 0.9375) / (0.5 * s + 1.0) - 1.0
    }

    #[test]
    fn s_matches_closed_form() {
        let params = ModelParams::isotropic(3, 0.25).unwrap();
        assert!((evaluate_s(0.0, &params).unwrap() - 1.0).abs() < 1e-12);
        assert!((evaluate_s(2.0, &params).unwrap() + 0.1875).abs() < 1e-10);
        for s in [0.5, 1.0, 1.5, 2.0, 3.0] {
            assert!(
                (evaluate_s(s, &params).unwrap() - closed_form_s(s)).abs() < 1e-9,
                "s = {s}"
            );
        }
        assert!(evaluate_s(-0.1, &params).is_err());
    }

    #[test]
    fn alpha_isotropic_quarter() {
        let params = ModelParams::isotropic(3, 0.25).unwrap();
        let info = solve_alpha(&params).unwrap();
        // Independent bisection on the closed form.
        let (mut lo, mut hi) = (0.5, 2.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if closed_form_s(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((info.alpha - lo).abs() < 1e-8);
        assert!((info.alpha - 1.4377).abs() < 1e-3);
        assert!(evaluate_s(info.alpha, &params).unwrap().abs() <= 1e-8);
        assert!(evaluate_s(info.alpha * info.gamma_witness, &params).unwrap() < 0.0);
        assert!(moment_criterion(1.01, &info, &params).unwrap());
        assert!(moment_criterion(2.0, &info, &params).unwrap());
        assert!(moment_criterion(50.0, &info, &params).unwrap());
    }

    #[test]
    fn alpha_near_half() {
        let params = ModelParams::isotropic(3, 0.4999).unwrap();
        let info = solve_alpha(&params).unwrap();
        let limit = |s: f64| ((2.0 / 3.0) * 2f64.powf(-s) + 4.0 / 3.0) / (0.5 * s + 1.0) - 1.0;
        let (mut lo, mut hi) = (0.5, 2.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if limit(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((lo - 1.2337).abs() < 1e-4);
        assert!((info.alpha - lo).abs() < 1e-2);
    }

    #[test]
    fn k_alpha_values() {
        assert!((k_alpha(1.0).unwrap() - 2.0 / PI).abs() < 1e-12);
        assert!((k_alpha(0.5).unwrap() - (2.0 / PI).sqrt()).abs() < 1e-12);
        for i in 1..200 {
            let a = i as f64 * 0.01;
            let k = k_alpha(a).unwrap();
            assert!(k.is_finite() && k > 0.0);
            let reflection = k * PI / (2.0 * gamma(a) * (0.5 * PI * a).sin());
            assert!((reflection - 1.0).abs() < 1e-12);
        }
        assert!(k_alpha(0.0).is_err() && k_alpha(2.0).is_err());
    }

    #[test]
    fn sphere_moment_closed_form() {
        for d in 3..7 {
            for alpha in [0.3, 1.0, 1.4376951081602667, 1.9] {
                let exact = (ln_gamma(0.5 * (alpha + 1.0)) + ln_gamma(0.5 * d as f64)
                    - ln_gamma(0.5 * (alpha + d as f64)))
                .exp()
                    / PI.sqrt();
                assert!((sphere_abs_moment(alpha, d).unwrap() - exact).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn phi_ball_examples() {
        let spec = StableSpec::radial(1.0, 3, 1.0).unwrap();
        let u = UnitVector::new(vec![0.3, -0.4, 0.5]).unwrap();
        assert!((phi_ball(&spec, &u).unwrap() - 1.0 / PI).abs() < 1e-12);

        let atoms = vec![
            (0.7, UnitVector::basis(3, 0)),
            (0.1, UnitVector::basis(3, 1)),
            (0.1, UnitVector::basis(3, 2)),
        ];
        let spec = StableSpec::discrete_symmetric(1.3, 3, atoms).unwrap();
        let k = k_alpha(1.3).unwrap();
        assert!((phi_ball(&spec, &UnitVector::basis(3, 0)).unwrap() - 0.7 * k).abs() < 1e-12);

        let flat = StableSpec::discrete_symmetric(
            1.3,
            3,
            vec![
                (1.0, UnitVector::basis(3, 0)),
                (1.0, UnitVector::basis(3, 1)),
            ],
        )
        .unwrap();
        assert!(!flat.is_full());
        assert!(matches!(
            phi_ball(&flat, &UnitVector::basis(3, 2)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(c_constants(&flat), Err(Error::Domain(_))));
    }

    #[test]
    fn c_constant_examples() {
        for d in 3..6 {
            for alpha in [0.5, 1.0, 1.7] {
                let c = c_constants(&StableSpec::radial(alpha, d, 1.0).unwrap()).unwrap();
                assert!((c.c_defc - 0.5 * k_alpha(alpha).unwrap()).abs() < 1e-12);
                assert!((c.c_scale - 1.0).abs() < 1e-12);
                assert!((c.c_gamma_sine - 1.0 / PI).abs() < 1e-12);
            }
        }
        let c = c_constants(&StableSpec::radial(1.0, 3, 1.0).unwrap()).unwrap();
        assert!((c.c_defc - 1.0 / PI).abs() < 1e-12);

        let k1 = k_alpha(1.0).unwrap();
        let pareto = StableSpec::uniform_spectral(1.0, 3, 1.0 / k1).unwrap();
        let c = c_constants(&pareto).unwrap();
        assert!((c.c_scale - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn convexity_probe() {
        use rand::{Rng, SeedableRng};
        let params = ModelParams::isotropic(3, 0.25).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let mut t = [
                rng.random::<f64>() * 4.0,
                rng.random::<f64>() * 4.0,
                rng.random::<f64>() * 4.0,
            ];
            t.sort_by(f64::total_cmp);
            let [a, b, c] = t;
            if c - a < 1e-9 {
                continue;
            }
            let (sa, sb, sc) = (
                evaluate_s(a, &params).unwrap(),
                evaluate_s(b, &params).unwrap(),
                evaluate_s(c, &params).unwrap(),
            );
            assert!(sb <= ((c - b) * sa + (b - a) * sc) / (c - a) + 1e-9);
        }
    }
}
