//! Rotations in SO(d): elementary plane rotations, Haar sampling through
//! Hurwitz's generalized Euler angles, an independent Gaussian-QR Haar
//! oracle, the SO(d-1) subgroup fixing `e_d`, and uniform sphere sampling.
//!
//! Matrices are stored row-major. Coordinate indices are zero-based, so the
//! last basis vector `e_d` has index `d - 1`.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::{Error, Result};

/// Drift above which a rotation is pulled back onto SO(d).
pub const REORTHOGONALIZE_TOLERANCE: f64 = 1e-10;

/// Number of accumulated factors after which drift is re-checked.
pub const DRIFT_CHECK_INTERVAL: usize = 64;

/// A `d x d` special-orthogonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Rotation {
    dim: usize,
    data: Vec<f64>,
}

impl Rotation {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    /// Build from row-major entries, checking orthogonality and orientation.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::arg(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        let r = Self { dim, data };
        if r.orthogonality_drift() > 1e-9 {
            return Err(Error::arg("matrix is not orthogonal"));
        }
        if r.determinant() < 0.0 {
            return Err(Error::arg("matrix has determinant -1"));
        }
        Ok(r)
    }

    pub(crate) fn from_raw(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let d = self.dim;
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                data[j * d + i] = self.data[i * d + j];
            }
        }
        Self { dim: d, data }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "dimension mismatch");
        mat_vec(self.dim, &self.data, v)
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, col)).collect()
    }

    /// `R e_d`, the image of the last basis vector.
    pub fn last_column(&self) -> Vec<f64> {
        self.column(self.dim - 1)
    }

    /// `max |R^T R - I|` over all entries.
    pub fn orthogonality_drift(&self) -> f64 {
        orthogonality_drift(self.dim, &self.data)
    }

    pub fn determinant(&self) -> f64 {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data).determinant()
    }

    /// Pull the matrix back onto SO(d) (polar factor via Newton-Schulz steps).
    pub fn reorthogonalize(&mut self) {
        reorthogonalize(self.dim, &mut self.data);
    }
}

impl Mul for &Rotation {
    type Output = Rotation;

    fn mul(self, rhs: &Rotation) -> Rotation {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let mut out = vec![0.0; self.dim * self.dim];
        mat_mul_into(self.dim, &self.data, &rhs.data, &mut out);
        Rotation::from_raw(self.dim, out)
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        &self * &rhs
    }
}

pub(crate) fn mat_mul_into(d: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let row = &a[i * d..(i + 1) * d];
        let dst = &mut out[i * d..(i + 1) * d];
        dst.iter_mut().for_each(|x| *x = 0.0);
        for (k, &aik) in row.iter().enumerate() {
            let brow = &b[k * d..(k + 1) * d];
            for (x, &bkj) in dst.iter_mut().zip(brow) {
                *x += aik * bkj;
            }
        }
    }
}

pub(crate) fn mat_vec(d: usize, a: &[f64], v: &[f64]) -> Vec<f64> {
    (0..d)
        .map(|i| {
            a[i * d..(i + 1) * d]
                .iter()
                .zip(v)
                .map(|(x, y)| x * y)
                .sum()
        })
        .collect()
}

pub(crate) fn orthogonality_drift(d: usize, a: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let dot: f64 = (0..d).map(|k| a[k * d + i] * a[k * d + j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

pub(crate) fn reorthogonalize(d: usize, a: &mut [f64]) {
    // X <- X (3I - X^T X) / 2 converges quadratically to the polar factor.
    let mut gram = vec![0.0; d * d];
    let mut next = vec![0.0; d * d];
    for _ in 0..8 {
        if orthogonality_drift(d, a) < 1e-15 {
            break;
        }
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|k| a[k * d + i] * a[k * d + j]).sum();
                gram[i * d + j] = if i == j { 1.5 - 0.5 * dot } else { -0.5 * dot };
            }
        }
        mat_mul_into(d, a, &gram, &mut next);
        a.copy_from_slice(&next);
    }
}

/// Apply `Z^{i,j}(angle)` on the right: only columns `i` and `j` change.
fn right_multiply_plane(d: usize, a: &mut [f64], i: usize, j: usize, angle: f64) {
    let (s, c) = angle.sin_cos();
    for row in 0..d {
        let ai = a[row * d + i];
        let aj = a[row * d + j];
        a[row * d + i] = c * ai + s * aj;
        a[row * d + j] = -s * ai + c * aj;
    }
}

/// A unit vector in `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalize `v`; fails on zero or non-finite input.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm <= f64::MIN_POSITIVE || v.is_empty() {
            return Err(Error::arg("cannot normalize a zero or non-finite vector"));
        }
        Ok(Self(v.into_iter().map(|x| x / norm).collect()))
    }

    /// The basis vector `e_{index}` (zero-based).
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index out of range");
        let mut v = vec![0.0; dim];
        v[index] = 1.0;
        Self(v)
    }

    /// `e_d`, the last basis vector.
    pub fn last(dim: usize) -> Self {
        Self::basis(dim, dim - 1)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

/// Rotation by `angle` in the `(e_i, e_j)` plane, with entries
/// `(i,i) = (j,j) = cos`, `(i,j) = -sin`, `(j,i) = sin`.
///
/// With `i = 0, j = d - 1` this maps `e_d` to `(-sin, 0, .., 0, cos)`.
pub fn elementary_rotation(d: usize, i: usize, j: usize, angle: f64) -> Result<Rotation> {
    if !(i < j && j < d) {
        return Err(Error::arg(format!(
            "plane indices must satisfy i < j < d (got i={i}, j={j}, d={d})"
        )));
    }
    let mut r = Rotation::identity(d);
    let (s, c) = angle.sin_cos();
    r.data[i * d + i] = c;
    r.data[i * d + j] = -s;
    r.data[j * d + i] = s;
    r.data[j * d + j] = c;
    Ok(r)
}

/// Angle on `[0, pi)` with density proportional to `sin(psi)^r`.
pub fn sample_sin_power_angle<R: Rng + ?Sized>(r: u32, rng: &mut R) -> f64 {
    let shape = 0.5 * (f64::from(r) + 1.0);
    let beta = Beta::new(shape, shape).expect("positive shape");
    sin_power_from_beta(&beta, rng)
}

fn sin_power_from_beta<R: Rng + ?Sized>(beta: &Beta<f64>, rng: &mut R) -> f64 {
    loop {
        let b: f64 = beta.sample(rng);
        let angle = (2.0 * b - 1.0).clamp(-1.0, 1.0).acos();
        // the density vanishes at pi for r > 0 and the interval is half-open
        if angle < PI {
            return angle;
        }
    }
}

/// Haar sampler on SO(d) following Hurwitz's factorisation
/// `O = F_1 F_2 ... F_{d-1}` into elementary rotations of adjacent planes.
///
/// Angles `psi_{0,i}` are uniform on `[0, 2pi)`; `psi_{r,i}` for `r >= 1`
/// have density proportional to `sin^r`. The Beta laws behind the latter are
/// built once per sampler.
#[derive(Clone, Debug)]
pub struct HaarSampler {
    dim: usize,
    sin_powers: Vec<Beta<f64>>,
}

impl HaarSampler {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::arg("Haar sampling needs d >= 2"));
        }
        let sin_powers = (1..dim.max(2) - 1)
            .map(|r| {
                let shape = 0.5 * (r as f64 + 1.0);
                Beta::new(shape, shape).expect("positive shape")
            })
            .collect();
        Ok(Self { dim, sin_powers })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Rotation {
        let d = self.dim;
        let mut data = Rotation::identity(d).data;
        self.fill(&mut data, rng);
        Rotation::from_raw(d, data)
    }

    /// Overwrite `out` (row-major, `d*d`) with a Haar draw.
    pub(crate) fn fill<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        let d = self.dim;
        out.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..d {
            out[i * d + i] = 1.0;
        }
        for i in 1..d {
            // F_i = Z^{d-i, d-i+1}(psi_{i-1,i}) ... Z^{d-1, d}(psi_{0,i}) in
            // one-based planes; angle psi_{r,i} lives in plane (d-r-2, d-r-1).
            for r in (0..i).rev() {
                let angle = if r == 0 {
                    2.0 * PI * rng.random::<f64>()
                } else {
                    sin_power_from_beta(&self.sin_powers[r - 1], rng)
                };
                right_multiply_plane(d, out, d - r - 2, d - r - 1, angle);
            }
        }
    }
}

/// Haar-distributed rotation via generalized Euler angles.
pub fn sample_haar<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Rotation> {
    Ok(HaarSampler::new(d)?.sample(rng))
}

/// Haar-distributed rotation by QR of a Gaussian matrix, with the sign of
/// each column fixed by the diagonal of `R` and the orientation forced to +1.
/// Shares no code path with [`sample_haar`].
pub fn sample_haar_oracle<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Rotation> {
    if d < 2 {
        return Err(Error::arg("Haar sampling needs d >= 2"));
    }
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    let mut data = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            data[i * d + j] = q[(i, j)];
        }
    }
    Ok(Rotation::from_raw(d, data))
}

/// Sampler for the subgroup SO(d-1) fixing `e_d`, Haar on the leading block.
#[derive(Clone, Debug)]
pub struct SubgroupSampler {
    dim: usize,
    block: HaarSampler,
    scratch_len: usize,
}

impl SubgroupSampler {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::arg("the SO(d-1) subgroup sampler needs d >= 3"));
        }
        Ok(Self {
            dim,
            block: HaarSampler::new(dim - 1)?,
            scratch_len: (dim - 1) * (dim - 1),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Rotation {
        let mut out = vec![0.0; self.dim * self.dim];
        let mut block = vec![0.0; self.scratch_len];
        self.fill(&mut out, &mut block, rng);
        Rotation::from_raw(self.dim, out)
    }

    pub(crate) fn fill<R: Rng + ?Sized>(&self, out: &mut [f64], block: &mut [f64], rng: &mut R) {
        let d = self.dim;
        let k = d - 1;
        self.block.fill(block, rng);
        out.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..k {
            out[i * d..i * d + k].copy_from_slice(&block[i * k..(i + 1) * k]);
        }
        out[d * d - 1] = 1.0;
    }
}

/// Rotation whose restriction to the first `d-1` coordinates is Haar on
/// SO(d-1) and which fixes `e_d` exactly.
pub fn sample_subgroup_haar<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Rotation> {
    Ok(SubgroupSampler::new(d)?.sample(rng))
}

/// Deterministic rotation `R` with `R e_d = e`.
///
/// Built from two Householder reflections (through `(e_d + e)/|e_d + e|`,
/// then through `e`). On the lower hemisphere the construction is applied to
/// `Z_pi^T e` and composed with `Z_pi`, so `e = -e_d` maps to the plane
/// rotation by pi and nothing near the antipode loses precision.
pub fn rotation_taking_ed_to(e: &UnitVector) -> Result<Rotation> {
    let d = e.dim();
    if d < 2 {
        return Err(Error::arg("need d >= 2"));
    }
    let norm = e.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm < 0.5 {
        return Err(Error::arg("direction must be a unit vector"));
    }
    let v: Vec<f64> = e.as_slice().iter().map(|x| x / norm).collect();
    if v[d - 1] >= 0.0 {
        Ok(Rotation::from_raw(d, upper_hemisphere_rotation(&v)))
    } else {
        // Z_pi = diag(-1, 1, .., 1, -1), its own transpose.
        let mut flipped = v.clone();
        flipped[0] = -flipped[0];
        flipped[d - 1] = -flipped[d - 1];
        let mut r = upper_hemisphere_rotation(&flipped);
        for j in 0..d {
            r[j] = -r[j];
            r[(d - 1) * d + j] = -r[(d - 1) * d + j];
        }
        Ok(Rotation::from_raw(d, r))
    }
}

fn upper_hemisphere_rotation(e: &[f64]) -> Vec<f64> {
    let d = e.len();
    if e[..d - 1].iter().all(|&x| x == 0.0) {
        return Rotation::identity(d).data;
    }
    // H1 = I - 2 u u^T with u = (e_d + e)/|e_d + e| sends e_d to -e;
    // H2 = I - 2 e e^T sends -e back to e.
    let mut u = e.to_vec();
    u[d - 1] += 1.0;
    let un = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    u.iter_mut().for_each(|x| *x /= un);
    let mut h1 = vec![0.0; d * d];
    let mut h2 = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let id = if i == j { 1.0 } else { 0.0 };
            h1[i * d + j] = id - 2.0 * u[i] * u[j];
            h2[i * d + j] = id - 2.0 * e[i] * e[j];
        }
    }
    let mut out = vec![0.0; d * d];
    mat_mul_into(d, &h2, &h1, &mut out);
    out
}

/// Uniform point on the sphere `S^{d-1}` (normalized Gaussian vector).
pub fn sample_uniform_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<UnitVector> {
    if d < 1 {
        return Err(Error::arg("need d >= 1"));
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = UnitVector::new(v) {
            return Ok(u);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RandomStream;
    use std::f64::consts::FRAC_PI_2;

    fn max_abs_diff(a: &Rotation, b: &Rotation) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_angle_is_identity() {
        let z = elementary_rotation(3, 0, 2, 0.0).unwrap();
        assert_eq!(z, Rotation::identity(3));
    }

    #[test]
    fn quarter_turn_entries() {
        let z = elementary_rotation(3, 0, 2, FRAC_PI_2).unwrap();
        assert!((z.get(0, 2) + 1.0).abs() < 1e-15);
        assert!((z.get(2, 0) - 1.0).abs() < 1e-15);
        assert!(z.get(2, 2).abs() < 1e-15);
        assert!(z.get(0, 0).abs() < 1e-15);
        let img = z.apply(&[0.0, 0.0, 1.0]);
        assert!((img[0] + 1.0).abs() < 1e-15 && img[2].abs() < 1e-15);
    }

    #[test]
    fn plane_rotations_compose_additively() {
        for d in 3..6 {
            let a = elementary_rotation(d, 0, d - 1, 0.7).unwrap();
            let b = elementary_rotation(d, 0, d - 1, -1.9).unwrap();
            let ab = elementary_rotation(d, 0, d - 1, 0.7 - 1.9).unwrap();
            assert!(max_abs_diff(&(&a * &b), &ab) < 1e-14);
        }
    }

    #[test]
    fn bad_plane_indices() {
        assert!(elementary_rotation(3, 2, 1, 0.1).is_err());
        assert!(elementary_rotation(3, 0, 3, 0.1).is_err());
        assert!(elementary_rotation(3, 1, 1, 0.1).is_err());
    }

    #[test]
    fn subgroup_fixes_last_axis() {
        let mut rng = RandomStream::new(11, 0);
        for d in 3..7 {
            let s = SubgroupSampler::new(d).unwrap();
            for _ in 0..100 {
                let r = s.sample(&mut rng);
                let img = r.last_column();
                for (i, x) in img.iter().enumerate() {
                    let target = if i == d - 1 { 1.0 } else { 0.0 };
                    assert!((x - target).abs() <= 1e-15);
                }
                for j in 0..d - 1 {
                    assert_eq!(r.get(d - 1, j), 0.0);
                }
            }
        }
        assert!(sample_subgroup_haar(2, &mut rng).is_err());
    }

    #[test]
    fn samplers_produce_rotations() {
        let mut rng = RandomStream::new(5, 0);
        for d in 2..7 {
            for _ in 0..200 {
                let a = sample_haar(d, &mut rng).unwrap();
                let b = sample_haar_oracle(d, &mut rng).unwrap();
                for r in [&a, &b] {
                    assert!(r.orthogonality_drift() <= 1e-12);
                    assert!((r.determinant() - 1.0).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn takes_ed_to_target() {
        let d = 3;
        let id = rotation_taking_ed_to(&UnitVector::last(d)).unwrap();
        assert_eq!(id, Rotation::identity(d));

        let r = rotation_taking_ed_to(&UnitVector::basis(d, 0)).unwrap();
        let img = r.last_column();
        assert!((img[0] - 1.0).abs() < 1e-12 && img[1].abs() < 1e-12 && img[2].abs() < 1e-12);

        let south = UnitVector::new(vec![0.0, 0.0, -1.0]).unwrap();
        let r = rotation_taking_ed_to(&south).unwrap();
        let img = r.last_column();
        assert!((img[2] + 1.0).abs() < 1e-15);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn takes_ed_to_random_targets() {
        let mut rng = RandomStream::new(9, 0);
        for d in 3..7 {
            for _ in 0..500 {
                let e = sample_uniform_sphere(d, &mut rng).unwrap();
                let r = rotation_taking_ed_to(&e).unwrap();
                let img = r.last_column();
                let err = img
                    .iter()
                    .zip(e.as_slice())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(err <= 1e-12);
                assert!(r.orthogonality_drift() <= 1e-12);
                assert!((r.determinant() - 1.0).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn near_antipode_is_accurate() {
        let e = UnitVector::new(vec![1e-9, -2e-9, -1.0]).unwrap();
        let r = rotation_taking_ed_to(&e).unwrap();
        let img = r.last_column();
        for (a, b) in img.iter().zip(e.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(UnitVector::new(vec![0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn reorthogonalize_removes_drift() {
        let mut rng = RandomStream::new(3, 0);
        let mut r = sample_haar(4, &mut rng).unwrap();
        for x in r.data.iter_mut() {
            *x *= 1.0 + 1e-7;
        }
        assert!(r.orthogonality_drift() > 1e-8);
        r.reorthogonalize();
        assert!(r.orthogonality_drift() < 1e-14);
    }

    #[test]
    fn sphere_samples_are_unit() {
        let mut rng = RandomStream::new(1, 0);
        for d in 1..6 {
            for _ in 0..100 {
                let u = sample_uniform_sphere(d, &mut rng).unwrap();
                let n: f64 = u.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sin_power_angle_range() {
        let mut rng = RandomStream::new(2, 0);
        for r in 0..6 {
            for _ in 0..1000 {
                let a = sample_sin_power_angle(r, &mut rng);
                assert!((0.0..PI).contains(&a));
            }
        }
    }
}
