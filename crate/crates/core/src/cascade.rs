//! McKean-tree recursion for the leaf weights `beta` and rotations `O`.
//!
//! Starting from one leaf `(1, I)`, step `k` picks a leaf uniformly among the
//! `k` present and replaces `(beta, O)` by `(beta r-, O R-)` and
//! `(beta r+, O R+)` from a fresh kernel draw. The martingale
//! `M_n = sum_j beta_j^alpha` converges to the fixed point `M_inf` of
//! `M = (r-)^alpha M' + (r+)^alpha M''`.

use rand::Rng;
use serde::Serialize;

use crate::collision::{sample_kernel_into, sample_radii, KernelScratch, ModelParams};
use crate::rotations::{
    mat_mul_into, orthogonality_drift, reorthogonalize, rotation_taking_ed_to, Rotation,
    UnitVector, DRIFT_CHECK_INTERVAL, REORTHOGONALIZE_TOLERANCE,
};
use crate::{Error, Result};

/// Default recursion depth for fixed-point draws.
pub const DEFAULT_DEPTH: usize = 500;

/// Leaves of a McKean tree after `n` steps.
///
/// Weights are kept as logarithms so that deep trees never underflow.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightArray {
    d: usize,
    log_betas: Vec<f64>,
    rots: Vec<f64>,
}

impl WeightArray {
    /// Number of recursion steps; the tree has `n + 1` leaves.
    pub fn n(&self) -> usize {
        self.log_betas.len() - 1
    }

    pub fn len(&self) -> usize {
        self.log_betas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn beta(&self, j: usize) -> f64 {
        self.log_betas[j].exp()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.log_betas.iter().map(|l| l.exp()).collect()
    }

    pub fn log_betas(&self) -> &[f64] {
        &self.log_betas
    }

    pub fn rotation(&self, j: usize) -> Rotation {
        let dd = self.d * self.d;
        Rotation::from_raw(self.d, self.rots[j * dd..(j + 1) * dd].to_vec())
    }

    pub(crate) fn rotation_slice(&self, j: usize) -> &[f64] {
        let dd = self.d * self.d;
        &self.rots[j * dd..(j + 1) * dd]
    }
}

/// Where the right fragment of a split goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Placement {
    /// Immediately after the left fragment.
    Adjacent,
    /// At the end of the array; same law, constant cost per step.
    Append,
}

/// Reusable storage for growing trees with rotations.
pub(crate) struct TreeArena {
    d: usize,
    log_betas: Vec<f64>,
    rots: Vec<f64>,
    since_check: Vec<u32>,
    kernel: KernelScratch,
    child: Vec<f64>,
}

impl TreeArena {
    pub fn new(d: usize) -> Self {
        let mut arena = Self {
            d,
            log_betas: Vec::new(),
            rots: Vec::new(),
            since_check: Vec::new(),
            kernel: KernelScratch::new(d),
            child: vec![0.0; d * d],
        };
        arena.reset();
        arena
    }

    pub fn reset(&mut self) {
        let d = self.d;
        self.log_betas.clear();
        self.log_betas.push(0.0);
        self.rots.clear();
        self.rots.resize(d * d, 0.0);
        for i in 0..d {
            self.rots[i * d + i] = 1.0;
        }
        self.since_check.clear();
        self.since_check.push(0);
    }

    pub fn leaves(&self) -> usize {
        self.log_betas.len()
    }

    pub fn log_beta(&self, j: usize) -> f64 {
        self.log_betas[j]
    }

    pub fn rotation(&self, j: usize) -> &[f64] {
        let dd = self.d * self.d;
        &self.rots[j * dd..(j + 1) * dd]
    }

    /// One recursion step.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        params: &ModelParams,
        placement: Placement,
        rng: &mut R,
    ) {
        let k = self.leaves();
        let leaf = rng.random_range(0..k);
        self.split(leaf, params, placement, rng);
    }

    pub fn grow<R: Rng + ?Sized>(
        &mut self,
        steps: usize,
        params: &ModelParams,
        placement: Placement,
        rng: &mut R,
    ) {
        for _ in 0..steps {
            self.step(params, placement, rng);
        }
    }

    fn split<R: Rng + ?Sized>(
        &mut self,
        leaf: usize,
        params: &ModelParams,
        placement: Placement,
        rng: &mut R,
    ) {
        let d = self.d;
        let dd = d * d;
        let (r_minus, r_plus, _) = sample_kernel_into(params, &mut self.kernel, rng);
        let parent_log = self.log_betas[leaf];
        let checks = self.since_check[leaf] + 1;
        let needs_check = checks as usize >= DRIFT_CHECK_INTERVAL;

        // Right fragment first, while the parent rotation is still in place.
        mat_mul_into(
            d,
            &self.rots[leaf * dd..(leaf + 1) * dd],
            &self.kernel.plus,
            &mut self.child,
        );
        let right_checks = Self::maybe_reorthogonalize(d, &mut self.child, needs_check, checks);
        let right_log = parent_log + r_plus.ln();
        match placement {
            Placement::Adjacent => {
                self.log_betas.insert(leaf + 1, right_log);
                self.since_check.insert(leaf + 1, right_checks);
                let at = (leaf + 1) * dd;
                self.rots.splice(at..at, self.child.iter().copied());
            }
            Placement::Append => {
                self.log_betas.push(right_log);
                self.since_check.push(right_checks);
                self.rots.extend_from_slice(&self.child);
            }
        }

        mat_mul_into(
            d,
            &self.rots[leaf * dd..(leaf + 1) * dd],
            &self.kernel.minus,
            &mut self.child,
        );
        let left_checks = Self::maybe_reorthogonalize(d, &mut self.child, needs_check, checks);
        self.rots[leaf * dd..(leaf + 1) * dd].copy_from_slice(&self.child);
        self.log_betas[leaf] = parent_log + r_minus.ln();
        self.since_check[leaf] = left_checks;
    }

    fn maybe_reorthogonalize(d: usize, rot: &mut [f64], needs_check: bool, checks: u32) -> u32 {
        if !needs_check {
            return checks;
        }
        if orthogonality_drift(d, rot) > REORTHOGONALIZE_TOLERANCE {
            reorthogonalize(d, rot);
        }
        0
    }

    pub fn to_weight_array(&self) -> WeightArray {
        WeightArray {
            d: self.d,
            log_betas: self.log_betas.clone(),
            rots: self.rots.clone(),
        }
    }
}

/// Grow a tree for `n` steps in the recursion's own ordering.
pub fn run_tree<R: Rng + ?Sized>(n: usize, params: &ModelParams, rng: &mut R) -> WeightArray {
    let mut arena = TreeArena::new(params.dim());
    arena.grow(n, params, Placement::Adjacent, rng);
    arena.to_weight_array()
}

/// Like [`run_tree`] but the right fragment of every split is appended at the
/// end. Leaves are exchangeable, so the multiset of leaves has the same law.
pub fn run_tree_appended<R: Rng + ?Sized>(
    n: usize,
    params: &ModelParams,
    rng: &mut R,
) -> WeightArray {
    let mut arena = TreeArena::new(params.dim());
    arena.grow(n, params, Placement::Append, rng);
    arena.to_weight_array()
}

/// `beta_j^alpha` for each leaf of a tree grown without rotations.
pub(crate) struct PowerWeights {
    alpha: f64,
    powers: Vec<f64>,
}

impl PowerWeights {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            powers: vec![1.0],
        }
    }

    pub fn grow<R: Rng + ?Sized>(&mut self, steps: usize, params: &ModelParams, rng: &mut R) {
        for _ in 0..steps {
            let leaf = rng.random_range(0..self.powers.len());
            let (r_minus, r_plus) = sample_radii(params, rng);
            let w = self.powers[leaf];
            self.powers[leaf] = w * r_minus.powf(self.alpha);
            self.powers.push(w * r_plus.powf(self.alpha));
        }
    }

    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }
}

/// `M_n = sum beta_j^alpha` and the largest weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightStats {
    pub m: f64,
    pub beta_max: f64,
}

pub fn weight_stats(w: &WeightArray, alpha: f64) -> Result<WeightStats> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::arg(format!(
            "stable index must lie in (0, 2), got {alpha}"
        )));
    }
    let max_log = w
        .log_betas
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let m = w.log_betas.iter().map(|l| (alpha * l).exp()).sum();
    Ok(WeightStats {
        m,
        beta_max: max_log.exp(),
    })
}

/// Approximate draw of `M_inf`: the martingale `M_depth`.
///
/// Only the weights affect `M_n`, so the tree is grown without rotations.
pub fn sample_m_infinity<R: Rng + ?Sized>(
    params: &ModelParams,
    alpha: f64,
    depth: usize,
    rng: &mut R,
) -> Result<f64> {
    if depth == 0 {
        return Err(Error::arg("fixed-point depth must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::arg(format!(
            "stable index must lie in (0, 2), got {alpha}"
        )));
    }
    let mut weights = PowerWeights::new(alpha);
    weights.grow(depth, params, rng);
    Ok(weights.total())
}

/// `sum_k beta_k (O O_k e_d) . X_k` with `O e_d = e` and fresh `X_k ~ initial`.
pub fn sample_projection_sum<R, F>(
    w: &WeightArray,
    e: &UnitVector,
    mut initial: F,
    rng: &mut R,
) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Vec<f64>,
{
    let d = w.d;
    if e.dim() != d {
        return Err(Error::arg("projection direction has the wrong dimension"));
    }
    let frame = rotation_taking_ed_to(e)?;
    let mut total = 0.0;
    for j in 0..w.len() {
        let x = initial(rng);
        if x.len() != d {
            return Err(Error::arg(
                "initial sampler returned a vector of the wrong dimension",
            ));
        }
        total += w.beta(j) * leaf_projection(d, frame.as_slice(), w.rotation_slice(j), &x);
    }
    Ok(total)
}

/// `(O O_k e_d) . x` without forming `O O_k`.
pub(crate) fn leaf_projection(d: usize, frame: &[f64], leaf: &[f64], x: &[f64]) -> f64 {
    let mut out = 0.0;
    for i in 0..d {
        let mut dir = 0.0;
        for k in 0..d {
            dir += frame[i * d + k] * leaf[k * d + d - 1];
        }
        out += dir * x[i];
    }
    out
}

/// `Psi_n(O) = sum_j beta_j^alpha psi0(O O_j)`.
pub fn eval_psi_process<F: Fn(&Rotation) -> f64>(
    w: &WeightArray,
    alpha: f64,
    psi0: F,
    frame: &Rotation,
) -> Result<f64> {
    if frame.dim() != w.d {
        return Err(Error::arg("frame rotation has the wrong dimension"));
    }
    let mut total = 0.0;
    for j in 0..w.len() {
        let beta_pow = (alpha * w.log_betas[j]).exp();
        if beta_pow == 0.0 {
            continue;
        }
        let composed = frame * &w.rotation(j);
        total += beta_pow * psi0(&composed);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RandomStream;

    #[test]
    fn trivial_trees() {
        let params = ModelParams::isotropic(3, 0.25).unwrap();
        let mut rng = RandomStream::new(1, 0);
        let w = run_tree(0, &params, &mut rng);
        assert_eq!(w.n(), 0);
        assert_eq!(w.betas(), vec![1.0]);
        assert_eq!(w.rotation(0), Rotation::identity(3));
        let stats = weight_stats(&w, 1.3).unwrap();
        assert_eq!(stats.m, 1.0);
        assert_eq!(stats.beta_max, 1.0);

        let w5 = run_tree(5, &params, &mut rng);
        assert_eq!(w5.len(), 6);
        assert!(w5.betas().iter().all(|&b| (0.0..=1.0).contains(&b)));
    }

    #[test]
    fn single_step_matches_kernel() {
        let params = ModelParams::isotropic(4, 0.25).unwrap();
        let mut a = RandomStream::new(3, 9);
        let mut b = RandomStream::new(3, 9);
        let w = run_tree(1, &params, &mut a);
        // run_tree draws the (forced) leaf index first.
        let _ = b.random_range(0..1usize);
        let k = crate::collision::sample_kernel(&params, &mut b);
        assert!((w.beta(0) - k.r_minus).abs() < 1e-15);
        assert!((w.beta(1) - k.r_plus).abs() < 1e-15);
        assert_eq!(w.rotation(0), k.rot_minus);
        assert_eq!(w.rotation(1), k.rot_plus);
    }

    #[test]
    fn split_replaces_one_leaf() {
        let params = ModelParams::isotropic(3, 0.3).unwrap();
        let mut rng = RandomStream::new(5, 0);
        let mut arena = TreeArena::new(3);
        for k in 1..40 {
            let before: Vec<f64> = (0..arena.leaves()).map(|j| arena.log_beta(j)).collect();
            arena.step(&params, Placement::Adjacent, &mut rng);
            let after: Vec<f64> = (0..arena.leaves()).map(|j| arena.log_beta(j)).collect();
            assert_eq!(after.len(), k + 1);
            let changed = (0..before.len())
                .find(|&j| before[j] != after[j])
                .unwrap_or(before.len() - 1);
            let parent = before[changed];
            let mut rest = before.clone();
            rest.remove(changed);
            let mut remaining = after.clone();
            remaining.drain(changed..changed + 2);
            assert_eq!(rest, remaining);
            let (l, r) = (after[changed].exp(), after[changed + 1].exp());
            let p = parent.exp();
            assert!(l <= p && r <= p);
        }
    }

    #[test]
    fn projection_of_point_mass() {
        let params = ModelParams::isotropic(3, 0.25).unwrap();
        let mut rng = RandomStream::new(2, 0);
        let w = run_tree(0, &params, &mut rng);
        let e = UnitVector::new(vec![1.0, 2.0, -2.0]).unwrap();
        let v0 = vec![0.5, -1.0, 3.0];
        let got = sample_projection_sum(&w, &e, |_| v0.clone(), &mut rng).unwrap();
        assert!((got - e.dot(&v0)).abs() < 1e-14);
    }

    #[test]
    fn psi_of_one_is_m() {
        let params = ModelParams::isotropic(3, 0.25).unwrap();
        let mut rng = RandomStream::new(7, 0);
        let w = run_tree(30, &params, &mut rng);
        let psi = eval_psi_process(&w, 1.4, |_| 1.0, &Rotation::identity(3)).unwrap();
        assert!((psi - weight_stats(&w, 1.4).unwrap().m).abs() < 1e-12);
    }

    #[test]
    fn deep_rotations_stay_orthogonal() {
        let params = ModelParams::isotropic(5, 0.25).unwrap();
        let mut rng = RandomStream::new(12, 0);
        let w = run_tree_appended(3000, &params, &mut rng);
        for j in 0..w.len() {
            let r = w.rotation(j);
            assert!(r.orthogonality_drift() < 1e-9);
        }
    }
}
