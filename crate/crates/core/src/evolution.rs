//! Time evolution of the velocity law.
//!
//! The tree route is exact in law: with `N_t` geometric,
//! `e . V_t = sum_k beta_k (O O_k e_d) . X_k` over the leaves of a tree grown
//! for `N_t` steps. The particle route is a Nanbu-type direct simulation where
//! each particle collides at unit rate.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::cascade::{leaf_projection, Placement, TreeArena};
use crate::collision::{collide, sample_scattering_direction, ModelParams};
use crate::diagnostics::{empirical_cf, EcfEstimate};
use crate::rotations::{rotation_taking_ed_to, UnitVector};
use crate::stablelaws::{stationary_into, InitialData, StationaryLaw};
use crate::{Error, RandomStream, Result};

/// Default cap on tree steps per replicate.
pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

/// Smallest replicate count accepted by [`estimate_cf_evolution`].
pub const MIN_REPLICATES: usize = 1_000;

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::arg(format!(
            "time must be finite and non-negative, got {t}"
        )))
    }
}

/// `N_t` with `P{N_t = n} = e^{-t} (1 - e^{-t})^n`.
pub fn sample_collision_count<R: Rng + ?Sized>(t: f64, rng: &mut R) -> Result<u64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0);
    }
    // ln(1 - e^{-t}) without cancellation for small t.
    let log_fail = (-(-t).exp_m1()).ln();
    if log_fail == 0.0 {
        return Err(Error::Resource(format!(
            "collision count at t = {t} is not representable"
        )));
    }
    let u = 1.0 - rng.random::<f64>();
    let n = (u.ln() / log_fail).floor();
    Ok(if n >= u64::MAX as f64 {
        u64::MAX
    } else {
        n as u64
    })
}

/// `P{N_t > n_max} = (1 - e^{-t})^{n_max + 1}`.
pub fn truncation_bound(t: f64, n_max: usize) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    ((n_max as f64 + 1.0) * (-(-t).exp_m1()).ln()).exp()
}

fn check_budget(t: f64, node_budget: usize) -> Result<()> {
    let mean = t.exp_m1();
    if mean > node_budget as f64 {
        return Err(Error::Resource(format!(
            "mean tree size e^t - 1 = {mean:.3e} at t = {t} exceeds the node budget {node_budget}; \
             lower t or raise the budget (each unit of t multiplies the cost by e)"
        )));
    }
    Ok(())
}

/// Per-thread state for tree-route replicates.
struct TreeWorker {
    arena: TreeArena,
    x: Vec<f64>,
}

impl TreeWorker {
    fn new(d: usize) -> Self {
        Self {
            arena: TreeArena::new(d),
            x: vec![0.0; d],
        }
    }

    /// One draw of `e . V_t`; also reports whether the tree hit the budget.
    fn draw<R: Rng + ?Sized>(
        &mut self,
        t: f64,
        frame: &[f64],
        data: &InitialData,
        params: &ModelParams,
        node_budget: usize,
        rng: &mut R,
    ) -> Result<(f64, bool)> {
        let d = params.dim();
        let n = sample_collision_count(t, rng)?;
        let truncated = n > node_budget as u64;
        let steps = if truncated { node_budget } else { n as usize };
        self.arena.reset();
        self.arena.grow(steps, params, Placement::Append, rng);
        let mut total = 0.0;
        for j in 0..self.arena.leaves() {
            data.sample_into(rng, &mut self.x);
            let beta = self.arena.log_beta(j).exp();
            if beta == 0.0 {
                continue;
            }
            total += beta * leaf_projection(d, frame, self.arena.rotation(j), &self.x);
        }
        Ok((total, truncated))
    }
}

fn validate_route(
    t: f64,
    e: &UnitVector,
    data: &InitialData,
    params: &ModelParams,
    node_budget: usize,
) -> Result<()> {
    check_time(t)?;
    data.validate()?;
    if e.dim() != params.dim() || data.dim() != params.dim() {
        return Err(Error::arg(
            "direction, initial data and model disagree on the dimension",
        ));
    }
    check_budget(t, node_budget)
}

/// One draw of `e . V_t` by the tree route.
pub fn sample_velocity_projection<R: Rng + ?Sized>(
    t: f64,
    e: &UnitVector,
    data: &InitialData,
    params: &ModelParams,
    rng: &mut R,
) -> Result<f64> {
    validate_route(t, e, data, params, DEFAULT_NODE_BUDGET)?;
    let frame = rotation_taking_ed_to(e)?;
    let mut worker = TreeWorker::new(params.dim());
    Ok(worker
        .draw(t, frame.as_slice(), data, params, DEFAULT_NODE_BUDGET, rng)?
        .0)
}

/// Tree-route draws of `e . V_t`, replicate `i` on stream `i` of `seed`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionBatch {
    pub t: f64,
    pub samples: Vec<f64>,
    pub node_budget: usize,
    /// Replicates whose collision count exceeded the budget and were cut.
    pub truncated: usize,
    /// `P{N_t > node_budget}`.
    pub truncation_bound: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn sample_projection_batch(
    t: f64,
    e: &UnitVector,
    data: &InitialData,
    params: &ModelParams,
    replicates: usize,
    seed: u64,
    node_budget: usize,
) -> Result<ProjectionBatch> {
    validate_route(t, e, data, params, node_budget)?;
    let frame = rotation_taking_ed_to(e)?;
    let d = params.dim();
    let draws: Vec<(f64, bool)> = (0..replicates as u64)
        .into_par_iter()
        .map_init(
            || TreeWorker::new(d),
            |worker, i| {
                let mut rng = RandomStream::new(seed, i);
                worker.draw(t, frame.as_slice(), data, params, node_budget, &mut rng)
            },
        )
        .collect::<Result<_>>()?;
    Ok(ProjectionBatch {
        t,
        truncated: draws.iter().filter(|(_, cut)| *cut).count(),
        samples: draws.into_iter().map(|(x, _)| x).collect(),
        node_budget,
        truncation_bound: truncation_bound(t, node_budget),
    })
}

/// Empirical CF of the tree route with its truncation record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CfEvolution {
    pub t: f64,
    pub estimate: EcfEstimate,
    pub truncated: usize,
    pub truncation_bound: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_cf_evolution(
    t: f64,
    rho_grid: &[f64],
    e: &UnitVector,
    data: &InitialData,
    params: &ModelParams,
    replicates: usize,
    seed: u64,
) -> Result<CfEvolution> {
    if replicates < MIN_REPLICATES {
        return Err(Error::arg(format!(
            "need at least {MIN_REPLICATES} replicates, got {replicates}"
        )));
    }
    let batch = sample_projection_batch(t, e, data, params, replicates, seed, DEFAULT_NODE_BUDGET)?;
    Ok(CfEvolution {
        t,
        estimate: empirical_cf(&batch.samples, rho_grid)?,
        truncated: batch.truncated,
        truncation_bound: batch.truncation_bound,
    })
}

/// Velocities of `N` particles at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    d: usize,
    t: f64,
    velocities: Vec<f64>,
}

impl ParticleEnsemble {
    /// `velocities` is row-major `N x d`.
    pub fn new(d: usize, t: f64, velocities: Vec<f64>) -> Result<Self> {
        check_time(t)?;
        if d == 0 || !velocities.len().is_multiple_of(d) {
            return Err(Error::arg("velocity array is not N x d"));
        }
        if velocities.len() / d < 2 {
            return Err(Error::arg("an ensemble needs at least two particles"));
        }
        if velocities.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "ensemble contains non-finite velocities".into(),
            ));
        }
        Ok(Self { d, t, velocities })
    }

    /// `n` independent draws from the initial law at time zero.
    pub fn from_initial<R: Rng + ?Sized>(
        n: usize,
        data: &InitialData,
        rng: &mut R,
    ) -> Result<Self> {
        data.validate()?;
        if n < 2 {
            return Err(Error::arg("an ensemble needs at least two particles"));
        }
        let d = data.dim();
        let mut velocities = vec![0.0; n * d];
        for row in velocities.chunks_mut(d) {
            data.sample_into(rng, row);
        }
        Self::new(d, 0.0, velocities)
    }

    /// `n` independent draws from a stationary law at time zero.
    pub fn from_stationary<R: Rng + ?Sized>(
        n: usize,
        law: &StationaryLaw,
        d: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if law.m_samples().is_empty() {
            return Err(Error::State(
                "stationary law has no cached fixed-point draws".into(),
            ));
        }
        if n < 2 {
            return Err(Error::arg("an ensemble needs at least two particles"));
        }
        let mut velocities = vec![0.0; n * d];
        for row in velocities.chunks_mut(d) {
            stationary_into(law, rng, row);
        }
        Self::new(d, 0.0, velocities)
    }

    pub fn len(&self) -> usize {
        self.velocities.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.d..(i + 1) * self.d]
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.velocities.chunks(self.d)
    }

    /// `e . v` for every particle.
    pub fn projections(&self, e: &UnitVector) -> Vec<f64> {
        self.rows().map(|v| e.dot(v)).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for v in self.rows() {
            m.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Mean of `|v|^2`.
    pub fn mean_energy(&self) -> f64 {
        self.velocities.iter().map(|x| x * x).sum::<f64>() / self.len() as f64
    }

    /// The same particles in the order given by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut seen = vec![false; n];
        if order.len() != n
            || order
                .iter()
                .any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::arg("not a permutation of the particle indices"));
        }
        let mut velocities = Vec::with_capacity(self.velocities.len());
        for &i in order {
            velocities.extend_from_slice(self.velocity(i));
        }
        Self::new(self.d, self.t, velocities)
    }
}

/// Particle update rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum DsmcScheme {
    /// One particle per event at total rate `N`; it takes `v'` or `v'_*` with probability 1/2.
    #[default]
    Nanbu,
    /// Both partners updated per event, at total rate `N/2`.
    Bird,
}

/// Advance an ensemble by `duration`.
pub fn evolve_dsmc<R: Rng + ?Sized>(
    ensemble: &mut ParticleEnsemble,
    duration: f64,
    params: &ModelParams,
    scheme: DsmcScheme,
    rng: &mut R,
) -> Result<()> {
    check_time(duration)?;
    if ensemble.d != params.dim() {
        return Err(Error::arg("ensemble and model disagree on the dimension"));
    }
    let n = ensemble.len();
    let d = ensemble.d;
    let rate = match scheme {
        DsmcScheme::Nanbu => n as f64,
        DsmcScheme::Bird => 0.5 * n as f64,
    };
    let clock = Exp::new(rate).map_err(|e| Error::Numerical(e.to_string()))?;
    let delta = params.delta();
    let mut elapsed = 0.0;
    let mut rel = vec![0.0; d];
    loop {
        elapsed += clock.sample(rng);
        if elapsed > duration {
            break;
        }
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let (vi, vj) = (ensemble.velocity(i), ensemble.velocity(j));
        rel.iter_mut()
            .zip(vi.iter().zip(vj))
            .for_each(|(r, (a, b))| *r = a - b);
        let Ok(dir) = UnitVector::new(rel.clone()) else {
            // Equal velocities: both outcomes coincide with the inputs.
            continue;
        };
        let normal = sample_scattering_direction(params, &dir, rng)?;
        let (v_out, w_out) = collide(vi, vj, normal.as_slice(), delta);
        match scheme {
            DsmcScheme::Nanbu => {
                let pick = if rng.random::<bool>() { v_out } else { w_out };
                ensemble.velocities[i * d..(i + 1) * d].copy_from_slice(&pick);
            }
            DsmcScheme::Bird => {
                ensemble.velocities[i * d..(i + 1) * d].copy_from_slice(&v_out);
                ensemble.velocities[j * d..(j + 1) * d].copy_from_slice(&w_out);
            }
        }
    }
    ensemble.t += duration;
    if ensemble.velocities.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "a collision produced a non-finite velocity".into(),
        ));
    }
    Ok(())
}

/// Nanbu simulation of `n` particles from `mu_0` up to `t_final`.
pub fn run_dsmc<R: Rng + ?Sized>(
    n: usize,
    t_final: f64,
    data: &InitialData,
    params: &ModelParams,
    rng: &mut R,
) -> Result<ParticleEnsemble> {
    run_dsmc_with(n, t_final, data, params, DsmcScheme::Nanbu, rng)
}

pub fn run_dsmc_with<R: Rng + ?Sized>(
    n: usize,
    t_final: f64,
    data: &InitialData,
    params: &ModelParams,
    scheme: DsmcScheme,
    rng: &mut R,
) -> Result<ParticleEnsemble> {
    if n < 2 {
        return Err(Error::arg("an ensemble needs at least two particles"));
    }
    check_time(t_final)?;
    if data.dim() != params.dim() {
        return Err(Error::arg(
            "initial data and model disagree on the dimension",
        ));
    }
    let mut ensemble = ParticleEnsemble::from_initial(n, data, rng)?;
    evolve_dsmc(&mut ensemble, t_final, params, scheme, rng)?;
    Ok(ensemble)
}
