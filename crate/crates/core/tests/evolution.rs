mod common;

use common::{assert_mean, mean_se};
use wildstable::cascade::{run_tree, sample_projection_sum, weight_stats};
use wildstable::collision::ModelParams;
use wildstable::diagnostics::{isotropy_check, ks_two_sample};
use wildstable::evolution::{
    estimate_cf_evolution, evolve_dsmc, run_dsmc, sample_collision_count, sample_projection_batch,
    DsmcScheme, ParticleEnsemble, DEFAULT_NODE_BUDGET,
};
use wildstable::rotations::UnitVector;
use wildstable::spectral::{evaluate_s, solve_alpha};
use wildstable::stablelaws::{sample_radial_stable, InitialData, InitialKind};
use wildstable::RandomStream;

fn model() -> (ModelParams, f64) {
    let params = ModelParams::isotropic(3, 0.25).unwrap();
    let alpha = solve_alpha(&params).unwrap().alpha;
    (params, alpha)
}

#[test]
fn collision_count_law() {
    let mut rng = RandomStream::new(40, 0);
    let n = 100_000;
    let zeros: Vec<f64> = (0..n)
        .map(|_| (sample_collision_count(1.0, &mut rng).unwrap() == 0) as u8 as f64)
        .collect();
    assert_mean(&zeros, (-1.0f64).exp(), 3.0, "P{N_1 = 0}");
    let counts: Vec<f64> = (0..n)
        .map(|_| sample_collision_count(2.0, &mut rng).unwrap() as f64)
        .collect();
    assert_mean(&counts, 2f64.exp() - 1.0, 3.0, "E[N_2]");
}

#[test]
fn tree_route_cf_matches_mixture_oracle() {
    // Independent oracle: E exp(-lambda M) over N_t-step trees built directly.
    let (params, alpha) = model();
    let t = 1.5;
    let e = UnitVector::last(3);
    let data = InitialData::radial_stable(3, alpha, 1.0).unwrap();
    let cf = estimate_cf_evolution(t, &[1.0], &e, &data, &params, 100_000, 41).unwrap();
    let mut rng = RandomStream::new(42, 0);
    let oracle: Vec<f64> = (0..100_000)
        .map(|_| {
            let n = sample_collision_count(t, &mut rng).unwrap() as usize;
            (-weight_stats(&run_tree(n, &params, &mut rng), alpha)
                .unwrap()
                .m)
                .exp()
        })
        .collect();
    let (mean, se) = mean_se(&oracle);
    let est = cf.estimate.values[0].re;
    let combined = (se * se + cf.estimate.stderr[0].powi(2)).sqrt();
    assert!((est - mean).abs() <= 3.0 * combined, "{est} vs {mean}");
}

#[test]
fn tree_route_is_direction_free_for_radial_data() {
    let (params, alpha) = model();
    let data = InitialData::radial_stable(3, alpha, 1.0).unwrap();
    let a = sample_projection_batch(
        1.0,
        &UnitVector::basis(3, 0),
        &data,
        &params,
        20_000,
        43,
        DEFAULT_NODE_BUDGET,
    )
    .unwrap();
    let b = sample_projection_batch(
        1.0,
        &UnitVector::last(3),
        &data,
        &params,
        20_000,
        44,
        DEFAULT_NODE_BUDGET,
    )
    .unwrap();
    assert!(ks_two_sample(&a.samples, &b.samples).unwrap().p_value > 0.01);
    assert_eq!(a.truncated, 0);
}

#[test]
fn tree_route_agrees_with_explicit_tree_sum() {
    let (params, alpha) = model();
    let data = InitialData::radial_stable(3, alpha, 1.0).unwrap();
    let e = UnitVector::new(vec![0.0, 0.6, 0.8]).unwrap();
    let routed =
        sample_projection_batch(1.0, &e, &data, &params, 20_000, 45, DEFAULT_NODE_BUDGET).unwrap();
    let mut rng = RandomStream::new(46, 0);
    let explicit: Vec<f64> = (0..20_000)
        .map(|_| {
            let n = sample_collision_count(1.0, &mut rng).unwrap() as usize;
            let w = run_tree(n, &params, &mut rng);
            sample_projection_sum(
                &w,
                &e,
                |r| sample_radial_stable(3, alpha, 1.0, r).unwrap(),
                &mut rng,
            )
            .unwrap()
        })
        .collect();
    assert!(ks_two_sample(&routed.samples, &explicit).unwrap().p_value > 0.01);
}

#[test]
fn cf_estimates_are_bounded() {
    let (params, alpha) = model();
    let data = InitialData::pareto_uniform(3, alpha).unwrap();
    let grid: Vec<f64> = (0..=12).map(|k| 0.25 * k as f64).collect();
    let cf =
        estimate_cf_evolution(0.7, &grid, &UnitVector::last(3), &data, &params, 5000, 47).unwrap();
    assert_eq!(cf.estimate.values[0].re, 1.0);
    assert_eq!(cf.estimate.stderr[0], 0.0);
    for (v, se) in cf.estimate.values.iter().zip(&cf.estimate.stderr) {
        assert!(v.norm() <= 1.0 + 3.0 * se);
    }
}

#[test]
fn dsmc_keeps_mean_and_isotropy() {
    let (params, alpha) = model();
    let data = InitialData::radial_stable(3, alpha, 1.0).unwrap();
    let mut rng = RandomStream::new(48, 0);
    let ens = run_dsmc(50_000, 2.0, &data, &params, &mut rng).unwrap();
    for k in 0..3 {
        let coord: Vec<f64> = ens.rows().map(|v| v[k]).collect();
        assert_mean(&coord, 0.0, 4.0, "ensemble mean");
    }
    let rows: Vec<Vec<f64>> = ens.rows().map(<[f64]>::to_vec).collect();
    assert!(isotropy_check(&rows).unwrap().passes(4.0));
}

#[test]
fn energy_decays_at_rate_s_of_two() {
    let (params, _) = model();
    let s2 = evaluate_s(2.0, &params).unwrap();
    let points = vec![
        (1.0, vec![1.0, 0.0, 0.0]),
        (1.0, vec![0.0, 2.0, 0.0]),
        (2.0, vec![0.5, 0.5, -1.0]),
    ];
    let data = InitialData::new(InitialKind::PointMixture { points }, 3, 1.5, true).unwrap();
    for scheme in [DsmcScheme::Nanbu, DsmcScheme::Bird] {
        let mut rng = RandomStream::new(49, scheme as u64);
        let mut ens = ParticleEnsemble::from_initial(20_000, &data, &mut rng).unwrap();
        let mut ts = vec![0.0];
        let mut logs = vec![ens.mean_energy().ln()];
        for k in 1..=8 {
            evolve_dsmc(&mut ens, 0.5, &params, scheme, &mut rng).unwrap();
            ts.push(0.5 * k as f64);
            logs.push(ens.mean_energy().ln());
        }
        let n = ts.len() as f64;
        let mt = ts.iter().sum::<f64>() / n;
        let ml = logs.iter().sum::<f64>() / n;
        let slope = ts
            .iter()
            .zip(&logs)
            .map(|(t, l)| (t - mt) * (l - ml))
            .sum::<f64>()
            / ts.iter().map(|t| (t - mt).powi(2)).sum::<f64>();
        assert!(
            (slope - s2).abs() <= 0.15 * s2.abs(),
            "{scheme:?}: slope {slope} vs {s2}"
        );
    }
}

#[test]
fn permuting_particles_changes_no_statistic() {
    let (params, alpha) = model();
    let data = InitialData::pareto_uniform(3, alpha).unwrap();
    let mut rng = RandomStream::new(50, 0);
    let ens = run_dsmc(1000, 0.5, &data, &params, &mut rng).unwrap();
    let order: Vec<usize> = (0..1000).rev().collect();
    let perm = ens.permuted(&order).unwrap();
    assert!((ens.mean_energy() - perm.mean_energy()).abs() < 1e-9 * ens.mean_energy());
    let mut a = ens.projections(&UnitVector::last(3));
    let mut b = perm.projections(&UnitVector::last(3));
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    assert_eq!(a, b);
}
