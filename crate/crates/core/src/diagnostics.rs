//! Empirical characteristic functions, tail estimators, isotropy and
//! Kolmogorov-Smirnov tests. Everything here is a pure function of its input.

use num_complex::Complex64;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{Error, Result};

/// Default grid `{0, 0.25, ..., 3}`.
pub fn default_rho_grid() -> Vec<f64> {
    (0..=12).map(|k| 0.25 * k as f64).collect()
}

/// Empirical characteristic function of scalar samples on a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EcfEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub stderr: Vec<f64>,
    pub n_samples: usize,
}

/// One row of an ECF report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CfPoint {
    pub rho: f64,
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
}

impl EcfEstimate {
    pub fn points(&self) -> Vec<CfPoint> {
        self.grid
            .iter()
            .zip(&self.values)
            .zip(&self.stderr)
            .map(|((&rho, v), &stderr)| CfPoint {
                rho,
                re: v.re,
                im: v.im,
                stderr,
            })
            .collect()
    }
}

/// Mean of `exp(i rho x)` at each grid point, with standard error `1/sqrt(n)`.
pub fn empirical_cf(samples: &[f64], rho_grid: &[f64]) -> Result<EcfEstimate> {
    if samples.is_empty() {
        return Err(Error::arg(
            "empirical characteristic function of no samples",
        ));
    }
    if rho_grid.iter().any(|r| !r.is_finite()) {
        return Err(Error::arg("grid points must be finite"));
    }
    let n = samples.len();
    let stderr = 1.0 / (n as f64).sqrt();
    let mut values = Vec::with_capacity(rho_grid.len());
    let mut errs = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        if rho == 0.0 {
            values.push(Complex64::new(1.0, 0.0));
            errs.push(0.0);
            continue;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for &x in samples {
            let (s, c) = (rho * x).sin_cos();
            re += c;
            im += s;
        }
        values.push(Complex64::new(re / n as f64, im / n as f64));
        errs.push(stderr);
    }
    Ok(EcfEstimate {
        grid: rho_grid.to_vec(),
        values,
        stderr: errs,
        n_samples: n,
    })
}

/// Largest pointwise gap between two characteristic functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupDistance {
    pub distance: f64,
    /// Grid point where the gap is largest.
    pub at: f64,
    /// `sqrt(se_a^2 + se_b^2)` at that point.
    pub combined_stderr: f64,
}

pub fn cf_sup_distance(a: &EcfEstimate, b: &EcfEstimate) -> Result<SupDistance> {
    if a.grid != b.grid {
        return Err(Error::arg(
            "characteristic functions are on different grids",
        ));
    }
    let mut best = SupDistance {
        distance: 0.0,
        at: a.grid.first().copied().unwrap_or(0.0),
        combined_stderr: 0.0,
    };
    for k in 0..a.grid.len() {
        let gap = (a.values[k] - b.values[k]).norm();
        if gap > best.distance {
            best = SupDistance {
                distance: gap,
                at: a.grid[k],
                combined_stderr: a.stderr[k].hypot(b.stderr[k]),
            };
        }
    }
    Ok(best)
}

/// Distance from an estimate to a known real characteristic function.
pub fn cf_sup_distance_to<F: Fn(f64) -> f64>(a: &EcfEstimate, exact: F) -> SupDistance {
    let mut best = SupDistance {
        distance: 0.0,
        at: a.grid.first().copied().unwrap_or(0.0),
        combined_stderr: 0.0,
    };
    for k in 0..a.grid.len() {
        let gap = (a.values[k] - Complex64::new(exact(a.grid[k]), 0.0)).norm();
        if gap > best.distance {
            best = SupDistance {
                distance: gap,
                at: a.grid[k],
                combined_stderr: a.stderr[k],
            };
        }
    }
    best
}

/// Scaled upper and lower tail fractions `y^{-alpha} P{X >= 1/y}` and `y^{-alpha} P{X <= -1/y}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailConstants {
    pub y: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    /// Binomial standard errors of `upper` and `lower`.
    pub upper_stderr: Vec<f64>,
    pub lower_stderr: Vec<f64>,
}

pub fn tail_constant_process(samples: &[f64], alpha: f64, y_grid: &[f64]) -> Result<TailConstants> {
    if samples.is_empty() {
        return Err(Error::arg("tail constants of no samples"));
    }
    if y_grid.iter().any(|y| !(y.is_finite() && *y > 0.0)) {
        return Err(Error::arg("tail grid must be positive"));
    }
    let n = samples.len() as f64;
    let mut out = TailConstants {
        y: y_grid.to_vec(),
        upper: Vec::new(),
        lower: Vec::new(),
        upper_stderr: Vec::new(),
        lower_stderr: Vec::new(),
    };
    for &y in y_grid {
        let t = 1.0 / y;
        let scale = y.powf(-alpha);
        let up = samples.iter().filter(|&&x| x >= t).count() as f64 / n;
        let down = samples.iter().filter(|&&x| x <= -t).count() as f64 / n;
        out.upper.push(scale * up);
        out.lower.push(scale * down);
        out.upper_stderr.push(scale * (up * (1.0 - up) / n).sqrt());
        out.lower_stderr
            .push(scale * (down * (1.0 - down) / n).sqrt());
    }
    Ok(out)
}

/// Hill estimate of the tail index of `|samples|` from the top `k` order statistics.
pub fn hill_tail_index(samples: &[f64], k: usize) -> Result<f64> {
    let n = samples.len();
    if k < 10 || k > n / 10 {
        return Err(Error::arg(format!(
            "Hill estimator needs 10 <= k <= n/10, got k = {k} with n = {n}"
        )));
    }
    let mut abs: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    let pivot = n - k - 1;
    abs.select_nth_unstable_by(pivot, f64::total_cmp);
    let threshold = abs[pivot];
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::arg("too many zero samples for a tail estimate"));
    }
    let ln_t = threshold.ln();
    let h = abs[pivot + 1..].iter().map(|x| x.ln() - ln_t).sum::<f64>() / k as f64;
    Ok(1.0 / h)
}

/// Second moments and mean resultant of normalized directions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsotropyReport {
    pub d: usize,
    pub n_used: usize,
    pub zero_skipped: usize,
    /// `E[s s^T]`, row-major.
    pub second_moment: Vec<f64>,
    /// Largest `|E[s s^T] - I/d|` entry.
    pub max_deviation: f64,
    /// Largest entry deviation in units of its null standard error.
    pub max_sigma: f64,
    /// `d n |mean s|^2`, chi-square with `d` degrees of freedom under isotropy.
    pub rayleigh_statistic: f64,
    pub rayleigh_p_value: f64,
}

impl IsotropyReport {
    /// Every second-moment entry within `sigmas` null standard errors.
    pub fn passes(&self, sigmas: f64) -> bool {
        self.max_sigma <= sigmas
    }
}

pub fn isotropy_check(vectors: &[Vec<f64>]) -> Result<IsotropyReport> {
    let d = vectors
        .first()
        .map(|v| v.len())
        .ok_or_else(|| Error::arg("no vectors"))?;
    if d < 2 {
        return Err(Error::arg("isotropy needs dimension >= 2"));
    }
    let mut moment = vec![0.0; d * d];
    let mut resultant = vec![0.0; d];
    let mut n_used = 0usize;
    let mut zero_skipped = 0usize;
    for v in vectors {
        if v.len() != d {
            return Err(Error::arg("vectors have inconsistent dimensions"));
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            zero_skipped += 1;
            continue;
        }
        n_used += 1;
        for i in 0..d {
            let si = v[i] / norm;
            resultant[i] += si;
            for j in 0..d {
                moment[i * d + j] += si * v[j] / norm;
            }
        }
    }
    if n_used == 0 {
        return Err(Error::arg("all vectors are zero"));
    }
    let n = n_used as f64;
    moment.iter_mut().for_each(|m| *m /= n);
    let df = d as f64;
    // Null variances for s uniform on the sphere.
    let var_diag = 3.0 / (df * (df + 2.0)) - 1.0 / (df * df);
    let var_off = 1.0 / (df * (df + 2.0));
    let mut max_deviation = 0.0f64;
    let mut max_sigma = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let (target, var) = if i == j {
                (1.0 / df, var_diag)
            } else {
                (0.0, var_off)
            };
            let dev = (moment[i * d + j] - target).abs();
            max_deviation = max_deviation.max(dev);
            max_sigma = max_sigma.max(dev / (var / n).sqrt());
        }
    }
    let rayleigh_statistic = df / n * resultant.iter().map(|r| r * r).sum::<f64>();
    let chi = ChiSquared::new(df).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(IsotropyReport {
        d,
        n_used,
        zero_skipped,
        second_moment: moment,
        max_deviation,
        max_sigma,
        rayleigh_statistic,
        rayleigh_p_value: chi.sf(rayleigh_statistic),
    })
}

/// Kolmogorov-Smirnov statistic with its asymptotic p-value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(statistic: f64, effective_n: f64) -> f64 {
    let root = effective_n.sqrt();
    kolmogorov_survival((root + 0.12 + 0.11 / root) * statistic)
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::arg("KS test of an empty sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::arg("KS test sample contains NaN"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
    })
}

pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    let v = sorted(samples)?;
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (k, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stablelaws::sample_stable_1d;
    use crate::RandomStream;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn cauchy_cf() {
        let mut rng = RandomStream::new(1, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_stable_1d(1.0, 1.0, 0.0, &mut rng).unwrap())
            .collect();
        let est = empirical_cf(&xs, &[0.0, 1.0]).unwrap();
        assert_eq!(est.values[0], Complex64::new(1.0, 0.0));
        assert_eq!(est.stderr[0], 0.0);
        assert!((est.values[1].re - (-1f64).exp()).abs() < 3.0 * est.stderr[1]);
        assert!(est.values[1].im.abs() < 3.0 * est.stderr[1]);
        assert!(empirical_cf(&[], &[1.0]).is_err());
    }

    #[test]
    fn sup_distance_cases() {
        let mut rng = RandomStream::new(2, 0);
        let grid = default_rho_grid();
        let c: Vec<f64> = (0..20_000)
            .map(|_| sample_stable_1d(1.0, 1.0, 0.0, &mut rng).unwrap())
            .collect();
        let g: Vec<f64> = (0..20_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let a = empirical_cf(&c, &grid).unwrap();
        let b = empirical_cf(&g, &grid).unwrap();
        assert_eq!(cf_sup_distance(&a, &a).unwrap().distance, 0.0);
        assert!(cf_sup_distance(&a, &b).unwrap().distance > 0.1);
        let other = empirical_cf(&c, &[0.0, 1.0]).unwrap();
        assert!(cf_sup_distance(&a, &other).is_err());
    }

    #[test]
    fn hill_on_exact_pareto() {
        let mut rng = RandomStream::new(3, 0);
        let xs: Vec<f64> = (0..200_000)
            .map(|_| 1.0 / (1.0 - rng.random::<f64>()))
            .collect();
        let h = hill_tail_index(&xs, 5_000).unwrap();
        assert!((h - 1.0).abs() < 0.05, "{h}");
        assert!(hill_tail_index(&xs[..50], 10).is_err());
    }

    #[test]
    fn isotropy_degenerate_input() {
        let vs = vec![vec![1.0, 0.0, 0.0]; 2000];
        let r = isotropy_check(&vs).unwrap();
        assert!((r.max_deviation - 2.0 / 3.0).abs() < 1e-12);
        assert!(!r.passes(3.0));
        let mut with_zero = vs.clone();
        with_zero.push(vec![0.0; 3]);
        assert_eq!(isotropy_check(&with_zero).unwrap().zero_skipped, 1);
    }

    #[test]
    fn ks_behaviour() {
        let mut rng = RandomStream::new(4, 0);
        let a: Vec<f64> = (0..5_000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..5_000).map(|_| rng.random::<f64>()).collect();
        let shifted: Vec<f64> = b.iter().map(|x| x + 0.1).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.001);
        assert!(ks_two_sample(&a, &shifted).unwrap().p_value < 1e-6);
        let one = ks_one_sample(&a, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(one.p_value > 0.001);
        assert_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
    }

    #[test]
    fn tail_constants_symmetry() {
        let xs = vec![-3.0, -1.0, 0.5, 1.0, 3.0];
        let t = tail_constant_process(&xs, 1.0, &[0.5]).unwrap();
        assert!((t.upper[0] - 2.0 * 0.2).abs() < 1e-15);
        assert!((t.lower[0] - 2.0 * 0.2).abs() < 1e-15);
    }
}
