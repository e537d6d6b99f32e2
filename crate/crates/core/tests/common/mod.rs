#![allow(dead_code)]

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Panics unless `xs` has mean `target` within `sigmas` standard errors.
pub fn assert_mean(xs: &[f64], target: f64, sigmas: f64, what: &str) {
    let (mean, se) = mean_se(xs);
    assert!(
        (mean - target).abs() <= sigmas * se,
        "{what}: mean {mean} vs {target}, se {se}"
    );
}

/// Independent Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}
