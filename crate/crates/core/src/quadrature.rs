//! Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.
//!
//! Integrable endpoint singularities are handled by repeated bisection of the
//! worst subinterval; callers with a known power singularity should still
//! substitute it away first, which is much cheaper.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SUBDIVISIONS: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Estimated absolute error.
    pub error: f64,
}

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (i, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += w * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

/// Integrate `f` over `[a, b]` to absolute tolerance `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<Quadrature> {
    integrate_with_breaks(f, &[a, b], abs_tol)
}

/// Integrate over consecutive intervals given by sorted `points`, starting the
/// adaptive refinement from those breakpoints (kinks, jumps, table nodes).
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    abs_tol: f64,
) -> Result<Quadrature> {
    if points.len() < 2 {
        return Err(Error::arg("quadrature needs at least two points"));
    }
    if points.windows(2).any(|w| w[0] > w[1]) || points.iter().any(|p| !p.is_finite()) {
        return Err(Error::arg(
            "quadrature breakpoints must be finite and sorted",
        ));
    }
    let mut heap = BinaryHeap::new();
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod(&f, w[0], w[1]));
        }
    }
    let totals = |heap: &BinaryHeap<Segment>| {
        heap.iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
    };
    let (_, mut error) = totals(&heap);
    let mut subdivisions = 0;
    while error > abs_tol {
        let worst = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if subdivisions >= MAX_SUBDIVISIONS || mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            let (value, error) = totals(&heap);
            return Err(Error::Numerical(format!(
                "quadrature did not reach tolerance {abs_tol:e} (value {value}, error {error:e})"
            )));
        }
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
        if subdivisions % 64 == 0 {
            error = totals(&heap).1;
        }
    }
    let (value, error) = totals(&heap);
    if !value.is_finite() {
        return Err(Error::Numerical(
            "integrand produced a non-finite value".into(),
        ));
    }
    Ok(Quadrature { value, error })
}
