//! Adaptive Gauss–Kronrod quadrature for complex integrands.

use std::collections::BinaryHeap;

use crate::C64;

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: C64,
    pub error: f64,
}

fn gk15<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    (kron * h, ((kron - gauss) * h).norm())
}

/// Subdivision budget for [`integrate`].
const MAX_INTERVALS: usize = 4000;

struct Piece {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`, always splitting
/// the interval with the largest error estimate.
///
/// When the tolerance is below what the integrand allows in double precision,
/// the loop stops at the subdivision budget and the returned error is honest.
pub fn integrate<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, tol: f64) -> Quad {
    let (value, error) = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, error });
    let mut err = error;
    while err > tol && heap.len() < MAX_INTERVALS {
        let worst = heap.pop().unwrap();
        let m = 0.5 * (worst.a + worst.b);
        if !(worst.a < m && m < worst.b) {
            heap.push(worst);
            break;
        }
        let (lv, le) = gk15(f, worst.a, m);
        let (rv, re) = gk15(f, m, worst.b);
        err += le + re - worst.error;
        heap.push(Piece { a: worst.a, b: m, value: lv, error: le });
        heap.push(Piece { a: m, b: worst.b, value: rv, error: re });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let (value, error) = heap
        .iter()
        .fold((C64::new(0.0, 0.0), 0.0), |(v, e), p| (v + p.value, e + p.error));
    Quad { value, error }
}

/// Integrates over `[a, ∞)` by marching panels of width `panel` until the
/// integrand's contribution has stayed below `tol` for several panels.
///
/// `max_panels` bounds the work; if it is reached the returned error absorbs
/// the size of the last panel so callers can report non-convergence.
pub fn integrate_to_infinity<F: Fn(f64) -> C64>(
    f: &F,
    a: f64,
    panel: f64,
    tol: f64,
    max_panels: usize,
) -> Quad {
    let mut total = C64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut quiet = 0;
    let mut last = f64::INFINITY;
    let mut lo = a;
    for _ in 0..max_panels {
        let q = integrate(f, lo, lo + panel, 0.1 * tol);
        total += q.value;
        err += q.error;
        last = q.value.norm();
        lo += panel;
        if last < 1e-3 * tol {
            quiet += 1;
            if quiet >= 4 {
                return Quad { value: total, error: err };
            }
        } else {
            quiet = 0;
        }
    }
    Quad {
        value: total,
        error: err + last,
    }
}

/// Composite trapezoid rule on uniform samples.
pub fn trapezoid(samples: &[C64], h: f64) -> C64 {
    match samples.len() {
        0 | 1 => C64::new(0.0, 0.0),
        n => {
            let inner: C64 = samples[1..n - 1].iter().sum();
            (inner + 0.5 * (samples[0] + samples[n - 1])) * h
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_integral() {
        let f = |x: f64| C64::new((-x * x).exp(), 0.0);
        let q = integrate(&f, -10.0, 10.0, 1e-13);
        assert!((q.value.re - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn half_line_oscillatory() {
        // ∫₀^∞ e^{-(1+2i)t} dt = 1/(1+2i)
        let z = C64::new(1.0, 2.0);
        let f = |t: f64| (-z * t).exp();
        let q = integrate_to_infinity(&f, 0.0, 2.0, 1e-12, 200);
        assert!((q.value - 1.0 / z).norm() < 1e-11);
    }
}
