//! Least-squares fits used to extract damping and growth rates.

use crate::{Error, Result};

/// Straight-line fit `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::arg("regression needs at least two paired samples"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::arg("regression abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r2,
        points: x.len(),
    })
}

/// Which samples of an amplitude series enter an exponential fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindow {
    pub t_min: f64,
    pub t_max: f64,
    /// Amplitude band relative to the first sample.
    pub rel_lo: f64,
    pub rel_hi: f64,
    /// Fit only local maxima (the envelope of an oscillating signal) when at least three exist.
    pub peaks_only: bool,
}

impl FitWindow {
    /// Decay window: amplitudes in `[1e-10, 1e-2]` of the initial value, after `t_min`.
    pub fn decay(t_min: f64) -> Self {
        Self {
            t_min,
            t_max: f64::INFINITY,
            rel_lo: 1e-10,
            rel_hi: 1e-2,
            peaks_only: true,
        }
    }

    /// Growth window: all samples in `[t_min, t_max]`.
    pub fn growth(t_min: f64, t_max: f64) -> Self {
        Self {
            t_min,
            t_max,
            rel_lo: 0.0,
            rel_hi: f64::INFINITY,
            peaks_only: false,
        }
    }
}

/// Fits `log y ≈ rate·t + c` over the window; `rate < 0` for decay.
pub fn exponential_rate(t: &[f64], y: &[f64], window: &FitWindow) -> Result<LineFit> {
    if t.len() != y.len() || t.is_empty() {
        return Err(Error::arg("time and amplitude series differ in length"));
    }
    let y0 = y[0].abs();
    let inside = |i: usize| {
        let r = if y0 > 0.0 { y[i].abs() / y0 } else { y[i].abs() };
        t[i] >= window.t_min && t[i] <= window.t_max && r >= window.rel_lo && r <= window.rel_hi && y[i] != 0.0
    };
    let mut idx: Vec<usize> = (0..t.len()).filter(|&i| inside(i)).collect();
    if window.peaks_only {
        let peaks: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| i > 0 && i + 1 < y.len() && y[i].abs() >= y[i - 1].abs() && y[i].abs() > y[i + 1].abs())
            .collect();
        if peaks.len() >= 3 {
            idx = peaks;
        }
    }
    if idx.len() < 2 {
        return Err(Error::arg("fewer than two samples inside the fit window"));
    }
    let x: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
    let ly: Vec<f64> = idx.iter().map(|&i| y[i].abs().ln()).collect();
    linear_regression(&x, &ly)
}
