//! Scalar Volterra equations `ρ = H + 𝒦 ∗ ρ`: time marching, resolvents and Bromwich inversion.

use std::f64::consts::PI;

use crate::{par, Error, Result, C64};

/// A convolution Volterra equation of the second kind sampled on `t_j = j·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraProblem {
    pub dt: f64,
    /// `H(t_j)`, `j = 0..=n_t`.
    pub source: Vec<C64>,
    /// `𝒦(t_j)`, same length as `source`.
    pub kernel: Vec<C64>,
}

impl VolterraProblem {
    pub fn new(dt: f64, source: Vec<C64>, kernel: Vec<C64>) -> Result<Self> {
        let p = Self { dt, source, kernel };
        p.validate()?;
        Ok(p)
    }

    /// Samples `H` and `𝒦` from closures on `n_t + 1` grid points.
    pub fn sampled(dt: f64, n_t: usize, h: impl Fn(f64) -> C64, k: impl Fn(f64) -> C64) -> Result<Self> {
        let t = |j: usize| j as f64 * dt;
        Self::new(dt, (0..=n_t).map(|j| h(t(j))).collect(), (0..=n_t).map(|j| k(t(j))).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::arg("dt must be positive"));
        }
        if self.source.is_empty() || self.source.len() != self.kernel.len() {
            return Err(Error::arg(format!(
                "source and kernel must have equal non-zero length (got {} and {})",
                self.source.len(),
                self.kernel.len()
            )));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.source.len()).map(|j| j as f64 * self.dt).collect()
    }

    /// Product-trapezoid march, implicit in the diagonal term:
    /// `ρₙ (1 - dt𝒦₀/2) = Hₙ + dt(½𝒦ₙρ₀ + Σ_{j=1}^{n-1} 𝒦_{n-j}ρⱼ)`.
    pub fn solve(&self) -> Result<Vec<C64>> {
        self.validate()?;
        let dt = self.dt;
        let diag = 1.0 - 0.5 * dt * self.kernel[0];
        if diag.norm() < 1e-12 {
            return Err(Error::StepSize(diag.norm()));
        }
        let n = self.source.len();
        let mut rho = Vec::with_capacity(n);
        rho.push(self.source[0]);
        for i in 1..n {
            let mut acc = 0.5 * self.kernel[i] * rho[0];
            for j in 1..i {
                acc += self.kernel[i - j] * rho[j];
            }
            rho.push((self.source[i] + dt * acc) / diag);
        }
        Ok(rho)
    }
}

/// Time-domain resolvent: the solution of `R = 𝒦 + 𝒦 ∗ R`.
pub fn resolvent_time_domain(kernel: &[C64], dt: f64) -> Result<Vec<C64>> {
    VolterraProblem::new(dt, kernel.to_vec(), kernel.to_vec())?.solve()
}

/// `ρ = H + R ∗ H` by the trapezoid rule.
pub fn apply_resolvent(resolvent: &[C64], source: &[C64], dt: f64) -> Result<Vec<C64>> {
    if resolvent.len() != source.len() {
        return Err(Error::arg(format!(
            "resolvent has {} samples but source has {}",
            resolvent.len(),
            source.len()
        )));
    }
    Ok((0..source.len())
        .map(|n| {
            if n == 0 {
                return source[0];
            }
            let mut acc = 0.5 * (resolvent[n] * source[0] + resolvent[0] * source[n]);
            for j in 1..n {
                acc += resolvent[n - j] * source[j];
            }
            source[n] + dt * acc
        })
        .collect())
}

/// Resolvent of `𝒦(t) = α t e^{-λt}`, whose transform is `α/(z+λ)²`.
///
/// `R̃ = α/((z+λ)² - α)`, so for `α < 0` the resolvent is `-√(-α) e^{-λt} sin(√(-α) t)`
/// (negative sign) and for `α > 0` it is `+√α e^{-λt} sinh(√α t)`.
pub fn resolvent_closed_form(alpha: f64, lambda: f64, times: &[f64]) -> Result<Vec<f64>> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::arg("α must be non-zero; for α = 0 the resolvent vanishes"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::arg("λ must be non-negative"));
    }
    let r = alpha.abs().sqrt();
    Ok(times
        .iter()
        .map(|&t| {
            let osc = if alpha < 0.0 { -(r * t).sin() } else { (r * t).sinh() };
            r * (-lambda * t).exp() * osc
        })
        .collect())
}

/// Contour and accuracy parameters for [`resolvent_bromwich`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BromwichOptions {
    /// Abscissa `γ` of the line `Re z = γ`.
    pub gamma: f64,
    pub omega_max: f64,
    pub n_omega: usize,
    /// Smallest `|1 - 𝒦̃|` tolerated on the contour.
    pub min_margin: f64,
    /// Largest tolerated estimate of the truncated tail.
    pub tail_tolerance: f64,
}

impl Default for BromwichOptions {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            omega_max: 1000.0,
            n_omega: 1 << 14,
            min_margin: 1e-3,
            tail_tolerance: 1e-8,
        }
    }
}

const ASYMPTOTIC_TERMS: usize = 4;

/// Least-squares fit of `Σ_{m=2}^{5} c_m/(z+β)^m` to `g` at large `|ω|`, solved on
/// column-scaled normal equations.
fn fit_asymptotics(g: &[(C64, C64)], beta: f64, scale: f64) -> [C64; ASYMPTOTIC_TERMS] {
    let m = ASYMPTOTIC_TERMS;
    let mut a = vec![vec![C64::new(0.0, 0.0); m + 1]; m];
    for &(z, v) in g {
        let q = scale / (z + beta);
        let mut row = [C64::new(0.0, 0.0); ASYMPTOTIC_TERMS];
        let mut p = q * q;
        for r in row.iter_mut() {
            *r = p;
            p *= q;
        }
        for i in 0..m {
            for j in 0..m {
                a[i][j] += row[i].conj() * row[j];
            }
            a[i][m] += row[i].conj() * v;
        }
    }
    // Gaussian elimination with partial pivoting
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm()))
            .unwrap();
        a.swap(col, piv);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            for c in col..=m {
                let t = a[col][c];
                a[r][c] -= f * t;
            }
        }
    }
    let mut x = [C64::new(0.0, 0.0); ASYMPTOTIC_TERMS];
    for r in (0..m).rev() {
        let mut s = a[r][m];
        for c in r + 1..m {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    // undo the column scaling: basis m+2 was multiplied by scale^{m+2}
    for (i, xi) in x.iter_mut().enumerate() {
        *xi *= scale.powi(i as i32 + 2);
    }
    x
}

/// `R(t) = (1/2πi) ∫_{γ-i∞}^{γ+i∞} e^{zt} 𝒦̃/(1-𝒦̃) dz` by the trapezoid rule on `|ω| ≤ ω_max`.
///
/// The far field is handled by subtracting a fitted sum of poles `c_m/(z+β)^m`
/// (`β = |γ| + 1`, left of the contour) whose inverses are added back exactly,
/// leaving a remainder that decays like `|ω|^{-6}`. Trapezoid aliasing is
/// periodic in `t` with period `2π/Δω`.
pub fn resolvent_bromwich<F>(ktilde: F, opts: &BromwichOptions, times: &[f64]) -> Result<Vec<C64>>
where
    F: Fn(C64) -> Result<C64> + Sync + Send,
{
    if opts.n_omega < 64 || !(opts.omega_max > 0.0) {
        return Err(Error::arg("Bromwich contour needs ω_max > 0 and at least 64 nodes"));
    }
    let (gamma, wmax, n) = (opts.gamma, opts.omega_max, opts.n_omega);
    let h = 2.0 * wmax / (n - 1) as f64;
    let omegas: Vec<f64> = (0..n).map(|j| -wmax + j as f64 * h).collect();
    let samples = par::map_slice(&omegas, |&om| -> Result<(C64, C64)> {
        let z = C64::new(gamma, om);
        let k = ktilde(z)?;
        Ok((k, 1.0 - k))
    });
    let mut rtilde = Vec::with_capacity(n);
    let mut worst = f64::INFINITY;
    for s in samples {
        let (k, d) = s?;
        worst = worst.min(d.norm());
        rtilde.push(k / d);
    }
    if worst < opts.min_margin {
        return Err(Error::Stability {
            margin: worst,
            required: opts.min_margin,
        });
    }

    let beta = gamma.abs() + 1.0;
    let fit_points: Vec<(C64, C64)> = omegas
        .iter()
        .zip(&rtilde)
        .filter(|(om, _)| om.abs() >= 0.5 * wmax)
        .map(|(&om, &r)| (C64::new(gamma, om), r))
        .collect();
    let coeffs = fit_asymptotics(&fit_points, beta, wmax);
    let poles = |z: C64| -> C64 {
        let q = 1.0 / (z + beta);
        let mut p = q * q;
        let mut s = C64::new(0.0, 0.0);
        for c in &coeffs {
            s += c * p;
            p *= q;
        }
        s
    };
    let remainder: Vec<C64> = omegas
        .iter()
        .zip(&rtilde)
        .map(|(&om, &r)| r - poles(C64::new(gamma, om)))
        .collect();

    // remainder ~ C₆|ω|^{-6}; estimate C₆ inside the fitted window and bound the two tails
    let probe = omegas
        .iter()
        .zip(&remainder)
        .filter(|(om, _)| om.abs() >= 0.25 * wmax)
        .map(|(om, r)| r.norm() * om.abs().powi(6))
        .fold(0.0, f64::max);
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let tail = (gamma * t_max).exp() / PI * probe / (5.0 * wmax.powi(5));
    if tail > opts.tail_tolerance {
        return Err(Error::Truncation {
            estimate: tail,
            tolerance: opts.tail_tolerance,
        });
    }

    Ok(par::map_slice(times, |&t| {
        let mut acc = C64::new(0.0, 0.0);
        for (j, (&om, &r)) in omegas.iter().zip(&remainder).enumerate() {
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            acc += w * r * C64::from_polar(1.0, om * t);
        }
        let mut value = acc * (gamma * t).exp() * h / (2.0 * PI);
        // inverse of c/(z+β)^m is c t^{m-1} e^{-βt}/(m-1)!
        let decay = (-beta * t).exp();
        let mut power = t;
        let mut fact = 1.0;
        for (i, c) in coeffs.iter().enumerate() {
            value += c * power / fact * decay;
            power *= t;
            fact *= (i + 2) as f64;
        }
        value
    }))
}
