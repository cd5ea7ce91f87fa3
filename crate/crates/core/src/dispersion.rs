//! The linearized memory kernel, its Laplace transform, Penrose margins and dispersion roots.

use errorfunctions::ComplexErrorFunctions;
use std::f64::consts::PI;

use crate::equilibria::{EquilibriumKind, EquilibriumSpec};
use crate::interaction::InteractionKernel;
use crate::quadrature::{integrate_to_infinity, Quad};
use crate::{norm, par, Error, Result, C64};

/// Accuracy demanded of quadrature-evaluated transforms.
pub const LAPLACE_TOLERANCE: f64 = 1e-9;

fn check_mode(k: &[f64]) -> Result<f64> {
    let kn = norm(k);
    if kn == 0.0 {
        return Err(Error::arg("k = 0 has no field; the kernel is defined for k ≠ 0"));
    }
    Ok(kn)
}

/// `𝒦(t, k) = -|k|² Ŵ(k) t f̂⁰(kt)`.
pub fn kernel_time(spec: &EquilibriumSpec, w: &InteractionKernel, k: &[f64], t: f64) -> Result<C64> {
    check_mode(k)?;
    if !(t >= 0.0) {
        return Err(Error::arg("kernel time must be non-negative"));
    }
    let kt: Vec<f64> = k.iter().map(|x| x * t).collect();
    Ok(-w.strength(k)? * t * spec.fourier(&kt)?)
}

/// `1 - u√π erfcx(u)` by its asymptotic series, accurate for `|u| ≳ 20`
/// where the direct form cancels catastrophically.
fn plasma_tail_series(u: C64) -> C64 {
    let inv = 1.0 / (u * u);
    let mut term = C64::new(1.0, 0.0);
    let mut sum = C64::new(0.0, 0.0);
    for n in 1..=14 {
        term *= -inv * (2 * n - 1) as f64 * 0.5;
        sum -= term;
    }
    if u.re < 0.0 {
        sum - 2.0 * PI.sqrt() * u * (u * u).exp()
    } else {
        sum
    }
}

fn plasma_tail_direct(u: C64) -> C64 {
    1.0 - u * PI.sqrt() * u.erfcx()
}

/// `∫₀^∞ t e^{-ζt - a t²/2} dt` for `a > 0`.
fn gaussian_moment(zeta: C64, a: f64) -> C64 {
    let u = zeta / (2.0 * a).sqrt();
    let one_minus = if u.norm() > 20.0 {
        plasma_tail_series(u)
    } else {
        plasma_tail_direct(u)
    };
    one_minus / a
}

/// `𝒦̃(z, k) = ∫₀^∞ e^{-zt} 𝒦(t, k) dt`, in closed form where one exists.
///
/// Maxwellian mixtures use the Faddeeva function, the Poisson family is
/// rational, and tabulated equilibria fall back to quadrature.
pub fn kernel_laplace(spec: &EquilibriumSpec, w: &InteractionKernel, k: &[f64], z: C64) -> Result<C64> {
    let kn = check_mode(k)?;
    let bound = spec.holomorphy_bound(kn);
    if !(z.re > bound) || !z.is_finite() {
        return Err(Error::Domain {
            re: z.re,
            im: z.im,
            bound,
        });
    }
    let s = w.strength(k)?;
    if s == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    match &spec.kind {
        EquilibriumKind::Maxwellian { .. } | EquilibriumKind::DoubleMaxwellian { .. } => {
            let mut acc = C64::new(0.0, 0.0);
            for m in spec.maxwellian_components().unwrap() {
                if m.density == 0.0 {
                    continue;
                }
                let drift: f64 = k
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x * m.center.get(i).copied().unwrap_or(0.0))
                    .sum();
                let a = m.temperature * kn * kn;
                acc += m.density * gaussian_moment(z + C64::new(0.0, drift), a);
            }
            Ok(-s * acc)
        }
        EquilibriumKind::Poisson { density, exponent } => {
            let q = 1.0 / (z + kn);
            let moment = match exponent {
                1 => q * q,
                _ => q * q + 2.0 * kn * q * q * q,
            };
            Ok(-s * density * moment)
        }
        EquilibriumKind::Custom(_) => {
            let q = kernel_laplace_quadrature(spec, w, k, z, LAPLACE_TOLERANCE)?;
            Ok(q.value)
        }
    }
}

/// `𝒦̃(z, k)` by adaptive quadrature of the defining integral; independent of the closed forms.
pub fn kernel_laplace_quadrature(
    spec: &EquilibriumSpec,
    w: &InteractionKernel,
    k: &[f64],
    z: C64,
    tol: f64,
) -> Result<Quad> {
    let kn = check_mode(k)?;
    let bound = spec.holomorphy_bound(kn);
    if !(z.re > bound) {
        return Err(Error::Domain {
            re: z.re,
            im: z.im,
            bound,
        });
    }
    let failure = std::cell::Cell::new(None);
    let integrand = |t: f64| match kernel_time(spec, w, k, t) {
        Ok(v) => v * (-z * t).exp(),
        Err(e) => {
            failure.set(Some(e));
            C64::new(0.0, 0.0)
        }
    };
    // panels resolve both the oscillation in Im z and the decay scale of f̂⁰(kt)
    let panel = (1.0 / (kn * spec.velocity_scale())).min(PI / (1.0 + z.im.abs())).min(1.0);
    let q = integrate_to_infinity(&integrand, 0.0, panel, tol, 200_000);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    if q.error > tol {
        return Err(Error::Accuracy { residual: q.error });
    }
    Ok(q)
}

/// Penrose contour parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenroseOptions {
    /// The contour is `Re z = -δ|k|`.
    pub delta: f64,
    /// Truncation of the contour, `|Im z| ≤ ω_max·(1 + |k|)`.
    pub omega_max: f64,
    pub n_omega: usize,
    /// Compare against a run with doubled `n_ω` and `ω_max`.
    pub check_refinement: bool,
}

impl Default for PenroseOptions {
    fn default() -> Self {
        Self {
            delta: 0.0,
            omega_max: 40.0,
            n_omega: 4096,
            check_refinement: true,
        }
    }
}

/// Margin for a single mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMargin {
    pub k: Vec<f64>,
    /// `inf |1 - 𝒦̃|` over the contour, zero when zeros are enclosed.
    pub kappa: f64,
    /// Contour point attaining the sampled minimum.
    pub argmin: C64,
    /// Zeros of `1 - 𝒦̃` to the right of the contour, by the argument principle.
    pub enclosed_zeros: i64,
    /// Lower bound for `|1 - 𝒦̃|` beyond the truncation from the `C/|ω|²` tail.
    pub tail_floor: f64,
    /// Rightmost located dispersion root, if any was found right of the contour.
    pub root: Option<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenroseReport {
    pub modes: Vec<ModeMargin>,
    pub kappa: f64,
    pub stable: bool,
    pub options: PenroseOptions,
    /// `|κ(n_ω, ω_max) - κ(2n_ω, 2ω_max)|`, when checked.
    pub refinement_change: Option<f64>,
    pub warnings: Vec<String>,
}

fn mode_margin(spec: &EquilibriumSpec, w: &InteractionKernel, k: &[f64], opts: &PenroseOptions) -> Result<ModeMargin> {
    let kn = check_mode(k)?;
    let gamma = -opts.delta * kn;
    let wmax = opts.omega_max * (1.0 + kn);
    let n = opts.n_omega.max(16);
    let h = 2.0 * wmax / (n - 1) as f64;
    let at = |om: f64| -> Result<C64> { Ok(1.0 - kernel_laplace(spec, w, k, C64::new(gamma, om))?) };
    let mut vals = Vec::with_capacity(n);
    for j in 0..n {
        vals.push(at(-wmax + j as f64 * h)?);
    }
    let (jmin, _) = vals
        .iter()
        .enumerate()
        .map(|(j, v)| (j, v.norm()))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });

    // golden-section polish of the minimum inside the bracketing cells
    let (mut lo, mut hi) = (
        -wmax + jmin.saturating_sub(1) as f64 * h,
        -wmax + (jmin + 1).min(n - 1) as f64 * h,
    );
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (at(x1)?.norm(), at(x2)?.norm());
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = at(x1)?.norm();
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = at(x2)?.norm();
        }
        if hi - lo < 1e-12 * (1.0 + wmax) {
            break;
        }
    }
    let (mut kappa, mut argmin) = (vals[jmin].norm(), -wmax + jmin as f64 * h);
    for (x, f) in [(x1, f1), (x2, f2)] {
        if f < kappa {
            kappa = f;
            argmin = x;
        }
    }

    // tail: sup_{|ω| ≥ ω_max/2} ω² |𝒦̃| bounds the kernel beyond the truncation
    let c_tail = vals
        .iter()
        .enumerate()
        .filter(|(j, _)| (-wmax + *j as f64 * h).abs() >= 0.5 * wmax)
        .map(|(j, v)| (-wmax + j as f64 * h).powi(2) * (1.0 - v).norm())
        .fold(0.0, f64::max);
    let tail_floor = 1.0 - 2.0 * c_tail / (wmax * wmax);
    kappa = kappa.min(tail_floor);

    // winding of ω ↦ 1 - 𝒦̃ along the upward contour, closed through the far field where the value is ≈ 1
    let mut turn = 0.0;
    for j in 0..n - 1 {
        let om = -wmax + j as f64 * h;
        turn += arg_increment(&at, om, om + h, vals[j], vals[j + 1], 0)?;
    }
    turn += (vals[0] / vals[n - 1]).arg();
    let enclosed_zeros = -(turn / (2.0 * PI)).round() as i64;
    if enclosed_zeros != 0 {
        kappa = 0.0;
    }

    let root = if enclosed_zeros != 0 {
        locate_rightmost_root(spec, w, k, gamma, wmax)
    } else {
        None
    };
    Ok(ModeMargin {
        k: k.to_vec(),
        kappa: kappa.max(0.0),
        argmin: C64::new(gamma, argmin),
        enclosed_zeros,
        tail_floor,
        root,
    })
}

/// Phase change of `f` from `a` to `b`, bisecting until every increment is small
/// so that a zero passing close to the contour is not aliased.
fn arg_increment(f: &impl Fn(f64) -> Result<C64>, a: f64, b: f64, fa: C64, fb: C64, depth: u32) -> Result<f64> {
    let d = (fb / fa).arg();
    if d.abs() < 0.25 * PI || depth >= 48 {
        return Ok(d);
    }
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    Ok(arg_increment(f, a, m, fa, fm, depth + 1)? + arg_increment(f, m, b, fm, fb, depth + 1)?)
}

fn locate_rightmost_root(spec: &EquilibriumSpec, w: &InteractionKernel, k: &[f64], gamma: f64, wmax: f64) -> Option<C64> {
    let opts = RootOptions {
        min_re: Some(gamma),
        ..RootOptions::default()
    };
    let mut best: Option<C64> = None;
    let top = (spec.velocity_scale() * norm(k) * 4.0 + 2.0).min(wmax);
    for i in 0..=8 {
        for j in 0..=8 {
            let guess = C64::new(gamma + 0.1 + 0.4 * i as f64, top * (j as f64 / 8.0));
            if let Ok(search) = dispersion_root(spec, w, k, guess, &opts) {
                if let Some(r) = search.root {
                    if best.is_none_or(|b| r.re > b.re + 1e-9) {
                        best = Some(r);
                    }
                }
            }
        }
    }
    best
}

/// Approximates `inf_k inf_{Re z = -δ|k|} |1 - 𝒦̃(z, k)|` over the given modes.
pub fn penrose_margin(
    spec: &EquilibriumSpec,
    w: &InteractionKernel,
    modes: &[Vec<f64>],
    opts: &PenroseOptions,
) -> Result<PenroseReport> {
    if modes.is_empty() {
        return Err(Error::arg("no modes to check"));
    }
    spec.validate()?;
    w.validate()?;
    for k in modes {
        let bound = spec.holomorphy_bound(norm(k));
        if !(-opts.delta * norm(k) > bound) {
            return Err(Error::arg(format!(
                "contour shift δ = {} leaves the holomorphy region at |k| = {}",
                opts.delta,
                norm(k)
            )));
        }
    }
    let per_mode = par::map_slice(modes, |k| mode_margin(spec, w, k, opts));
    let modes: Vec<ModeMargin> = per_mode.into_iter().collect::<Result<_>>()?;
    let kappa = modes.iter().map(|m| m.kappa).fold(f64::INFINITY, f64::min);
    let mut warnings = Vec::new();
    let mut refinement_change = None;
    if opts.check_refinement {
        let fine = PenroseOptions {
            omega_max: 2.0 * opts.omega_max,
            n_omega: 2 * opts.n_omega,
            check_refinement: false,
            ..*opts
        };
        let ks: Vec<Vec<f64>> = modes.iter().map(|m| m.k.clone()).collect();
        let refined = penrose_margin(spec, w, &ks, &fine)?;
        let change = (refined.kappa - kappa).abs();
        refinement_change = Some(change);
        if change >= 1e-6 {
            warnings.push(format!(
                "margin not converged under refinement: κ changed by {change:e}"
            ));
        }
    }
    Ok(PenroseReport {
        stable: kappa > 0.0,
        modes,
        kappa,
        options: *opts,
        refinement_change,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    pub max_iter: usize,
    pub tolerance: f64,
    /// Abandon the search if an iterate moves left of this abscissa.
    pub min_re: Option<f64>,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tolerance: 1e-10,
            min_re: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootSearch {
    pub root: Option<C64>,
    /// Iterates visited, for diagnosing failures.
    pub trace: Vec<C64>,
    pub residual: f64,
}

/// Secant iteration on `z ↦ 1 - 𝒦̃(z, k)` from `z_guess`.
pub fn dispersion_root(
    spec: &EquilibriumSpec,
    w: &InteractionKernel,
    k: &[f64],
    z_guess: C64,
    opts: &RootOptions,
) -> Result<RootSearch> {
    let kn = check_mode(k)?;
    let bound = spec.holomorphy_bound(kn).max(opts.min_re.unwrap_or(f64::NEG_INFINITY));
    let g = |z: C64| kernel_laplace(spec, w, k, z).map(|v| 1.0 - v);
    let mut z0 = z_guess;
    let mut g0 = g(z0)?;
    let mut z1 = z_guess + C64::new(1e-3, 1e-3) * (1.0 + z_guess.norm());
    let mut trace = vec![z0];
    let fail = |trace: Vec<C64>, residual: f64| RootSearch {
        root: None,
        trace,
        residual,
    };
    if !(z1.re > bound) {
        z1.re = 0.5 * (z0.re + bound.max(z0.re - 1.0));
    }
    let mut g1 = match g(z1) {
        Ok(v) => v,
        Err(_) => return Ok(fail(trace, g0.norm())),
    };
    for _ in 0..opts.max_iter {
        trace.push(z1);
        if g1.norm() < opts.tolerance {
            return Ok(RootSearch {
                root: Some(z1),
                trace,
                residual: g1.norm(),
            });
        }
        let denom = g1 - g0;
        if denom.norm() == 0.0 {
            return Ok(fail(trace, g1.norm()));
        }
        let z2 = z1 - g1 * (z1 - z0) / denom;
        if !z2.is_finite() || !(z2.re > bound) {
            return Ok(fail(trace, g1.norm()));
        }
        let g2 = match g(z2) {
            Ok(v) => v,
            Err(_) => return Ok(fail(trace, g1.norm())),
        };
        (z0, g0, z1, g1) = (z1, g1, z2, g2);
    }
    Ok(fail(trace, g1.norm()))
}

/// Bisection for the parameter at which `stable(p)` flips, given a bracket with
/// opposite outcomes at its ends.
pub fn stability_threshold(
    mut stable: impl FnMut(f64) -> Result<bool>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let s_lo = stable(lo)?;
    if s_lo == stable(hi)? {
        return Err(Error::arg("stability threshold bracket does not straddle a transition"));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if stable(mid)? == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
