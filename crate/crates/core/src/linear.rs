//! Free transport and the linearized Vlasov–Poisson evolution in spectral variables.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dispersion::kernel_time;
use crate::equilibria::EquilibriumSpec;
use crate::interaction::InteractionKernel;
use crate::volterra::VolterraProblem;
use crate::{bracket, par, Error, Result, C64};

/// Discretization shared by the linear and nonlinear solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpaceGrid {
    #[serde(default = "one")]
    pub d: usize,
    /// Modes per x-dimension, `k ∈ {-N_x/2, …, N_x/2 - 1}`.
    pub n_x: usize,
    /// Points per v-dimension on `[-v_max, v_max)`.
    pub n_v: usize,
    pub v_max: f64,
    pub dt: f64,
    pub t_final: f64,
}

fn one() -> usize {
    1
}

impl PhaseSpaceGrid {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.d) {
            return Err(Error::arg("grid dimension must be 1 or 2"));
        }
        for (name, n) in [("n_x", self.n_x), ("n_v", self.n_v)] {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::arg(format!("{name} = {n} must be a power of two ≥ 2")));
            }
        }
        for (name, x) in [("v_max", self.v_max), ("dt", self.dt), ("t_final", self.t_final)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::arg(format!("{name} must be positive and finite")));
            }
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.n_x as f64
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / self.n_v as f64
    }

    /// Spacing of the dual velocity lattice, `π/v_max`.
    pub fn d_eta(&self) -> f64 {
        PI / self.v_max
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// `f̂(k, η)` for `d = 1` on `k ∈ {-N_x/2, …, N_x/2-1}`, `η_j = (j - N_v/2)Δη`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub n_x: usize,
    pub n_v: usize,
    pub d_eta: f64,
    /// Row-major by mode, `data[(k + N_x/2)·N_v + j]`.
    pub data: Vec<C64>,
}

/// A band-limited interpolated value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: C64,
    /// The abscissa fell outside the η lattice; the value is then 0.
    pub truncated: bool,
}

impl SpectralField {
    pub fn zeros(n_x: usize, n_v: usize, d_eta: f64) -> Self {
        Self {
            n_x,
            n_v,
            d_eta,
            data: vec![C64::new(0.0, 0.0); n_x * n_v],
        }
    }

    pub fn from_fn(n_x: usize, n_v: usize, d_eta: f64, f: impl Fn(i64, f64) -> C64) -> Self {
        let mut s = Self::zeros(n_x, n_v, d_eta);
        for ki in 0..n_x {
            let k = s.mode(ki);
            for j in 0..n_v {
                s.data[ki * n_v + j] = f(k, s.eta(j));
            }
        }
        s
    }

    pub fn for_grid(grid: &PhaseSpaceGrid, f: impl Fn(i64, f64) -> C64) -> Self {
        Self::from_fn(grid.n_x, grid.n_v, grid.d_eta(), f)
    }

    pub fn mode(&self, index: usize) -> i64 {
        index as i64 - (self.n_x / 2) as i64
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.n_x).map(|i| self.mode(i))
    }

    pub fn mode_index(&self, k: i64) -> Option<usize> {
        let i = k + (self.n_x / 2) as i64;
        (0..self.n_x as i64).contains(&i).then_some(i as usize)
    }

    pub fn eta(&self, j: usize) -> f64 {
        (j as f64 - (self.n_v / 2) as f64) * self.d_eta
    }

    pub fn row(&self, k: i64) -> Option<&[C64]> {
        self.mode_index(k).map(|i| &self.data[i * self.n_v..(i + 1) * self.n_v])
    }

    pub fn row_mut(&mut self, k: i64) -> Option<&mut [C64]> {
        let n_v = self.n_v;
        self.mode_index(k).map(move |i| &mut self.data[i * n_v..(i + 1) * n_v])
    }

    /// `(Σ_k Σ_j Δη |f̂(k, η_j)|²)^{1/2}`, equal to the phase-space `L²` norm.
    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.d_eta).sqrt()
    }

    /// Whether `f̂(-k, -η) = conj f̂(k, η)` holds on the symmetric part of the lattice.
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        let kmax = (self.n_x / 2) as i64;
        let jmax = self.n_v / 2;
        for k in -(kmax - 1)..kmax {
            let (a, b) = (self.row(k).unwrap(), self.row(-k).unwrap());
            for j in 1..self.n_v {
                let mirror = 2 * jmax - j;
                if (a[j] - b[mirror].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Band-limited (trigonometric) interpolation of `f̂(k, ·)` at `η`, i.e. the
    /// value of the lattice row's `v`-space representation shifted to `η`;
    /// exact at lattice nodes and spectrally accurate for smooth decaying rows.
    pub fn interpolate(&self, k: i64, eta: f64) -> Sample {
        let Some(row) = self.row(k) else {
            return Sample {
                value: C64::new(0.0, 0.0),
                truncated: true,
            };
        };
        interpolate_row(row, self.eta(0), self.d_eta, eta)
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }
}

fn interpolate_row(row: &[C64], eta0: f64, d_eta: f64, eta: f64) -> Sample {
    let n = row.len();
    let s = (eta - eta0) / d_eta;
    if !(s >= -1e-9 && s <= (n - 1) as f64 + 1e-9) {
        return Sample {
            value: C64::new(0.0, 0.0),
            truncated: true,
        };
    }
    let nearest = s.round();
    if (s - nearest).abs() < 1e-12 {
        return Sample {
            value: row[(nearest as usize).min(n - 1)],
            truncated: false,
        };
    }
    // periodic Dirichlet kernel: D(x) = sin(πx) / (N tan(πx/N)) for even N, / (N sin(πx/N)) for odd N
    let nf = n as f64;
    let sin_ps = (PI * s).sin();
    let even = n.is_multiple_of(2);
    let mut acc = C64::new(0.0, 0.0);
    for (j, c) in row.iter().enumerate() {
        let x = PI * (s - j as f64) / nf;
        let den = if even { x.tan() } else { x.sin() };
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += c * (sign / den);
    }
    Sample {
        value: acc * sin_ps / nf,
        truncated: false,
    }
}

/// `ρ̂(t, k) = ĝ_in(k, kt)` under free transport.
pub fn free_transport_density(g_in: &SpectralField, k: i64, t: f64) -> Sample {
    g_in.interpolate(k, k as f64 * t)
}

/// `ĝ(k, η) ← ĝ(k, η + kΔt)`, the exact free-streaming shift; values shifted in
/// from outside the lattice are zero.
///
/// Computed as a phase ramp on the discrete transform of each row, which gives
/// the same band-limited values as [`SpectralField::interpolate`].
pub fn free_transport_evolve(g: &SpectralField, dt: f64) -> SpectralField {
    let n = g.n_v;
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let rows = par::map_indexed(g.n_x, |ki| {
        let k = g.mode(ki);
        let row = &g.data[ki * n..(ki + 1) * n];
        let shift = k as f64 * dt / g.d_eta;
        if shift == 0.0 {
            return row.to_vec();
        }
        let mut buf = row.to_vec();
        fwd.process(&mut buf);
        for (m, c) in buf.iter_mut().enumerate() {
            let signed = if m < n.div_ceil(2) { m as f64 } else { m as f64 - n as f64 };
            let theta = 2.0 * PI * signed * shift / n as f64;
            *c *= if n.is_multiple_of(2) && m == n / 2 {
                C64::new((PI * shift).cos(), 0.0)
            } else {
                C64::from_polar(1.0, theta)
            };
        }
        inv.process(&mut buf);
        buf.iter()
            .enumerate()
            .map(|(j, c)| {
                let src = j as f64 + shift;
                if src >= -1e-9 && src <= (n - 1) as f64 + 1e-9 {
                    c / n as f64
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect::<Vec<_>>()
    });
    SpectralField {
        data: rows.concat(),
        ..g.clone()
    }
}

/// Both sides of the free-transport density estimate and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportEstimate {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// The time integral was still changing by more than 1e-6 relative between `T/2` and `T`.
    pub inconclusive: bool,
}

/// Compares `‖|∇_x|^{1/2}⟨∇_x, t∇_x⟩^σ e^{λ⟨∇_x, t∇_x⟩^s} ρ‖_{L²_t L²_x}` over `t ∈ [-T, T]`
/// with `‖⟨v⟩^m ⟨∇_{x,v}⟩^σ e^{λ⟨∇_{x,v}⟩^s} g_in‖_{L²}` for free transport.
pub fn fktld_check(g_in: &SpectralField, m: u32, sigma: f64, lambda: f64, s: f64, t_final: f64) -> Result<TransportEstimate> {
    if !(t_final > 0.0) {
        return Err(Error::arg("time horizon must be positive"));
    }
    let weight = |k: f64, eta: f64| {
        let b = bracket(&[k, eta]);
        b.powf(sigma) * (lambda * b.powf(s)).exp()
    };
    // time integral of |k| w(k, kt)² |ĝ(k, kt)|² on nodes t = jΔη/|k|, which land on the η lattice
    let time_integral = |horizon: f64| -> f64 {
        let mut total = 0.0;
        for k in g_in.modes().filter(|&k| k != 0) {
            let kf = k as f64;
            let dt = g_in.d_eta / kf.abs();
            let n = (horizon / dt).floor() as i64;
            let mut acc = 0.0;
            for j in -n..=n {
                let t = j as f64 * dt;
                let v = free_transport_density(g_in, k, t).value;
                let w = if j.abs() == n { 0.5 } else { 1.0 };
                acc += w * kf.abs() * (weight(kf, kf * t) * v.norm()).powi(2);
            }
            total += acc * dt;
        }
        total
    };
    let lhs2 = time_integral(t_final);
    let half = time_integral(0.5 * t_final);
    let lhs = lhs2.sqrt();

    // ⟨v⟩^{2m} = Σ_j C(m, j) v^{2j} and ‖v^j h‖ = ‖∂_η^j ĥ‖
    let mut rhs2 = 0.0;
    for k in g_in.modes() {
        let row = g_in.row(k).unwrap();
        let h: Vec<C64> = row
            .iter()
            .enumerate()
            .map(|(j, v)| weight(k as f64, g_in.eta(j)) * v)
            .collect();
        let mut deriv = h;
        let mut binom = 1.0;
        for j in 0..=m {
            if j > 0 {
                deriv = crate::gevrey::eta_derivative(&deriv, g_in.d_eta);
                binom *= (m - j + 1) as f64 / j as f64;
            }
            rhs2 += binom * deriv.iter().map(|c| c.norm_sqr()).sum::<f64>() * g_in.d_eta;
        }
    }
    let rhs = rhs2.sqrt();
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    let inconclusive = lhs2 > 0.0 && (lhs2 - half) / lhs2 > 1e-6;
    Ok(TransportEstimate {
        lhs,
        rhs,
        ratio,
        inconclusive,
    })
}

/// Time grid and mode selection for [`linear_vp_density`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOptions {
    pub dt: f64,
    pub t_final: f64,
    /// Modes to evolve; `None` evolves every non-zero lattice mode.
    pub modes: Option<Vec<i64>>,
}

/// `ρ̂(t_i, k)` and `‖E(t_i)‖_{L²}` on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHistory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub modes: Vec<i64>,
    /// `rho[m][i] = ρ̂(t_i, modes[m])`.
    pub rho: Vec<Vec<C64>>,
    /// `field[m][i] = Ê(t_i, modes[m]) = i k Ŵ(k) ρ̂`.
    pub field: Vec<Vec<C64>>,
    pub e_norm: Vec<f64>,
    /// Some `kt` left the η lattice, so late free-transport values were cut to zero.
    pub truncated: bool,
}

impl DensityHistory {
    pub fn mode_series(&self, k: i64) -> Option<&[C64]> {
        self.modes.iter().position(|&m| m == k).map(|i| self.rho[i].as_slice())
    }

    pub fn field_series(&self, k: i64) -> Option<&[C64]> {
        self.modes.iter().position(|&m| m == k).map(|i| self.field[i].as_slice())
    }
}

/// `‖E‖²_{L²(𝕋)} = 2π Σ_k |Ê(k)|²` in `d = 1`.
pub fn field_norm_from_modes(field: impl Iterator<Item = C64>) -> f64 {
    (2.0 * PI * field.map(|e| e.norm_sqr()).sum::<f64>()).sqrt()
}

/// Linearized Vlasov–Poisson density: per mode, `ρ̂ = H + 𝒦 ∗ ρ̂` with `H(t) = ĝ_in(k, kt)`.
///
/// For conjugate-symmetric data the negative modes are filled by conjugation
/// instead of a second solve.
pub fn linear_vp_density(
    g_in: &SpectralField,
    spec: &EquilibriumSpec,
    w: &InteractionKernel,
    opts: &LinearOptions,
) -> Result<DensityHistory> {
    spec.validate()?;
    w.validate()?;
    if spec.dim != 1 {
        return Err(Error::arg("the linear solver works in d = 1"));
    }
    if !(opts.dt > 0.0 && opts.t_final > 0.0) {
        return Err(Error::arg("dt and t_final must be positive"));
    }
    let n_t = (opts.t_final / opts.dt).round() as usize;
    let times: Vec<f64> = (0..=n_t).map(|i| i as f64 * opts.dt).collect();
    let mut modes: Vec<i64> = match &opts.modes {
        Some(m) => m.clone(),
        None => g_in.modes().filter(|&k| k != 0).collect(),
    };
    for &k in &modes {
        if k == 0 || g_in.mode_index(k).is_none() {
            return Err(Error::arg(format!("mode {k} is zero or outside the lattice")));
        }
    }
    let symmetric = g_in.is_conjugate_symmetric(1e-14 * (1.0 + g_in.l2_norm()));
    for k in modes.clone() {
        if symmetric && !modes.contains(&-k) && g_in.mode_index(-k).is_some() {
            modes.push(-k);
        }
    }
    modes.sort_unstable();
    let solve_set: Vec<i64> = modes
        .iter()
        .copied()
        .filter(|&k| !(symmetric && k < 0 && modes.contains(&-k)))
        .collect();

    let solved = par::map_slice(&solve_set, |&k| -> Result<(Vec<C64>, bool)> {
        let mut truncated = false;
        let h: Vec<C64> = times
            .iter()
            .map(|&t| {
                let s = free_transport_density(g_in, k, t);
                truncated |= s.truncated;
                s.value
            })
            .collect();
        let kernel: Vec<C64> = times
            .iter()
            .map(|&t| kernel_time(spec, w, &[k as f64], t))
            .collect::<Result<_>>()?;
        Ok((VolterraProblem::new(opts.dt, h, kernel)?.solve()?, truncated))
    });
    let mut by_mode = std::collections::BTreeMap::new();
    let mut truncated = false;
    for (k, r) in solve_set.iter().zip(solved) {
        let (rho, t) = r?;
        truncated |= t;
        by_mode.insert(*k, rho);
    }
    let rho: Vec<Vec<C64>> = modes
        .iter()
        .map(|k| match by_mode.get(k) {
            Some(r) => r.clone(),
            None => by_mode[&-k].iter().map(|c| c.conj()).collect(),
        })
        .collect();
    let field: Vec<Vec<C64>> = modes
        .iter()
        .zip(&rho)
        .map(|(&k, r)| -> Result<Vec<C64>> {
            let c = C64::new(0.0, k as f64 * w.symbol(&[k as f64])?);
            Ok(r.iter().map(|x| c * x).collect())
        })
        .collect::<Result<_>>()?;
    let e_norm = (0..times.len())
        .map(|i| field_norm_from_modes(field.iter().map(|f| f[i])))
        .collect();
    Ok(DensityHistory {
        dt: opts.dt,
        times,
        modes,
        rho,
        field,
        e_norm,
        truncated,
    })
}

/// The scattering state and how fast the profile approaches it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scattering {
    pub f_inf: SpectralField,
    /// `(t, ‖f(t) - f_∞‖_{L²})` at the requested checkpoints.
    pub convergence: Vec<(f64, f64)>,
    /// The profile `f(t)` at the same checkpoints.
    pub snapshots: Vec<(f64, SpectralField)>,
    /// Change of the profile over the last quarter of the run, used as the tail estimate.
    pub tail_estimate: f64,
    pub tail_warning: bool,
}

/// `f_∞(k, η) = ĝ_in(k, η) + ∫₀^T Ê(τ, k) i(η - kτ) f̂⁰(η - kτ) dτ` by the trapezoid rule
/// on the history's time grid.
pub fn scattering_profile(
    history: &DensityHistory,
    g_in: &SpectralField,
    spec: &EquilibriumSpec,
    checkpoints: usize,
    tail_tolerance: f64,
) -> Result<Scattering> {
    let n_t = history.times.len();
    if n_t < 2 {
        return Err(Error::arg("history too short for the scattering integral"));
    }
    let stride = ((n_t - 1) / checkpoints.max(1)).max(1);
    let mut marks: Vec<usize> = (0..n_t).step_by(stride).chain(std::iter::once(n_t - 1)).collect();
    marks.dedup();
    let quarter = (3 * (n_t - 1)) / 4;
    let dt = history.dt;

    // per lattice row: cumulative integral at each mark
    let rows = par::map_indexed(g_in.n_x, |ki| -> Result<(Vec<C64>, Vec<Vec<C64>>, Vec<C64>)> {
        let k = g_in.mode(ki);
        let base = g_in.data[ki * g_in.n_v..(ki + 1) * g_in.n_v].to_vec();
        let Some(e) = history.field_series(k) else {
            return Ok((base.clone(), vec![base.clone(); marks.len()], base));
        };
        let mut acc = base.clone();
        let mut snaps = Vec::with_capacity(marks.len());
        let mut at_quarter = base.clone();
        let mut next = 0;
        let mut prev: Option<Vec<C64>> = None;
        for (i, &tau) in history.times.iter().enumerate() {
            let cur: Vec<C64> = (0..g_in.n_v)
                .map(|j| {
                    let arg = g_in.eta(j) - k as f64 * tau;
                    Ok(e[i] * C64::new(0.0, arg) * spec.fourier(&[arg])?)
                })
                .collect::<Result<_>>()?;
            if let Some(p) = &prev {
                for j in 0..g_in.n_v {
                    acc[j] += 0.5 * dt * (p[j] + cur[j]);
                }
            }
            prev = Some(cur);
            if i == quarter {
                at_quarter = acc.clone();
            }
            while next < marks.len() && marks[next] == i {
                snaps.push(acc.clone());
                next += 1;
            }
        }
        Ok((acc, snaps, at_quarter))
    });
    let rows: Vec<_> = rows.into_iter().collect::<Result<_>>()?;
    let mut f_inf = SpectralField::zeros(g_in.n_x, g_in.n_v, g_in.d_eta);
    for (ki, (fin, _, _)) in rows.iter().enumerate() {
        f_inf.data[ki * g_in.n_v..(ki + 1) * g_in.n_v].copy_from_slice(fin);
    }
    let dist = |select: &dyn Fn(&(Vec<C64>, Vec<Vec<C64>>, Vec<C64>)) -> &Vec<C64>| -> f64 {
        let mut s = 0.0;
        for r in &rows {
            for (a, b) in select(r).iter().zip(&r.0) {
                s += (a - b).norm_sqr();
            }
        }
        (s * g_in.d_eta).sqrt()
    };
    let convergence = marks
        .iter()
        .enumerate()
        .map(|(m, &i)| (history.times[i], dist(&|r| &r.1[m])))
        .collect();
    let tail_estimate = dist(&|r| &r.2);
    let snapshots = marks
        .iter()
        .enumerate()
        .map(|(m, &i)| {
            let mut f = SpectralField::zeros(g_in.n_x, g_in.n_v, g_in.d_eta);
            for (ki, r) in rows.iter().enumerate() {
                f.data[ki * g_in.n_v..(ki + 1) * g_in.n_v].copy_from_slice(&r.1[m]);
            }
            (history.times[i], f)
        })
        .collect();
    Ok(Scattering {
        f_inf,
        convergence,
        snapshots,
        tail_estimate,
        tail_warning: tail_estimate > tail_tolerance,
    })
}

/// Gaussian wave packet data `ĝ(k, η) = a_k e^{-(η-η_k)²/2w²}` summed over
/// `(k, a_k, η_k)` with conjugate partners added so the data are real.
pub fn gaussian_packets(grid: &PhaseSpaceGrid, packets: &[(i64, C64, f64)], width: f64) -> SpectralField {
    SpectralField::for_grid(grid, |k, eta| {
        let mut v = C64::new(0.0, 0.0);
        for &(kk, a, eta0) in packets {
            if k == kk {
                v += a * (-(eta - eta0).powi(2) / (2.0 * width * width)).exp();
            }
            if k == -kk {
                v += a.conj() * (-(eta + eta0).powi(2) / (2.0 * width * width)).exp();
            }
        }
        v
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n_x: usize, n_v: usize, v_max: f64) -> PhaseSpaceGrid {
        PhaseSpaceGrid {
            d: 1,
            n_x,
            n_v,
            v_max,
            dt: 0.1,
            t_final: 10.0,
        }
    }

    #[test]
    fn grid_validation() {
        assert!(grid(16, 64, 8.0).validate().is_ok());
        assert!(grid(12, 64, 8.0).validate().is_err());
        let mut g = grid(16, 64, 8.0);
        g.dt = 0.0;
        assert!(g.validate().is_err());
        assert!((g.d_eta() - PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn orr_peak() {
        let g = grid(4, 2048, 8.0 * PI);
        let eta0 = 50.0;
        let f = SpectralField::for_grid(&g, |k, eta| {
            if k == 1 {
                C64::new((-(eta - eta0).abs()).exp(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let dt = f.d_eta;
        let (mut best, mut t_best) = (0.0, 0.0);
        for j in 0..=800 {
            let t = j as f64 * dt;
            let s = free_transport_density(&f, 1, t);
            assert!(!s.truncated);
            assert!((s.value.re - (-(t - eta0).abs()).exp()).abs() < 1e-8);
            if s.value.norm() > best {
                best = s.value.norm();
                t_best = t;
            }
        }
        assert!((t_best - eta0).abs() <= dt);
        assert_eq!(free_transport_density(&f, 0, 0.0).value, C64::new(0.0, 0.0));
    }

    #[test]
    fn gaussian_interpolation_accuracy() {
        let g = grid(8, 512, 4.0 * PI);
        let f = SpectralField::for_grid(&g, |k, eta| C64::new((-(eta - k as f64).powi(2) / 2.0).exp(), 0.0));
        for k in [1i64, 2, -3] {
            for t in [0.013, 0.77, 1.31, 2.9] {
                let s = free_transport_density(&f, k, t);
                let exact = (-(k as f64 * t - k as f64).powi(2) / 2.0).exp();
                assert!((s.value.re - exact).abs() < 1e-9, "k={k} t={t}");
            }
        }
        assert!(free_transport_density(&f, 1, 1e4).truncated);
    }

    #[test]
    fn transport_identity_and_homogeneous_invariance() {
        let g = grid(8, 256, 8.0);
        let f = gaussian_packets(&g, &[(1, C64::new(0.3, 0.1), 2.0), (0, C64::new(1.0, 0.0), 0.0)], 1.0);
        assert_eq!(free_transport_evolve(&f, 0.0), f);
        let homog = gaussian_packets(&g, &[(0, C64::new(1.0, 0.0), 0.0)], 1.0);
        assert_eq!(free_transport_evolve(&homog, 3.7), homog);
    }

    #[test]
    fn evolve_matches_pointwise_interpolation() {
        let g = grid(4, 128, 8.0);
        let f = gaussian_packets(&g, &[(1, C64::new(0.3, 0.1), 1.0)], 1.5);
        let dt = 0.731;
        let e = free_transport_evolve(&f, dt);
        for k in f.modes() {
            for j in 0..f.n_v {
                let p = f.interpolate(k, f.eta(j) + k as f64 * dt).value;
                assert!((e.row(k).unwrap()[j] - p).norm() < 1e-13, "k={k} j={j}");
            }
        }
    }

    #[test]
    fn transport_reversibility_and_norm() {
        let g = grid(8, 512, 8.0);
        let f = gaussian_packets(&g, &[(1, C64::new(0.3, 0.1), 1.0), (2, C64::new(-0.2, 0.0), -2.0)], 1.5);
        let fwd = free_transport_evolve(&f, 0.37);
        let back = free_transport_evolve(&fwd, -0.37);
        let err = f.data.iter().zip(&back.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert!((fwd.l2_norm() - f.l2_norm()).abs() < 1e-9);
    }

    #[test]
    fn fktld_trivial_and_homogeneous() {
        let g = grid(8, 512, 8.0);
        let zero = SpectralField::zeros(8, 512, g.d_eta());
        let r = fktld_check(&zero, 1, 0.0, 0.0, 0.5, 20.0).unwrap();
        assert_eq!((r.lhs, r.rhs, r.ratio), (0.0, 0.0, 0.0));
        let f = gaussian_packets(&g, &[(1, C64::new(0.3, 0.0), 0.0), (2, C64::new(0.1, 0.1), 1.0)], 1.0);
        let a = fktld_check(&f, 1, 0.0, 0.0, 0.5, 20.0).unwrap();
        let b = fktld_check(&f, 1, 0.0, 0.0, 0.5, 40.0).unwrap();
        assert!(a.ratio.is_finite() && a.ratio > 0.0 && !a.inconclusive);
        assert!((a.ratio - b.ratio).abs() < 1e-9 * a.ratio);
        let mut f3 = f.clone();
        f3.scale(3.0);
        let c = fktld_check(&f3, 1, 0.0, 0.0, 0.5, 20.0).unwrap();
        assert!((c.ratio - a.ratio).abs() < 1e-12 * a.ratio);
        // with σ = λ = 0 the time integral is the L² norm of the non-zero modes
        assert!(a.ratio <= 1.0);
    }

    #[test]
    fn empty_background_is_free_transport() {
        let g = grid(8, 512, 8.0);
        let f = gaussian_packets(&g, &[(1, C64::new(0.01, 0.0), 0.0), (3, C64::new(0.0, 0.004), 1.0)], 1.0);
        let spec = EquilibriumSpec::maxwellian(0.0, 1.0);
        let opts = LinearOptions {
            dt: 0.05,
            t_final: 10.0,
            modes: None,
        };
        let h = linear_vp_density(&f, &spec, &InteractionKernel::coulomb(), &opts).unwrap();
        for (m, &k) in h.modes.iter().enumerate() {
            for (i, &t) in h.times.iter().enumerate() {
                let exact = free_transport_density(&f, k, t).value;
                assert!((h.rho[m][i] - exact).norm() <= 1e-12 * 0.01, "k={k} t={t} {} {}", h.rho[m][i], exact);
            }
        }
    }

    #[test]
    fn real_data_gives_conjugate_modes() {
        let g = grid(8, 512, 8.0);
        let f = gaussian_packets(&g, &[(1, C64::new(0.01, 0.003), 0.5)], 1.0);
        let spec = EquilibriumSpec::maxwellian(1.0, 1.0);
        let opts = LinearOptions {
            dt: 0.05,
            t_final: 5.0,
            modes: Some(vec![1]),
        };
        let h = linear_vp_density(&f, &spec, &InteractionKernel::coulomb(), &opts).unwrap();
        assert_eq!(h.modes, vec![-1, 1]);
        for i in 0..h.times.len() {
            assert_eq!(h.rho[0][i], h.rho[1][i].conj());
        }
    }

    #[test]
    fn scattering_trivial_cases() {
        let g = grid(8, 256, 8.0);
        let spec = EquilibriumSpec::maxwellian(1.0, 1.0);
        let opts = LinearOptions {
            dt: 0.05,
            t_final: 5.0,
            modes: None,
        };
        let zero = SpectralField::zeros(8, 256, g.d_eta());
        let h = linear_vp_density(&zero, &spec, &InteractionKernel::coulomb(), &opts).unwrap();
        let s = scattering_profile(&h, &zero, &spec, 10, 1e-6).unwrap();
        assert!(s.f_inf.data.iter().all(|c| c.norm() == 0.0));

        let f = gaussian_packets(&g, &[(1, C64::new(0.01, 0.0), 0.0)], 1.0);
        let empty = EquilibriumSpec::maxwellian(0.0, 1.0);
        let h = linear_vp_density(&f, &empty, &InteractionKernel::coulomb(), &opts).unwrap();
        let s = scattering_profile(&h, &f, &empty, 10, 1e-6).unwrap();
        assert_eq!(s.f_inf, f);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn interpolation_exact_on_nodes(j in 0usize..256, k in -4i64..4) {
            let g = grid(8, 256, 8.0);
            let f = gaussian_packets(&g, &[(1, C64::new(0.3, 0.2), 1.0), (2, C64::new(0.1, 0.0), -1.0)], 0.8);
            let s = f.interpolate(k, f.eta(j));
            prop_assert_eq!(s.value, f.row(k).unwrap()[j]);
        }

        #[test]
        fn evolution_composes(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let g = grid(8, 512, 8.0);
            let f = gaussian_packets(&g, &[(1, C64::new(0.3, 0.2), 0.0), (3, C64::new(0.1, 0.0), 1.0)], 1.2);
            let two = free_transport_evolve(&free_transport_evolve(&f, a), b);
            let one = free_transport_evolve(&f, a + b);
            let err = two.data.iter().zip(&one.data).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            prop_assert!(err < 1e-8, "{}", err);
        }
    }
}
