//! Nonlinear Vlasov–Poisson on `𝕋^d × ℝ^d` (`d ∈ {1, 2}`) by Strang splitting.
//!
//! Each substep is an exact phase shift in a dual variable: free streaming
//! multiplies the x-transform of every velocity slice by `e^{-ik·v h}`, and the
//! force multiplies the v-transform of every spatial slice by `e^{iη·E Δt}`
//! (particles are accelerated by `-E`, so `F(v) ← F(v + EΔt)`).
//!
//! The distribution is stored on `[x-block][v-block]` with the v-block contiguous;
//! `x_i = iΔx`, `v_j = -v_max + jΔv`, and multi-indices are row-major.

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::equilibria::EquilibriumSpec;
use crate::interaction::InteractionKernel;
use crate::linear::{field_norm_from_modes, free_transport_evolve, DensityHistory, PhaseSpaceGrid, SpectralField};
use crate::{par, Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Cells with some `|v_c| ≥ (1 - BOUNDARY_BAND)·v_max` count as the boundary layer.
const BOUNDARY_BAND: f64 = 0.1;

fn default_boundary_limit() -> f64 {
    1e-8
}

/// Physics and discretization of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSetup {
    pub grid: PhaseSpaceGrid,
    pub equilibrium: EquilibriumSpec,
    #[serde(default)]
    pub interaction: InteractionKernel,
    /// Apply `e^{-36(|η|/η_max)^36}` to the v-transform every step.
    #[serde(default)]
    pub filter: bool,
    /// Abort once the boundary layer holds this fraction of `∫∫|F|`.
    #[serde(default = "default_boundary_limit")]
    pub boundary_limit: f64,
}

impl SimSetup {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.equilibrium.validate()?;
        self.interaction.validate()?;
        if self.equilibrium.dim != self.grid.d {
            return Err(Error::arg(format!(
                "equilibrium dimension {} differs from grid dimension {}",
                self.equilibrium.dim, self.grid.d
            )));
        }
        if !(self.boundary_limit > 0.0) {
            return Err(Error::arg("boundary_limit must be positive"));
        }
        Ok(())
    }
}

/// Velocity profile multiplying `cos(k·x)` in a perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    /// The equilibrium itself: `f⁰(v)`.
    #[default]
    Equilibrium,
    /// `φ(v)cos(η₀v₁)` with `φ` the normalized Gaussian of width `width`.
    Gaussian {
        width: f64,
        #[serde(default)]
        eta0: f64,
    },
}

/// One term `amplitude · cos(k·x) · envelope(v)` of the initial perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeRecipe {
    pub k: Vec<i64>,
    pub amplitude: f64,
    #[serde(default)]
    pub envelope: Envelope,
}

/// `f̂(k, η)` of the recipe perturbation on the lattice of `grid` (`d = 1`).
///
/// `cos(kx)` puts `½` on `±k`; the Gaussian envelope transforms to
/// `½(e^{-w²(η-η₀)²/2} + e^{-w²(η+η₀)²/2})`.
pub fn spectral_initial_data(grid: &PhaseSpaceGrid, spec: &EquilibriumSpec, recipes: &[ModeRecipe]) -> Result<SpectralField> {
    if grid.d != 1 {
        return Err(Error::arg("spectral initial data are one-dimensional"));
    }
    let mut out = SpectralField::zeros(grid.n_x, grid.n_v, grid.d_eta());
    for r in recipes {
        if r.k.len() != 1 || r.k[0] == 0 {
            return Err(Error::arg(format!("recipe mode {:?} must be a single non-zero wavenumber", r.k)));
        }
        for k in [r.k[0], -r.k[0]] {
            let n_v = out.n_v;
            let etas: Vec<f64> = (0..n_v).map(|j| out.eta(j)).collect();
            let row = out
                .row_mut(k)
                .ok_or_else(|| Error::arg(format!("recipe mode {} is outside the lattice", r.k[0])))?;
            for (c, eta) in row.iter_mut().zip(etas) {
                let env = match r.envelope {
                    Envelope::Equilibrium => spec.fourier(&[eta])?,
                    Envelope::Gaussian { width, eta0 } => {
                        let g = |e: f64| (-0.5 * (width * e).powi(2)).exp();
                        C64::new(0.5 * (g(eta - eta0) + g(eta + eta0)), 0.0)
                    }
                };
                *c += 0.5 * r.amplitude * env;
            }
        }
    }
    Ok(out)
}

/// Conserved quantities and health indicators of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conserved {
    pub t: f64,
    pub mass: f64,
    pub l1: f64,
    /// `‖F‖_{L²}` (not squared).
    pub l2: f64,
    pub kinetic: f64,
    /// `½(2π)^d Σ_k Ŵ(k)|ρ̂(k)|²`, which equals `½‖E‖²` for Coulomb.
    pub potential: f64,
    /// `kinetic + potential`, the invariant of the scheme's continuous limit.
    pub energy: f64,
    /// `½‖E‖²_{L²}`.
    pub field_energy: f64,
    /// `-∫∫ F log F` with `F` clamped below at `1e-300`.
    pub entropy: f64,
    pub min_value: f64,
    pub boundary_fraction: f64,
}

/// Uniform tensor lattice of side `n` in `d` dimensions.
#[derive(Debug, Clone, Copy)]
struct Lattice {
    n: usize,
    d: usize,
}

impl Lattice {
    fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    fn index(&self, flat: usize) -> [usize; 2] {
        if self.d == 1 {
            [flat, 0]
        } else {
            [flat / self.n, flat % self.n]
        }
    }

    /// Signed frequency of FFT index `m`, and whether it is the Nyquist index.
    fn freq(&self, m: usize) -> (f64, bool) {
        let n = self.n;
        let signed = if m < n / 2 { m as i64 } else { m as i64 - n as i64 };
        (signed as f64, n.is_multiple_of(2) && m == n / 2)
    }
}

struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(n: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            fwd: p.plan_fft_forward(n),
            inv: p.plan_fft_inverse(n),
        }
    }
}

/// In-place unnormalized transform of an `n^d` block.
fn fft_block(buf: &mut [C64], lat: Lattice, plan: &Arc<dyn Fft<f64>>) {
    plan.process(buf);
    if lat.d == 2 {
        let n = lat.n;
        let mut t = vec![ZERO; buf.len()];
        for i in 0..n {
            for j in 0..n {
                t[j * n + i] = buf[i * n + j];
            }
        }
        plan.process(&mut t);
        for i in 0..n {
            for j in 0..n {
                buf[i * n + j] = t[j * n + i];
            }
        }
    }
}

/// `e^{iθ}`, or `cos θ` on a Nyquist index so real data stay real.
fn shift_factor(theta: f64, nyquist: bool) -> C64 {
    if nyquist {
        C64::new(theta.cos(), 0.0)
    } else {
        C64::from_polar(1.0, theta)
    }
}

/// A running simulation.
pub struct Simulation {
    setup: SimSetup,
    x: Lattice,
    v: Lattice,
    f: Vec<f64>,
    background: Vec<f64>,
    /// Field at each x point, per component, from the last field solve.
    e: Vec<[f64; 2]>,
    t: f64,
    steps: usize,
    x_plans: Plans,
    v_plans: Plans,
    /// `Ŵ` by x-mode index; zero on the mean and on Nyquist modes.
    symbol: Vec<f64>,
}

impl Simulation {
    /// Starts from grid values of `F` at time `t0`.
    pub fn new(setup: SimSetup, values: Vec<f64>, t0: f64) -> Result<Self> {
        setup.validate()?;
        let g = &setup.grid;
        let x = Lattice { n: g.n_x, d: g.d };
        let v = Lattice { n: g.n_v, d: g.d };
        if values.len() != x.len() * v.len() {
            return Err(Error::arg(format!(
                "expected {} distribution values, got {}",
                x.len() * v.len(),
                values.len()
            )));
        }
        if values.iter().any(|f| !f.is_finite()) {
            return Err(Error::arg("initial distribution has non-finite values"));
        }
        let mut symbol = vec![0.0; x.len()];
        for (m, w) in symbol.iter_mut().enumerate() {
            let idx = x.index(m);
            let comps: Vec<(f64, bool)> = (0..x.d).map(|c| x.freq(idx[c])).collect();
            let k: Vec<f64> = comps.iter().map(|c| c.0).collect();
            if comps.iter().any(|c| c.1) || k.iter().all(|&kc| kc == 0.0) {
                continue;
            }
            *w = setup.interaction.symbol(&k)?;
        }
        let mut sim = Self {
            background: Vec::new(),
            e: vec![[0.0; 2]; x.len()],
            x_plans: Plans::new(x.n),
            v_plans: Plans::new(v.n),
            symbol,
            x,
            v,
            f: values,
            t: t0,
            steps: 0,
            setup,
        };
        sim.background = (0..v.len())
            .map(|j| sim.setup.equilibrium.eval(&sim.velocity(j)))
            .collect::<Result<_>>()?;
        sim.field_solve()?;
        Ok(sim)
    }

    /// `F = f⁰(v) + Σ amplitude·cos(k·x)·envelope(v)` at `t = 0`.
    pub fn from_recipe(setup: SimSetup, recipes: &[ModeRecipe]) -> Result<Self> {
        setup.validate()?;
        let g = &setup.grid;
        let (x, v) = (Lattice { n: g.n_x, d: g.d }, Lattice { n: g.n_v, d: g.d });
        for r in recipes {
            if r.k.len() != g.d {
                return Err(Error::arg(format!("recipe mode {:?} does not have {} components", r.k, g.d)));
            }
            if r.k.iter().any(|k| k.unsigned_abs() as usize >= g.n_x / 2) {
                return Err(Error::arg(format!("recipe mode {:?} is outside the lattice", r.k)));
            }
            if !r.amplitude.is_finite() {
                return Err(Error::arg("recipe amplitude must be finite"));
            }
            if let Envelope::Gaussian { width, eta0 } = r.envelope {
                if !(width > 0.0) || eta0.abs() >= PI / g.d_eta() * g.d_eta() * (g.n_v / 2) as f64 {
                    return Err(Error::arg("gaussian envelope needs width > 0 and |eta0| inside the η lattice"));
                }
            }
        }
        let dx = g.dx();
        let dv = g.dv();
        let v_max = g.v_max;
        let d = g.d;
        let vel = |j: usize| -> Vec<f64> {
            let idx = v.index(j);
            (0..d).map(|c| -v_max + idx[c] as f64 * dv).collect()
        };
        let f0: Vec<f64> = (0..v.len()).map(|j| setup.equilibrium.eval(&vel(j))).collect::<Result<_>>()?;
        let envelopes: Vec<Vec<f64>> = recipes
            .iter()
            .map(|r| {
                (0..v.len())
                    .map(|j| match r.envelope {
                        Envelope::Equilibrium => f0[j],
                        Envelope::Gaussian { width, eta0 } => {
                            let vv = vel(j);
                            let r2: f64 = vv.iter().map(|c| c * c).sum();
                            (2.0 * PI * width * width).powf(-(d as f64) / 2.0)
                                * (-r2 / (2.0 * width * width)).exp()
                                * (eta0 * vv[0]).cos()
                        }
                    })
                    .collect()
            })
            .collect();
        let mut values = vec![0.0; x.len() * v.len()];
        par::for_each_chunk_mut(&mut values, v.len(), |xi, row| {
            let idx = x.index(xi);
            let coef: Vec<f64> = recipes
                .iter()
                .map(|r| {
                    let phase: f64 = (0..d).map(|c| r.k[c] as f64 * idx[c] as f64 * dx).sum();
                    r.amplitude * phase.cos()
                })
                .collect();
            for (j, out) in row.iter_mut().enumerate() {
                *out = f0[j] + coef.iter().zip(&envelopes).map(|(c, e)| c * e[j]).sum::<f64>();
            }
        });
        Self::new(setup, values, 0.0)
    }

    pub fn setup(&self) -> &SimSetup {
        &self.setup
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    /// `E` at each spatial point from the most recent field solve (component `c` in slot `c`).
    pub fn field(&self) -> &[[f64; 2]] {
        &self.e
    }

    fn velocity(&self, j: usize) -> Vec<f64> {
        let idx = self.v.index(j);
        let dv = self.setup.grid.dv();
        (0..self.v.d).map(|c| -self.setup.grid.v_max + idx[c] as f64 * dv).collect()
    }

    fn cell_volume(&self) -> f64 {
        (self.setup.grid.dx() * self.setup.grid.dv()).powi(self.x.d as i32)
    }

    /// Normalized density coefficients `ρ̂(k)` in FFT order.
    fn density_hat(&self) -> Vec<C64> {
        let nvb = self.v.len();
        let dvd = self.setup.grid.dv().powi(self.v.d as i32);
        let mut rho: Vec<C64> = par::map_indexed(self.x.len(), |xi| {
            C64::new(self.f[xi * nvb..(xi + 1) * nvb].iter().sum::<f64>() * dvd, 0.0)
        });
        fft_block(&mut rho, self.x, &self.x_plans.fwd);
        let scale = 1.0 / self.x.len() as f64;
        rho.iter_mut().for_each(|c| *c *= scale);
        rho
    }

    /// Recomputes `E = ∇(W ∗ ρ)` from the current distribution.
    pub fn field_solve(&mut self) -> Result<()> {
        let rho = self.density_hat();
        if rho.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::BlowUp {
                step: self.steps,
                time: self.t,
            });
        }
        let mut e = vec![[0.0; 2]; self.x.len()];
        for c in 0..self.x.d {
            let mut buf: Vec<C64> = (0..self.x.len())
                .map(|m| {
                    let k = self.x.freq(self.x.index(m)[c]).0;
                    C64::new(0.0, k * self.symbol[m]) * rho[m]
                })
                .collect();
            fft_block(&mut buf, self.x, &self.x_plans.inv);
            for (slot, val) in e.iter_mut().zip(&buf) {
                slot[c] = val.re;
            }
        }
        self.e = e;
        Ok(())
    }

    /// `F(x, v) ← F(x - vh, v)`.
    fn advect_x(&mut self, h: f64) {
        let (x, v) = (self.x, self.v);
        let (nxb, nvb) = (x.len(), v.len());
        let dv = self.setup.grid.dv();
        let v_max = self.setup.grid.v_max;
        let f = &self.f;
        let plans = &self.x_plans;
        let mut work = vec![ZERO; nxb * nvb];
        par::for_each_chunk_mut(&mut work, nxb, |vj, chunk| {
            for (xi, c) in chunk.iter_mut().enumerate() {
                *c = C64::new(f[xi * nvb + vj], 0.0);
            }
            fft_block(chunk, x, &plans.fwd);
            let vidx = v.index(vj);
            let vel: Vec<f64> = (0..v.d).map(|c| -v_max + vidx[c] as f64 * dv).collect();
            for (m, c) in chunk.iter_mut().enumerate() {
                let idx = x.index(m);
                let mut factor = C64::new(1.0 / nxb as f64, 0.0);
                for comp in 0..x.d {
                    let (k, nyq) = x.freq(idx[comp]);
                    factor *= shift_factor(-k * vel[comp] * h, nyq);
                }
                *c *= factor;
            }
            fft_block(chunk, x, &plans.inv);
        });
        par::for_each_chunk_mut(&mut self.f, nvb, |xi, row| {
            for (vj, out) in row.iter_mut().enumerate() {
                *out = work[vj * nxb + xi].re;
            }
        });
    }

    /// `F(x, v) ← F(x, v + E(x)Δt)`, optionally filtered.
    fn advect_v(&mut self, dt: f64) {
        let v = self.v;
        let nvb = v.len();
        let d_eta = self.setup.grid.d_eta();
        let eta_max = d_eta * (v.n / 2) as f64;
        let filter = self.setup.filter;
        let e = &self.e;
        let plans = &self.v_plans;
        par::for_each_chunk_mut(&mut self.f, nvb, |xi, row| {
            let mut buf: Vec<C64> = row.iter().map(|&r| C64::new(r, 0.0)).collect();
            fft_block(&mut buf, v, &plans.fwd);
            for (m, c) in buf.iter_mut().enumerate() {
                let idx = v.index(m);
                let mut factor = C64::new(1.0 / nvb as f64, 0.0);
                for comp in 0..v.d {
                    let (j, nyq) = v.freq(idx[comp]);
                    let eta = j * d_eta;
                    factor *= shift_factor(eta * e[xi][comp] * dt, nyq);
                    if filter {
                        factor *= (-36.0 * (eta.abs() / eta_max).powi(36)).exp();
                    }
                }
                *c *= factor;
            }
            fft_block(&mut buf, v, &plans.inv);
            for (out, c) in row.iter_mut().zip(&buf) {
                *out = c.re;
            }
        });
    }

    /// One Strang step: half streaming, field solve, full kick, half streaming.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::arg("time step must be positive"));
        }
        self.advect_x(0.5 * dt);
        self.field_solve()?;
        self.advect_v(dt);
        self.advect_x(0.5 * dt);
        self.steps += 1;
        self.t += dt;
        if self.e.iter().any(|e| !e[0].is_finite() || !e[1].is_finite()) {
            return Err(Error::BlowUp {
                step: self.steps,
                time: self.t,
            });
        }
        Ok(())
    }

    /// Free streaming only (the force switched off), for comparison with exact transport.
    pub fn stream(&mut self, dt: f64) {
        self.advect_x(dt);
        self.t += dt;
    }

    /// `F(x, v) ← F(x, -v)` on the periodic velocity grid.
    pub fn reverse_velocities(&mut self) {
        let v = self.v;
        let n = v.n;
        let mirror = |j: usize| -> usize {
            let idx = v.index(j);
            let m = |i: usize| (n - i) % n;
            if v.d == 1 {
                m(idx[0])
            } else {
                m(idx[0]) * n + m(idx[1])
            }
        };
        let nvb = v.len();
        par::for_each_chunk_mut(&mut self.f, nvb, |_, row| {
            let copy = row.to_vec();
            for (j, out) in row.iter_mut().enumerate() {
                *out = copy[mirror(j)];
            }
        });
    }

    /// Fraction of `∫∫|F|` in the outer velocity band.
    pub fn boundary_fraction(&self) -> f64 {
        let nvb = self.v.len();
        let edge = (1.0 - BOUNDARY_BAND) * self.setup.grid.v_max;
        let in_band: Vec<bool> = (0..nvb).map(|j| self.velocity(j).iter().any(|c| c.abs() >= edge)).collect();
        let (band, total) = par::map_indexed(self.x.len(), |xi| {
            let row = &self.f[xi * nvb..(xi + 1) * nvb];
            row.iter().zip(&in_band).fold((0.0, 0.0), |(b, t), (f, &edge)| {
                (if edge { b + f.abs() } else { b }, t + f.abs())
            })
        })
        .into_iter()
        .fold((0.0, 0.0), |(b, t), (x, y)| (b + x, t + y));
        if total == 0.0 {
            0.0
        } else {
            band / total
        }
    }

    pub fn conserved(&self) -> Conserved {
        let nvb = self.v.len();
        let v2: Vec<f64> = (0..nvb).map(|j| self.velocity(j).iter().map(|c| c * c).sum()).collect();
        // per-row partial sums, reduced afterwards in row order
        let rows = par::map_indexed(self.x.len(), |xi| {
            let row = &self.f[xi * nvb..(xi + 1) * nvb];
            let mut acc = [0.0, 0.0, 0.0, 0.0, 0.0, f64::INFINITY];
            for (f, w) in row.iter().zip(&v2) {
                acc[0] += f;
                acc[1] += f.abs();
                acc[2] += f * f;
                acc[3] += f * w;
                let c = f.max(1e-300);
                acc[4] -= c * c.ln();
                acc[5] = acc[5].min(*f);
            }
            acc
        });
        let mut s = [0.0, 0.0, 0.0, 0.0, 0.0, f64::INFINITY];
        for r in &rows {
            for i in 0..5 {
                s[i] += r[i];
            }
            s[5] = s[5].min(r[5]);
        }
        let vol = self.cell_volume();
        let rho = self.density_hat();
        let tp = (2.0 * PI).powi(self.x.d as i32);
        let potential = 0.5 * tp * rho.iter().zip(&self.symbol).map(|(r, w)| w * r.norm_sqr()).sum::<f64>();
        let kinetic = 0.5 * s[3] * vol;
        let field_energy = 0.5 * self.e_norm_from(&rho).powi(2);
        Conserved {
            t: self.t,
            mass: s[0] * vol,
            l1: s[1] * vol,
            l2: (s[2] * vol).sqrt(),
            kinetic,
            potential,
            energy: kinetic + potential,
            field_energy,
            entropy: s[4] * vol,
            min_value: s[5],
            boundary_fraction: self.boundary_fraction(),
        }
    }

    fn e_norm_from(&self, rho: &[C64]) -> f64 {
        let tp = (2.0 * PI).powi(self.x.d as i32);
        let mut s = 0.0;
        for (m, r) in rho.iter().enumerate() {
            let idx = self.x.index(m);
            let k2: f64 = (0..self.x.d).map(|c| self.x.freq(idx[c]).0.powi(2)).sum();
            s += k2 * (self.symbol[m] * r.norm()).powi(2);
        }
        (tp * s).sqrt()
    }

    /// `‖E‖_{L²}` from the current distribution.
    pub fn e_norm(&self) -> f64 {
        self.e_norm_from(&self.density_hat())
    }

    /// Sorted mode list and the matching `ρ̂(k)`.
    pub fn density_modes(&self) -> (Vec<Vec<i64>>, Vec<C64>) {
        let rho = self.density_hat();
        let mut pairs: Vec<(Vec<i64>, C64)> = (0..self.x.len())
            .map(|m| {
                let idx = self.x.index(m);
                ((0..self.x.d).map(|c| self.x.freq(idx[c]).0 as i64).collect(), rho[m])
            })
            .collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        pairs.into_iter().unzip()
    }

    /// `f̂(k, η)` of `F - f⁰` in the lattice layout of [`SpectralField`] (`d = 1`).
    pub fn perturbation_field(&self) -> Result<SpectralField> {
        if self.x.d != 1 {
            return Err(Error::arg("spectral snapshots are available in d = 1"));
        }
        let (nx, nv) = (self.x.n, self.v.n);
        let dv = self.setup.grid.dv();
        let mut out = SpectralField::zeros(nx, nv, self.setup.grid.d_eta());
        // v-transform of each x row, then x-transform of each η column
        let mut rows: Vec<C64> = self
            .f
            .iter()
            .enumerate()
            .map(|(i, f)| C64::new(f - self.background[i % nv], 0.0))
            .collect();
        par::for_each_chunk_mut(&mut rows, nv, |_, row| self.v_plans.fwd.process(row));
        let mut cols = vec![ZERO; nx * nv];
        for xi in 0..nx {
            for m in 0..nv {
                cols[m * nx + xi] = rows[xi * nv + m];
            }
        }
        par::for_each_chunk_mut(&mut cols, nx, |_, col| self.x_plans.fwd.process(col));
        let v_max = self.setup.grid.v_max;
        for (ki, k) in (0..nx).map(|i| (i, i as i64 - (nx / 2) as i64)) {
            let mk = k.rem_euclid(nx as i64) as usize;
            for j in 0..nv {
                let eta = out.eta(j);
                let mj = (j as i64 - (nv / 2) as i64).rem_euclid(nv as i64) as usize;
                // v_j = -v_max + jΔv contributes the phase e^{iη v_max}
                let phase = C64::from_polar(dv / nx as f64, eta * v_max);
                out.data[ki * nv + j] = cols[mj * nx + mk] * phase;
            }
        }
        Ok(out)
    }

    /// Writes the binary checkpoint: `LDKF`, version, `d`, `N_x`, `N_v` (u32),
    /// `v_max`, `t` (f64), then the distribution, all little-endian.
    pub fn write_checkpoint(&self, w: &mut impl Write) -> Result<()> {
        let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
        let g = &self.setup.grid;
        w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
        for x in [CHECKPOINT_VERSION, g.d as u32, g.n_x as u32, g.n_v as u32] {
            w.write_all(&x.to_le_bytes()).map_err(io)?;
        }
        w.write_all(&g.v_max.to_le_bytes()).map_err(io)?;
        w.write_all(&self.t.to_le_bytes()).map_err(io)?;
        let mut bytes = Vec::with_capacity(8 * self.f.len());
        for f in &self.f {
            bytes.extend_from_slice(&f.to_le_bytes());
        }
        w.write_all(&bytes).map_err(io)
    }

    /// Resumes from a checkpoint whose header matches `setup.grid`.
    pub fn from_checkpoint(setup: SimSetup, ck: Checkpoint) -> Result<Self> {
        let g = &setup.grid;
        if (ck.d, ck.n_x, ck.n_v) != (g.d, g.n_x, g.n_v) || ck.v_max != g.v_max {
            return Err(Error::Checkpoint(format!(
                "checkpoint grid (d={}, N_x={}, N_v={}, v_max={}) does not match the configured grid",
                ck.d, ck.n_x, ck.n_v, ck.v_max
            )));
        }
        Self::new(setup, ck.values, ck.t)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"LDKF";
const CHECKPOINT_VERSION: u32 = 1;

/// Contents of a checkpoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub d: usize,
    pub n_x: usize,
    pub n_v: usize,
    pub v_max: f64,
    pub t: f64,
    pub values: Vec<f64>,
}

impl Checkpoint {
    pub fn read(r: &mut impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if bytes.len() < 36 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("missing LDKF header".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let (d, n_x, n_v) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
        let (v_max, t) = (f64_at(20), f64_at(28));
        if !(1..=2).contains(&d) {
            return Err(Error::Checkpoint(format!("dimension {d} not supported")));
        }
        let count = (n_x * n_v).pow(d as u32);
        if bytes.len() != 36 + 8 * count {
            return Err(Error::Checkpoint(format!(
                "expected {} data bytes, found {}",
                8 * count,
                bytes.len() - 36
            )));
        }
        let values = bytes[36..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self {
            d,
            n_x,
            n_v,
            v_max,
            t,
            values,
        })
    }
}

/// Output cadence of [`simulate`], in steps; `0` disables snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Recording {
    pub density_every: usize,
    pub diagnostics_every: usize,
    pub snapshot_every: usize,
}

impl Default for Recording {
    fn default() -> Self {
        Self {
            density_every: 1,
            diagnostics_every: 10,
            snapshot_every: 0,
        }
    }
}

/// Recorded output of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub d: usize,
    pub times: Vec<f64>,
    pub modes: Vec<Vec<i64>>,
    /// `rho[m][i] = ρ̂(times[i], modes[m])`.
    pub rho: Vec<Vec<C64>>,
    pub e_norm: Vec<f64>,
    pub diagnostics: Vec<Conserved>,
    /// `(t, f̂ - f̂⁰)` in `d = 1`.
    pub snapshots: Vec<(f64, SpectralField)>,
}

/// Largest relative deviations from the initial conserved values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Drift {
    pub mass: f64,
    pub l2: f64,
    pub energy: f64,
}

impl Trajectory {
    pub fn mode_series(&self, k: &[i64]) -> Option<&[C64]> {
        self.modes.iter().position(|m| m == k).map(|i| self.rho[i].as_slice())
    }

    /// Snapshots pulled back along free transport, `f(t, x, v) = (F - f⁰)(t, x + vt, v)`.
    pub fn profiles(&self) -> Vec<(f64, SpectralField)> {
        self.snapshots.iter().map(|(t, g)| (*t, free_transport_evolve(g, -*t))).collect()
    }

    pub fn drift(&self) -> Drift {
        let Some(first) = self.diagnostics.first() else {
            return Drift {
                mass: 0.0,
                l2: 0.0,
                energy: 0.0,
            };
        };
        let rel = |pick: fn(&Conserved) -> f64| {
            let a = pick(first);
            self.diagnostics.iter().map(|c| ((pick(c) - a) / a).abs()).fold(0.0, f64::max)
        };
        Drift {
            mass: rel(|c| c.mass),
            l2: rel(|c| c.l2),
            energy: rel(|c| c.energy),
        }
    }

    /// The `d = 1` density history (non-zero modes) for comparison with the linear solver.
    pub fn density_history(&self, w: &InteractionKernel) -> Result<DensityHistory> {
        if self.d != 1 {
            return Err(Error::arg("density histories are one-dimensional"));
        }
        let mut modes = Vec::new();
        let mut rho = Vec::new();
        let mut field = Vec::new();
        for (m, k) in self.modes.iter().enumerate() {
            if k[0] == 0 {
                continue;
            }
            let c = C64::new(0.0, k[0] as f64 * w.symbol(&[k[0] as f64])?);
            modes.push(k[0]);
            field.push(self.rho[m].iter().map(|r| c * r).collect::<Vec<_>>());
            rho.push(self.rho[m].clone());
        }
        let dt = if self.times.len() > 1 { self.times[1] - self.times[0] } else { 0.0 };
        Ok(DensityHistory {
            dt,
            times: self.times.clone(),
            modes,
            rho,
            field,
            e_norm: self.e_norm.clone(),
            truncated: false,
        })
    }
}

/// Advances `sim` to `t_final` with its grid's `dt`, recording as configured.
///
/// The boundary monitor runs with the diagnostics and aborts the run when
/// the velocity-boundary layer holds more than `boundary_limit` of the mass.
pub fn simulate(sim: &mut Simulation, t_final: f64, rec: &Recording) -> Result<Trajectory> {
    let dt = sim.setup.grid.dt;
    let steps = ((t_final - sim.t) / dt).round().max(0.0) as usize;
    let d = sim.x.d;
    let (modes, _) = sim.density_modes();
    let mut traj = Trajectory {
        d,
        times: Vec::new(),
        modes: modes.clone(),
        rho: vec![Vec::new(); modes.len()],
        e_norm: Vec::new(),
        diagnostics: Vec::new(),
        snapshots: Vec::new(),
    };
    let every = |n: usize, i: usize| n > 0 && (i.is_multiple_of(n) || i == steps);
    for i in 0..=steps {
        if i > 0 {
            sim.step(dt)?;
        }
        if every(rec.density_every.max(1), i) {
            let (_, rho) = sim.density_modes();
            let norm = if d == 1 {
                let symbols: Vec<f64> = modes
                    .iter()
                    .map(|k| if k[0] == 0 { Ok(0.0) } else { sim.setup.interaction.symbol(&[k[0] as f64]) })
                    .collect::<Result<_>>()?;
                // Nyquist carries no field
                let nyq = -(sim.x.n as i64 / 2);
                field_norm_from_modes(modes.iter().zip(&rho).zip(&symbols).map(|((k, r), w)| {
                    if k[0] == nyq {
                        C64::new(0.0, 0.0)
                    } else {
                        C64::new(0.0, k[0] as f64 * w) * r
                    }
                }))
            } else {
                sim.e_norm()
            };
            traj.times.push(sim.t);
            for (series, r) in traj.rho.iter_mut().zip(rho) {
                series.push(r);
            }
            traj.e_norm.push(norm);
        }
        if every(rec.diagnostics_every, i) {
            let c = sim.conserved();
            if c.boundary_fraction > sim.setup.boundary_limit {
                return Err(Error::BoundaryMass {
                    fraction: c.boundary_fraction,
                    limit: sim.setup.boundary_limit,
                    time: sim.t,
                });
            }
            traj.diagnostics.push(c);
        }
        if d == 1 && every(rec.snapshot_every, i) {
            traj.snapshots.push((sim.t, sim.perturbation_field()?));
        }
    }
    Ok(traj)
}

// ---------------------------------------------------------------------------
// plasma echo

/// Driver and seed of an echo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoParams {
    pub eps_drv: f64,
    pub eps_seed: f64,
    #[serde(default = "one_i64")]
    pub k_seed: i64,
    /// Defaults to `k_seed + 1`.
    #[serde(default)]
    pub k_drv: Option<i64>,
    pub eta0: f64,
    #[serde(default = "one_f64")]
    pub driver_width: f64,
}

fn one_i64() -> i64 {
    1
}

fn one_f64() -> f64 {
    1.0
}

impl EchoParams {
    pub fn driver_mode(&self) -> i64 {
        self.k_drv.unwrap_or(self.k_seed + 1)
    }

    /// Seed `ε_seed cos(k_seed x) f⁰(v)` and driver `ε_drv cos(k_drv x) φ(v) cos(η₀v)`.
    pub fn recipes(&self, d: usize) -> Vec<ModeRecipe> {
        let along = |k: i64| {
            let mut v = vec![0; d];
            v[0] = k;
            v
        };
        vec![
            ModeRecipe {
                k: along(self.k_seed),
                amplitude: self.eps_seed,
                envelope: Envelope::Equilibrium,
            },
            ModeRecipe {
                k: along(self.driver_mode()),
                amplitude: self.eps_drv,
                envelope: Envelope::Gaussian {
                    width: self.driver_width,
                    eta0: self.eta0,
                },
            },
        ]
    }
}

/// A detected local maximum of `|ρ̂(t, k)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Burst {
    pub mode: i64,
    pub time: f64,
    pub amplitude: f64,
    /// Ratio to the trailing median.
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeBursts {
    pub mode: i64,
    /// `η₀/|k|`.
    pub predicted_time: f64,
    /// Ten times the median of `|ρ̂(·, k)|` over the run.
    pub noise_floor: f64,
    pub bursts: Vec<Burst>,
    /// The detected burst closest to the predicted time.
    pub nearest: Option<Burst>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EchoReport {
    pub k_seed: i64,
    pub k_drv: i64,
    pub eta0: f64,
    pub seed: ModeBursts,
    pub driver: ModeBursts,
    /// Echo amplitude over `ε_drv·ε_seed`.
    pub echo_over_product: Option<f64>,
    /// Echo amplitude over the initial seed density `|ρ̂(0, k_seed)|`.
    pub echo_over_seed: Option<f64>,
}

/// Local maxima exceeding 10× the trailing median over `5/|k|` time units and the noise floor,
/// and not exceeded anywhere within `5/|k|` of themselves.
pub fn detect_bursts(times: &[f64], amplitude: &[f64], k: i64, predicted: f64) -> ModeBursts {
    let median = |v: &[f64]| -> f64 {
        if v.is_empty() {
            return 0.0;
        }
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s[s.len() / 2]
    };
    let noise_floor = 10.0 * median(amplitude);
    let window = 5.0 / k.unsigned_abs().max(1) as f64;
    let mut bursts = Vec::new();
    let mut lo = 0;
    for i in 1..amplitude.len().saturating_sub(1) {
        while times[lo] < times[i] - window {
            lo += 1;
        }
        if times[i] - times[0] < window {
            continue;
        }
        let y = amplitude[i];
        if !(y >= amplitude[i - 1] && y > amplitude[i + 1] && y > noise_floor) {
            continue;
        }
        // the run-up to a burst has its own oscillation peaks; keep only the crest
        let hi = times.partition_point(|&t| t <= times[i] + window);
        if amplitude[lo..hi].iter().any(|&a| a > y) {
            continue;
        }
        let m = median(&amplitude[lo..i]);
        if y > 10.0 * m {
            bursts.push(Burst {
                mode: k,
                time: times[i],
                amplitude: y,
                prominence: if m > 0.0 { y / m } else { f64::INFINITY },
            });
        }
    }
    let nearest = bursts
        .iter()
        .copied()
        .min_by(|a, b| (a.time - predicted).abs().total_cmp(&(b.time - predicted).abs()));
    ModeBursts {
        mode: k,
        predicted_time: predicted,
        noise_floor,
        bursts,
        nearest,
    }
}

/// Runs the echo configuration and locates the bursts on the seed and driver modes.
pub fn echo_experiment(setup: SimSetup, echo: &EchoParams, rec: &Recording) -> Result<(EchoReport, Trajectory)> {
    let (k_seed, k_drv) = (echo.k_seed, echo.driver_mode());
    if k_seed == 0 || k_drv == 0 || k_seed == k_drv {
        return Err(Error::arg("seed and driver modes must be distinct and non-zero"));
    }
    if !(echo.eta0 > 0.0) || echo.eta0 / (k_seed.unsigned_abs() as f64) >= setup.grid.t_final {
        return Err(Error::arg("need eta0 > 0 and eta0/k_seed < t_final"));
    }
    let eta_max = setup.grid.d_eta() * (setup.grid.n_v / 2) as f64;
    if echo.eta0 >= eta_max {
        return Err(Error::arg(format!("eta0 = {} is outside the η lattice (|η| < {eta_max})", echo.eta0)));
    }
    let d = setup.grid.d;
    let t_final = setup.grid.t_final;
    let mut sim = Simulation::from_recipe(setup, &echo.recipes(d))?;
    let traj = simulate(&mut sim, t_final, rec)?;
    let along = |k: i64| {
        let mut v = vec![0; d];
        v[0] = k;
        v
    };
    let bursts_for = |k: i64| -> Result<ModeBursts> {
        let series = traj
            .mode_series(&along(k))
            .ok_or_else(|| Error::arg(format!("mode {k} is outside the lattice")))?;
        let amp: Vec<f64> = series.iter().map(|c| c.norm()).collect();
        Ok(detect_bursts(&traj.times, &amp, k, echo.eta0 / k.unsigned_abs() as f64))
    };
    let seed = bursts_for(k_seed)?;
    let driver = bursts_for(k_drv)?;
    let initial_seed = traj.mode_series(&along(k_seed)).map(|s| s[0].norm()).unwrap_or(0.0);
    let echo_amp = seed.nearest.map(|b| b.amplitude);
    let report = EchoReport {
        k_seed,
        k_drv,
        eta0: echo.eta0,
        echo_over_product: echo_amp
            .filter(|_| echo.eps_drv * echo.eps_seed != 0.0)
            .map(|a| a / (echo.eps_drv * echo.eps_seed)),
        echo_over_seed: echo_amp.filter(|_| initial_seed > 0.0).map(|a| a / initial_seed),
        seed,
        driver,
    };
    Ok((report, traj))
}

/// Toy echo-chain amplification `Π_{ℓ=1}^N Cεη/ℓ³` with `N = ⌊(εη)^{1/3}⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EchoChain {
    pub n: u64,
    /// `+∞` when `overflow` is set.
    pub amplification: f64,
    pub log_amplification: f64,
    /// Stirling form `(2π)^{-3/2}⟨x⟩^{-1/2}e^{3x^{1/3}}` with `x = Cεη`.
    pub stirling: f64,
    pub log_stirling: f64,
    pub overflow: bool,
}

pub fn echo_chain_prediction(eps: f64, eta: f64, c: f64) -> Result<EchoChain> {
    if !(eps > 0.0 && eta > 0.0 && c > 0.0) || !(eps * eta).is_finite() {
        return Err(Error::arg("eps, eta and C must be positive and finite"));
    }
    let base = eps * eta;
    let mut n = base.cbrt().floor() as u64;
    while ((n + 1) as f64).powi(3) <= base {
        n += 1;
    }
    while n > 0 && (n as f64).powi(3) > base {
        n -= 1;
    }
    let x = c * base;
    let log_amplification: f64 = (1..=n).map(|l| x.ln() - 3.0 * (l as f64).ln()).sum();
    let log_stirling = -1.5 * (2.0 * PI).ln() - 0.5 * (1.0 + x * x).sqrt().ln() + 3.0 * x.cbrt();
    let overflow = log_amplification > 700.0;
    Ok(EchoChain {
        n,
        amplification: if overflow { f64::INFINITY } else { log_amplification.exp() },
        log_amplification,
        stirling: if log_stirling > 700.0 { f64::INFINITY } else { log_stirling.exp() },
        log_stirling,
        overflow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n_x: usize, n_v: usize, v_max: f64, dt: f64) -> SimSetup {
        SimSetup {
            grid: PhaseSpaceGrid {
                d: 1,
                n_x,
                n_v,
                v_max,
                dt,
                t_final: 1.0,
            },
            equilibrium: EquilibriumSpec::maxwellian(1.0, 1.0),
            interaction: InteractionKernel::coulomb(),
            filter: false,
            boundary_limit: 1e-8,
        }
    }

    fn perturbed(eps: f64) -> Vec<ModeRecipe> {
        vec![ModeRecipe {
            k: vec![1],
            amplitude: eps,
            envelope: Envelope::Equilibrium,
        }]
    }

    #[test]
    fn homogeneous_state_has_no_field_and_stays_put() {
        let mut sim = Simulation::from_recipe(setup(8, 128, 8.0, 0.1), &[]).unwrap();
        let before = sim.values().to_vec();
        let c0 = sim.conserved();
        for _ in 0..10 {
            sim.step(0.1).unwrap();
        }
        assert!(sim.field().iter().all(|e| e[0].abs() < 1e-15));
        let err = before.iter().zip(sim.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-15, "{err}");
        let c1 = sim.conserved();
        assert!((c1.energy - c0.energy).abs() < 1e-14 * c0.energy);
    }

    #[test]
    fn cosine_density_gives_minus_sine_field() {
        let eps = 0.01;
        let sim = Simulation::from_recipe(setup(16, 256, 8.0, 0.1), &perturbed(eps)).unwrap();
        let dx = 2.0 * PI / 16.0;
        for (i, e) in sim.field().iter().enumerate() {
            assert!((e[0] + eps * (i as f64 * dx).sin()).abs() < 1e-12, "{i}");
        }
        let mut screened = setup(16, 256, 8.0, 0.1);
        screened.interaction = InteractionKernel::Screened;
        let s2 = Simulation::from_recipe(screened, &perturbed(eps)).unwrap();
        for (a, b) in sim.field().iter().zip(s2.field()) {
            if a[0].abs() > 1e-6 {
                assert!((b[0] / a[0] - 0.5).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_perturbation_keeps_zero_field() {
        let mut sim = Simulation::from_recipe(setup(8, 128, 8.0, 0.1), &perturbed(0.0)).unwrap();
        let traj = simulate(&mut sim, 2.0, &Recording::default()).unwrap();
        assert!(traj.e_norm.iter().all(|&e| e < 1e-15));
    }

    #[test]
    fn streaming_matches_exact_transport() {
        let mut s = setup(8, 256, 8.0, 0.1);
        s.interaction = InteractionKernel::Custom { by_norm_squared: vec![] };
        let recipes = vec![ModeRecipe {
            k: vec![1],
            amplitude: 0.1,
            envelope: Envelope::Gaussian { width: 1.0, eta0: 3.0 },
        }];
        let mut sim = Simulation::from_recipe(s, &recipes).unwrap();
        let g0 = sim.perturbation_field().unwrap();
        for _ in 0..7 {
            sim.step(0.1).unwrap();
        }
        let g1 = sim.perturbation_field().unwrap();
        // exact: ĝ(t, k, η) = ĝ(0, k, η + kt)
        let exact = free_transport_evolve(&g0, 0.7);
        let err = g1.data.iter().zip(&exact.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn spectral_snapshot_has_density_on_eta_zero() {
        let eps = 0.02;
        let sim = Simulation::from_recipe(setup(8, 256, 8.0, 0.1), &perturbed(eps)).unwrap();
        let g = sim.perturbation_field().unwrap();
        let (modes, rho) = sim.density_modes();
        let j0 = g.n_v / 2;
        for (k, r) in modes.iter().zip(&rho) {
            let expected = if k[0] == 0 { *r - 1.0 } else { *r };
            assert!((g.row(k[0]).unwrap()[j0] - expected).norm() < 1e-14, "{k:?}");
        }
        assert!((g.row(1).unwrap()[j0].re - eps / 2.0).abs() < 1e-14);
        assert!(g.is_conjugate_symmetric(1e-14));
    }

    #[test]
    fn spectral_recipe_matches_grid_transform() {
        let recipes = vec![
            ModeRecipe {
                k: vec![1],
                amplitude: 0.02,
                envelope: Envelope::Equilibrium,
            },
            ModeRecipe {
                k: vec![2],
                amplitude: 0.01,
                envelope: Envelope::Gaussian { width: 1.0, eta0: 5.0 },
            },
        ];
        let s = setup(8, 512, 10.0, 0.1);
        let sim = Simulation::from_recipe(s.clone(), &recipes).unwrap();
        let grid_side = sim.perturbation_field().unwrap();
        let exact = spectral_initial_data(&s.grid, &s.equilibrium, &recipes).unwrap();
        let err = grid_side.data.iter().zip(&exact.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-14, "{err}");
    }

    #[test]
    fn mass_conserved_and_reversible() {
        let mut sim = Simulation::from_recipe(setup(16, 256, 8.0, 0.05), &perturbed(0.05)).unwrap();
        let start = sim.values().to_vec();
        let m0 = sim.conserved().mass;
        for _ in 0..40 {
            sim.step(0.05).unwrap();
        }
        assert!((sim.conserved().mass - m0).abs() < 1e-13 * m0);
        sim.reverse_velocities();
        for _ in 0..40 {
            sim.step(0.05).unwrap();
        }
        sim.reverse_velocities();
        let err = start.iter().zip(sim.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn second_order_in_time() {
        let run = |dt: f64| {
            let mut s = setup(16, 256, 8.0, dt);
            s.grid.t_final = 2.0;
            let mut sim = Simulation::from_recipe(s, &perturbed(0.1)).unwrap();
            simulate(&mut sim, 2.0, &Recording::default()).unwrap().e_norm.last().copied().unwrap()
        };
        let (a, b, c) = (run(0.1), run(0.05), run(0.025));
        let ratio = (a - b).abs() / (b - c).abs();
        assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut sim = Simulation::from_recipe(setup(8, 64, 8.0, 0.1), &perturbed(0.01)).unwrap();
        sim.step(0.1).unwrap();
        let mut bytes = Vec::new();
        sim.write_checkpoint(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"LDKF");
        let ck = Checkpoint::read(&mut bytes.as_slice()).unwrap();
        assert_eq!(ck.t, sim.time());
        let back = Simulation::from_checkpoint(setup(8, 64, 8.0, 0.1), ck).unwrap();
        assert_eq!(back.values(), sim.values());
        assert!(Checkpoint::read(&mut &bytes[..20]).is_err());
        assert!(Simulation::from_checkpoint(setup(8, 128, 8.0, 0.1), Checkpoint::read(&mut bytes.as_slice()).unwrap()).is_err());
    }

    #[test]
    fn boundary_monitor_aborts() {
        let mut s = setup(8, 64, 3.0, 0.1);
        s.grid.t_final = 1.0;
        let mut sim = Simulation::from_recipe(s, &perturbed(0.01)).unwrap();
        assert!(matches!(
            simulate(&mut sim, 1.0, &Recording::default()),
            Err(Error::BoundaryMass { .. })
        ));
    }

    #[test]
    fn two_dimensional_run_conserves_mass() {
        let s = SimSetup {
            grid: PhaseSpaceGrid {
                d: 2,
                n_x: 8,
                n_v: 32,
                v_max: 7.0,
                dt: 0.1,
                t_final: 1.0,
            },
            equilibrium: EquilibriumSpec::maxwellian(1.0, 1.0).with_dim(2),
            interaction: InteractionKernel::coulomb(),
            filter: false,
            boundary_limit: 1e-6,
        };
        let recipes = vec![ModeRecipe {
            k: vec![1, 1],
            amplitude: 0.01,
            envelope: Envelope::Equilibrium,
        }];
        let mut sim = Simulation::from_recipe(s, &recipes).unwrap();
        let traj = simulate(&mut sim, 1.0, &Recording::default()).unwrap();
        let drift = traj.drift();
        assert!(drift.mass < 1e-13, "{drift:?}");
        assert!(traj.e_norm[0] > 0.0 && traj.e_norm.last().unwrap() < &traj.e_norm[0]);
        assert!(traj.mode_series(&[1, 1]).is_some());
    }

    #[test]
    fn burst_detection_finds_isolated_peak() {
        let times: Vec<f64> = (0..2000).map(|i| i as f64 * 0.1).collect();
        let amp: Vec<f64> = times
            .iter()
            .map(|t| 1e-12 * (1.0 + 0.3 * (7.0 * t).sin().abs()) + 1e-6 * (-(t - 150.0).powi(2)).exp())
            .collect();
        let b = detect_bursts(&times, &amp, 1, 150.0);
        let n = b.nearest.unwrap();
        assert!((n.time - 150.0).abs() < 0.11 && b.bursts.len() == 1);
        let flat: Vec<f64> = times.iter().map(|t| 1e-12 * (1.0 + 0.3 * (7.0 * t).sin().abs())).collect();
        assert!(detect_bursts(&times, &flat, 1, 150.0).bursts.is_empty());
    }

    #[test]
    fn echo_chain_examples() {
        let e = echo_chain_prediction(1e-3, 500.0, 1.0).unwrap();
        assert_eq!((e.n, e.amplification), (0, 1.0));
        let e = echo_chain_prediction(1e-3, 8000.0, 1.0).unwrap();
        assert_eq!(e.n, 2);
        assert!((e.amplification - 8.0).abs() < 1e-12);
        for x in [1000.0f64, 1331.0, 5000.0, 20000.0, 1e6] {
            let e = echo_chain_prediction(1.0, x, 1.0).unwrap();
            assert!(e.n >= 10);
            let r = (e.log_amplification - e.log_stirling).exp();
            assert!((0.5..=2.0).contains(&r), "x={x} ratio={r}");
        }
        let huge = echo_chain_prediction(1.0, 1e12, 1.0).unwrap();
        assert!(huge.overflow && huge.amplification.is_infinite() && huge.log_amplification.is_finite());
    }
}
