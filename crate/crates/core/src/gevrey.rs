//! Gevrey multipliers, bootstrap monitors, and numerical checks of the
//! frequency-space inequalities behind the nonlinear damping argument.
//!
//! Brackets are Euclidean: `⟨k, η⟩ = (1 + |k|² + |η|²)^{1/2}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::linear::SpectralField;
use crate::quadrature::integrate;
use crate::{bracket, par, Error, Result, C64};

/// Parameters of `A(t, k, η) = e^{λ(t)⟨k,η⟩^s}⟨k,η⟩^σ` with `λ(t) = λ_∞ + δ/⟨t⟩^a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GevreyParams {
    pub s: f64,
    pub lambda_inf: f64,
    pub delta: f64,
    pub a: f64,
    pub sigma: f64,
    pub b: f64,
    pub m: u32,
    pub d: usize,
}

impl Default for GevreyParams {
    fn default() -> Self {
        Self {
            s: 0.5,
            lambda_inf: 0.2,
            delta: 0.1,
            a: 0.05,
            sigma: 12.0,
            b: 5.0,
            m: 1,
            d: 1,
        }
    }
}

impl GevreyParams {
    pub fn validate(&self) -> Result<()> {
        let d = self.d as f64;
        let checks = [
            (self.s > 0.0 && self.s <= 1.0, "s must lie in (0, 1]"),
            (self.lambda_inf > 0.0, "lambda_inf must be positive"),
            (self.delta > 0.0, "delta must be positive"),
            (self.a > 0.0 && self.a < 1.0, "a must lie in (0, 1)"),
            (self.sigma > 10.0 + d, "sigma must exceed 10 + d"),
            (f64::from(self.m) > d / 2.0, "m must exceed d/2"),
            (self.b > 4.0 && self.b < self.sigma - 2.0, "b must lie in (4, sigma - 2)"),
            (self.d == 1 || self.d == 2, "d must be 1 or 2"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::arg(*msg)),
            None => Ok(()),
        }
    }

    /// `λ(t) = λ_∞ + δ/⟨t⟩^a`.
    pub fn lambda(&self, t: f64) -> f64 {
        self.lambda_inf + self.delta / bracket(&[t]).powf(self.a)
    }

    /// `log A(t, k, η) = λ(t)⟨k,η⟩^s + σ log⟨k,η⟩`.
    pub fn log_multiplier(&self, t: f64, k: &[f64], eta: &[f64]) -> f64 {
        log_weight(self.lambda(t), self.s, self.sigma, frequency_bracket(k, eta))
    }

    /// `A(t, k, η)`; `+∞` once the logarithm passes 700 (use [`Self::log_multiplier`] there).
    pub fn multiplier_a(&self, t: f64, k: &[f64], eta: &[f64]) -> f64 {
        exp_or_inf(self.log_multiplier(t, k, eta))
    }

    /// Whether `1 + a ≤ 3s`, the regularity threshold of the Schur-sum argument.
    pub fn meets_regularity_threshold(&self) -> bool {
        1.0 + self.a <= 3.0 * self.s
    }
}

fn frequency_bracket(k: &[f64], eta: &[f64]) -> f64 {
    (1.0 + crate::dot(k, k) + crate::dot(eta, eta)).sqrt()
}

/// `λ⟨·⟩^s + σ log⟨·⟩` for a precomputed bracket.
pub fn log_weight(lambda: f64, s: f64, sigma: f64, br: f64) -> f64 {
    lambda * br.powf(s) + sigma * br.ln()
}

fn exp_or_inf(x: f64) -> f64 {
    if x > 700.0 {
        f64::INFINITY
    } else {
        x.exp()
    }
}

/// Centered fourth-order `∂_η` on a lattice row, with zeros beyond both ends.
pub fn eta_derivative(row: &[C64], d_eta: f64) -> Vec<C64> {
    let n = row.len() as isize;
    let at = |j: isize| {
        if (0..n).contains(&j) {
            row[j as usize]
        } else {
            C64::new(0.0, 0.0)
        }
    };
    let c = 1.0 / (12.0 * d_eta);
    (0..n)
        .map(|j| (at(j - 2) - 8.0 * at(j - 1) + 8.0 * at(j + 1) - at(j + 2)) * c)
        .collect()
}

/// A weighted norm together with its logarithm and quality flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GevreyNorm {
    /// `+∞` when `overflow` is set.
    pub value: f64,
    pub log_value: f64,
    /// More than 1% of the squared norm sits in the outer octave `|η| > η_max/2`.
    pub tail_dominated: bool,
    pub overflow: bool,
}

/// Accumulates `Σ w_i` given `log w_i`, in log space.
#[derive(Default)]
struct LogSum {
    terms: Vec<f64>,
    tail: Vec<f64>,
}

impl LogSum {
    fn push(&mut self, log_w: f64, in_tail: bool) {
        if log_w.is_finite() {
            self.terms.push(log_w);
            if in_tail {
                self.tail.push(log_w);
            }
        }
    }

    fn log_total(terms: &[f64]) -> f64 {
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + terms.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
    }

    /// Returns the norm from the accumulated squared-norm terms.
    fn finish(self) -> GevreyNorm {
        let log_sq = Self::log_total(&self.terms);
        let log_tail = Self::log_total(&self.tail);
        let log_value = 0.5 * log_sq;
        let overflow = log_value > 700.0;
        GevreyNorm {
            value: if log_sq == f64::NEG_INFINITY {
                0.0
            } else {
                exp_or_inf(log_value)
            },
            log_value,
            tail_dominated: log_tail > log_sq + 0.01f64.ln(),
            overflow,
        }
    }
}

/// `(Σ_k ∫ |e^{λ⟨k,η⟩^s}⟨k,η⟩^σ f̂(k,η)|² dη)^{1/2}` on the lattice, so a single
/// coefficient `c` at `(k₀, η₀)` contributes `|c|·√Δη·A`.
pub fn gevrey_norm(field: &SpectralField, lambda: f64, s: f64, sigma: f64) -> GevreyNorm {
    let half = 0.5 * field.eta(0).abs();
    let mut acc = LogSum::default();
    for (ki, k) in field.modes().enumerate() {
        for j in 0..field.n_v {
            let c = field.data[ki * field.n_v + j];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let eta = field.eta(j);
            let lw = log_weight(lambda, s, sigma, bracket(&[k as f64, eta]));
            acc.push(2.0 * (lw + c.norm().ln()) + field.d_eta.ln(), eta.abs() > half);
        }
    }
    acc.finish()
}

/// `‖⟨v⟩^m M f‖` with `M` applied as the lattice multiplier `exp(log_mult(k, η))`;
/// `⟨v⟩^{2m} = Σ_j C(m,j) v^{2j}` and `v^j ↔ (i∂_η)^j`.
pub fn velocity_weighted_norm(field: &SpectralField, m: u32, log_mult: impl Fn(i64, f64) -> f64) -> GevreyNorm {
    let half = 0.5 * field.eta(0).abs();
    let mut acc = LogSum::default();
    for (ki, k) in field.modes().enumerate() {
        let row = &field.data[ki * field.n_v..(ki + 1) * field.n_v];
        if row.iter().all(|c| *c == C64::new(0.0, 0.0)) {
            continue;
        }
        // scale rows to O(1) before differentiating so the weights cannot overflow
        let logs: Vec<f64> = (0..field.n_v).map(|j| log_mult(k, field.eta(j))).collect();
        let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut h: Vec<C64> = row.iter().zip(&logs).map(|(c, l)| c * (l - shift).exp()).collect();
        let mut binom = 1.0;
        for j in 0..=m {
            if j > 0 {
                h = eta_derivative(&h, field.d_eta);
                binom *= f64::from(m - j + 1) / f64::from(j);
            }
            for (i, c) in h.iter().enumerate() {
                if *c != C64::new(0.0, 0.0) {
                    acc.push(
                        binom.ln() + 2.0 * (c.norm().ln() + shift) + field.d_eta.ln(),
                        field.eta(i).abs() > half,
                    );
                }
            }
        }
    }
    acc.finish()
}

// ---------------------------------------------------------------------------
// bootstrap monitors

/// Density history and profile snapshots of a perturbation, as consumed by
/// [`bootstrap_series`]. The profile is the perturbation pulled back along free
/// transport, `F̂(t, k, η) = ĝ(t, k, η + kt)`, without the equilibrium.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapInput<'a> {
    pub times: &'a [f64],
    pub modes: &'a [i64],
    /// `rho[m][i] = ρ̂(times[i], modes[m])`.
    pub rho: &'a [Vec<C64>],
    pub profiles: &'a [(f64, SpectralField)],
}

/// Running values of the two bootstrap quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSeries {
    pub times: Vec<f64>,
    /// `‖⟨τ⟩^b A ρ‖_{L²(0,t; L²_x)}`.
    pub density: Vec<f64>,
    pub profile_times: Vec<f64>,
    /// `sup_{τ ≤ t} ‖⟨v⟩^m ⟨∇_{x,v}⟩ A f(τ)‖_{L²_{x,v}}`.
    pub profile: Vec<f64>,
    /// No snapshot had more than 1% of its weighted norm in the outer η octave.
    pub reliable: bool,
}

/// Default for [`bootstrap_series`]: about `10⁴` machine epsilons relative to an O(1)
/// distribution, above the round-off that accumulates over a few thousand steps.
pub const DEFAULT_NOISE_FLOOR: f64 = 1e-12;

/// Coefficients below `noise_floor` in absolute value are treated as round-off
/// and excluded; without this the weights (`⟨k,η⟩^σ` with `σ ≈ 12`) turn
/// machine-epsilon noise on high modes into the dominant contribution.
pub fn bootstrap_series(input: &BootstrapInput<'_>, p: &GevreyParams, noise_floor: f64) -> Result<BootstrapSeries> {
    p.validate()?;
    if input.rho.len() != input.modes.len() || input.rho.iter().any(|r| r.len() != input.times.len()) {
        return Err(Error::arg("density history does not match its mode and time lists"));
    }
    let weighted = |i: usize| -> f64 {
        let t = input.times[i];
        let tb = bracket(&[t]).powf(p.b);
        let mut s = 0.0;
        for (m, &k) in input.modes.iter().enumerate() {
            let r = input.rho[m][i];
            if k == 0 || r.norm() < noise_floor {
                continue;
            }
            let kf = k as f64;
            let log_a = p.log_multiplier(t, &[kf], &[kf * t]);
            s += (log_a + tb.ln() + r.norm().ln()).exp().powi(2);
        }
        2.0 * PI * s
    };
    let integrand: Vec<f64> = (0..input.times.len()).map(weighted).collect();
    let mut density = Vec::with_capacity(integrand.len());
    let mut acc = 0.0;
    for i in 0..integrand.len() {
        if i > 0 {
            acc += 0.5 * (input.times[i] - input.times[i - 1]) * (integrand[i] + integrand[i - 1]);
        }
        density.push(acc.sqrt());
    }

    let norms = par::map_slice(input.profiles, |(t, f)| {
        let mut cleaned = f.clone();
        for c in &mut cleaned.data {
            if c.norm() < noise_floor {
                *c = C64::new(0.0, 0.0);
            }
        }
        let t = *t;
        velocity_weighted_norm(&cleaned, p.m, |k, eta| {
            let kf = k as f64;
            p.log_multiplier(t, &[kf], &[eta]) + frequency_bracket(&[kf], &[eta]).ln()
        })
    });
    let mut profile = Vec::with_capacity(norms.len());
    let mut sup: f64 = 0.0;
    let mut reliable = true;
    for n in &norms {
        sup = sup.max(n.value);
        reliable &= !n.tail_dominated;
        profile.push(sup);
    }
    Ok(BootstrapSeries {
        times: input.times.to_vec(),
        density,
        profile_times: input.profiles.iter().map(|(t, _)| *t).collect(),
        profile,
        reliable,
    })
}

/// Scale against which bootstrap quantities are judged: a run is flagged once
/// either quantity exceeds `multiple · K₀ · ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapNormalization {
    pub k0_density: f64,
    pub k0_profile: f64,
    pub epsilon: f64,
    pub multiple: f64,
}

impl BootstrapNormalization {
    /// `K₀` per quantity from a reference run (normally the linearized
    /// prediction for the same data): `K₀ = sup_t Q_ref(t) / ε`.
    pub fn from_reference(reference: &BootstrapSeries, epsilon: f64, multiple: f64) -> Self {
        let sup = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        Self {
            k0_density: sup(&reference.density) / epsilon,
            k0_profile: sup(&reference.profile) / epsilon,
            epsilon,
            multiple,
        }
    }
}

/// Monitor verdict: the series normalized by `K₀ε` and the first exceedance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapReport {
    pub series: BootstrapSeries,
    pub normalization: BootstrapNormalization,
    /// `Q(t) / (K₀ ε)` for each quantity.
    pub density_ratio: Vec<f64>,
    pub profile_ratio: Vec<f64>,
    pub max_density_ratio: f64,
    pub max_profile_ratio: f64,
    /// First time either ratio exceeds `multiple`.
    pub exceeded_at: Option<f64>,
}

pub fn bootstrap_monitor(series: BootstrapSeries, normalization: BootstrapNormalization) -> BootstrapReport {
    let scale = |q: &[f64], k0: f64| -> Vec<f64> {
        let unit = k0 * normalization.epsilon;
        q.iter()
            .map(|&x| if x == 0.0 { 0.0 } else if unit > 0.0 { x / unit } else { f64::INFINITY })
            .collect()
    };
    let density_ratio = scale(&series.density, normalization.k0_density);
    let profile_ratio = scale(&series.profile, normalization.k0_profile);
    let first = |t: &[f64], r: &[f64]| t.iter().zip(r).find(|(_, &x)| x > normalization.multiple).map(|(t, _)| *t);
    let exceeded_at = match (first(&series.times, &density_ratio), first(&series.profile_times, &profile_ratio)) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    BootstrapReport {
        max_density_ratio: max(&density_ratio),
        max_profile_ratio: max(&profile_ratio),
        density_ratio,
        profile_ratio,
        exceeded_at,
        normalization,
        series,
    }
}

// ---------------------------------------------------------------------------
// triangle inequalities

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleOptions {
    pub s: f64,
    /// The `K` in the side conditions `|x - y| ≤ x/K` and `y ≤ x ≤ Ky`.
    pub k: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Worst observed ratios of left to right side; the second and third must not exceed 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriangleReport {
    /// `sup |x^s - y^s|(x^{1-s} + y^{1-s})/|x - y|`; at most 2 for every `s`.
    pub first: f64,
    /// `sup |x^s - y^s| / (s (K-1)^{s-1} |x-y|^s)` over `|x - y| ≤ x/K`.
    pub second: f64,
    pub second_coefficient: f64,
    /// `sup (x+y)^s / ((K/(1+K))^{1-s}(x^s + y^s))` over `y ≤ x ≤ Ky`.
    pub third: f64,
    pub samples: usize,
}

impl TriangleReport {
    /// Hard check with a few ulps of slack for rounding in the equality cases.
    pub fn holds(&self) -> bool {
        let slack = 1.0 + 1e-12;
        self.first <= 2.0 * slack && self.second <= slack && self.third <= slack
    }
}

pub fn triangle_ineq_check(opts: &TriangleOptions) -> Result<TriangleReport> {
    let (s, kk) = (opts.s, opts.k);
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::arg("s must lie in (0, 1)"));
    }
    if !(kk > 1.0 && kk.is_finite()) {
        return Err(Error::arg("K must exceed 1"));
    }
    let coef2 = s / (kk - 1.0).powf(1.0 - s);
    let coef3 = (kk / (1.0 + kk)).powf(1.0 - s);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let log_uniform = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-6.0..6.0));
    let (mut r1, mut r2, mut r3) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..opts.samples {
        // every 64th sample exercises the equality cases exactly
        let exact = i % 64 == 0;
        let x = log_uniform(&mut rng);
        let y = if exact { x } else { log_uniform(&mut rng) };
        if x != y {
            let lhs = (x.powf(s) - y.powf(s)).abs();
            r1 = r1.max(lhs * (x.powf(1.0 - s) + y.powf(1.0 - s)) / (x - y).abs());
        }

        let u: f64 = if exact { 0.0 } else { rng.random_range(-1.0..=1.0) };
        let y2 = x * (1.0 + u / kk);
        let gap = (x - y2).abs();
        if gap > 0.0 && gap <= x / kk {
            r2 = r2.max((x.powf(s) - y2.powf(s)).abs() / (coef2 * gap.powf(s)));
        }

        let w: f64 = if exact { 0.0 } else { rng.random_range(0.0..=1.0) };
        let x3 = (x * (1.0 + (kk - 1.0) * w)).min(kk * x);
        r3 = r3.max((x3 + x).powf(s) / (coef3 * (x3.powf(s) + x.powf(s))));
    }
    Ok(TriangleReport {
        first: r1,
        second: r2,
        second_coefficient: coef2,
        third: r3,
        samples: opts.samples,
    })
}

// ---------------------------------------------------------------------------
// product rule

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductRuleOptions {
    pub s: f64,
    pub lambda: f64,
    pub d: usize,
    pub trials: usize,
    /// Coefficients live on `|k|_∞ ≤ band`.
    pub band: usize,
    pub seed: u64,
}

/// `c = (8/9)^{1-s}`, the comparable-frequency constant from the third triangle
/// inequality with `K = 8`; it dominates the `K = 7` constant of the second one.
pub fn product_rule_constant(s: f64) -> f64 {
    (8.0f64 / 9.0).powf(1.0 - s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductRuleReport {
    /// Empirical `K`: the largest observed `LHS / RHS` with unit constant.
    pub ratio: f64,
    pub c: f64,
    /// The `d/2+` exponent used, `d/2 + 1/2`.
    pub sobolev_exponent: f64,
    pub trials: usize,
}

/// A trigonometric polynomial on `𝕋^d` by its (normalized) coefficients.
struct Poly {
    d: usize,
    band: i64,
    coef: Vec<C64>,
}

impl Poly {
    fn side(&self) -> i64 {
        2 * self.band + 1
    }

    fn modes(&self) -> impl Iterator<Item = (usize, [i64; 2])> + '_ {
        let side = self.side();
        (0..self.coef.len()).map(move |i| {
            let i = i as i64;
            let k = if self.d == 1 {
                [i - self.band, 0]
            } else {
                [i % side - self.band, i / side - self.band]
            };
            (i as usize, k)
        })
    }

    /// `‖m(D) p‖_{L²(𝕋^d)} = (2π)^{d/2} (Σ |m(k) p̂(k)|²)^{1/2}`.
    fn norm(&self, weight: impl Fn([i64; 2]) -> f64) -> f64 {
        let s: f64 = self.modes().map(|(i, k)| (weight(k) * self.coef[i].norm()).powi(2)).sum();
        (2.0 * PI).powf(self.d as f64 / 2.0) * s.sqrt()
    }
}

fn abs_k(k: [i64; 2]) -> f64 {
    ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt()
}

/// `‖e^{λ|∇|^s}(fg)‖ / (‖⟨∇⟩^{d/2+} e^{cλ|∇|^s} f‖‖e^{λ|∇|^s} g‖ + (f ↔ g))`.
fn product_ratio(f: &Poly, g: &Poly, s: f64, lambda: f64, c: f64, r: f64) -> f64 {
    let full = |k: [i64; 2]| (lambda * abs_k(k).powf(s)).exp();
    let weak = |k: [i64; 2]| (1.0 + abs_k(k).powi(2)).powf(r / 2.0) * (c * lambda * abs_k(k).powf(s)).exp();
    let mut prod = std::collections::BTreeMap::<[i64; 2], C64>::new();
    for (i, k) in f.modes() {
        if f.coef[i] == C64::new(0.0, 0.0) {
            continue;
        }
        for (j, l) in g.modes() {
            if g.coef[j] != C64::new(0.0, 0.0) {
                *prod.entry([k[0] + l[0], k[1] + l[1]]).or_default() += f.coef[i] * g.coef[j];
            }
        }
    }
    let lhs2: f64 = prod.iter().map(|(k, v)| (full(*k) * v.norm()).powi(2)).sum();
    let lhs = (2.0 * PI).powf(f.d as f64 / 2.0) * lhs2.sqrt();
    let rhs = f.norm(weak) * g.norm(full) + g.norm(weak) * f.norm(full);
    lhs / rhs
}

fn random_poly(rng: &mut ChaCha8Rng, d: usize, band: i64, s: f64, lambda: f64) -> Poly {
    let side = 2 * band + 1;
    let len = if d == 1 { side } else { side * side } as usize;
    let mut p = Poly {
        d,
        band,
        coef: vec![C64::new(0.0, 0.0); len],
    };
    // a handful of active modes with random Gevrey-type decay probes concentrated spectra
    let active = rng.random_range(1..=6);
    let decay = rng.random_range(0.0..2.0 * lambda);
    for _ in 0..active {
        let i = rng.random_range(0..len);
        let k = p.modes().nth(i).unwrap().1;
        let amp = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        p.coef[i] += amp * (-decay * abs_k(k).powf(s)).exp();
    }
    p
}

pub fn product_rule_check(opts: &ProductRuleOptions) -> Result<ProductRuleReport> {
    if !(opts.s > 0.0 && opts.s < 1.0 && opts.lambda > 0.0) {
        return Err(Error::arg("need s in (0, 1) and lambda > 0"));
    }
    if !(opts.d == 1 || opts.d == 2) || opts.band == 0 || opts.trials == 0 {
        return Err(Error::arg("need d in {1, 2}, band >= 1 and trials >= 1"));
    }
    let c = product_rule_constant(opts.s);
    let r = opts.d as f64 / 2.0 + 0.5;
    let band = opts.band as i64;
    let ratios = par::map_indexed(opts.trials, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let f = random_poly(&mut rng, opts.d, band, opts.s, opts.lambda);
        let g = random_poly(&mut rng, opts.d, band, opts.s, opts.lambda);
        product_ratio(&f, &g, opts.s, opts.lambda, c, r)
    });
    Ok(ProductRuleReport {
        ratio: ratios.into_iter().fold(0.0, f64::max),
        c,
        sobolev_exponent: r,
        trials: opts.trials,
    })
}

/// Closed-form `LHS/RHS` for `f = g = e^{ik₀·x}` in `d = 1`.
pub fn product_rule_single_mode(k0: i64, s: f64, lambda: f64) -> f64 {
    let k = k0.unsigned_abs() as f64;
    let c = product_rule_constant(s);
    let lhs = (lambda * (2.0 * k).powf(s)).exp();
    let rhs = 2.0 * (2.0 * PI).sqrt() * (1.0 + k * k).powf(0.5) * ((1.0 + c) * lambda * k.powf(s)).exp();
    lhs / rhs
}

// ---------------------------------------------------------------------------
// Schur sums

/// Truncation and quadrature settings for [`schur_kernel_sum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchurOptions {
    pub k_max: i64,
    pub t_max: f64,
    /// Number of outer time samples over which the suprema are taken.
    pub n_times: usize,
    /// Relative change under doubling `(k_max, t_max)` below which the sums count as converged.
    pub cauchy_tolerance: f64,
}

impl Default for SchurOptions {
    fn default() -> Self {
        Self {
            k_max: 8,
            t_max: 50.0,
            n_times: 24,
            cauchy_tolerance: 0.05,
        }
    }
}

/// `|K(t, τ, k, ℓ)|` in `d = 1`, with the gap constant `δλ` read as `δ·λ_∞`.
pub fn schur_kernel(p: &GevreyParams, t: f64, tau: f64, k: i64, l: i64) -> f64 {
    if tau > t || l == 0 {
        return 0.0;
    }
    let (kf, lf) = (k as f64, l as f64);
    let ratio = (bracket(&[t]) / bracket(&[tau])).powf(p.b);
    let shear = (kf * lf).abs() * (t - tau) / (lf * lf);
    let gap = -p.delta * p.lambda_inf * bracket(&[kf - lf, kf * t - lf * tau]).powf(p.s);
    let memory = (p.lambda(t) - p.lambda(tau)) * bracket(&[kf, kf * t]).powf(p.s);
    ratio * shear * (gap + memory).exp()
}

/// Both Schur norms at one truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchurSums {
    /// `sup_{t,k} Σ_ℓ ∫₀^t K dτ`.
    pub row: f64,
    /// `sup_{τ,ℓ} Σ_k ∫_τ^T K dt`.
    pub column: f64,
    pub k_max: i64,
    pub t_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchurReport {
    pub coarse: SchurSums,
    pub fine: SchurSums,
    /// Larger relative change of the two norms between the truncations.
    pub relative_change: f64,
    pub cauchy: bool,
    /// Set when the sums grew by more than the tolerance under doubling.
    pub divergent: bool,
}

/// Integrates a non-negative kernel slice, splitting at the resonance where
/// the gap exponent is smallest.
fn kernel_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, split: Option<f64>) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let g = |x: f64| C64::new(f(x), 0.0);
    let mut points = vec![a];
    if let Some(c) = split.filter(|c| *c > a && *c < b) {
        points.push(c);
    }
    points.push(b);
    points
        .windows(2)
        .map(|w| {
            let rough = integrate(&g, w[0], w[1], f64::INFINITY).value.re.abs();
            integrate(&g, w[0], w[1], 1e-8 * rough.max(1e-300)).value.re
        })
        .sum()
}

fn nonzero_modes(k_max: i64) -> Vec<i64> {
    (-k_max..=k_max).filter(|&k| k != 0).collect()
}

/// Schur norms of the kernel at `(k_max, t_max)` only.
pub fn schur_sums(p: &GevreyParams, k_max: i64, t_max: f64, n_times: usize) -> Result<SchurSums> {
    p.validate()?;
    if k_max < 1 || !(t_max > 0.0) || n_times == 0 {
        return Err(Error::arg("need k_max >= 1, t_max > 0 and at least one time sample"));
    }
    let modes = nonzero_modes(k_max);
    let times: Vec<f64> = (1..=n_times).map(|i| t_max * i as f64 / n_times as f64).collect();
    // positive k suffices for the row sums: K(t, τ, -k, -ℓ) = K(t, τ, k, ℓ)
    let rows: Vec<(f64, i64)> = times.iter().flat_map(|&t| (1..=k_max).map(move |k| (t, k))).collect();
    let row = par::map_slice(&rows, |&(t, k)| {
        modes
            .iter()
            .map(|&l| {
                kernel_integral(|tau| schur_kernel(p, t, tau, k, l), 0.0, t, Some(k as f64 * t / l as f64))
            })
            .sum::<f64>()
    });
    let columns: Vec<(f64, i64)> = std::iter::once(0.0)
        .chain(times.iter().copied().filter(|&t| t < t_max))
        .flat_map(|tau| (1..=k_max).map(move |l| (tau, l)))
        .collect();
    let column = par::map_slice(&columns, |&(tau, l)| {
        modes
            .iter()
            .map(|&k| {
                kernel_integral(|t| schur_kernel(p, t, tau, k, l), tau, t_max, Some(l as f64 * tau / k as f64))
            })
            .sum::<f64>()
    });
    let sup = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    Ok(SchurSums {
        row: sup(row),
        column: sup(column),
        k_max,
        t_max,
    })
}

/// Schur norms at `(k_max, t_max)` and `(2k_max, 2t_max)` with a Cauchy verdict.
pub fn schur_kernel_sum(p: &GevreyParams, opts: &SchurOptions) -> Result<SchurReport> {
    let coarse = schur_sums(p, opts.k_max, opts.t_max, opts.n_times)?;
    let fine = schur_sums(p, 2 * opts.k_max, 2.0 * opts.t_max, 2 * opts.n_times)?;
    let rel = |a: f64, b: f64| if b == 0.0 { 0.0 } else { (b - a).abs() / b };
    let relative_change = rel(coarse.row, fine.row).max(rel(coarse.column, fine.column));
    let cauchy = relative_change <= opts.cauchy_tolerance && fine.row.is_finite() && fine.column.is_finite();
    Ok(SchurReport {
        coarse,
        fine,
        relative_change,
        cauchy,
        divergent: !cauchy,
    })
}

/// The diagonal contribution `∫_{t/2}^t K(t, τ, k, k) dτ`.
pub fn schur_diagonal(p: &GevreyParams, t: f64, k: i64) -> f64 {
    kernel_integral(|tau| schur_kernel(p, t, tau, k, k), 0.5 * t, t, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn multiplier_examples() {
        let p = GevreyParams::default();
        assert!((p.multiplier_a(3.0, &[0.0], &[0.0]) - p.lambda(3.0).exp()).abs() < 1e-15);
        let q = GevreyParams {
            sigma: 0.0,
            s: 1.0,
            ..p
        };
        let lw = log_weight(1.0, q.s, q.sigma, bracket(&[3.0, 4.0]));
        assert!((lw.exp() - 26f64.sqrt().exp()).abs() < 1e-12);
        assert!(p.multiplier_a(0.0, &[1e9], &[1e9]).is_infinite());
        assert!(p.log_multiplier(0.0, &[1e9], &[1e9]).is_finite());
    }

    #[test]
    fn params_validate() {
        assert!(GevreyParams::default().validate().is_ok());
        assert!(GevreyParams::default().meets_regularity_threshold());
        let bad = GevreyParams {
            b: 11.0,
            ..GevreyParams::default()
        };
        assert!(bad.validate().is_err());
        assert!(!GevreyParams {
            s: 0.2,
            ..GevreyParams::default()
        }
        .meets_regularity_threshold());
    }

    #[test]
    fn derivative_is_fourth_order() {
        let h = 0.05;
        let row: Vec<C64> = (0..200).map(|j| C64::new((j as f64 * h).sin(), 0.0)).collect();
        let d = eta_derivative(&row, h);
        for j in 2..198 {
            assert!((d[j].re - (j as f64 * h).cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn norm_single_coefficient_and_plain_l2() {
        let mut f = SpectralField::zeros(4, 16, 0.5);
        let j = 11;
        let eta = f.eta(j);
        f.row_mut(1).unwrap()[j] = C64::new(3.0, 4.0) / 0.5f64.sqrt();
        let n = gevrey_norm(&f, 0.3, 0.5, 2.0);
        let expected = 5.0 * log_weight(0.3, 0.5, 2.0, bracket(&[1.0, eta])).exp();
        assert!((n.value - expected).abs() < 1e-12 * expected);

        let g = SpectralField::from_fn(4, 64, 0.25, |k, e| C64::new((-(e * e)).exp() * (k as f64 + 1.5), 0.2));
        assert!((gevrey_norm(&g, 0.0, 0.5, 0.0).value - g.l2_norm()).abs() < 1e-12 * g.l2_norm());
        assert_eq!(gevrey_norm(&SpectralField::zeros(2, 8, 1.0), 1.0, 0.5, 3.0).value, 0.0);
    }

    #[test]
    fn norm_of_gaussian_matches_quadrature() {
        let (lambda, s, sigma) = (0.4, 0.5, 3.0);
        let f = SpectralField::from_fn(2, 4096, 0.01, |k, e| {
            if k == 0 {
                C64::new((-e * e / 2.0).exp(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let exact = integrate(
            &|e: f64| C64::new((2.0 * log_weight(lambda, s, sigma, bracket(&[e])) - e * e).exp(), 0.0),
            -20.0,
            20.0,
            1e-13,
        )
        .value
        .re
        .sqrt();
        let n = gevrey_norm(&f, lambda, s, sigma);
        assert!((n.value - exact).abs() < 1e-6 * exact, "{} {}", n.value, exact);
        assert!(!n.tail_dominated);
    }

    #[test]
    fn overflow_is_reported_in_log_space() {
        let mut f = SpectralField::zeros(2, 8, 1.0);
        f.data[3] = C64::new(1.0, 0.0);
        let n = gevrey_norm(&f, 2000.0, 1.0, 0.0);
        assert!(n.overflow && n.value.is_infinite());
        assert!((n.log_value - 2000.0 * bracket(&[-1.0, f.eta(3)])).abs() < 1e-9);
    }

    #[test]
    fn weighted_norm_counts_velocity_moment() {
        // ⟨v⟩ weight on e^{-η²/2}: ‖ĥ‖² + ‖∂_η ĥ‖² = √π (1 + 1/2)
        let f = SpectralField::from_fn(1, 4000, 0.005, |_, e| C64::new((-e * e / 2.0).exp(), 0.0));
        let n = velocity_weighted_norm(&f, 1, |_, _| 0.0);
        let exact = (PI.sqrt() * 1.5).sqrt();
        assert!((n.value - exact).abs() < 1e-8, "{} {exact}", n.value);
    }

    #[test]
    fn zero_solution_gives_zero_series() {
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let rho = vec![vec![C64::new(0.0, 0.0); times.len()]; 2];
        let profiles: Vec<(f64, SpectralField)> = times.iter().map(|&t| (t, SpectralField::zeros(4, 32, 0.3))).collect();
        let input = BootstrapInput {
            times: &times,
            modes: &[-1, 1],
            rho: &rho,
            profiles: &profiles,
        };
        let s = bootstrap_series(&input, &GevreyParams::default(), 0.0).unwrap();
        assert!(s.density.iter().chain(&s.profile).all(|&x| x == 0.0));
        let r = bootstrap_monitor(s, BootstrapNormalization {
            k0_density: 1.0,
            k0_profile: 1.0,
            epsilon: 1e-3,
            multiple: 10.0,
        });
        assert_eq!(r.exceeded_at, None);
    }

    #[test]
    fn monitor_flags_exceedance() {
        let times: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let mk = |amp: f64| -> Vec<Vec<C64>> { vec![times.iter().map(|t| C64::new(amp * (-t).exp(), 0.0)).collect()] };
        let small = mk(1e-3);
        let big = mk(0.5);
        let input = |rho: &[Vec<C64>]| {
            bootstrap_series(
                &BootstrapInput {
                    times: &times,
                    modes: &[1],
                    rho,
                    profiles: &[],
                },
                &GevreyParams::default(),
                0.0,
            )
            .unwrap()
        };
        let norm = BootstrapNormalization::from_reference(&input(&small), 1e-3, 10.0);
        let calm = bootstrap_monitor(input(&small), norm);
        assert!(calm.exceeded_at.is_none() && (calm.max_density_ratio - 1.0).abs() < 1e-12);
        let wild = bootstrap_monitor(input(&big), norm);
        assert!(wild.exceeded_at.is_some());
    }

    #[test]
    fn triangle_inequalities_hold() {
        let r = triangle_ineq_check(&TriangleOptions {
            s: 0.5,
            k: 4.0,
            samples: 100_000,
            seed: 7,
        })
        .unwrap();
        assert!(r.holds(), "{r:?}");
        assert!((r.second_coefficient - 0.5 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn triangle_equality_case_is_tight() {
        // K → 1⁺ and x = y: (x+y)^s = (1/2)^{1-s}(x^s + y^s)
        let r = triangle_ineq_check(&TriangleOptions {
            s: 0.3,
            k: 1.0 + 1e-12,
            samples: 1000,
            seed: 1,
        })
        .unwrap();
        assert!((r.third - 1.0).abs() < 1e-9, "{}", r.third);
    }

    #[test]
    fn product_rule_single_mode_closed_form() {
        let mut f = Poly {
            d: 1,
            band: 6,
            coef: vec![C64::new(0.0, 0.0); 13],
        };
        f.coef[6 + 4] = C64::new(1.0, 0.0);
        let (s, lambda) = (0.5, 1.0);
        let r = product_ratio(&f, &f, s, lambda, product_rule_constant(s), 1.0);
        assert!((r - product_rule_single_mode(4, s, lambda)).abs() < 1e-12 * r);
    }

    #[test]
    fn product_rule_constant_g() {
        // g constant: LHS = |g|·‖e^{λ|∇|^s} f‖, which the second RHS term already exceeds by (2π)^{1/2}
        let (s, lambda) = (0.5, 1.0);
        let mut f = Poly {
            d: 1,
            band: 4,
            coef: vec![C64::new(0.0, 0.0); 9],
        };
        f.coef[4 + 3] = C64::new(1.0, 0.0);
        let mut g = Poly {
            d: 1,
            band: 4,
            coef: vec![C64::new(0.0, 0.0); 9],
        };
        g.coef[4] = C64::new(2.0, 0.0);
        let r = product_ratio(&f, &g, s, lambda, product_rule_constant(s), 1.0);
        assert!(r > 0.0 && r <= 1.0 / (2.0 * PI).sqrt());
    }

    #[test]
    fn product_rule_random_trials_bounded() {
        let r = product_rule_check(&ProductRuleOptions {
            s: 0.5,
            lambda: 1.0,
            d: 2,
            trials: 50,
            band: 4,
            seed: 3,
        })
        .unwrap();
        assert!(r.ratio.is_finite() && r.ratio > 0.0 && r.ratio < 10.0, "{r:?}");
    }

    #[test]
    fn schur_diagonal_bounded() {
        let p = GevreyParams {
            delta: 1.0,
            ..GevreyParams::default()
        };
        let a = schur_diagonal(&p, 50.0, 2);
        let b = schur_diagonal(&p, 200.0, 2);
        assert!(a.is_finite() && b.is_finite() && b < 1e4);
        assert_eq!(schur_kernel(&p, 1.0, 2.0, 1, 1), 0.0);
    }

    proptest! {
        #[test]
        fn multiplier_decreases_in_time(t in 0.0..500.0f64, dt in 0.01..100.0f64, k in -20i64..20, eta in -200.0..200.0f64) {
            let p = GevreyParams::default();
            let a = p.log_multiplier(t, &[k as f64], &[eta]);
            let b = p.log_multiplier(t + dt, &[k as f64], &[eta]);
            prop_assert!(b <= a);
            let br = bracket(&[k as f64, eta]);
            prop_assert!((a - (p.lambda(t) * br.powf(p.s) + p.sigma * br.ln())).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn kernel_monotone_in_s(t in 0.1..80.0f64, frac in 0.0..1.0f64, k in 1i64..10, l in -10i64..10, s in 0.05..1.0f64) {
            prop_assume!(l != 0);
            let p = GevreyParams::default();
            let lo = GevreyParams { s, ..p };
            let hi = GevreyParams { s: 1.0, ..p };
            let tau = frac * t;
            prop_assert!(schur_kernel(&hi, t, tau, k, l) <= schur_kernel(&lo, t, tau, k, l) * (1.0 + 1e-12));
        }
    }
}
