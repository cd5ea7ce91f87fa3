//! Homogeneous equilibria `f⁰(v)`, their velocity transforms and analyticity checks.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{dot, norm, Error, Result, C64};

/// One drifting Maxwellian component, `n₀ (2πT)^{-d/2} exp(-|v - v₀|² / 2T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Maxwellian {
    pub density: f64,
    pub temperature: f64,
    /// Drift velocity; empty means zero.
    #[serde(default)]
    pub center: Vec<f64>,
}

impl Maxwellian {
    pub fn new(density: f64, temperature: f64) -> Self {
        Self {
            density,
            temperature,
            center: Vec::new(),
        }
    }

    pub fn centered_at(mut self, center: Vec<f64>) -> Self {
        self.center = center;
        self
    }

    fn center_component(&self, i: usize) -> f64 {
        self.center.get(i).copied().unwrap_or(0.0)
    }

    fn eval(&self, v: &[f64]) -> f64 {
        let d = v.len() as f64;
        let r2: f64 = v
            .iter()
            .enumerate()
            .map(|(i, x)| (x - self.center_component(i)).powi(2))
            .sum();
        self.density * (2.0 * PI * self.temperature).powf(-0.5 * d) * (-r2 / (2.0 * self.temperature)).exp()
    }

    /// `f̂`, `|∇f̂|` and the Frobenius norm of `∇²f̂` at `η`.
    fn fourier_jet(&self, eta: &[f64]) -> (C64, f64, f64) {
        let t = self.temperature;
        let phase: f64 = eta
            .iter()
            .enumerate()
            .map(|(i, e)| e * self.center_component(i))
            .sum();
        let value = self.density * C64::from_polar((-0.5 * t * dot(eta, eta)).exp(), -phase);
        // ∂ᵢ log f̂ = -i v₀ᵢ - T ηᵢ
        let g: Vec<C64> = eta
            .iter()
            .enumerate()
            .map(|(i, e)| C64::new(-t * e, -self.center_component(i)))
            .collect();
        let grad = g.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() * value.norm();
        let mut hess = 0.0;
        for (i, gi) in g.iter().enumerate() {
            for (j, gj) in g.iter().enumerate() {
                let delta = if i == j { t } else { 0.0 };
                hess += (gi * gj - delta).norm_sqr();
            }
        }
        (value, grad, hess.sqrt() * value.norm())
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.density >= 0.0 && self.density.is_finite()) {
            return Err(Error::arg("maxwellian density must be finite and non-negative"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::arg("maxwellian temperature must be positive"));
        }
        if !self.center.is_empty() && self.center.len() != dim {
            return Err(Error::arg(format!(
                "maxwellian center has {} components, expected {dim}",
                self.center.len()
            )));
        }
        Ok(())
    }
}

/// A tabulated one-dimensional profile on a uniform grid `v_min + j·dv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tabulated {
    pub v_min: f64,
    pub dv: f64,
    pub values: Vec<f64>,
}

impl Tabulated {
    /// Samples `f` on `[-v_max, v_max]` with `n` points (endpoints included).
    pub fn sample(f: impl Fn(f64) -> f64, v_max: f64, n: usize) -> Self {
        let dv = 2.0 * v_max / (n - 1) as f64;
        Self {
            v_min: -v_max,
            dv,
            values: (0..n).map(|j| f(-v_max + j as f64 * dv)).collect(),
        }
    }

    fn v_max(&self) -> f64 {
        self.v_min + (self.values.len() - 1) as f64 * self.dv
    }

    fn eval(&self, v: f64) -> Result<f64> {
        let (lo, hi) = (self.v_min, self.v_max());
        if !(v >= lo - 1e-12 * self.dv && v <= hi + 1e-12 * self.dv) {
            return Err(Error::OutOfRange {
                value: v,
                min: lo,
                max: hi,
            });
        }
        let n = self.values.len();
        let s = ((v - lo) / self.dv).clamp(0.0, (n - 1) as f64);
        // cubic Lagrange on the four surrounding nodes
        let j0 = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let mut acc = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (s - (j0 + b) as f64) / (a as f64 - b as f64);
                }
            }
            acc += w * self.values[j0 + a];
        }
        Ok(acc.max(0.0))
    }

    /// Trapezoid transform with stride `stride` (1 = full grid); returns
    /// the value and the first two η-derivatives.
    fn transform(&self, eta: f64, stride: usize) -> [C64; 3] {
        let h = self.dv * stride as f64;
        let last = self.values.len() - 1;
        let mut acc = [C64::new(0.0, 0.0); 3];
        for j in (0..=last).step_by(stride) {
            let v = self.v_min + j as f64 * self.dv;
            let w = if j == 0 || j == last { 0.5 } else { 1.0 } * h;
            let e = C64::from_polar(w * self.values[j], -eta * v);
            acc[0] += e;
            acc[1] += e * C64::new(0.0, -v);
            acc[2] += e * (-v * v);
        }
        acc
    }

    fn fourier_jet(&self, eta: f64) -> Result<[C64; 3]> {
        let fine = self.transform(eta, 1);
        let coarse = self.transform(eta, 2);
        let residual = (fine[0] - coarse[0]).norm();
        if residual > 1e-10 {
            return Err(Error::Accuracy { residual });
        }
        Ok(fine)
    }

    fn mass(&self) -> f64 {
        let n = self.values.len();
        (self.values.iter().sum::<f64>() - 0.5 * (self.values[0] + self.values[n - 1])) * self.dv
    }
}

/// Kind of homogeneous background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EquilibriumKind {
    Maxwellian {
        density: f64,
        temperature: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    DoubleMaxwellian {
        first: Maxwellian,
        second: Maxwellian,
    },
    /// One-dimensional algebraic family with exponential transform:
    /// exponent 1 is `n₀/(π(1+v²))` with `f̂ = n₀e^{-|η|}`, exponent 2 is
    /// `2n₀/(π(1+v²)²)` with `f̂ = n₀(1+|η|)e^{-|η|}`.
    Poisson {
        density: f64,
        #[serde(default = "default_poisson_exponent")]
        exponent: u32,
    },
    Custom(Tabulated),
}

fn default_poisson_exponent() -> u32 {
    2
}

/// A homogeneous equilibrium in `d` velocity dimensions.
///
/// Unknown keys are rejected by the flattened kind, not here: serde cannot
/// combine `flatten` with `deny_unknown_fields` on the outer struct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSpec {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(flatten)]
    pub kind: EquilibriumKind,
}

fn default_dim() -> usize {
    1
}

/// Outcome of [`EquilibriumSpec::verify_analyticity_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticityReport {
    pub holds: bool,
    /// `log(cap) - max_η [log S(η) + λ₀|η|]`, where `S = |f̂| + |∇f̂| + |∇²f̂|`.
    pub worst_margin: f64,
    /// Natural log of the smallest constant `C` with `S(η) ≤ C e^{-λ₀|η|}` on the samples.
    pub log_constant: f64,
}

impl AnalyticityReport {
    pub fn constant(&self) -> f64 {
        self.log_constant.exp()
    }
}

impl EquilibriumSpec {
    pub fn maxwellian(density: f64, temperature: f64) -> Self {
        Self {
            dim: 1,
            kind: EquilibriumKind::Maxwellian {
                density,
                temperature,
                center: Vec::new(),
            },
        }
    }

    /// Two equal-temperature streams at `±separation/2`, each carrying half the density.
    pub fn two_stream(density: f64, temperature: f64, separation: f64) -> Self {
        let half = 0.5 * separation;
        Self {
            dim: 1,
            kind: EquilibriumKind::DoubleMaxwellian {
                first: Maxwellian::new(0.5 * density, temperature).centered_at(vec![-half]),
                second: Maxwellian::new(0.5 * density, temperature).centered_at(vec![half]),
            },
        }
    }

    pub fn poisson(density: f64, exponent: u32) -> Self {
        Self {
            dim: 1,
            kind: EquilibriumKind::Poisson { density, exponent },
        }
    }

    pub fn custom(table: Tabulated) -> Self {
        Self {
            dim: 1,
            kind: EquilibriumKind::Custom(table),
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    /// Maxwellian components, if the background is a Maxwellian mixture.
    pub fn maxwellian_components(&self) -> Option<Vec<Maxwellian>> {
        match &self.kind {
            EquilibriumKind::Maxwellian {
                density,
                temperature,
                center,
            } => Some(vec![Maxwellian {
                density: *density,
                temperature: *temperature,
                center: center.clone(),
            }]),
            EquilibriumKind::DoubleMaxwellian { first, second } => {
                Some(vec![first.clone(), second.clone()])
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::arg(format!("dimension {} not in 1..=3", self.dim)));
        }
        match &self.kind {
            EquilibriumKind::Maxwellian { .. } | EquilibriumKind::DoubleMaxwellian { .. } => {
                for m in self.maxwellian_components().unwrap() {
                    m.validate(self.dim)?;
                }
            }
            EquilibriumKind::Poisson { density, exponent } => {
                if self.dim != 1 {
                    return Err(Error::arg("poisson equilibrium is implemented for d = 1"));
                }
                if !(*density >= 0.0 && density.is_finite()) {
                    return Err(Error::arg("poisson density must be finite and non-negative"));
                }
                if !matches!(exponent, 1 | 2) {
                    return Err(Error::arg("poisson exponent must be 1 or 2"));
                }
            }
            EquilibriumKind::Custom(t) => {
                if self.dim != 1 {
                    return Err(Error::arg("custom equilibria are tabulated in d = 1"));
                }
                if t.values.len() < 16 || !(t.dv > 0.0) {
                    return Err(Error::arg("custom table needs at least 16 points and dv > 0"));
                }
                if t.values.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                    return Err(Error::arg("custom table values must be finite and non-negative"));
                }
            }
        }
        Ok(())
    }

    /// `n₀ = ∫ f⁰ dv`.
    pub fn density(&self) -> f64 {
        match &self.kind {
            EquilibriumKind::Maxwellian { density, .. } => *density,
            EquilibriumKind::DoubleMaxwellian { first, second } => first.density + second.density,
            EquilibriumKind::Poisson { density, .. } => *density,
            EquilibriumKind::Custom(t) => t.mass(),
        }
    }

    /// Exponential decay rate `λ₀` of `f̂⁰` on the real axis; `None` when `f̂⁰`
    /// decays faster than any exponential.
    pub fn analyticity_rate(&self) -> Option<f64> {
        match &self.kind {
            EquilibriumKind::Poisson { .. } => Some(1.0),
            EquilibriumKind::Custom(_) => Some(0.0),
            _ => None,
        }
    }

    /// Lower bound on `Re z` for holomorphy of the kernel transform at wavenumber `|k|`.
    pub fn holomorphy_bound(&self, k_norm: f64) -> f64 {
        match self.analyticity_rate() {
            Some(l) => -l * k_norm,
            None => f64::NEG_INFINITY,
        }
    }

    /// Thermal velocity scale used for default grid extents.
    pub fn velocity_scale(&self) -> f64 {
        match &self.kind {
            EquilibriumKind::Maxwellian { temperature, center, .. } => {
                temperature.sqrt() + norm(center)
            }
            EquilibriumKind::DoubleMaxwellian { first, second } => {
                first.temperature.sqrt().max(second.temperature.sqrt())
                    + norm(&first.center).max(norm(&second.center))
            }
            EquilibriumKind::Poisson { .. } => 1.0,
            EquilibriumKind::Custom(t) => 0.125 * t.v_max().max(-t.v_min),
        }
    }

    /// `f⁰(v)`.
    pub fn eval(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim {
            return Err(Error::arg(format!("velocity has {} components, expected {}", v.len(), self.dim)));
        }
        match &self.kind {
            EquilibriumKind::Maxwellian { .. } | EquilibriumKind::DoubleMaxwellian { .. } => Ok(self
                .maxwellian_components()
                .unwrap()
                .iter()
                .map(|m| m.eval(v))
                .sum()),
            EquilibriumKind::Poisson { density, exponent } => {
                let q = 1.0 + v[0] * v[0];
                Ok(match exponent {
                    1 => density / (PI * q),
                    _ => 2.0 * density / (PI * q * q),
                })
            }
            EquilibriumKind::Custom(t) => t.eval(v[0]),
        }
    }

    /// `f̂⁰(η) = ∫ e^{-iη·v} f⁰(v) dv`.
    pub fn fourier(&self, eta: &[f64]) -> Result<C64> {
        Ok(self.fourier_jet(eta)?.0)
    }

    /// `(f̂⁰, |∇f̂⁰|, |∇²f̂⁰|)` at `η`.
    pub fn fourier_jet(&self, eta: &[f64]) -> Result<(C64, f64, f64)> {
        if eta.len() != self.dim {
            return Err(Error::arg(format!("frequency has {} components, expected {}", eta.len(), self.dim)));
        }
        match &self.kind {
            EquilibriumKind::Maxwellian { .. } | EquilibriumKind::DoubleMaxwellian { .. } => {
                let mut acc = (C64::new(0.0, 0.0), 0.0, 0.0);
                for m in self.maxwellian_components().unwrap() {
                    let (v, g, h) = m.fourier_jet(eta);
                    acc.0 += v;
                    acc.1 += g;
                    acc.2 += h;
                }
                Ok(acc)
            }
            EquilibriumKind::Poisson { density, exponent } => {
                let a = eta[0].abs();
                let e = (-a).exp() * density;
                Ok(match exponent {
                    1 => (C64::new(e, 0.0), e, e),
                    _ => (C64::new((1.0 + a) * e, 0.0), a * e, (a - 1.0).abs() * e),
                })
            }
            EquilibriumKind::Custom(t) => {
                let [v, d1, d2] = t.fourier_jet(eta[0])?;
                Ok((v, d1.norm(), d2.norm()))
            }
        }
    }

    /// Checks `|f̂⁰| + |∇f̂⁰| + |∇²f̂⁰| ≤ C e^{-λ₀|η|}` on the samples with `C ≤ cap`.
    pub fn verify_analyticity_bound(
        &self,
        rate: f64,
        samples: &[Vec<f64>],
        cap: f64,
    ) -> Result<AnalyticityReport> {
        if samples.is_empty() {
            return Err(Error::arg("empty frequency sample set"));
        }
        if !(rate > 0.0) {
            return Err(Error::arg("analyticity rate must be positive"));
        }
        let mut worst = f64::NEG_INFINITY;
        for eta in samples {
            let (v, g, h) = self.fourier_jet(eta)?;
            let s = v.norm() + g + h;
            if s > 0.0 {
                worst = worst.max(s.ln() + rate * norm(eta));
            }
        }
        let margin = cap.ln() - worst;
        Ok(AnalyticityReport {
            holds: margin >= 0.0,
            worst_margin: margin,
            log_constant: worst,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn quad_transform(spec: &EquilibriumSpec, eta: f64, v_max: f64) -> C64 {
        let f = |v: f64| C64::from_polar(spec.eval(&[v]).unwrap(), -eta * v);
        integrate(&f, -v_max, v_max, 1e-14).value
    }

    #[test]
    fn maxwellian_peak_value() {
        let m = EquilibriumSpec::maxwellian(1.0, 1.0);
        let expected = 1.0 / (2.0 * PI).sqrt();
        assert!((m.eval(&[0.0]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_density_vanishes() {
        let m = EquilibriumSpec::maxwellian(0.0, 1.0);
        for v in [-3.0, 0.0, 0.7] {
            assert_eq!(m.eval(&[v]).unwrap(), 0.0);
        }
    }

    #[test]
    fn poisson_matches_normalized_quadrature() {
        // oracle: normalize 1/(1+v²)² by trapezoid quadrature on |v| ≤ 100
        let n = 2_000_001;
        let h = 200.0 / (n - 1) as f64;
        let raw = |v: f64| 1.0 / (1.0 + v * v).powi(2);
        let mass: f64 = (0..n)
            .map(|j| {
                let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                w * raw(-100.0 + j as f64 * h)
            })
            .sum::<f64>()
            * h;
        let spec = EquilibriumSpec::poisson(1.0, 2);
        // the truncated tail beyond |v| = 100 carries ~7e-7 of the mass
        let got = spec.eval(&[1.0]).unwrap();
        assert!((got - raw(1.0) / mass).abs() < 1e-6 * got);
    }

    #[test]
    fn maxwellian_transform_against_quadrature() {
        let m = EquilibriumSpec::maxwellian(1.0, 1.0);
        let closed = m.fourier(&[2.0]).unwrap();
        assert!((closed.re - (-2.0f64).exp()).abs() < 1e-15);
        let q = quad_transform(&m, 2.0, 40.0);
        assert!((closed - q).norm() < 1e-12);
        assert!((m.fourier(&[0.0]).unwrap().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_agree_with_quadrature_on_band() {
        let specs = [
            EquilibriumSpec::maxwellian(1.0, 1.0),
            EquilibriumSpec::two_stream(1.0, 0.5, 3.0),
        ];
        for spec in &specs {
            for i in 0..=40 {
                let eta = -20.0 + i as f64;
                let q = quad_transform(spec, eta, 40.0);
                assert!((spec.fourier(&[eta]).unwrap() - q).norm() < 1e-8, "{spec:?} η={eta}");
            }
        }
        for p in [1, 2] {
            let spec = EquilibriumSpec::poisson(1.0, p);
            for eta in [0.0, 0.5, 2.0, 5.0] {
                // algebraic tails: integrate far out and add the analytic tail bound
                let q = quad_transform(&spec, eta, 4000.0);
                let tail = if p == 1 { 2.0 / (PI * 4000.0) } else { 1e-10 };
                assert!((spec.fourier(&[eta]).unwrap() - q).norm() < tail + 1e-8, "p={p} η={eta}");
            }
        }
    }

    #[test]
    fn custom_tabulation_matches_closed_form() {
        let m = EquilibriumSpec::maxwellian(1.0, 1.0);
        let table = Tabulated::sample(|v| m.eval(&[v]).unwrap(), 8.0, 641);
        let c = EquilibriumSpec::custom(table);
        c.validate().unwrap();
        assert!((c.density() - 1.0).abs() < 1e-10);
        for i in 0..=20 {
            let eta = i as f64;
            let got = c.fourier(&[eta]).unwrap();
            assert!((got - m.fourier(&[eta]).unwrap()).norm() < 1e-8, "η={eta}");
        }
        assert!((c.eval(&[0.3]).unwrap() - m.eval(&[0.3]).unwrap()).abs() < 1e-6);
        assert!(matches!(c.eval(&[9.0]), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn normalization_and_reality() {
        let specs = [
            EquilibriumSpec::maxwellian(0.7, 2.0),
            EquilibriumSpec::two_stream(1.3, 1.0, 4.0),
            EquilibriumSpec::poisson(1.0, 1),
            EquilibriumSpec::poisson(2.0, 2),
        ];
        for s in &specs {
            s.validate().unwrap();
            let f0 = s.fourier(&[0.0]).unwrap();
            assert!((f0.re - s.density()).abs() < 1e-10);
            for eta in [0.3, 1.7, 6.0] {
                let a = s.fourier(&[eta]).unwrap();
                let b = s.fourier(&[-eta]).unwrap();
                assert!(a.im.abs() < 1e-12 && (a - b).norm() < 1e-12);
            }
        }
        // mass by quadrature for the closed forms with Gaussian tails
        for s in &specs[..2] {
            let f = |v: f64| C64::new(s.eval(&[v]).unwrap(), 0.0);
            let q = integrate(&f, -40.0, 40.0, 1e-14).value.re;
            assert!((q - s.density()).abs() < 1e-10);
        }
    }

    #[test]
    fn three_dimensional_maxwellian() {
        let s = EquilibriumSpec::maxwellian(1.0, 1.0).with_dim(3);
        s.validate().unwrap();
        let expected = (2.0 * PI).powf(-1.5);
        assert!((s.eval(&[0.0, 0.0, 0.0]).unwrap() - expected).abs() < 1e-15);
        let eta = [1.0, 1.0, 0.0];
        assert!((s.fourier(&eta).unwrap().re - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn analyticity_bound() {
        let samples: Vec<Vec<f64>> = (0..=400).map(|i| vec![-20.0 + 0.1 * i as f64]).collect();
        let m = EquilibriumSpec::maxwellian(1.0, 1.0);
        assert!(m.verify_analyticity_bound(0.5, &samples, 1e6).unwrap().holds);
        let p = EquilibriumSpec::poisson(1.0, 1);
        let r = p.verify_analyticity_bound(0.9, &samples, 1e6).unwrap();
        assert!(r.holds);
        assert!((r.constant() - 3.0).abs() < 1e-9);
        assert!(EquilibriumSpec::poisson(1.0, 2)
            .verify_analyticity_bound(0.9, &samples, 1e6)
            .unwrap()
            .holds);
        for s in [&m, &p] {
            assert!(!s.verify_analyticity_bound(1e3, &samples, 1e6).unwrap().holds);
        }
        assert!(m.verify_analyticity_bound(0.5, &[], 1e6).is_err());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(EquilibriumSpec::maxwellian(1.0, -1.0).validate().is_err());
        assert!(EquilibriumSpec::poisson(1.0, 3).validate().is_err());
        assert!(EquilibriumSpec::poisson(1.0, 1).with_dim(2).validate().is_err());
        assert!(EquilibriumSpec::maxwellian(1.0, 1.0).with_dim(4).validate().is_err());
    }
}
