//! Spectral toolkit for Landau damping in the Vlasov–Poisson equations on the torus.
//!
//! Conventions used throughout the crate:
//!
//! * velocity transforms carry no prefactor, `f̂(η) = ∫ e^{-iη·v} f(v) dv`;
//! * spatial transforms on `[0, 2π)^d` are normalized, `ρ̂(k) = (2π)^{-d} ∫ e^{-ik·x} ρ(x) dx`,
//!   so the density of a phase-space field is its `η = 0` coefficient and
//!   free transport gives `ρ̂(t, k) = ĝ_in(k, kt)` with no stray powers of `2π`;
//! * the field is `E = ∇_x (W ∗ ρ)`, i.e. `Ê(k) = i k Ŵ(k) ρ̂(k)`, and particles are
//!   accelerated by `-E`, so a positive symbol `Ŵ` is repulsive and the
//!   linearized memory kernel is `𝒦(t, k) = -|k|² Ŵ(k) t f̂⁰(kt)`;
//! * Laplace transforms are prefactor-free, `L[f](z) = ∫₀^∞ e^{-zt} f(t) dt`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dispersion;
pub mod equilibria;
pub mod error;
pub mod fit;
pub mod gevrey;
pub mod interaction;
pub mod linear;
pub mod nonlinear;
pub mod par;
pub mod quadrature;
pub mod volterra;

pub use error::{Error, Result};

/// Complex double used for all spectral quantities.
pub type C64 = num_complex::Complex64;

/// `⟨x₁, …, x_n⟩ = (1 + Σ xᵢ²)^{1/2}`.
pub fn bracket(components: &[f64]) -> f64 {
    (1.0 + components.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
