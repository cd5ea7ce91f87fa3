//! Interaction potentials, described by their Fourier symbol `Ŵ(k)`.

use serde::{Deserialize, Serialize};

use crate::{norm, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InteractionKernel {
    /// `Ŵ(k) = sign/|k|²`; `+1` is the repulsive (electrostatic) case, `-1` gravitational.
    Coulomb {
        #[serde(default = "plus_one")]
        sign: f64,
    },
    /// `Ŵ(k) = 1/(1+|k|²)`.
    Screened,
    /// `Ŵ(k) = |k|^{-γ}`.
    PowerLaw { gamma: f64 },
    /// Symbol tabulated by `|k|²` (entry `j` holds `Ŵ` for `|k|² = j + 1`); out-of-table modes vanish.
    Custom { by_norm_squared: Vec<f64> },
}

fn plus_one() -> f64 {
    1.0
}

impl Default for InteractionKernel {
    fn default() -> Self {
        InteractionKernel::Coulomb { sign: 1.0 }
    }
}

impl InteractionKernel {
    pub fn coulomb() -> Self {
        Self::default()
    }

    pub fn gravitational() -> Self {
        InteractionKernel::Coulomb { sign: -1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InteractionKernel::Coulomb { sign } if sign.abs() != 1.0 => {
                Err(Error::arg("coulomb sign must be +1 or -1"))
            }
            InteractionKernel::PowerLaw { gamma } if !(*gamma > 0.0) => {
                Err(Error::arg("power-law exponent must be positive"))
            }
            InteractionKernel::Custom { by_norm_squared } if by_norm_squared.iter().any(|w| !w.is_finite()) => {
                Err(Error::arg("custom symbol values must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// `Ŵ(k)`; the mean mode carries no field.
    pub fn symbol(&self, k: &[f64]) -> Result<f64> {
        let k2: f64 = k.iter().map(|x| x * x).sum();
        if k2 == 0.0 {
            return Err(Error::arg("k = 0 has no field"));
        }
        Ok(match self {
            InteractionKernel::Coulomb { sign } => sign / k2,
            InteractionKernel::Screened => 1.0 / (1.0 + k2),
            InteractionKernel::PowerLaw { gamma } => k2.powf(-0.5 * gamma),
            InteractionKernel::Custom { by_norm_squared } => {
                let j = k2.round() as usize;
                if (k2 - k2.round()).abs() > 1e-9 || j == 0 {
                    0.0
                } else {
                    by_norm_squared.get(j - 1).copied().unwrap_or(0.0)
                }
            }
        })
    }

    /// `|k|² Ŵ(k)`, the factor entering the linearized kernel.
    pub fn strength(&self, k: &[f64]) -> Result<f64> {
        let k2: f64 = k.iter().map(|x| x * x).sum();
        Ok(k2 * self.symbol(k)?)
    }

    /// Constants `(C, γ)` with `|Ŵ(k)| ≤ C |k|^{-γ}` on the integer lattice.
    pub fn decay_bound(&self) -> (f64, f64) {
        match self {
            InteractionKernel::Coulomb { .. } | InteractionKernel::Screened => (1.0, 2.0),
            InteractionKernel::PowerLaw { gamma } => (1.0, *gamma),
            InteractionKernel::Custom { by_norm_squared } => {
                // best C for γ = 2 over the table
                let c = by_norm_squared
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w.abs() * (j + 1) as f64)
                    .fold(0.0, f64::max);
                (c, 2.0)
            }
        }
    }

    /// Whether `|k|²Ŵ > 0`, i.e. the interaction is repulsive at `k`.
    pub fn is_repulsive(&self, k: &[f64]) -> bool {
        self.symbol(k).map(|w| w > 0.0).unwrap_or(false) && norm(k) > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols() {
        assert_eq!(InteractionKernel::coulomb().symbol(&[2.0]).unwrap(), 0.25);
        assert_eq!(InteractionKernel::gravitational().symbol(&[1.0, 1.0]).unwrap(), -0.5);
        assert_eq!(InteractionKernel::Screened.symbol(&[1.0]).unwrap(), 0.5);
        let p = InteractionKernel::PowerLaw { gamma: 1.0 };
        assert!((p.symbol(&[3.0, 4.0]).unwrap() - 0.2).abs() < 1e-15);
        let c = InteractionKernel::Custom {
            by_norm_squared: vec![0.9, 0.0, 0.0, 0.3],
        };
        assert_eq!(c.symbol(&[2.0]).unwrap(), 0.3);
        assert_eq!(c.symbol(&[5.0]).unwrap(), 0.0);
        assert!(InteractionKernel::coulomb().symbol(&[0.0]).is_err());
    }

    #[test]
    fn decay_bounds_hold() {
        let kernels = [
            InteractionKernel::coulomb(),
            InteractionKernel::Screened,
            InteractionKernel::PowerLaw { gamma: 0.7 },
            InteractionKernel::Custom {
                by_norm_squared: vec![1.0, 0.1, 0.4],
            },
        ];
        for w in &kernels {
            let (c, g) = w.decay_bound();
            for k in 1..40 {
                let k = k as f64;
                assert!(w.symbol(&[k]).unwrap().abs() <= c * k.powf(-g) * (1.0 + 1e-12));
            }
        }
    }
}
