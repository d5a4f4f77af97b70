//! Envelope functions `p : [-1, 1] -> [0, 1]`.

use serde::{Deserialize, Serialize};

use crate::harmonics::EnvelopeSpectrum;

/// A function of the latent inner product.
pub trait Envelope: Sync {
    fn eval(&self, t: f64) -> f64;

    /// Points of `(-1, 1)` where the function may be discontinuous.
    /// Quadrature splits its integration domain there.
    fn breakpoints(&self) -> &[f64] {
        &[]
    }
}

impl<F: Fn(f64) -> f64 + Sync> Envelope for F {
    fn eval(&self, t: f64) -> f64 {
        self(t)
    }
}

impl Envelope for EnvelopeSpectrum {
    fn eval(&self, t: f64) -> f64 {
        EnvelopeSpectrum::eval(self, t)
    }
}

/// An [`EnvelopeSpectrum`] reconstruction clamped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Clipped(pub EnvelopeSpectrum);

impl Envelope for Clipped {
    fn eval(&self, t: f64) -> f64 {
        self.0.eval(t).clamp(0.0, 1.0)
    }
}

/// Envelopes that can be named in experiment configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NamedEnvelope {
    /// `1{t >= threshold}`
    Heaviside { threshold: f64 },
    Constant { value: f64 },
    /// `sum_l p*_l c_l G_l^beta(t)`; the dimension is supplied at evaluation time.
    Gegenbauer { coefficients: Vec<f64>, dim: usize },
}

impl NamedEnvelope {
    pub fn heaviside() -> Self {
        NamedEnvelope::Heaviside { threshold: 0.0 }
    }
}

impl Envelope for NamedEnvelope {
    fn eval(&self, t: f64) -> f64 {
        match self {
            NamedEnvelope::Heaviside { threshold } => {
                if t >= *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            NamedEnvelope::Constant { value } => *value,
            NamedEnvelope::Gegenbauer { coefficients, dim } => EnvelopeSpectrum {
                coefficients: coefficients.clone(),
                dim: *dim,
            }
            .eval(t),
        }
    }

    fn breakpoints(&self) -> &[f64] {
        match self {
            NamedEnvelope::Heaviside { threshold } => std::slice::from_ref(threshold),
            _ => &[],
        }
    }
}
