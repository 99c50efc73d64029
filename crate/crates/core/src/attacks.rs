//! Adversarial RSSI perturbations: additive Gaussian signal spoofing and
//! multiplicative signal-strength manipulation.
//!
//! Attacks act on raw (unscaled) features and never touch position labels.
//! Each perturbed sample is driven by its own RNG substream keyed on
//! `(spec.seed, sample index)`, so augmented sets are reproducible and
//! insensitive to evaluation order.

use crate::dataset::{Dataset, RssiSample};
use crate::error::{Error, Result};
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};

/// A perturbation model and its strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackKind {
    /// Adds independent `N(0, sigma^2)` noise (dBm) to every reading.
    Spoofing { sigma: f64 },
    /// Scales every reading by an independent `1 + U(-alpha, alpha)` factor.
    Manipulation { alpha: f64 },
}

impl AttackKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AttackKind::Spoofing { sigma } => {
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::invalid(format!(
                        "spoofing sigma must be finite and >= 0, got {sigma}"
                    )));
                }
            }
            AttackKind::Manipulation { alpha } => {
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(Error::invalid(format!(
                        "manipulation alpha must be finite and >= 0, got {alpha}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Attack strength: `sigma` for spoofing, `alpha` for manipulation.
    pub fn strength(&self) -> f64 {
        match *self {
            AttackKind::Spoofing { sigma } => sigma,
            AttackKind::Manipulation { alpha } => alpha,
        }
    }
}

/// Attack kind plus the seed that drives its noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    #[serde(flatten)]
    pub kind: AttackKind,
    pub seed: u64,
}

/// Which perturbation family a sweep varies the strength of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackFamily {
    Spoofing,
    Manipulation,
}

impl AttackFamily {
    pub fn spec_for(self, strength: f64, seed: u64) -> AttackSpec {
        let kind = match self {
            AttackFamily::Spoofing => AttackKind::Spoofing { sigma: strength },
            AttackFamily::Manipulation => AttackKind::Manipulation { alpha: strength },
        };
        AttackSpec { kind, seed }
    }

    pub fn name(self) -> &'static str {
        match self {
            AttackFamily::Spoofing => "spoofing",
            AttackFamily::Manipulation => "manipulation",
        }
    }
}

/// Perturbs one feature vector in place-order; strength 0 copies bitwise.
fn perturb_features(kind: AttackKind, rng: &mut DetRng, rssi: &[f64]) -> Vec<f64> {
    match kind {
        AttackKind::Spoofing { sigma } => {
            if sigma == 0.0 {
                rssi.to_vec()
            } else {
                rssi.iter().map(|x| x + rng.normal_scaled(sigma)).collect()
            }
        }
        AttackKind::Manipulation { alpha } => {
            if alpha == 0.0 {
                rssi.to_vec()
            } else {
                rssi.iter()
                    .map(|x| x * (1.0 + rng.uniform_range(-alpha, alpha)))
                    .collect()
            }
        }
    }
}

/// Applies one attack to every sample, preserving labels bit-for-bit.
pub fn perturb_dataset(d: &Dataset, spec: &AttackSpec) -> Result<Dataset> {
    spec.kind.validate()?;
    let samples = d
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = DetRng::substream(spec.seed, i as u64);
            RssiSample {
                rssi: perturb_features(spec.kind, &mut rng, &s.rssi),
                position: s.position,
            }
        })
        .collect();
    Dataset::new(samples, d.n_features())
}

/// Builds the augmented set: one perturbed copy of the whole dataset per
/// spec, concatenated in spec order. `|result| = |specs| * |d|`.
pub fn augment_dataset(d: &Dataset, specs: &[AttackSpec]) -> Result<Dataset> {
    let mut samples = Vec::with_capacity(specs.len() * d.len());
    for spec in specs {
        let copy = perturb_dataset(d, spec)?;
        samples.extend_from_slice(copy.samples());
    }
    Dataset::new(samples, d.n_features())
}
