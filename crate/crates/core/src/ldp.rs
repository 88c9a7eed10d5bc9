//! Local differential privacy perturbation of gradient vectors.
//!
//! Both mechanisms operate per scalar: each entry of the released vector is
//! an independent ε-LDP release of the corresponding clipped gradient.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RealVector;

/// Per-scalar privacy budget and the clip bound that fixes the sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub clip_bound: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, clip_bound: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Parameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(clip_bound > 0.0) {
            return Err(Error::Parameter(format!(
                "clip bound must be positive, got {clip_bound}"
            )));
        }
        Ok(PrivacyBudget {
            epsilon,
            clip_bound,
        })
    }
}

/// Perturbation mechanism selector. `Identity` releases clipped gradients
/// unperturbed and exists for noiseless first-order baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    Laplace,
    Duchi,
    Identity,
}

/// Clamps every entry into `[-c, c]`.
pub fn clip(v: &RealVector, c: f64) -> Result<RealVector> {
    if !(c > 0.0) {
        return Err(Error::Parameter(format!(
            "clip bound must be positive, got {c}"
        )));
    }
    Ok(RealVector::from_iterator(
        v.len(),
        v.iter().map(|&x| x.clamp(-c, c)),
    ))
}

fn laplace_sample(scale: f64, rng: &mut ChaCha20Rng) -> f64 {
    // Inverse CDF; u is kept strictly inside (-1/2, 1/2).
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let t = 1.0 - 2.0 * u.abs();
        if t > 0.0 {
            return -scale * u.signum() * t.ln();
        }
    }
}

/// Adds `Lap(0, 2C/ε)` noise per entry. Entries are assumed pre-clipped to
/// `[-C, C]`, which bounds the per-scalar sensitivity by `2C`.
pub fn laplace_perturb(
    v: &RealVector,
    budget: &PrivacyBudget,
    rng: &mut ChaCha20Rng,
) -> RealVector {
    let scale = 2.0 * budget.clip_bound / budget.epsilon;
    RealVector::from_iterator(v.len(), v.iter().map(|&x| x + laplace_sample(scale, rng)))
}

/// Two-point randomized response on `t = v/C ∈ [-1, 1]`: releases
/// `±C·(e^ε+1)/(e^ε−1)` with `P[+] = (e^ε−1)·t/(2e^ε+2) + 1/2`, which is an
/// unbiased estimator of `v`.
pub fn duchi_perturb(
    v: &RealVector,
    budget: &PrivacyBudget,
    rng: &mut ChaCha20Rng,
) -> Result<RealVector> {
    let e = budget.epsilon.exp();
    let magnitude = budget.clip_bound * (e + 1.0) / (e - 1.0);
    let mut out = RealVector::zeros(v.len());
    for (i, &x) in v.iter().enumerate() {
        let t = x / budget.clip_bound;
        if t.abs() > 1.0 + 1e-12 {
            return Err(Error::Parameter(format!(
                "entry {x} exceeds the clip bound {}; clip before perturbing",
                budget.clip_bound
            )));
        }
        let p_plus = (e - 1.0) * t / (2.0 * e + 2.0) + 0.5;
        out[i] = if rng.random::<f64>() < p_plus {
            magnitude
        } else {
            -magnitude
        };
    }
    Ok(out)
}

/// Clips and perturbs a gradient vector with the selected mechanism.
pub fn perturb(
    mechanism: Mechanism,
    v: &RealVector,
    budget: &PrivacyBudget,
    rng: &mut ChaCha20Rng,
) -> Result<RealVector> {
    let clipped = clip(v, budget.clip_bound)?;
    match mechanism {
        Mechanism::Laplace => Ok(laplace_perturb(&clipped, budget, rng)),
        Mechanism::Duchi => duchi_perturb(&clipped, budget, rng),
        Mechanism::Identity => Ok(clipped),
    }
}

/// Exact output probabilities of the Duchi release for input `t ∈ [-1, 1]`:
/// `(P[+magnitude], P[-magnitude])`.
pub fn duchi_probabilities(t: f64, epsilon: f64) -> (f64, f64) {
    let e = epsilon.exp();
    let p_plus = (e - 1.0) * t / (2.0 * e + 2.0) + 0.5;
    (p_plus, 1.0 - p_plus)
}
