//! The curious receiver.
//!
//! For every candidate `j` the receiver projects the received vector onto the
//! range of `H_j` (pseudo-inverse estimate of `x`, then re-propagation) and
//! measures the distance `d_j = ||(I − P_j) y||`. The smallest distance is
//! declared the sender; exact ties are broken uniformly at random.

use rand::Rng;

use crate::airlink::ChannelSet;
use crate::numerics::ComplexVector;

/// Default relative tie tolerance for [`declare`].
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub residuals: Vec<f64>,
    pub declared: usize,
    pub posterior: Vec<f64>,
    pub entropy_bits: f64,
    pub tie_group: Vec<usize>,
}

/// Reconstruction distance `||(I − P_j) y||` for every candidate.
pub fn residuals(y: &ComplexVector, channels: &ChannelSet) -> Vec<f64> {
    (0..channels.len())
        .map(|j| (y - channels.projector(j) * y).norm())
        .collect()
}

/// Indices within `tie_tol·(1 + d_min)` of the smallest residual.
pub fn tie_group(residuals: &[f64], tie_tol: f64) -> Vec<usize> {
    let d_min = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    let cutoff = d_min + tie_tol * (1.0 + d_min);
    residuals
        .iter()
        .enumerate()
        .filter(|(_, &d)| d <= cutoff)
        .map(|(j, _)| j)
        .collect()
}

/// Minimum-distance declaration with uniform tie breaking.
pub fn declare<R: Rng + ?Sized>(residuals: &[f64], tie_tol: f64, rng: &mut R) -> usize {
    let group = tie_group(residuals, tie_tol);
    match group.len() {
        0 => 0,
        1 => group[0],
        n => group[rng.random_range(0..n)],
    }
}

/// Gaussian residual likelihood `p_j ∝ exp(−d_j²/σ²)`, normalized with the
/// largest log-likelihood subtracted first.
pub fn posterior(residuals: &[f64], sigma2: f64) -> Vec<f64> {
    assert!(sigma2 > 0.0, "posterior needs a positive noise variance");
    let logs: Vec<f64> = residuals.iter().map(|d| -d * d / sigma2).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Posterior in the noiseless limit: uniform over the tie group.
pub fn noiseless_posterior(residuals: &[f64], tie_tol: f64) -> Vec<f64> {
    let group = tie_group(residuals, tie_tol);
    let mut p = vec![0.0; residuals.len()];
    for &j in &group {
        p[j] = 1.0 / group.len() as f64;
    }
    p
}

/// Shannon entropy in bits, with `0·log 0 = 0`.
pub fn anonymity_entropy(posterior: &[f64]) -> f64 {
    -posterior
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Runs the full attack on one received vector. `sigma2 = None` means the
/// noiseless limit.
pub fn detect<R: Rng + ?Sized>(
    y: &ComplexVector,
    channels: &ChannelSet,
    sigma2: Option<f64>,
    tie_tol: f64,
    rng: &mut R,
) -> DetectionReport {
    let residuals = residuals(y, channels);
    let tie_group = tie_group(&residuals, tie_tol);
    let declared = declare(&residuals, tie_tol, rng);
    let posterior = match sigma2 {
        Some(s2) => posterior(&residuals, s2),
        None => noiseless_posterior(&residuals, tie_tol),
    };
    let entropy_bits = anonymity_entropy(&posterior);
    DetectionReport {
        residuals,
        declared,
        posterior,
        entropy_bits,
        tie_group,
    }
}
