//! Truncated stick-breaking construction for Dirichlet-process mixtures.
//!
//! A truncation at H components represents the random mixing distribution by
//! sticks V₁, …, V_{H−1} ∈ [0, 1] with V_H pinned to 1; component h receives
//! weight π_h = V_h ∏_{ℓ<h} (1 − V_ℓ). Pinning the last stick makes the
//! weights sum to one exactly, so the truncated mixture is a proper
//! distribution over the H atoms.

use super::KernelError;
use crate::real::Real;

/// Mixture weights produced by a truncated stick-breaking construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StickWeights<F> {
    weights: Vec<F>,
}

impl<F: Real> StickWeights<F> {
    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Converts sticks into weights: π_h = V_h ∏_{ℓ<h}(1 − V_ℓ).
///
/// Requires a nonempty stick vector with every V_h ∈ [0, 1] and the final
/// stick exactly 1; the resulting weights must sum to 1 within a tolerance
/// of 1e-12 (floored at a small multiple of the scalar's epsilon), otherwise
/// the drift is reported as an error rather than silently renormalized.
pub fn stick_breaking_weights<F: Real>(sticks: &[F]) -> Result<StickWeights<F>, KernelError> {
    let Some((&last, _)) = sticks.split_last() else {
        return Err(KernelError::EmptySticks);
    };
    for (index, &v) in sticks.iter().enumerate() {
        if !(v >= F::zero() && v <= F::one()) {
            return Err(KernelError::StickValueOutOfRange {
                index,
                value: v.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    if last != F::one() {
        return Err(KernelError::StickLastNotOne { value: last.to_f64().unwrap_or(f64::NAN) });
    }

    let mut weights = Vec::with_capacity(sticks.len());
    let mut remaining = F::one();
    for &v in sticks {
        weights.push(v * remaining);
        remaining *= F::one() - v;
    }

    let sum = weights.iter().fold(F::zero(), |acc, &w| acc + w);
    let tol = F::of(1e-12).max(F::epsilon() * F::of(16.0) * F::of_usize(sticks.len()));
    if (sum - F::one()).abs() > tol {
        return Err(KernelError::StickSumDrift { sum: sum.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(StickWeights { weights })
}
