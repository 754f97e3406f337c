//! Density kernels and numeric primitives shared by the samplers.
//!
//! The submodules provide exactly the math the inference code needs, each
//! generic over the [`crate::real::Real`] scalar:
//!
//! * [`scalar`] — normal / log-normal / beta / binomial log-densities with a
//!   logit-parameterized binomial for saturation-proof likelihoods;
//! * [`equicorr`] — the equicorrelated multivariate normal with O(t) closed
//!   forms for its inverse, determinant, density, and sampling;
//! * [`nlp`] — the inverse-moment non-local slab, its shape calibration
//!   against a normal spike, and exact sampling via a Gamma representation;
//! * [`stick`] — truncated stick-breaking weights;
//! * [`special`] — log-gamma, binomial coefficients, stable logistic maps;
//! * [`rng`] — seeded, stream-split ChaCha8 construction for reproducibility.

pub mod equicorr;
pub mod nlp;
pub mod rng;
pub mod scalar;
pub mod special;
pub mod stick;

pub use equicorr::EquicorrSpec;
pub use nlp::{calibrate_nlp_shape, nlp_logpdf, nlp_sample, NlpSpec, NORMAL_999_HALF_WIDTH};
pub use rng::{chain_stream, derive_seed, DATA_STREAM, PRIOR_STREAM};
pub use scalar::{
    beta_logpdf, binomial_logpmf, binomial_logpmf_logit, lognormal_logpdf, normal_logpdf,
};
pub use special::{ln_binomial_coefficient, ln_gamma, log_logistic, logistic, logit};
pub use stick::{stick_breaking_weights, StickWeights};

/// Errors raised by the numeric kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    /// A distribution was requested over zero dimensions.
    #[error("dimension must be at least 1, got {dim}")]
    InvalidDimension { dim: usize },

    /// A parameter failed its domain check (reported in f64 for display).
    #[error("parameter `{name}` out of domain: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    /// A vector argument had the wrong length for the distribution.
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// Stick-breaking input was empty.
    #[error("stick vector must be nonempty")]
    EmptySticks,

    /// A stick fell outside [0, 1] (or was NaN).
    #[error("stick {index} out of [0, 1]: {value}")]
    StickValueOutOfRange { index: usize, value: f64 },

    /// The final stick of a truncated construction must be exactly 1.
    #[error("final stick must be exactly 1, got {value}")]
    StickLastNotOne { value: f64 },

    /// Weights drifted away from summing to one — indicates corrupted sticks
    /// rather than ordinary rounding, so it is surfaced instead of fixed.
    #[error("stick-breaking weights sum to {sum}, expected 1 within tolerance")]
    StickSumDrift { sum: f64 },

    /// Slab calibration found no sign change over the shape bracket; the
    /// requested spike width admits no matching inverse-moment shape.
    #[error(
        "slab calibration bracket [{lo}, {hi}] has no sign change \
         (residuals {residual_lo} and {residual_hi})"
    )]
    CalibrationBracket { lo: f64, hi: f64, residual_lo: f64, residual_hi: f64 },

    /// Bisection ran out of iterations before meeting the residual target.
    #[error("slab calibration failed to converge: residual {residual} > tolerance {tolerance}")]
    CalibrationNoConvergence { residual: f64, tolerance: f64 },
}
