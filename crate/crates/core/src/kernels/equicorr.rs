//! Equicorrelated multivariate normal: covariance τ²[(1−γ)I + γJ].
//!
//! Between-arm heterogeneity in a multi-arm trial is modeled as a t-variate
//! normal whose covariance has a single variance τ² on the diagonal and a
//! single covariance γτ² everywhere off it. That structure admits closed
//! forms for the inverse and determinant,
//!
//! S⁻¹ = 1/(τ²(1−γ)) · \[I − γ/(1 + (t−1)γ) · J\],
//! det S = (τ²)^t (1−γ)^{t−1} (1 + (t−1)γ),
//!
//! and a one-factor sampling representation (one shared normal plus t
//! independent ones), so no O(t³) factorization is ever needed.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::KernelError;
use crate::kernels::special::LN_2PI;
use crate::real::Real;

/// Sampling returns the mean exactly below this variance to avoid
/// denormal-range square roots.
const TAU2_SAMPLING_FLOOR: f64 = 1e-300;

/// Validated parameters of an equicorrelated multivariate normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquicorrSpec<F> {
    dim: usize,
    tau2: F,
    corr: F,
}

impl<F: Real> EquicorrSpec<F> {
    /// Builds a spec for dimension `dim ≥ 1`, variance `tau2 > 0`, and
    /// common correlation `corr ∈ [0, 1)` (the range on which the covariance
    /// is positive definite for every dimension).
    pub fn new(dim: usize, tau2: F, corr: F) -> Result<Self, KernelError> {
        if dim == 0 {
            return Err(KernelError::InvalidDimension { dim });
        }
        if !(tau2.is_finite() && tau2 > F::zero()) {
            return Err(KernelError::InvalidParameter {
                name: "tau2",
                value: tau2.to_f64().unwrap_or(f64::NAN),
            });
        }
        if !(corr.is_finite() && corr >= F::zero() && corr < F::one()) {
            return Err(KernelError::InvalidParameter {
                name: "corr",
                value: corr.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { dim, tau2, corr })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau2(&self) -> F {
        self.tau2
    }

    pub fn corr(&self) -> F {
        self.corr
    }

    /// 1 + (t−1)γ, the eigenvalue factor attached to the all-ones direction.
    fn ones_factor(&self) -> F {
        F::one() + F::of_usize(self.dim - 1) * self.corr
    }

    /// log det S via the closed form.
    pub fn log_det(&self) -> F {
        F::of_usize(self.dim) * self.tau2.ln()
            + F::of_usize(self.dim - 1) * (F::one() - self.corr).ln()
            + self.ones_factor().ln()
    }

    /// det S via the closed form, as a direct product (no exp/log round trip).
    pub fn det(&self) -> F {
        self.tau2.powi(self.dim as i32)
            * (F::one() - self.corr).powi(self.dim as i32 - 1)
            * self.ones_factor()
    }

    /// Dense covariance matrix, row-major (diagnostics and tests).
    pub fn covariance(&self) -> Vec<F> {
        let t = self.dim;
        let off = self.corr * self.tau2;
        let mut m = vec![off; t * t];
        for i in 0..t {
            m[i * t + i] = self.tau2;
        }
        m
    }

    /// Dense inverse, row-major, via the closed form a(I − bJ) with
    /// a = 1/(τ²(1−γ)) and b = γ/(1 + (t−1)γ).
    pub fn inverse(&self) -> Vec<F> {
        let t = self.dim;
        let a = (self.tau2 * (F::one() - self.corr)).recip();
        let b = self.corr / self.ones_factor();
        let mut m = vec![-a * b; t * t];
        for i in 0..t {
            m[i * t + i] = a * (F::one() - b);
        }
        m
    }

    /// Log density of `x` under N(mean, S). Runs in O(t) using the closed
    /// forms; `x` and `mean` must both have length `dim`.
    pub fn logpdf(&self, x: &[F], mean: &[F]) -> Result<F, KernelError> {
        if x.len() != self.dim {
            return Err(KernelError::LengthMismatch { expected: self.dim, actual: x.len() });
        }
        if mean.len() != self.dim {
            return Err(KernelError::LengthMismatch { expected: self.dim, actual: mean.len() });
        }
        Ok(self.logpdf_residuals(x.iter().zip(mean).map(|(&xi, &mi)| xi - mi)))
    }

    /// Log density from a stream of residuals x − mean, which must yield
    /// exactly `dim` items (checked by a debug assertion). Lets callers
    /// evaluate the density without materializing mean vectors.
    pub fn logpdf_residuals(&self, residuals: impl Iterator<Item = F>) -> F {
        let a = (self.tau2 * (F::one() - self.corr)).recip();
        let b = self.corr / self.ones_factor();
        let mut sum_sq = F::zero();
        let mut sum = F::zero();
        let mut count = 0usize;
        for r in residuals {
            sum_sq += r * r;
            sum += r;
            count += 1;
        }
        debug_assert_eq!(count, self.dim, "residual stream length must equal dim");
        let quad = a * (sum_sq - b * sum * sum);
        let half = F::of(0.5);
        -half * (F::of_usize(self.dim) * F::of(LN_2PI) + self.log_det() + quad)
    }

    /// Draws one vector from N(mean, S) using the one-factor representation
    /// δ = mean + √(γτ²) z₀ 1 + √((1−γ)τ²) z, z₀ and z independent standard
    /// normals. For τ² below 1e-300 the mean is returned exactly.
    pub fn sample<R: Rng + ?Sized>(&self, mean: &[F], rng: &mut R) -> Vec<F>
    where
        StandardNormal: Distribution<F>,
    {
        assert_eq!(mean.len(), self.dim, "mean length must equal spec dimension");
        if self.tau2 < F::of(TAU2_SAMPLING_FLOOR) {
            return mean.to_vec();
        }
        let shared_sd = (self.corr * self.tau2).sqrt();
        let own_sd = ((F::one() - self.corr) * self.tau2).sqrt();
        let z0: F = rng.sample(StandardNormal);
        mean.iter()
            .map(|&m| {
                let z: F = rng.sample(StandardNormal);
                m + shared_sd * z0 + own_sd * z
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_invalid_parameters() {
        assert!(EquicorrSpec::new(0, 1.0, 0.5).is_err());
        assert!(EquicorrSpec::new(2, 0.0, 0.5).is_err());
        assert!(EquicorrSpec::new(2, -1.0, 0.5).is_err());
        assert!(EquicorrSpec::new(2, 1.0, 1.0).is_err());
        assert!(EquicorrSpec::new(2, 1.0, -0.1).is_err());
        assert!(EquicorrSpec::new(2, f64::NAN, 0.5).is_err());
        assert!(EquicorrSpec::new(3, 1e-12, 0.0).is_ok());
    }

    #[test]
    fn dimension_one_reduces_to_a_univariate_normal() {
        // log N(0 | 0, sd = 0.1): positive because the density exceeds one.
        let spec = EquicorrSpec::new(1, 0.01, 0.5).unwrap();
        let lp = spec.logpdf(&[0.0], &[0.0]).unwrap();
        assert_abs_diff_eq!(lp, 1.3836465597893728, epsilon = 1e-12);
        let direct = crate::kernels::normal_logpdf(0.0, 0.0, 0.1);
        assert_abs_diff_eq!(lp, direct, epsilon = 1e-13);
    }

    #[test]
    fn closed_form_inverse_and_det_match_frozen_two_dim_case() {
        // t = 2, τ² = 0.01, γ = 0.5: S = [[0.01, 0.005], [0.005, 0.01]].
        let spec = EquicorrSpec::new(2, 0.01, 0.5).unwrap();
        let inv = spec.inverse();
        let expect = [400.0 / 3.0, -200.0 / 3.0, -200.0 / 3.0, 400.0 / 3.0];
        for (a, e) in inv.iter().zip(expect) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(spec.det(), 7.5e-5, epsilon = 1e-15);
        assert_abs_diff_eq!(spec.log_det(), 7.5e-5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn length_mismatch_is_reported() {
        let spec = EquicorrSpec::new(3, 1.0, 0.5).unwrap();
        assert!(matches!(
            spec.logpdf(&[0.0, 0.0], &[0.0, 0.0, 0.0]),
            Err(KernelError::LengthMismatch { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn sampling_returns_mean_exactly_when_variance_underflows() {
        let spec = EquicorrSpec::new(3, 1e-305, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mean = [1.0, -2.0, 3.0];
        assert_eq!(spec.sample(&mean, &mut rng), mean.to_vec());
    }

    #[test]
    fn sample_moments_match_the_covariance() {
        let spec = EquicorrSpec::new(2, 0.25, 0.5).unwrap();
        let mean = [1.0, -1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 200_000;
        let (mut m0, mut m1, mut v0, mut v1, mut cov) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let s = spec.sample(&mean, &mut rng);
            m0 += s[0];
            m1 += s[1];
            v0 += (s[0] - mean[0]) * (s[0] - mean[0]);
            v1 += (s[1] - mean[1]) * (s[1] - mean[1]);
            cov += (s[0] - mean[0]) * (s[1] - mean[1]);
        }
        let nf = n as f64;
        assert_abs_diff_eq!(m0 / nf, 1.0, epsilon = 0.01);
        assert_abs_diff_eq!(m1 / nf, -1.0, epsilon = 0.01);
        assert_abs_diff_eq!(v0 / nf, 0.25, epsilon = 0.01);
        assert_abs_diff_eq!(v1 / nf, 0.25, epsilon = 0.01);
        assert_abs_diff_eq!(cov / nf, 0.125, epsilon = 0.01);
    }

    #[test]
    fn generic_over_f32() {
        let spec = EquicorrSpec::new(2, 0.01f32, 0.5).unwrap();
        let lp = spec.logpdf(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        // −½·ln((2π)² · det S) with det S = 7.5e-5
        assert!((lp - 2.91113_f32).abs() < 1e-3);
    }
}
