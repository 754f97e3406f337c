//! Scalar log-densities: normal, log-normal, beta, binomial.
//!
//! Conventions used across the whole crate:
//! * every normal / log-normal second parameter is a **standard deviation**,
//!   never a variance;
//! * densities return −∞ outside their support instead of NaN;
//! * scale parameters are validated by debug assertions — configuration
//!   structs validate once at the boundary, keeping the hot path branch-free.

use super::special::{ln_binomial_coefficient, ln_gamma, log_logistic, LN_2PI};
use crate::real::Real;

/// log N(x | mean, sd²).
pub fn normal_logpdf<F: Real>(x: F, mean: F, sd: F) -> F {
    debug_assert!(sd > F::zero(), "normal_logpdf requires sd > 0");
    let z = (x - mean) / sd;
    -F::of(0.5) * (z * z + F::of(LN_2PI)) - sd.ln()
}

/// log LogNormal(x | mu, sd²): the density of x when ln x ~ N(mu, sd²).
/// Returns −∞ for x ≤ 0.
pub fn lognormal_logpdf<F: Real>(x: F, mu: F, sd: F) -> F {
    debug_assert!(sd > F::zero(), "lognormal_logpdf requires sd > 0");
    if x <= F::zero() {
        return F::neg_infinity();
    }
    let lx = x.ln();
    normal_logpdf(lx, mu, sd) - lx
}

/// log Beta(x | a, b). Returns −∞ outside [0, 1]; the endpoints are handled
/// so that exponents of exactly zero contribute nothing (Beta(1, 1) is the
/// standard uniform everywhere on [0, 1]).
pub fn beta_logpdf<F: Real>(x: F, a: F, b: F) -> F {
    debug_assert!(a > F::zero() && b > F::zero(), "beta_logpdf requires a, b > 0");
    if x < F::zero() || x > F::one() {
        return F::neg_infinity();
    }
    let ln_norm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    let one = F::one();
    let first = if a == one { F::zero() } else { (a - one) * x.ln() };
    let second = if b == one { F::zero() } else { (b - one) * (one - x).ln() };
    ln_norm + first + second
}

/// log Binomial(y | n, prob) for prob ∈ [0, 1], handling the degenerate
/// endpoints exactly: prob = 0 puts all mass on y = 0 and prob = 1 on y = n.
pub fn binomial_logpmf<F: Real>(y: u64, n: u64, prob: F) -> F {
    assert!(y <= n, "binomial_logpmf requires y <= n");
    debug_assert!(
        prob >= F::zero() && prob <= F::one(),
        "binomial_logpmf requires prob in [0, 1]"
    );
    if prob == F::zero() {
        return if y == 0 { F::zero() } else { F::neg_infinity() };
    }
    if prob == F::one() {
        return if y == n { F::zero() } else { F::neg_infinity() };
    }
    ln_binomial_coefficient::<F>(n, y)
        + F::of(y as f64) * prob.ln()
        + F::of((n - y) as f64) * (F::one() - prob).ln()
}

/// log Binomial(y | n, logistic(eta)) evaluated directly on the log-odds
/// scale. Unlike composing [`binomial_logpmf`] with `logistic`, this stays
/// finite and accurate for arbitrarily large |eta| (a saturated success
/// probability never rounds to exactly 1 before the log is taken).
pub fn binomial_logpmf_logit<F: Real>(y: u64, n: u64, eta: F) -> F {
    assert!(y <= n, "binomial_logpmf_logit requires y <= n");
    ln_binomial_coefficient::<F>(n, y)
        + F::of(y as f64) * log_logistic(eta)
        + F::of((n - y) as f64) * log_logistic(-eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_matches_frozen_value() {
        // N(0 | 0, sd = 0.1) has density ≈ 3.989; its log is positive.
        assert_abs_diff_eq!(normal_logpdf(0.0f64, 0.0, 0.1), 1.3836465597893728, epsilon = 1e-12);
        assert_abs_diff_eq!(normal_logpdf(1.0f64, 0.0, 1.0), -0.5 - 0.5 * LN_2PI, epsilon = 1e-14);
    }

    #[test]
    fn lognormal_is_the_pushforward_of_a_normal() {
        // Change of variables: f(x) = N(ln x | mu, sd) / x.
        let (mu, sd, x) = (-2.34f64, 2.0, 0.37);
        assert_abs_diff_eq!(
            lognormal_logpdf(x, mu, sd),
            normal_logpdf(x.ln(), mu, sd) - x.ln(),
            epsilon = 1e-14
        );
        assert_eq!(lognormal_logpdf(0.0f64, 0.0, 1.0), f64::NEG_INFINITY);
        assert_eq!(lognormal_logpdf(-1.0f64, 0.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn beta_handles_uniform_and_endpoints() {
        assert_abs_diff_eq!(beta_logpdf(0.3f64, 1.0, 1.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(beta_logpdf(0.0f64, 1.0, 1.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(beta_logpdf(1.0f64, 1.0, 1.0), 0.0, epsilon = 1e-14);
        // Beta(2, 3) at 0.25: f = 12 · 0.25 · 0.75² = 1.6875
        assert_abs_diff_eq!(beta_logpdf(0.25f64, 2.0, 3.0), 1.6875f64.ln(), epsilon = 1e-12);
        assert_eq!(beta_logpdf(1.5f64, 2.0, 2.0), f64::NEG_INFINITY);
    }

    #[test]
    fn binomial_matches_frozen_value_and_endpoints() {
        // C(10,5)/2^10 = 252/1024
        assert_abs_diff_eq!(
            binomial_logpmf(5u64, 10, 0.5f64),
            (252.0f64 / 1024.0).ln(),
            epsilon = 1e-12
        );
        assert_eq!(binomial_logpmf(0u64, 10, 0.0f64), 0.0);
        assert_eq!(binomial_logpmf(3u64, 10, 0.0f64), f64::NEG_INFINITY);
        assert_eq!(binomial_logpmf(10u64, 10, 1.0f64), 0.0);
        assert_eq!(binomial_logpmf(9u64, 10, 1.0f64), f64::NEG_INFINITY);
    }

    #[test]
    fn logit_parameterization_agrees_at_moderate_eta_and_survives_saturation() {
        for &eta in &[-3.0f64, -0.4, 0.0, 1.7, 4.0] {
            let p = crate::kernels::logistic(eta);
            assert_abs_diff_eq!(
                binomial_logpmf_logit(7, 20, eta),
                binomial_logpmf(7, 20, p),
                epsilon = 1e-11
            );
        }
        // μ = ±40 would round logistic(η) to exactly 1 (or 0) in f64; the
        // logit form must stay finite and correctly ordered.
        let lp = binomial_logpmf_logit(20u64, 20, 40.0f64);
        assert!(lp.is_finite() && lp < 0.0 && lp > -1e-15);
        let lp_miss = binomial_logpmf_logit(19u64, 20, 40.0f64);
        assert!(lp_miss.is_finite() && lp_miss < -30.0);
    }
}
