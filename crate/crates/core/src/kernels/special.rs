//! Special functions and stable scalar transforms used by the density kernels.
//!
//! Everything here is generic over [`Real`] so the same code path serves f32
//! and f64. Coefficient sets are stored as f64 literals and converted once on
//! entry; accuracy is limited by the target type's precision.

use crate::real::Real;

/// ln(2π), the normalizing constant that appears in every Gaussian density.
pub const LN_2PI: f64 = 1.8378770664093453;

/// Natural log of the Gamma function for strictly positive arguments.
///
/// Lanczos approximation (g = 7, 9 terms) with the reflection formula for
/// arguments below 1/2. Absolute error is below 1e-13 in f64 over the range
/// used by this crate (arguments in \[1/16, 10^4\]).
pub fn ln_gamma<F: Real>(x: F) -> F {
    debug_assert!(x > F::zero(), "ln_gamma requires a positive argument");
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    let half = F::of(0.5);
    if x < half {
        // Γ(x)Γ(1−x) = π / sin(πx)
        let pi = F::of(std::f64::consts::PI);
        return (pi / (pi * x).sin()).ln() - ln_gamma(F::one() - x);
    }
    let z = x - F::one();
    let mut acc = F::of(0.99999999999980993);
    for (i, &c) in COEFFS.iter().enumerate() {
        acc = acc + F::of(c) / (z + F::of_usize(i + 1));
    }
    let t = z + F::of(7.5);
    F::of(0.5 * LN_2PI) + (z + half) * t.ln() - t + acc.ln()
}

/// Natural log of the binomial coefficient C(n, k).
pub fn ln_binomial_coefficient<F: Real>(n: u64, k: u64) -> F {
    assert!(k <= n, "binomial coefficient requires k <= n");
    if k == 0 || k == n {
        // C(n, 0) = C(n, n) = 1 exactly; skip the approximation's residue.
        return F::zero();
    }
    let nf = F::of(n as f64);
    let kf = F::of(k as f64);
    ln_gamma(nf + F::one()) - ln_gamma(kf + F::one()) - ln_gamma(nf - kf + F::one())
}

/// The logistic function 1 / (1 + e^{-x}), computed without overflow for any
/// finite input.
pub fn logistic<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// log of the logistic function, stable across the whole real line:
/// `log_logistic(-40)` is ≈ −40 rather than −inf, and `log_logistic(40)` is a
/// tiny negative number rather than 0-rounded-from-below.
pub fn log_logistic<F: Real>(x: F) -> F {
    if x >= F::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Log-odds of a probability in (0, 1).
pub fn logit<F: Real>(p: F) -> F {
    (p / (F::one() - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ln_gamma_matches_reference_values() {
        // Γ(1/2) = √π, Γ(1) = Γ(2) = 1, Γ(5) = 24; small arguments via reflection.
        assert_abs_diff_eq!(ln_gamma(0.5f64), 0.5 * std::f64::consts::PI.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(1.0f64), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(2.0f64), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(5.0f64), 24.0f64.ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(0.0625f64), statrs::function::gamma::ln_gamma(0.0625), epsilon = 1e-12);
    }

    #[test]
    fn ln_gamma_tracks_independent_implementation_across_range() {
        let mut x = 0.03f64;
        while x < 2000.0 {
            let mine = ln_gamma(x);
            let theirs = statrs::function::gamma::ln_gamma(x);
            let tol = 1e-12 * theirs.abs().max(1.0);
            assert!(
                (mine - theirs).abs() < tol,
                "ln_gamma({x}) = {mine}, reference {theirs}"
            );
            x *= 1.37;
        }
    }

    #[test]
    fn ln_binomial_coefficient_is_exact_for_small_cases() {
        assert_abs_diff_eq!(ln_binomial_coefficient::<f64>(10, 5), 252.0f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(ln_binomial_coefficient::<f64>(4, 0), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(ln_binomial_coefficient::<f64>(120, 60), {
            // Σ ln(i) over the exact integer factorization, an independent route.
            let ln_fact = |m: u64| (2..=m).map(|i| (i as f64).ln()).sum::<f64>();
            ln_fact(120) - 2.0 * ln_fact(60)
        }, epsilon = 1e-10);
    }

    #[test]
    fn logistic_saturates_without_overflow() {
        assert_abs_diff_eq!(logistic(0.0f64), 0.5);
        assert!(logistic(800.0f64) <= 1.0);
        assert!(logistic(-800.0f64) >= 0.0);
        assert!(log_logistic(-745.0f64).is_finite());
        assert_abs_diff_eq!(log_logistic(-40.0f64), -40.0, epsilon = 1e-12);
        assert!(log_logistic(40.0f64) < 0.0 && log_logistic(40.0f64) > -1e-15);
    }

    #[test]
    fn logit_inverts_logistic() {
        for &p in &[0.01f64, 0.3, 0.5, 0.99] {
            assert_abs_diff_eq!(logistic(logit(p)), p, epsilon = 1e-12);
        }
    }

    #[test]
    fn f32_instantiation_is_usable() {
        let v: f32 = ln_gamma(4.0f32);
        assert!((v - 6.0f32.ln()).abs() < 1e-5);
        assert!((logistic(0.0f32) - 0.5).abs() < 1e-7);
    }
}
