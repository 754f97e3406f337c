//! Unnormalized log-conditionals for the per-site updates, and the full
//! joint log density they must stay consistent with.
//!
//! Each function returns the conditional log density of one site up to an
//! additive constant: exactly the terms of the joint that involve that site.
//! The correctness contract — enforced by the tests below and again by the
//! acceptance suite — is that for any two values of a site, the difference
//! of its conditional equals the difference of [`log_joint`] with everything
//! else held fixed. The ln τ² update works on the log scale, so its target
//! uses the normal prior on ln τ² directly; against the joint (which carries
//! the log-normal density of τ²) the identity picks up the
//! change-of-variables term: Δ_conditional = Δ_joint + (η′ − η).

use super::{ArmLayout, ChainState, DpState, EffectsState, FitData, ModelSpec, StudyLayout};
use crate::kernels::{beta_logpdf, log_logistic, lognormal_logpdf, nlp_logpdf, normal_logpdf};
use crate::EquicorrSpec;

/// Binomial log likelihood of one arm at linear predictor `eta`, using the
/// arm's cached log binomial coefficient.
#[inline]
fn arm_loglik(arm: &ArmLayout, eta: f64) -> f64 {
    arm.events as f64 * log_logistic(eta)
        + (arm.trials - arm.events) as f64 * log_logistic(-eta)
        + arm.ln_coeff
}

/// Log likelihood of every arm of a study at baseline log-odds `mu` and
/// contrast vector `delta`.
fn study_loglik(study: &StudyLayout, mu: f64, delta: &[f64]) -> f64 {
    study
        .arms
        .iter()
        .map(|arm| {
            let eta = match arm.contrast_idx {
                Some(j) => mu + delta[j],
                None => mu,
            };
            arm_loglik(arm, eta)
        })
        .sum()
}

/// Equicorrelated-normal log density from a residual stream. τ² ≤ 0 (or any
/// other invalid covariance) scores −∞ — zero density, a rejected proposal —
/// while a NaN τ² propagates as NaN so numerical failures stay visible to
/// the non-finite-target guard.
fn mvn_term(dim: usize, tau2: f64, corr: f64, residuals: impl Iterator<Item = f64>) -> f64 {
    if tau2.is_nan() {
        return f64::NAN;
    }
    match EquicorrSpec::new(dim, tau2, corr) {
        Ok(mvn) => mvn.logpdf_residuals(residuals),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Log density of one study's contrast vector, with treatment effects
/// supplied by `effect_of` so callers can score a candidate value without
/// mutating the state. The contrast mean of coordinate j is
/// `effect_of(t_j) − effect_of(baseline)`.
fn study_mvn(
    study: &StudyLayout,
    delta: &[f64],
    tau2: f64,
    corr: f64,
    effect_of: &impl Fn(usize) -> f64,
) -> f64 {
    let base = effect_of(study.baseline);
    mvn_term(
        study.non_baseline.len(),
        tau2,
        corr,
        study.non_baseline.iter().zip(delta).map(|(&t, &d)| d - (effect_of(t) - base)),
    )
}

/// Conditional for the baseline log-odds of `study` at `value`: all of the
/// study's arm likelihoods plus the N(m_b, s_b²) prior. The contrast density
/// does not involve μ and is omitted.
pub fn mu_target(
    spec: &ModelSpec,
    data: &FitData,
    state: &ChainState,
    study: usize,
    value: f64,
) -> f64 {
    let mut total = normal_logpdf(value, spec.priors.baseline_mean, spec.priors.baseline_sd);
    if spec.use_likelihood {
        total += study_loglik(&data.studies[study], value, &state.delta[study]);
    }
    total
}

/// Conditional for contrast coordinate `coord` of `study` at `value`: the
/// matching arm's likelihood plus the study's whole contrast density (the
/// coordinates are correlated, so the full vector is rescored with the
/// candidate substituted).
pub fn delta_target(
    spec: &ModelSpec,
    data: &FitData,
    state: &ChainState,
    study: usize,
    coord: usize,
    value: f64,
) -> f64 {
    let s = &data.studies[study];
    let delta = &state.delta[study];
    let base = state.effect(s.baseline);
    let residuals = s.non_baseline.iter().enumerate().map(|(j, &t)| {
        let dj = if j == coord { value } else { delta[j] };
        dj - (state.effect(t) - base)
    });
    let mut total = mvn_term(s.non_baseline.len(), state.tau2, spec.priors.corr, residuals);
    if spec.use_likelihood {
        let arm = s
            .arms
            .iter()
            .find(|a| a.contrast_idx == Some(coord))
            .expect("every contrast coordinate is backed by an arm");
        total += arm_loglik(arm, state.mu[study] + value);
    }
    total
}

/// Conditional for η = ln τ² at `eta`: every study's contrast density at
/// τ² = e^η plus the N(m_ℓ, s_ℓ²) prior on η itself (no Jacobian — the
/// update lives on the log scale).
pub fn log_tau2_target(spec: &ModelSpec, data: &FitData, state: &ChainState, eta: f64) -> f64 {
    let tau2 = eta.exp();
    let effect_of = |t: usize| state.effect(t);
    let mut total = normal_logpdf(eta, spec.priors.log_tau2_mean, spec.priors.log_tau2_sd);
    for (study, delta) in data.studies.iter().zip(&state.delta) {
        total += study_mvn(study, delta, tau2, spec.priors.corr, &effect_of);
    }
    total
}

/// Conditional for one basic effect (independent-effects model) at `value`:
/// the contrast densities of every study containing the treatment — in any
/// role, since a baseline appearance shifts every coordinate's mean — plus
/// the N(m_d, s_d²) prior.
pub fn effect_target(
    spec: &ModelSpec,
    data: &FitData,
    state: &ChainState,
    treatment: usize,
    value: f64,
) -> f64 {
    debug_assert!(treatment >= 1, "the reference effect is pinned to zero");
    debug_assert!(
        matches!(state.effects, EffectsState::Gaussian { .. }),
        "effect_target drives the independent-effects model; clustered models update atoms"
    );
    let effect_of = |t: usize| if t == treatment { value } else { state.effect(t) };
    let mut total = normal_logpdf(value, spec.priors.effect_mean, spec.priors.effect_sd);
    for &i in &data.studies_with[treatment] {
        total += study_mvn(&data.studies[i], &state.delta[i], state.tau2, spec.priors.corr, &effect_of);
    }
    total
}

/// Base-measure log density of one cluster value given the current state:
/// N(m_d, s_d²) under the plain mixture; under the spike–slab extension the
/// spike N(0, (v₀/3)²) or the calibrated slab, as the indicator says.
fn atom_prior_logpdf(spec: &ModelSpec, dp: &DpState, atom: usize, value: f64) -> f64 {
    match &dp.spike {
        None => normal_logpdf(value, spec.priors.effect_mean, spec.priors.effect_sd),
        Some(s) => {
            if s.indicators[atom] {
                let sd = spec.spike_sd().expect("spike–slab models carry v0");
                normal_logpdf(value, 0.0, sd)
            } else {
                nlp_logpdf(value, spec.nlp.as_ref().expect("spike–slab models carry a slab"))
            }
        }
    }
}

/// Conditional for one cluster value at `value`: the contrast densities of
/// every study containing any treatment currently assigned to this cluster,
/// plus the base-measure prior. An empty cluster reduces to the prior alone
/// (same code path — the study scan simply finds nothing).
pub fn atom_target(
    spec: &ModelSpec,
    data: &FitData,
    state: &ChainState,
    atom: usize,
    value: f64,
) -> f64 {
    let EffectsState::Dp(dp) = &state.effects else {
        panic!("atom_target requires a clustered-effects state");
    };
    let effect_of =
        |t: usize| if t != 0 && dp.labels[t] == atom { value } else { state.effect(t) };
    let mut total = atom_prior_logpdf(spec, dp, atom, value);
    for (study, delta) in data.studies.iter().zip(&state.delta) {
        let involved =
            study.arms.iter().any(|a| a.treatment != 0 && dp.labels[a.treatment] == atom);
        if involved {
            total += study_mvn(study, delta, state.tau2, spec.priors.corr, &effect_of);
        }
    }
    total
}

/// Unnormalized log weights for reassigning `treatment` to each cluster:
/// entry h is ln π_h plus the contrast densities of the treatment's studies
/// with cluster h's value substituted for this treatment only. Fills `out`
/// (cleared first) so the sweep can reuse one scratch buffer.
pub fn label_log_weights(
    spec: &ModelSpec,
    data: &FitData,
    state: &ChainState,
    treatment: usize,
    out: &mut Vec<f64>,
) {
    debug_assert!(treatment >= 1, "the reference treatment is not clustered");
    let EffectsState::Dp(dp) = &state.effects else {
        panic!("label_log_weights requires a clustered-effects state");
    };
    out.clear();
    for (h, &w) in dp.weights.iter().enumerate() {
        let effect_of = |t: usize| if t == treatment { dp.atoms[h] } else { state.effect(t) };
        let mut lw = w.ln();
        for &i in &data.studies_with[treatment] {
            lw += study_mvn(
                &data.studies[i],
                &state.delta[i],
                state.tau2,
                spec.priors.corr,
                &effect_of,
            );
        }
        out.push(lw);
    }
}

/// Log-scale Gibbs weights for one spike indicator given its cluster value:
/// returns (slab, spike) = (ln(1−ω₀) + ln slab(value), ln ω₀ + ln N(value |
/// 0, (v₀/3)²)). The indicator never touches the likelihood — cluster values
/// enter the contrast means unchanged either way — so these two terms are
/// the whole conditional.
pub fn spike_log_weights(spec: &ModelSpec, value: f64, omega0: f64) -> (f64, f64) {
    let slab = (-omega0).ln_1p()
        + nlp_logpdf(value, spec.nlp.as_ref().expect("spike–slab models carry a slab"));
    let spike = omega0.ln()
        + normal_logpdf(value, 0.0, spec.spike_sd().expect("spike–slab models carry v0"));
    (slab, spike)
}

/// Full joint log density of data and state: arm likelihoods, baseline and
/// contrast layers, the log-normal density of τ², and the effects block of
/// whichever model the state carries. This is the reference density the
/// per-site conditionals are tested against; the sampler itself never calls
/// it.
pub fn log_joint(spec: &ModelSpec, data: &FitData, state: &ChainState) -> f64 {
    let pr = &spec.priors;
    let effect_of = |t: usize| state.effect(t);
    let mut total = lognormal_logpdf(state.tau2, pr.log_tau2_mean, pr.log_tau2_sd);
    for ((study, delta), &mu) in data.studies.iter().zip(&state.delta).zip(&state.mu) {
        if spec.use_likelihood {
            total += study_loglik(study, mu, delta);
        }
        total += normal_logpdf(mu, pr.baseline_mean, pr.baseline_sd);
        total += study_mvn(study, delta, state.tau2, pr.corr, &effect_of);
    }
    match &state.effects {
        EffectsState::Gaussian { d } => {
            for &dk in &d[1..] {
                total += normal_logpdf(dk, pr.effect_mean, pr.effect_sd);
            }
        }
        EffectsState::Dp(dp) => {
            for (h, &a) in dp.atoms.iter().enumerate() {
                total += atom_prior_logpdf(spec, dp, h, a);
            }
            for t in 1..data.n_treatments {
                total += dp.weights[dp.labels[t]].ln();
            }
            // The last stick is pinned to 1 (a point mass, no density term).
            for &v in &dp.sticks[..dp.sticks.len() - 1] {
                total += beta_logpdf(v, 1.0, pr.dp_concentration);
            }
            if let Some(s) = &dp.spike {
                for &spiked in &s.indicators {
                    total += if spiked { s.omega0.ln() } else { (-s.omega0).ln_1p() };
                }
                total += beta_logpdf(s.omega0, pr.spike_weight_a, pr.spike_weight_b);
            }
        }
    }
    total
}
