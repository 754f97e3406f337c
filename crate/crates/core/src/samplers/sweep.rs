//! One full Metropolis-within-Gibbs sweep, with per-site step-size
//! adaptation and acceptance bookkeeping.
//!
//! Block order within a sweep is fixed: every study's baseline log-odds,
//! every contrast coordinate, ln τ², then the effects block — basic effects
//! under the independent-effects model; cluster values → labels → sticks
//! (→ spike indicators → spike weight) under the clustered models.
//! Continuous sites move by random-walk Metropolis; labels, sticks, spike
//! indicators, and the spike weight are exact Gibbs draws.
//!
//! During burn-in (and only then) each Metropolis site adapts its proposal
//! standard deviation by Robbins–Monro on the log scale toward a 0.44
//! acceptance rate, with gain t^{−0.6} at sweep t; afterwards the steps are
//! frozen so the chain is a genuine Markov chain.

use rand_chacha::ChaCha8Rng;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use super::targets;
use super::{AcceptanceSummary, ChainState, EffectsState, FitData, McmcConfig, ModelKind, ModelSpec, SamplerError};
use crate::kernels::{logistic, stick_breaking_weights};

/// Robbins–Monro target acceptance rate for scalar random-walk sites.
const TARGET_ACCEPT: f64 = 0.44;
/// Robbins–Monro gain exponent: gain(t) = t^{−GAIN_EXPONENT}.
const GAIN_EXPONENT: f64 = 0.6;
/// Proposals for τ² never go below this floor (applied on the log scale),
/// keeping the covariance factorizable at machine precision.
const TAU2_PROPOSAL_FLOOR: f64 = 1e-12;

/// Per-site random-walk proposal standard deviations.
#[derive(Debug, Clone)]
pub(crate) struct StepSizes {
    pub mu: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
    pub log_tau2: f64,
    /// Basic effects (indexed by treatment, entry 0 unused) or cluster
    /// values (indexed by cluster), depending on the model.
    pub effect: Vec<f64>,
}

impl StepSizes {
    fn new(spec: &ModelSpec, data: &FitData, cfg: &McmcConfig) -> Self {
        let effect_sites = match spec.model {
            ModelKind::GaussianEffects => data.n_treatments,
            _ => spec.truncation,
        };
        Self {
            mu: vec![cfg.step_mu; data.studies.len()],
            delta: data
                .studies
                .iter()
                .map(|s| vec![cfg.step_delta; s.non_baseline.len()])
                .collect(),
            log_tau2: cfg.step_log_tau2,
            effect: vec![cfg.step_effect; effect_sites],
        }
    }
}

/// Running (proposals, accepts) tally for one Metropolis block.
#[derive(Debug, Clone, Copy, Default)]
struct BlockTally {
    proposals: u64,
    accepts: u64,
}

impl BlockTally {
    fn record(&mut self, accepted: bool) {
        self.proposals += 1;
        self.accepts += u64::from(accepted);
    }

    fn rate(self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepts as f64 / self.proposals as f64
        }
    }
}

/// Acceptance tallies for every Metropolis block of one chain.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct AcceptCounts {
    mu: BlockTally,
    delta: BlockTally,
    log_tau2: BlockTally,
    effect: BlockTally,
}

/// Everything one chain needs besides its state and RNG: the resolved
/// model, adaptive step sizes, tallies, and reusable scratch buffers. The
/// data is passed to every [`ChainDriver::sweep`] call instead of being
/// held here, so callers that regenerate outcomes between sweeps (the
/// simulation-consistency checks) can mutate it freely.
pub(crate) struct ChainDriver<'a> {
    spec: &'a ModelSpec,
    chain: usize,
    steps: StepSizes,
    counts: AcceptCounts,
    label_weights: Vec<f64>,
    assigned: Vec<usize>,
    beyond: Vec<usize>,
}

/// Outcome of one random-walk Metropolis step.
struct Move {
    value: f64,
    alpha: f64,
    accepted: bool,
}

/// One random-walk Metropolis step against `target`, with an optional lower
/// clamp on the proposal. `None` signals a non-finite target — NaN anywhere,
/// +∞, or a chain stuck at zero density — which callers convert into an
/// abort carrying the chain state.
fn metropolis(
    rng: &mut ChaCha8Rng,
    current: f64,
    step: f64,
    clamp_min: Option<f64>,
    target: impl Fn(f64) -> f64,
) -> Option<Move> {
    let t_cur = target(current);
    let z: f64 = rng.sample(StandardNormal);
    let mut proposal = current + step * z;
    if let Some(min) = clamp_min {
        proposal = proposal.max(min);
    }
    let t_prop = target(proposal);
    if t_cur.is_nan() || t_prop.is_nan() || t_cur == f64::INFINITY || t_prop == f64::INFINITY {
        return None;
    }
    let alpha = if t_cur == f64::NEG_INFINITY {
        if t_prop == f64::NEG_INFINITY {
            return None;
        }
        1.0
    } else {
        (t_prop - t_cur).exp().min(1.0)
    };
    // Always consume the uniform so the RNG stream does not depend on alpha.
    let accepted = rng.random::<f64>() < alpha;
    Some(Move { value: if accepted { proposal } else { current }, alpha, accepted })
}

/// Robbins–Monro update of one proposal step on the log scale.
fn adapt_step(step: &mut f64, alpha: f64, iteration: usize) {
    let gain = (iteration as f64).powf(-GAIN_EXPONENT);
    *step = (step.ln() + gain * (alpha - TARGET_ACCEPT)).exp();
}

/// Draws an index from unnormalized log weights (max-shifted). `None` when
/// the weights contain NaN or are all −∞.
pub(crate) fn sample_categorical_log(rng: &mut ChaCha8Rng, log_weights: &[f64]) -> Option<usize> {
    let mut max = f64::NEG_INFINITY;
    for &w in log_weights {
        if w.is_nan() {
            return None;
        }
        max = max.max(w);
    }
    if max == f64::NEG_INFINITY {
        return None;
    }
    let total: f64 = log_weights.iter().map(|&w| (w - max).exp()).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in log_weights.iter().enumerate() {
        acc += (w - max).exp();
        if u < acc {
            return Some(i);
        }
    }
    Some(log_weights.len() - 1)
}

fn non_finite(
    chain: usize,
    iteration: usize,
    block: &'static str,
    site: usize,
    state: &ChainState,
) -> SamplerError {
    SamplerError::NonFiniteTarget { chain, iteration, block, site, dump: format!("{state:#?}") }
}

impl<'a> ChainDriver<'a> {
    pub fn new(spec: &'a ModelSpec, data: &FitData, cfg: &McmcConfig, chain: usize) -> Self {
        let truncation = spec.truncation;
        Self {
            spec,
            chain,
            steps: StepSizes::new(spec, data, cfg),
            counts: AcceptCounts::default(),
            label_weights: Vec::with_capacity(truncation),
            assigned: vec![0; truncation],
            beyond: vec![0; truncation],
        }
    }

    /// Clears the acceptance tallies (called once when burn-in ends, so the
    /// reported rates reflect the frozen-step phase).
    pub fn reset_counts(&mut self) {
        self.counts = AcceptCounts::default();
    }

    pub fn acceptance_summary(&self) -> AcceptanceSummary {
        AcceptanceSummary {
            chain: self.chain,
            mu: self.counts.mu.rate(),
            delta: self.counts.delta.rate(),
            log_tau2: self.counts.log_tau2.rate(),
            effect: self.counts.effect.rate(),
        }
    }

    /// Runs one full sweep in place. `iteration` is the 1-based sweep index
    /// (it sets the adaptation gain); `adapting` is true only during burn-in
    /// of runs that asked for adaptation. `data` must keep the shape it had
    /// at construction (outcome counts may change, the layout may not).
    pub fn sweep(
        &mut self,
        data: &FitData,
        state: &mut ChainState,
        rng: &mut ChaCha8Rng,
        iteration: usize,
        adapting: bool,
    ) -> Result<(), SamplerError> {
        let (spec, chain) = (self.spec, self.chain);

        for i in 0..data.studies.len() {
            let mv = metropolis(rng, state.mu[i], self.steps.mu[i], None, |v| {
                targets::mu_target(spec, data, state, i, v)
            })
            .ok_or_else(|| non_finite(chain, iteration, "mu", i, state))?;
            state.mu[i] = mv.value;
            self.counts.mu.record(mv.accepted);
            if adapting {
                adapt_step(&mut self.steps.mu[i], mv.alpha, iteration);
            }
        }

        for i in 0..data.studies.len() {
            for j in 0..data.studies[i].non_baseline.len() {
                let mv = metropolis(rng, state.delta[i][j], self.steps.delta[i][j], None, |v| {
                    targets::delta_target(spec, data, state, i, j, v)
                })
                .ok_or_else(|| non_finite(chain, iteration, "delta", i, state))?;
                state.delta[i][j] = mv.value;
                self.counts.delta.record(mv.accepted);
                if adapting {
                    adapt_step(&mut self.steps.delta[i][j], mv.alpha, iteration);
                }
            }
        }

        {
            let eta = state.tau2.ln();
            let mv = metropolis(
                rng,
                eta,
                self.steps.log_tau2,
                Some(TAU2_PROPOSAL_FLOOR.ln()),
                |v| targets::log_tau2_target(spec, data, state, v),
            )
            .ok_or_else(|| non_finite(chain, iteration, "log_tau2", 0, state))?;
            state.tau2 = mv.value.exp();
            self.counts.log_tau2.record(mv.accepted);
            if adapting {
                adapt_step(&mut self.steps.log_tau2, mv.alpha, iteration);
            }
        }

        match spec.model {
            ModelKind::GaussianEffects => {
                self.update_basic_effects(data, state, rng, iteration, adapting)
            }
            ModelKind::DpGaussian | ModelKind::DpSpikeSlab => {
                self.update_clusters(data, state, rng, iteration, adapting)
            }
        }
    }

    fn update_basic_effects(
        &mut self,
        data: &FitData,
        state: &mut ChainState,
        rng: &mut ChaCha8Rng,
        iteration: usize,
        adapting: bool,
    ) -> Result<(), SamplerError> {
        let (spec, chain) = (self.spec, self.chain);
        for k in 1..data.n_treatments {
            let mv = metropolis(rng, state.effect(k), self.steps.effect[k], None, |v| {
                targets::effect_target(spec, data, state, k, v)
            })
            .ok_or_else(|| non_finite(chain, iteration, "effect", k, state))?;
            let EffectsState::Gaussian { d } = &mut state.effects else {
                unreachable!("independent-effects model carries a Gaussian state");
            };
            d[k] = mv.value;
            self.counts.effect.record(mv.accepted);
            if adapting {
                adapt_step(&mut self.steps.effect[k], mv.alpha, iteration);
            }
        }
        Ok(())
    }

    fn update_clusters(
        &mut self,
        data: &FitData,
        state: &mut ChainState,
        rng: &mut ChaCha8Rng,
        iteration: usize,
        adapting: bool,
    ) -> Result<(), SamplerError> {
        let (spec, chain) = (self.spec, self.chain);
        let h_max = spec.truncation;

        // Cluster values: random-walk Metropolis against each value's
        // conditional (empty clusters fall back to the base measure alone).
        for h in 0..h_max {
            let current = {
                let EffectsState::Dp(dp) = &state.effects else {
                    unreachable!("clustered models carry a DP state");
                };
                dp.atoms[h]
            };
            let mv = metropolis(rng, current, self.steps.effect[h], None, |v| {
                targets::atom_target(spec, data, state, h, v)
            })
            .ok_or_else(|| non_finite(chain, iteration, "atom", h, state))?;
            let EffectsState::Dp(dp) = &mut state.effects else { unreachable!() };
            dp.atoms[h] = mv.value;
            self.counts.effect.record(mv.accepted);
            if adapting {
                adapt_step(&mut self.steps.effect[h], mv.alpha, iteration);
            }
        }

        // Labels: exact Gibbs from the mixture weights times each study
        // block's density with the candidate cluster value substituted.
        for k in 1..data.n_treatments {
            targets::label_log_weights(spec, data, state, k, &mut self.label_weights);
            let h = sample_categorical_log(rng, &self.label_weights)
                .ok_or_else(|| non_finite(chain, iteration, "label", k, state))?;
            let EffectsState::Dp(dp) = &mut state.effects else { unreachable!() };
            dp.labels[k] = h;
        }

        // Sticks: V_h | labels ~ Beta(1 + n_h, α + m_h) with n_h the number
        // of treatments in cluster h and m_h the number in later clusters;
        // the last stick stays pinned to 1.
        {
            let EffectsState::Dp(dp) = &mut state.effects else { unreachable!() };
            self.assigned.fill(0);
            self.beyond.fill(0);
            for &label in &dp.labels[1..] {
                self.assigned[label] += 1;
                for h in 0..label {
                    self.beyond[h] += 1;
                }
            }
            for h in 0..h_max - 1 {
                let a = 1.0 + self.assigned[h] as f64;
                let b = spec.priors.dp_concentration + self.beyond[h] as f64;
                let beta = Beta::new(a, b).expect("positive Beta parameters");
                dp.sticks[h] = beta.sample(rng);
            }
            dp.sticks[h_max - 1] = 1.0;
            dp.weights = stick_breaking_weights(&dp.sticks)?.weights().to_vec();
        }

        // Spike indicators and their weight: exact Gibbs. The indicator
        // conditional only weighs the two base-measure branches — cluster
        // values enter the contrast means unchanged either way.
        if spec.model.has_spike() {
            let EffectsState::Dp(dp) = &mut state.effects else { unreachable!() };
            let spike = dp.spike.as_mut().expect("spike–slab state carries indicators");
            for h in 0..h_max {
                let (lw_slab, lw_spike) = targets::spike_log_weights(spec, dp.atoms[h], spike.omega0);
                let diff = lw_spike - lw_slab;
                if diff.is_nan() {
                    let dump = format!("{state:#?}");
                    return Err(SamplerError::NonFiniteTarget {
                        chain,
                        iteration,
                        block: "spike",
                        site: h,
                        dump,
                    });
                }
                spike.indicators[h] = rng.random::<f64>() < logistic(diff);
            }
            let in_spike = spike.indicators.iter().filter(|&&s| s).count();
            let a = spec.priors.spike_weight_a + in_spike as f64;
            let b = spec.priors.spike_weight_b + (h_max - in_spike) as f64;
            let beta = Beta::new(a, b).expect("positive Beta parameters");
            spike.omega0 = beta.sample(rng);
        }

        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::normal_logpdf;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn categorical_sampler_matches_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let lw = [0.2f64.ln(), 0.3f64.ln(), 0.5f64.ln()];
        let n = 60_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[sample_categorical_log(&mut rng, &lw).unwrap()] += 1;
        }
        for (count, expect) in counts.iter().zip([0.2, 0.3, 0.5]) {
            assert_abs_diff_eq!(*count as f64 / n as f64, expect, epsilon = 0.01);
        }
    }

    #[test]
    fn categorical_sampler_skips_impossible_and_flags_degenerate_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let lw = [f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY];
        for _ in 0..200 {
            assert_eq!(sample_categorical_log(&mut rng, &lw), Some(1));
        }
        assert_eq!(sample_categorical_log(&mut rng, &[f64::NEG_INFINITY; 2]), None);
        assert_eq!(sample_categorical_log(&mut rng, &[0.0, f64::NAN]), None);
    }

    /// The Metropolis helper must leave its target invariant: a long
    /// single-site run targeting N(1.5, 0.7²) reproduces that mean and
    /// standard deviation.
    #[test]
    fn metropolis_preserves_a_normal_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut x = 0.0f64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let n = 80_000;
        for _ in 0..n {
            let mv = metropolis(&mut rng, x, 1.4, None, |v| normal_logpdf(v, 1.5, 0.7)).unwrap();
            x = mv.value;
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n as f64;
        let sd = (sum_sq / n as f64 - mean * mean).sqrt();
        assert_abs_diff_eq!(mean, 1.5, epsilon = 0.03);
        assert_abs_diff_eq!(sd, 0.7, epsilon = 0.03);
    }

    #[test]
    fn metropolis_flags_non_finite_targets_and_escapes_zero_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(metropolis(&mut rng, 0.0, 1.0, None, |_| f64::NAN).is_none());
        assert!(metropolis(&mut rng, 0.0, 1.0, None, |_| f64::INFINITY).is_none());
        assert!(metropolis(&mut rng, 0.0, 1.0, None, |_| f64::NEG_INFINITY).is_none());
        // A zero-density current point accepts any finite-density proposal.
        for _ in 0..50 {
            let mv = metropolis(&mut rng, 0.0, 1.0, None, |v| {
                if v == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    normal_logpdf(v, 0.0, 1.0)
                }
            })
            .unwrap();
            assert!(mv.accepted && mv.value != 0.0);
        }
    }

    #[test]
    fn metropolis_respects_the_proposal_clamp() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..500 {
            let mv =
                metropolis(&mut rng, -5.0, 3.0, Some(-5.0), |v| normal_logpdf(v, -5.0, 1.0))
                    .unwrap();
            assert!(mv.value >= -5.0);
        }
    }

    #[test]
    fn adaptation_raises_steps_when_accepting_and_lowers_them_when_stuck() {
        let mut grow = 0.2f64;
        let mut shrink = 0.2f64;
        for t in 1..=200 {
            adapt_step(&mut grow, 1.0, t);
            adapt_step(&mut shrink, 0.0, t);
        }
        assert!(grow > 0.2 && shrink < 0.2);
        // The gain decays, so late sweeps barely move the step.
        let before = grow;
        adapt_step(&mut grow, 1.0, 1_000_000);
        assert!((grow - before).abs() / before < 1e-3);
    }
}
