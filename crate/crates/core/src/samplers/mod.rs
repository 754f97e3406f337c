//! Metropolis-within-Gibbs samplers for the three treatment-effect models.
//!
//! All three models share the arm-level likelihood and study layer
//!
//! * y_ik ~ Binomial(n_ik, p_ik), logit(p_ik) = μ_i + δ_ik·1\[k ≠ baseline\],
//! * δ_i ~ N_t(d_1i, S) with S = τ²\[(1−γ)I + γJ\] (contrast means d_1i from
//!   the basic effects), μ_i ~ N(m_b, s_b²), ln τ² ~ N(m_ℓ, s_ℓ²),
//!
//! and differ in the prior on the basic effects d (reference pinned to 0):
//!
//! * [`ModelKind::GaussianEffects`] — independent N(m_d, s_d²) per effect;
//! * [`ModelKind::DpGaussian`] — a truncated Dirichlet-process mixture with
//!   N(m_d, s_d²) base measure: treatments share atoms via labels;
//! * [`ModelKind::DpSpikeSlab`] — the same mixture whose base measure is a
//!   spike N(0, (v₀/3)²) / inverse-moment slab two-group prior with spike
//!   weight ω₀ ~ Beta(a_ω, b_ω).
//!
//! A full sweep updates, in fixed order: every μ_i, every δ_ij, ln τ², then
//! the model-specific block (basic effects, or atoms → labels → sticks →
//! spike indicators → ω₀). Random-walk Metropolis steps drive the continuous
//! coordinates; labels, sticks, spike indicators, and ω₀ are Gibbs draws.
//! Chains run in parallel, each on its own counter-based RNG stream, so a
//! (seed, config) pair reproduces output bit-for-bit regardless of thread
//! scheduling.

mod export;
mod run;
mod sweep;
pub mod targets;
pub mod validation;

pub use export::{read_samples_jsonl, write_samples_jsonl};
pub use run::run_chains;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::kernels::{calibrate_nlp_shape, ln_binomial_coefficient, KernelError};
use crate::NlpSpec;

/// Which treatment-effect prior the sampler targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "gaussian")]
    GaussianEffects,
    #[serde(rename = "dp-gaussian")]
    DpGaussian,
    #[serde(rename = "dp-spike-slab")]
    DpSpikeSlab,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] =
        [ModelKind::GaussianEffects, ModelKind::DpGaussian, ModelKind::DpSpikeSlab];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::GaussianEffects => "gaussian",
            ModelKind::DpGaussian => "dp-gaussian",
            ModelKind::DpSpikeSlab => "dp-spike-slab",
        }
    }

    pub fn parse(name: &str) -> Option<ModelKind> {
        match name {
            "gaussian" => Some(ModelKind::GaussianEffects),
            "dp-gaussian" => Some(ModelKind::DpGaussian),
            "dp-spike-slab" => Some(ModelKind::DpSpikeSlab),
            _ => None,
        }
    }

    /// Whether the effects layer is a Dirichlet-process mixture.
    pub fn is_clustered(&self) -> bool {
        !matches!(self, ModelKind::GaussianEffects)
    }

    pub fn has_spike(&self) -> bool {
        matches!(self, ModelKind::DpSpikeSlab)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hyperparameters of the shared layers and of each effects prior.
/// All `*_sd` fields are standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    /// Prior mean m_b of each study's baseline log-odds μ_i.
    pub baseline_mean: f64,
    /// Prior standard deviation s_b of μ_i.
    pub baseline_sd: f64,
    /// Prior mean m_ℓ of ln τ² (heterogeneity variance on the log scale).
    pub log_tau2_mean: f64,
    /// Prior standard deviation s_ℓ of ln τ².
    pub log_tau2_sd: f64,
    /// Mean m_d of the basic-effect prior / DP base measure.
    pub effect_mean: f64,
    /// Standard deviation s_d of the basic-effect prior / DP base measure.
    pub effect_sd: f64,
    /// Common correlation γ ∈ [0, 1) of multi-arm contrasts.
    pub corr: f64,
    /// Dirichlet-process concentration α.
    pub dp_concentration: f64,
    /// Truncation level H of the stick-breaking representation
    /// (`None` = number of treatments).
    pub truncation: Option<usize>,
    /// Spike width parameter v₀; the spike is N(0, (v₀/3)²).
    /// Required by the spike–slab model, ignored by the others.
    pub spike_v0: Option<f64>,
    /// Beta(a_ω, b_ω) prior on the spike weight ω₀.
    pub spike_weight_a: f64,
    /// See `spike_weight_a`.
    pub spike_weight_b: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            baseline_mean: 0.0,
            baseline_sd: 10.0,
            log_tau2_mean: -2.34,
            log_tau2_sd: 2.0,
            effect_mean: 0.0,
            effect_sd: 1.0,
            corr: 0.5,
            dp_concentration: 1.0,
            truncation: None,
            spike_v0: None,
            spike_weight_a: 1.0,
            spike_weight_b: 1.0,
        }
    }
}

/// Chain schedule, step sizes, and the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub chains: usize,
    /// Total sweeps per chain, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in sweep.
    pub thin: usize,
    pub seed: u64,
    /// Random-walk proposal standard deviations.
    pub step_mu: f64,
    pub step_delta: f64,
    pub step_log_tau2: f64,
    /// Step for basic effects (Gaussian model) or atoms (DP models).
    pub step_effect: f64,
    /// Robbins–Monro step adaptation toward a 0.44 acceptance rate during
    /// burn-in, frozen afterward. Deterministic given the seed.
    pub adapt: bool,
    /// Drop the likelihood and sample from the prior (diagnostics).
    pub prior_only: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl McmcConfig {
    /// Laptop-scale profile: 4 chains × 20,000 iterations, burn-in 10,000,
    /// thin 10 (4,000 retained draws).
    pub fn desk() -> Self {
        Self {
            chains: 4,
            iterations: 20_000,
            burn_in: 10_000,
            thin: 10,
            seed: 20240817,
            step_mu: 0.2,
            step_delta: 0.2,
            step_log_tau2: 0.5,
            step_effect: 0.2,
            adapt: true,
            prior_only: false,
        }
    }

    /// Publication-scale profile: 5 chains × 200,000 iterations, burn-in
    /// 100,000, thin 100 (5,000 retained draws).
    pub fn full() -> Self {
        Self { chains: 5, iterations: 200_000, burn_in: 100_000, thin: 100, ..Self::desk() }
    }

    /// Seconds-scale profile for smoke tests: 2 chains × 600 iterations,
    /// burn-in 300, thin 3 (200 retained draws).
    pub fn smoke() -> Self {
        Self { chains: 2, iterations: 600, burn_in: 300, thin: 3, ..Self::desk() }
    }

    /// Retained draws per chain.
    pub fn kept_per_chain(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Latent state of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    /// Baseline log-odds per study.
    pub mu: Vec<f64>,
    /// Study-specific contrasts, `delta[i][j]` for the j-th non-baseline arm.
    pub delta: Vec<Vec<f64>>,
    /// Heterogeneity variance.
    pub tau2: f64,
    pub effects: EffectsState,
}

/// The effects layer of the state, shaped by the model kind.
#[derive(Debug, Clone, PartialEq)]
pub enum EffectsState {
    /// Basic effects indexed by treatment; entry 0 is pinned to 0.
    Gaussian { d: Vec<f64> },
    Dp(DpState),
}

/// State of the truncated Dirichlet-process effects layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DpState {
    /// Cluster values d*_h, one per mixture component.
    pub atoms: Vec<f64>,
    /// Cluster assignment per treatment; index 0 (the reference) is unused
    /// and kept at 0.
    pub labels: Vec<usize>,
    /// Stick variables V_h with the last pinned to 1.
    pub sticks: Vec<f64>,
    /// Mixture weights derived from `sticks`.
    pub weights: Vec<f64>,
    /// Spike–slab extension, present only under [`ModelKind::DpSpikeSlab`].
    pub spike: Option<SpikeState>,
}

/// Spike–slab indicators and their weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeState {
    /// `true` = the atom is currently assigned to the spike component.
    pub indicators: Vec<bool>,
    /// Probability ω₀ that an atom comes from the spike.
    pub omega0: f64,
}

impl ChainState {
    /// Basic effect of a treatment: 0 for the reference, the assigned value
    /// otherwise.
    pub fn effect(&self, treatment: usize) -> f64 {
        if treatment == 0 {
            return 0.0;
        }
        match &self.effects {
            EffectsState::Gaussian { d } => d[treatment],
            EffectsState::Dp(dp) => dp.atoms[dp.labels[treatment]],
        }
    }

    /// All effective basic effects, reference first (always 0).
    pub fn effective_effects(&self, n_treatments: usize) -> Vec<f64> {
        (0..n_treatments).map(|t| self.effect(t)).collect()
    }

    /// Spike membership per treatment under the spike–slab model; the
    /// reference is in the zero class by definition. `None` otherwise.
    pub fn spike_flags(&self, n_treatments: usize) -> Option<Vec<bool>> {
        let EffectsState::Dp(dp) = &self.effects else { return None };
        let spike = dp.spike.as_ref()?;
        let mut flags = Vec::with_capacity(n_treatments);
        flags.push(true);
        for t in 1..n_treatments {
            flags.push(spike.indicators[dp.labels[t]]);
        }
        Some(flags)
    }
}

/// One retained posterior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub chain: usize,
    /// 1-based sweep index within the chain at which this draw was taken.
    pub iter: usize,
    /// Effective basic effects by treatment index; entry 0 is always 0.
    pub d: Vec<f64>,
    /// Spike membership per treatment (spike–slab model only).
    pub spike: Option<Vec<bool>>,
    pub tau2: f64,
    /// Spike weight (spike–slab model only).
    pub omega0: Option<f64>,
}

impl Draw {
    /// Effect values used for comparisons and odds ratios: spike-flagged
    /// treatments count as exactly zero, everything else keeps its effect.
    pub fn comparison_values(&self) -> Vec<f64> {
        match &self.spike {
            None => self.d.clone(),
            Some(flags) => self
                .d
                .iter()
                .zip(flags)
                .map(|(&v, &spiked)| if spiked { 0.0 } else { v })
                .collect(),
        }
    }
}

/// Per-chain Metropolis acceptance rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSummary {
    pub chain: usize,
    pub mu: f64,
    pub delta: f64,
    pub log_tau2: f64,
    /// Basic effects (Gaussian) or atoms (DP models).
    pub effect: f64,
}

/// Provenance of an in-memory sample set (absent when samples were loaded
/// from a bare JSON-lines file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub priors: PriorConfig,
    pub mcmc: McmcConfig,
    pub acceptance: Vec<AcceptanceSummary>,
}

/// Posterior draws from one fit (or loaded from disk).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub model: ModelKind,
    pub n_treatments: usize,
    /// Draws ordered by chain, then iteration.
    pub draws: Vec<Draw>,
    pub meta: Option<RunMeta>,
}

impl PosteriorSamples {
    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }
}

/// Errors raised while configuring, running, or (de)serializing a sampler.
#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error("invalid configuration: {message}")]
    InvalidConfig { message: String },

    #[error("the treatment network is disconnected; fit each component separately")]
    DisconnectedNetwork,

    #[error(transparent)]
    Kernel(#[from] KernelError),

    /// The log-target became NaN or +∞ — a numerical failure, never a valid
    /// state. Carries a debug dump of the offending chain state.
    #[error(
        "non-finite log-target in chain {chain}, iteration {iteration}, block {block}, \
         site {site}; state dump:\n{dump}"
    )]
    NonFiniteTarget { chain: usize, iteration: usize, block: &'static str, site: usize, dump: String },

    #[error("sample I/O failed: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed samples line {line}: {message}")]
    MalformedSamples { line: usize, message: String },
}

/// Data-independent resolution of a (model, priors) pair: validated
/// hyperparameters, the DP truncation level, and the calibrated slab.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub model: ModelKind,
    pub priors: PriorConfig,
    /// Resolved truncation H (0 under the Gaussian model).
    pub truncation: usize,
    /// Calibrated slab (spike–slab model only).
    pub nlp: Option<NlpSpec>,
    /// When false, every target drops the likelihood term (prior sampling).
    pub use_likelihood: bool,
}

impl ModelSpec {
    pub fn new(
        model: ModelKind,
        priors: &PriorConfig,
        n_treatments: usize,
    ) -> Result<Self, SamplerError> {
        let bad = |message: String| Err(SamplerError::InvalidConfig { message });
        if n_treatments < 2 {
            return bad(format!("need at least 2 treatments, got {n_treatments}"));
        }
        for (name, value) in [
            ("baseline_sd", priors.baseline_sd),
            ("log_tau2_sd", priors.log_tau2_sd),
            ("effect_sd", priors.effect_sd),
            ("dp_concentration", priors.dp_concentration),
            ("spike_weight_a", priors.spike_weight_a),
            ("spike_weight_b", priors.spike_weight_b),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return bad(format!("{name} must be finite and positive, got {value}"));
            }
        }
        for (name, value) in [
            ("baseline_mean", priors.baseline_mean),
            ("log_tau2_mean", priors.log_tau2_mean),
            ("effect_mean", priors.effect_mean),
        ] {
            if !value.is_finite() {
                return bad(format!("{name} must be finite, got {value}"));
            }
        }
        if !(priors.corr.is_finite() && (0.0..1.0).contains(&priors.corr)) {
            return bad(format!("corr must lie in [0, 1), got {}", priors.corr));
        }

        let (truncation, nlp) = if model.is_clustered() {
            let h = priors.truncation.unwrap_or(n_treatments);
            if h < 2 {
                return bad(format!("truncation must be at least 2, got {h}"));
            }
            let nlp = if model.has_spike() {
                let Some(v0) = priors.spike_v0 else {
                    return bad("spike_v0 is required by the spike-slab model".into());
                };
                Some(calibrate_nlp_shape(v0)?)
            } else {
                None
            };
            (h, nlp)
        } else {
            (0, None)
        };

        Ok(Self { model, priors: priors.clone(), truncation, nlp, use_likelihood: true })
    }

    /// Spike standard deviation v₀/3 (spike–slab model only).
    pub fn spike_sd(&self) -> Option<f64> {
        self.priors.spike_v0.map(|v0| v0 / 3.0)
    }
}

/// One arm, preprocessed for the likelihood hot path.
#[derive(Debug, Clone)]
pub struct ArmLayout {
    pub treatment: usize,
    pub events: u64,
    pub trials: u64,
    /// ln C(trials, events), constant across parameter updates.
    pub ln_coeff: f64,
    /// Index into the study's contrast vector; `None` for the baseline arm.
    pub contrast_idx: Option<usize>,
}

/// One study, preprocessed.
#[derive(Debug, Clone)]
pub struct StudyLayout {
    pub baseline: usize,
    /// Non-baseline treatments in ascending index order; `non_baseline[j]`
    /// is the treatment of contrast coordinate j.
    pub non_baseline: Vec<usize>,
    /// All arms in ascending treatment order.
    pub arms: Vec<ArmLayout>,
}

/// The dataset reshaped for sampling: per-study layouts plus the reverse
/// index from treatments to the studies containing them (in any role).
#[derive(Debug, Clone)]
pub struct FitData {
    pub studies: Vec<StudyLayout>,
    pub n_treatments: usize,
    pub studies_with: Vec<Vec<usize>>,
}

impl FitData {
    pub fn new(dataset: &Dataset) -> Self {
        let k = dataset.n_treatments();
        let mut studies_with = vec![Vec::new(); k];
        let studies = dataset
            .studies
            .iter()
            .enumerate()
            .map(|(i, study)| {
                let non_baseline: Vec<usize> = study.non_baseline_treatments().collect();
                let arms = study
                    .arms
                    .iter()
                    .map(|arm| ArmLayout {
                        treatment: arm.treatment,
                        events: arm.events,
                        trials: arm.trials,
                        ln_coeff: ln_binomial_coefficient(arm.trials, arm.events),
                        contrast_idx: non_baseline.iter().position(|&t| t == arm.treatment),
                    })
                    .collect();
                for arm in &study.arms {
                    studies_with[arm.treatment].push(i);
                }
                StudyLayout { baseline: study.baseline, non_baseline, arms }
            })
            .collect();
        Self { studies, n_treatments: k, studies_with }
    }

    /// Replaces one arm's event count (synthetic-data workflows), keeping
    /// the cached binomial coefficient in sync.
    pub fn set_events(&mut self, study: usize, arm: usize, events: u64) {
        let slot = &mut self.studies[study].arms[arm];
        assert!(events <= slot.trials, "events cannot exceed trials");
        slot.events = events;
        slot.ln_coeff = ln_binomial_coefficient(slot.trials, events);
    }
}
