//! Chain initialization and the multi-chain driver.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;

use super::sweep::ChainDriver;
use super::{
    ChainState, Draw, DpState, EffectsState, FitData, McmcConfig, ModelKind, ModelSpec,
    PosteriorSamples, PriorConfig, RunMeta, SamplerError, SpikeState,
};
use crate::data::{validate_network, Dataset};
use crate::kernels::{chain_stream, nlp_sample, stick_breaking_weights};

/// Half-count-corrected empirical log-odds ln((y + ½) / (n − y + ½)),
/// finite for every y ∈ [0, n].
fn empirical_logit(events: u64, trials: u64) -> f64 {
    ((events as f64 + 0.5) / ((trials - events) as f64 + 0.5)).ln()
}

/// Deterministic-plus-prior starting point: baselines and contrasts start at
/// the data's half-count empirical logits, τ² at the prior median e^{m_ℓ},
/// and the effects block at a draw from its prior — except labels, which
/// start uniform across clusters so every cluster is reachable from sweep
/// one, and the spike weight, which starts at ½.
pub(crate) fn init_chain(spec: &ModelSpec, data: &FitData, rng: &mut ChaCha8Rng) -> ChainState {
    let mut mu = Vec::with_capacity(data.studies.len());
    let mut delta = Vec::with_capacity(data.studies.len());
    for study in &data.studies {
        let base_arm = study
            .arms
            .iter()
            .find(|a| a.contrast_idx.is_none())
            .expect("every study has a baseline arm");
        let base_logit = empirical_logit(base_arm.events, base_arm.trials);
        mu.push(base_logit);
        let mut contrasts = vec![0.0; study.non_baseline.len()];
        for arm in &study.arms {
            if let Some(j) = arm.contrast_idx {
                contrasts[j] = empirical_logit(arm.events, arm.trials) - base_logit;
            }
        }
        delta.push(contrasts);
    }

    let pr = &spec.priors;
    let effects = match spec.model {
        ModelKind::GaussianEffects => {
            let mut d = vec![0.0; data.n_treatments];
            for slot in d.iter_mut().skip(1) {
                let z: f64 = rng.sample(StandardNormal);
                *slot = pr.effect_mean + pr.effect_sd * z;
            }
            EffectsState::Gaussian { d }
        }
        ModelKind::DpGaussian | ModelKind::DpSpikeSlab => {
            let h = spec.truncation;
            let spike = spec.model.has_spike().then(|| SpikeState {
                indicators: (0..h).map(|_| rng.random::<f64>() < 0.5).collect(),
                omega0: 0.5,
            });
            let atoms = (0..h)
                .map(|i| match &spike {
                    // Draw each cluster value from the base-measure branch
                    // its indicator picked.
                    Some(s) if s.indicators[i] => {
                        let z: f64 = rng.sample(StandardNormal);
                        spec.spike_sd().expect("spike–slab models carry v0") * z
                    }
                    Some(_) => {
                        nlp_sample(spec.nlp.as_ref().expect("spike–slab models carry a slab"), rng)
                    }
                    None => {
                        let z: f64 = rng.sample(StandardNormal);
                        pr.effect_mean + pr.effect_sd * z
                    }
                })
                .collect();
            let labels = (0..data.n_treatments).map(|t| if t == 0 { 0 } else { rng.random_range(0..h) }).collect();
            let stick_prior = Beta::new(1.0, pr.dp_concentration).expect("positive Beta parameters");
            let mut sticks: Vec<f64> = (0..h - 1).map(|_| stick_prior.sample(rng)).collect();
            sticks.push(1.0);
            let weights = stick_breaking_weights(&sticks)
                .expect("freshly drawn sticks are valid")
                .weights()
                .to_vec();
            EffectsState::Dp(DpState { atoms, labels, sticks, weights, spike })
        }
    };

    ChainState { mu, delta, tau2: pr.log_tau2_mean.exp(), effects }
}

fn validate_mcmc(cfg: &McmcConfig) -> Result<(), SamplerError> {
    let bad = |message: String| Err(SamplerError::InvalidConfig { message });
    if cfg.chains == 0 {
        return bad("chains must be at least 1".into());
    }
    if cfg.thin == 0 {
        return bad("thin must be at least 1".into());
    }
    if cfg.burn_in >= cfg.iterations {
        return bad(format!(
            "burn_in ({}) must be smaller than iterations ({})",
            cfg.burn_in, cfg.iterations
        ));
    }
    for (name, value) in [
        ("step_mu", cfg.step_mu),
        ("step_delta", cfg.step_delta),
        ("step_log_tau2", cfg.step_log_tau2),
        ("step_effect", cfg.step_effect),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return bad(format!("{name} must be finite and positive, got {value}"));
        }
    }
    Ok(())
}

/// Fits one model to a dataset: validates the configuration and the
/// network's connectivity, then runs the configured chains in parallel
/// (each on its own RNG stream, so results are independent of thread
/// scheduling) and returns the thinned post-burn-in draws in chain order.
pub fn run_chains(
    dataset: &Dataset,
    model: ModelKind,
    priors: &PriorConfig,
    mcmc: &McmcConfig,
) -> Result<PosteriorSamples, SamplerError> {
    let spec = ModelSpec {
        use_likelihood: !mcmc.prior_only,
        ..ModelSpec::new(model, priors, dataset.n_treatments())?
    };
    validate_mcmc(mcmc)?;
    if !validate_network(dataset).connected {
        return Err(SamplerError::DisconnectedNetwork);
    }
    let data = FitData::new(dataset);

    let per_chain: Vec<_> = (0..mcmc.chains)
        .into_par_iter()
        .map(|chain| run_one_chain(&spec, &data, mcmc, chain))
        .collect::<Result<_, _>>()?;

    let mut draws = Vec::with_capacity(mcmc.chains * mcmc.kept_per_chain());
    let mut acceptance = Vec::with_capacity(mcmc.chains);
    for (chain_draws, summary) in per_chain {
        draws.extend(chain_draws);
        acceptance.push(summary);
    }
    Ok(PosteriorSamples {
        model,
        n_treatments: dataset.n_treatments(),
        draws,
        meta: Some(RunMeta { priors: priors.clone(), mcmc: mcmc.clone(), acceptance }),
    })
}

fn run_one_chain(
    spec: &ModelSpec,
    data: &FitData,
    mcmc: &McmcConfig,
    chain: usize,
) -> Result<(Vec<Draw>, super::AcceptanceSummary), SamplerError> {
    let mut rng = chain_stream(mcmc.seed, chain as u64);
    let mut state = init_chain(spec, data, &mut rng);
    let mut driver = ChainDriver::new(spec, data, mcmc, chain);
    let mut draws = Vec::with_capacity(mcmc.kept_per_chain());

    for t in 1..=mcmc.iterations {
        let adapting = mcmc.adapt && t <= mcmc.burn_in;
        driver.sweep(data, &mut state, &mut rng, t, adapting)?;
        if t == mcmc.burn_in {
            // Report acceptance over the frozen-step phase only.
            driver.reset_counts();
        }
        if t > mcmc.burn_in && (t - mcmc.burn_in) % mcmc.thin == 0 {
            draws.push(record_draw(&state, data.n_treatments, chain, t));
        }
    }
    Ok((draws, driver.acceptance_summary()))
}

fn record_draw(state: &ChainState, n_treatments: usize, chain: usize, iter: usize) -> Draw {
    let omega0 = match &state.effects {
        EffectsState::Dp(dp) => dp.spike.as_ref().map(|s| s.omega0),
        EffectsState::Gaussian { .. } => None,
    };
    Draw {
        chain,
        iter,
        d: state.effective_effects(n_treatments),
        spike: state.spike_flags(n_treatments),
        tau2: state.tau2,
        omega0,
    }
}
