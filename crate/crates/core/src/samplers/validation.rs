//! Simulation-consistency checks: exact prior sampling, outcome
//! regeneration, and the successive-conditional simulator that together
//! verify the sweep targets the distribution it claims to.
//!
//! The successive-conditional simulator alternates one Metropolis-within-
//! Gibbs sweep given the current outcomes with regenerating the outcomes
//! from the current parameters. Its stationary law is exactly the prior, so
//! the long-run moments of any monitored scalar must match plain i.i.d.
//! prior draws — a whole-sampler correctness test that is sensitive to
//! conditioning-set mistakes, wrong Jacobians, and misplaced likelihood
//! terms in any single site update.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, StandardNormal};

use super::sweep::ChainDriver;
use super::{
    ChainState, DpState, EffectsState, FitData, McmcConfig, ModelKind, ModelSpec, PriorConfig,
    SamplerError, SpikeState,
};
use crate::data::{validate_network, Dataset};
use crate::kernels::{
    chain_stream, logistic, nlp_sample, stick_breaking_weights, DATA_STREAM, PRIOR_STREAM,
};
use crate::EquicorrSpec;

/// Draws an index from (normalized) probability weights by inversion.
fn sample_categorical(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// One exact draw from the full prior: effects block first (clusters, if
/// any, with labels drawn from the stick-breaking weights), then τ², then
/// baselines, then study contrasts around their consistency means.
pub fn draw_prior_state(spec: &ModelSpec, data: &FitData, rng: &mut ChaCha8Rng) -> ChainState {
    let pr = &spec.priors;
    let normal = |rng: &mut ChaCha8Rng, mean: f64, sd: f64| {
        let z: f64 = rng.sample(StandardNormal);
        mean + sd * z
    };

    let effects = match spec.model {
        ModelKind::GaussianEffects => {
            let mut d = vec![0.0; data.n_treatments];
            for slot in d.iter_mut().skip(1) {
                *slot = normal(rng, pr.effect_mean, pr.effect_sd);
            }
            EffectsState::Gaussian { d }
        }
        ModelKind::DpGaussian | ModelKind::DpSpikeSlab => {
            let h = spec.truncation;
            let spike = spec.model.has_spike().then(|| {
                let omega0 = Beta::new(pr.spike_weight_a, pr.spike_weight_b)
                    .expect("positive Beta parameters")
                    .sample(rng);
                let indicators = (0..h).map(|_| rng.random::<f64>() < omega0).collect();
                SpikeState { indicators, omega0 }
            });
            let atoms = (0..h)
                .map(|i| match &spike {
                    Some(s) if s.indicators[i] => {
                        normal(rng, 0.0, spec.spike_sd().expect("spike–slab models carry v0"))
                    }
                    Some(_) => {
                        nlp_sample(spec.nlp.as_ref().expect("spike–slab models carry a slab"), rng)
                    }
                    None => normal(rng, pr.effect_mean, pr.effect_sd),
                })
                .collect();
            let stick_prior =
                Beta::new(1.0, pr.dp_concentration).expect("positive Beta parameters");
            let mut sticks: Vec<f64> = (0..h - 1).map(|_| stick_prior.sample(rng)).collect();
            sticks.push(1.0);
            let weights = stick_breaking_weights(&sticks)
                .expect("freshly drawn sticks are valid")
                .weights()
                .to_vec();
            let labels = (0..data.n_treatments)
                .map(|t| if t == 0 { 0 } else { sample_categorical(rng, &weights) })
                .collect();
            EffectsState::Dp(DpState { atoms, labels, sticks, weights, spike })
        }
    };

    let tau2 = normal(rng, pr.log_tau2_mean, pr.log_tau2_sd).exp();
    let mu: Vec<f64> =
        (0..data.studies.len()).map(|_| normal(rng, pr.baseline_mean, pr.baseline_sd)).collect();

    let mut state = ChainState { mu, delta: Vec::with_capacity(data.studies.len()), tau2, effects };
    for study in &data.studies {
        let base = state.effect(study.baseline);
        let mean: Vec<f64> =
            study.non_baseline.iter().map(|&t| state.effect(t) - base).collect();
        let mvn = EquicorrSpec::new(study.non_baseline.len(), tau2, pr.corr)
            .expect("prior τ² is positive and γ was validated");
        state.delta.push(mvn.sample(&mean, rng));
    }
    state
}

/// Replaces every arm's event count with a fresh Binomial(n, logistic(μ + δ))
/// draw under `state`, keeping the cached coefficients in sync.
pub fn resample_outcomes(data: &mut FitData, state: &ChainState, rng: &mut ChaCha8Rng) {
    for i in 0..data.studies.len() {
        for a in 0..data.studies[i].arms.len() {
            let arm = &data.studies[i].arms[a];
            let eta = match arm.contrast_idx {
                Some(j) => state.mu[i] + state.delta[i][j],
                None => state.mu[i],
            };
            let p = logistic(eta);
            let events = Binomial::new(arm.trials, p)
                .expect("logistic output lies in [0, 1]")
                .sample(rng);
            data.set_events(i, a, events);
        }
    }
}

/// Monitored scalars of one run: τ², the effective basic effect of
/// treatment 1, and (spike–slab only, empty otherwise) the spike weight.
#[derive(Debug, Clone, Default)]
pub struct MonitoredSeries {
    pub tau2: Vec<f64>,
    pub effect: Vec<f64>,
    pub omega0: Vec<f64>,
}

impl MonitoredSeries {
    fn push(&mut self, state: &ChainState, has_spike: bool) {
        self.tau2.push(state.tau2);
        self.effect.push(state.effect(1));
        if has_spike {
            let EffectsState::Dp(dp) = &state.effects else { unreachable!() };
            self.omega0.push(dp.spike.as_ref().expect("spike state present").omega0);
        }
    }
}

fn resolve(
    dataset: &Dataset,
    model: ModelKind,
    priors: &PriorConfig,
) -> Result<(ModelSpec, FitData), SamplerError> {
    let spec = ModelSpec::new(model, priors, dataset.n_treatments())?;
    if !validate_network(dataset).connected {
        return Err(SamplerError::DisconnectedNetwork);
    }
    Ok((spec, FitData::new(dataset)))
}

/// I.i.d. prior draws of the monitored scalars (the reference the
/// successive-conditional run is compared against). Uses a dedicated RNG
/// stream, so the two runs share no randomness even under the same seed.
pub fn prior_run(
    dataset: &Dataset,
    model: ModelKind,
    priors: &PriorConfig,
    draws: usize,
    seed: u64,
) -> Result<MonitoredSeries, SamplerError> {
    let (spec, data) = resolve(dataset, model, priors)?;
    let mut rng = chain_stream(seed, PRIOR_STREAM);
    let mut series = MonitoredSeries::default();
    for _ in 0..draws {
        let state = draw_prior_state(&spec, &data, &mut rng);
        series.push(&state, model.has_spike());
    }
    Ok(series)
}

/// The successive-conditional simulator: starting from an exact prior draw
/// and outcomes generated under it, alternate one full sweep (given the
/// current outcomes) with regenerating the outcomes (given the new
/// parameters), recording the monitored scalars after every sweep. Step
/// sizes stay fixed at the `mcmc` values — no adaptation — so the kernel is
/// exactly the one whose invariance is in question; the `mcmc` schedule
/// fields are ignored in favor of `cycles`.
pub fn successive_conditional_run(
    dataset: &Dataset,
    model: ModelKind,
    priors: &PriorConfig,
    mcmc: &McmcConfig,
    cycles: usize,
    seed: u64,
) -> Result<MonitoredSeries, SamplerError> {
    let (spec, mut data) = resolve(dataset, model, priors)?;
    let mut rng = chain_stream(seed, 0);
    let mut data_rng = chain_stream(seed, DATA_STREAM);

    let mut state = draw_prior_state(&spec, &data, &mut rng);
    resample_outcomes(&mut data, &state, &mut data_rng);

    let mut driver = ChainDriver::new(&spec, &data, mcmc, 0);
    let mut series = MonitoredSeries::default();
    for t in 1..=cycles {
        driver.sweep(&data, &mut state, &mut rng, t, false)?;
        series.push(&state, model.has_spike());
        resample_outcomes(&mut data, &state, &mut data_rng);
    }
    Ok(series)
}

/// Sample mean and its Monte-Carlo standard error for i.i.d. draws.
pub fn mean_and_se_iid(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample mean and a batch-means standard error for autocorrelated draws:
/// the series is cut into ⌊√n⌋ equal batches (the remainder is dropped) and
/// the error is estimated from the spread of the batch means.
pub fn mean_and_se_batch(xs: &[f64]) -> (f64, f64) {
    let n_batches = (xs.len() as f64).sqrt().floor() as usize;
    assert!(n_batches >= 2, "too few draws for a batch-means error estimate");
    let batch_len = xs.len() / n_batches;
    let used = &xs[..n_batches * batch_len];
    let mean = used.iter().sum::<f64>() / used.len() as f64;
    let batch_means: Vec<f64> = used
        .chunks_exact(batch_len)
        .map(|b| b.iter().sum::<f64>() / batch_len as f64)
        .collect();
    let var_batch = batch_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>()
        / (n_batches as f64 - 1.0);
    (mean, (var_batch / n_batches as f64).sqrt())
}
