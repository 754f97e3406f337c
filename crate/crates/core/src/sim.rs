//! Synthetic trial networks: a fixed catalog of generating scenarios, a
//! bundled study-skeleton template, dataset simulation under the contrast
//! model, and recovery scoring of fitted posteriors against the generating
//! truth.
//!
//! A scenario fixes the basic-effect vector (one entry per treatment, entry
//! 0 pinned to zero), an effect-size multiplier, and the between-study
//! heterogeneity SD τ. Datasets are simulated study by study from a
//! template of arm sizes: baseline log-odds are drawn fresh, study contrasts
//! come from the equicorrelated normal around the scenario's contrasts, and
//! event counts are binomial. Scoring reads the truth as a comparison
//! structure (zeros collapse into the reference class, equal values share a
//! class) and reports how much posterior mass lands on it.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{parse_dataset, Arm, DataError, Dataset, Study};
use crate::graph::{
    build_initial_graph, closest_coherent, induced_relation, joint_probability, n_pairs,
    pairwise_probabilities, select_subgraph, trim_sequence, ComparisonGraph, Relation,
};
use crate::kernels::{chain_stream, derive_seed, logistic, EquicorrSpec, DATA_STREAM};
use crate::samplers::{
    run_chains, Draw, McmcConfig, ModelKind, PosteriorSamples, PriorConfig, SamplerError,
};

/// Common correlation of multi-arm contrasts during simulation, matching
/// the fitted prior's covariance structure.
pub const SIM_CONTRAST_CORR: f64 = 0.5;

/// Posterior-probability threshold at which the scored subgraph is chosen.
pub const SUBGRAPH_THRESHOLD: f64 = 0.9;

/// One data-generating configuration: an effect pattern with its scale and
/// heterogeneity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    /// Model family whose effect pattern the vector encodes.
    pub family: ModelKind,
    /// Basic effects by treatment index, already scaled by `multiplier`;
    /// entry 0 is the reference and always 0.
    pub d1: Vec<f64>,
    /// Effect-size multiplier applied to the family's base vector.
    pub multiplier: u8,
    /// Between-study heterogeneity SD τ.
    pub tau: f64,
}

/// Base effect vectors by family, at multiplier 1.
const SCENARIO_BASES: [(ModelKind, [f64; 6]); 3] = [
    (ModelKind::GaussianEffects, [0.0, -0.6, -0.3, 0.3, 0.6, 0.9]),
    (ModelKind::DpGaussian, [0.0, 0.3, -0.3, -0.3, 0.3, 0.3]),
    (ModelKind::DpSpikeSlab, [0.0, 0.3, 0.0, 0.0, 0.3, 0.3]),
];

/// The full generating grid: 3 base vectors × multipliers {0, 1, 2} ×
/// τ ∈ {0.05, 0.1} = 18 scenarios, in that nesting order.
pub fn scenario_catalog() -> Vec<Scenario> {
    let mut catalog = Vec::with_capacity(18);
    for (family, base) in SCENARIO_BASES {
        for multiplier in [0u8, 1, 2] {
            for tau in [0.05, 0.1] {
                let d1 = base
                    .iter()
                    .map(|&v| {
                        let scaled = v * f64::from(multiplier);
                        // Normalize −0.0 so zero entries compare and print
                        // identically regardless of the base entry's sign.
                        if scaled == 0.0 {
                            0.0
                        } else {
                            scaled
                        }
                    })
                    .collect();
                catalog.push(Scenario {
                    label: format!("{}-x{multiplier}-tau{tau}", family.as_str()),
                    family,
                    d1,
                    multiplier,
                    tau,
                });
            }
        }
    }
    catalog
}

/// The comparison structure a basic-effect vector encodes: entries exactly
/// zero collapse into the reference class, equal nonzero entries share a
/// class, and classes order by value. A multiplier-0 vector therefore
/// yields one all-tied class.
pub fn true_relation(d1: &[f64]) -> Relation {
    let flags = d1.iter().map(|&v| v == 0.0).collect();
    let probe = Draw {
        chain: 0,
        iter: 0,
        d: d1.to_vec(),
        spike: Some(flags),
        tau2: 0.0,
        omega0: None,
    };
    induced_relation(&probe, ModelKind::DpSpikeSlab)
}

/// One study skeleton: arm sizes without outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateStudy {
    pub id: String,
    /// (treatment index, arm size), ascending by treatment; at least two
    /// arms with distinct treatments and positive sizes.
    pub arms: Vec<(usize, u64)>,
    /// Baseline treatment index, present among the arms.
    pub baseline: usize,
}

/// A trial network without outcomes: the skeleton datasets are simulated
/// onto.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateNetwork {
    /// Treatment labels by index; entry 0 is the reference.
    pub labels: Vec<String>,
    pub studies: Vec<TemplateStudy>,
}

impl TemplateNetwork {
    pub fn n_treatments(&self) -> usize {
        self.labels.len()
    }

    pub fn n_studies(&self) -> usize {
        self.studies.len()
    }

    /// Strips outcomes from a parsed dataset, keeping structure and sizes.
    pub fn from_dataset(dataset: &Dataset) -> TemplateNetwork {
        TemplateNetwork {
            labels: dataset.labels.clone(),
            studies: dataset
                .studies
                .iter()
                .map(|s| TemplateStudy {
                    id: s.id.clone(),
                    arms: s.arms.iter().map(|a| (a.treatment, a.trials)).collect(),
                    baseline: s.baseline,
                })
                .collect(),
        }
    }
}

/// Parses a template from arm-level CSV. The schema is the dataset schema
/// minus outcomes — `study_id,treatment,total` with an optional `baseline`
/// column — and a full dataset CSV is also accepted, with its `events`
/// column ignored. All structural validation (duplicate arms, sub-two-arm
/// studies, baseline marks, label-to-index mapping) matches dataset parsing.
pub fn parse_template(
    csv_text: &str,
    reference: Option<&str>,
) -> Result<TemplateNetwork, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(study_col), Some(treatment_col), Some(total_col)) =
        (col("study_id"), col("treatment"), col("total"))
    else {
        return Err(DataError::MalformedRow {
            line: 1,
            message: "header must contain study_id, treatment, total".into(),
        });
    };
    let events_col = col("events");
    let baseline_col = col("baseline");

    // Normalize to the dataset schema (events forced to zero) and reuse the
    // dataset parser so template validation can never drift from it.
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["study_id", "treatment", "events", "total", "baseline"])
        .expect("writing to an in-memory buffer cannot fail");
    for record in reader.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("");
        let events = match events_col.map(get) {
            None | Some("") => "0",
            Some(e) => e,
        };
        writer
            .write_record([
                get(study_col),
                get(treatment_col),
                events,
                get(total_col),
                baseline_col.map(get).unwrap_or(""),
            ])
            .expect("writing to an in-memory buffer cannot fail");
    }
    let normalized = String::from_utf8(writer.into_inner().expect("in-memory flush cannot fail"))
        .expect("csv output is valid UTF-8");
    Ok(TemplateNetwork::from_dataset(&parse_dataset(&normalized, reference)?))
}

/// The bundled six-treatment skeleton: 55 two-arm studies in which each of
/// the five anchor pairs (t1 with each of t2..t6) appears seven times and
/// each of the five ring pairs (t2–t3, t3–t4, t4–t5, t5–t6, t6–t2) four
/// times. Arm sizes were drawn once from U{20..=120} and frozen into the
/// repository; a test regenerates the file from its recipe.
pub fn default_template() -> TemplateNetwork {
    parse_template(include_str!("sim/default_template.csv"), Some("t1"))
        .expect("the bundled template fixture is valid")
}

/// Regenerates the bundled skeleton byte for byte: study ids s01..s55,
/// anchor-pair blocks before ring-pair blocks, arm sizes drawn in row order
/// from U{20..=120} on the data stream of seed 20240817.
#[cfg(test)]
fn default_template_recipe() -> String {
    let mut rng = chain_stream(20240817, DATA_STREAM);
    let anchor_pairs = [(1usize, 2usize), (1, 3), (1, 4), (1, 5), (1, 6)];
    let ring_pairs = [(2usize, 3usize), (3, 4), (4, 5), (5, 6), (6, 2)];
    let mut blocks = Vec::with_capacity(55);
    for pair in anchor_pairs {
        blocks.extend(std::iter::repeat(pair).take(7));
    }
    for pair in ring_pairs {
        blocks.extend(std::iter::repeat(pair).take(4));
    }
    let mut out = String::from("study_id,treatment,total\n");
    for (index, (a, b)) in blocks.into_iter().enumerate() {
        let id = format!("s{:02}", index + 1);
        let n_a: u64 = rng.random_range(20..=120);
        let n_b: u64 = rng.random_range(20..=120);
        out.push_str(&format!("{id},t{a},{n_a}\n{id},t{b},{n_b}\n"));
    }
    out
}

/// How study baseline log-odds are drawn during simulation. An SD of zero
/// pins every baseline at the mean exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub mean: f64,
    pub sd: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { mean: 0.0, sd: 0.5 }
    }
}

/// One simulated dataset with its generating truth and the event
/// probabilities that produced it (per study, arms in dataset order).
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDataset {
    pub dataset: Dataset,
    /// Comparison structure encoded by the generating effect vector.
    pub truth: Relation,
    pub probabilities: Vec<Vec<f64>>,
}

/// Simulates one dataset onto the template: per study, baseline log-odds
/// μ ~ N(mean, sd²), contrasts δ from the equicorrelated normal centered on
/// the scenario's contrasts with variance τ² and correlation 0.5 (the mean
/// exactly when τ = 0), event probabilities through the logistic map, and
/// counts y ~ Binomial(n, p).
///
/// Panics if the template's treatment count differs from the scenario's
/// effect vector length.
pub fn generate_dataset<R: Rng + ?Sized>(
    scenario: &Scenario,
    template: &TemplateNetwork,
    baselines: &BaselineConfig,
    rng: &mut R,
) -> SimulatedDataset {
    assert_eq!(
        template.n_treatments(),
        scenario.d1.len(),
        "template treatment count must match the scenario effect vector"
    );
    let tau2 = scenario.tau * scenario.tau;
    let baseline_dist = (baselines.sd > 0.0).then(|| {
        Normal::new(baselines.mean, baselines.sd).expect("baseline parameters are finite")
    });

    let mut studies = Vec::with_capacity(template.studies.len());
    let mut probabilities = Vec::with_capacity(template.studies.len());
    for skeleton in &template.studies {
        let mu = baseline_dist.as_ref().map_or(baselines.mean, |d| d.sample(rng));
        let contrast_means: Vec<f64> = skeleton
            .arms
            .iter()
            .map(|&(t, _)| t)
            .filter(|&t| t != skeleton.baseline)
            .map(|t| scenario.d1[t] - scenario.d1[skeleton.baseline])
            .collect();
        let deltas = if tau2 > 0.0 {
            EquicorrSpec::new(contrast_means.len(), tau2, SIM_CONTRAST_CORR)
                .expect("positive variance and fixed correlation are valid")
                .sample(&contrast_means, rng)
        } else {
            contrast_means
        };

        let mut arms = Vec::with_capacity(skeleton.arms.len());
        let mut arm_probs = Vec::with_capacity(skeleton.arms.len());
        let mut contrast = 0usize;
        for &(treatment, trials) in &skeleton.arms {
            let eta = if treatment == skeleton.baseline {
                mu
            } else {
                let eta = mu + deltas[contrast];
                contrast += 1;
                eta
            };
            let p = logistic(eta);
            let events = Binomial::new(trials, p)
                .expect("logistic output is a valid probability")
                .sample(rng);
            arms.push(Arm { treatment, events, trials });
            arm_probs.push(p);
        }
        studies.push(Study { id: skeleton.id.clone(), arms, baseline: skeleton.baseline });
        probabilities.push(arm_probs);
    }

    SimulatedDataset {
        dataset: Dataset { studies, labels: template.labels.clone() },
        truth: true_relation(&scenario.d1),
        probabilities,
    }
}

/// Recovery scores for one fitted posterior against the generating truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    /// Posterior probability that a draw reproduces the full true structure.
    pub joint_prob_true_graph: f64,
    /// Posterior probability of each true pairwise statement, in packed
    /// (j < k) pair order.
    pub pair_probs: Vec<f64>,
    /// Whether every statement retained by the selected subgraph agrees
    /// with the truth (vacuously true when nothing is retained).
    pub subgraph_correct: bool,
    /// Retained pairs of the selected subgraph over all pairs.
    pub subgraph_density: f64,
}

/// Scores a fitted posterior: the joint probability of the complete true
/// structure, each true statement's marginal probability, and whether the
/// subgraph selected at the 0.9 threshold agrees with the truth.
///
/// Panics if the treatment counts differ or the samples hold no draws.
pub fn evaluate_fit(truth: &Relation, samples: &PosteriorSamples) -> RecoveryMetrics {
    assert_eq!(
        truth.n_treatments(),
        samples.n_treatments,
        "truth and samples must cover the same treatments"
    );
    let pp = pairwise_probabilities(samples).expect("scoring requires at least one draw");
    let n = samples.n_treatments;

    let truth_graph = ComparisonGraph::from_relation(truth, &pp);
    let joint_prob_true_graph = joint_probability(&truth_graph, samples);

    let mut pair_probs = Vec::with_capacity(n_pairs(n));
    for j in 0..n {
        for k in (j + 1)..n {
            pair_probs.push(pp.statement_prob(j, k, truth.statement(j, k)));
        }
    }

    let initial = build_initial_graph(&pp);
    let projection = closest_coherent(&initial, samples)
        .expect("a complete modal graph over nonempty draws always projects");
    let sequence = trim_sequence(&projection, &pp, samples)
        .expect("the projection is coherent and complete");
    let (selected, subgraph_density) = select_subgraph(&sequence, SUBGRAPH_THRESHOLD, n)
        .expect("the fixed selection threshold is valid");

    let mut subgraph_correct = true;
    for j in 0..n {
        for k in (j + 1)..n {
            if let Some(statement) = selected.statement(j, k) {
                subgraph_correct &= statement.kind == truth.statement(j, k);
            }
        }
    }

    RecoveryMetrics { joint_prob_true_graph, pair_probs, subgraph_correct, subgraph_density }
}

/// One simulated-and-fitted replicate, shaped for JSON export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub scenario: Scenario,
    /// Master seed of this replicate: it drives the data stream and the
    /// chain streams.
    pub seed: u64,
    pub metrics: RecoveryMetrics,
    pub mcmc_config: McmcConfig,
}

/// Simulates one dataset under the scenario, fits `model` to it, and scores
/// recovery. `mcmc.seed` seeds both the data stream and the chains.
pub fn run_replicate(
    scenario: &Scenario,
    template: &TemplateNetwork,
    baselines: &BaselineConfig,
    model: ModelKind,
    priors: &PriorConfig,
    mcmc: &McmcConfig,
) -> Result<ReplicateResult, SamplerError> {
    let mut rng = chain_stream(mcmc.seed, DATA_STREAM);
    let sim = generate_dataset(scenario, template, baselines, &mut rng);
    let samples = run_chains(&sim.dataset, model, priors, mcmc)?;
    Ok(ReplicateResult {
        scenario: scenario.clone(),
        seed: mcmc.seed,
        metrics: evaluate_fit(&sim.truth, &samples),
        mcmc_config: mcmc.clone(),
    })
}

/// Seed for one replicate of one scenario: the master seed folded with the
/// scenario label's bytes and the replicate index, so scenarios and
/// replicates all draw from distinct streams.
pub fn replicate_seed(master_seed: u64, scenario_label: &str, replicate: usize) -> u64 {
    let mut tags: Vec<u64> = scenario_label.bytes().map(u64::from).collect();
    tags.push(replicate as u64);
    derive_seed(master_seed, &tags)
}

/// Runs independent replicates of one scenario in parallel, each on its own
/// derived seed, returned in replicate order regardless of scheduling.
pub fn run_scenario_replicates(
    scenario: &Scenario,
    template: &TemplateNetwork,
    baselines: &BaselineConfig,
    model: ModelKind,
    priors: &PriorConfig,
    mcmc: &McmcConfig,
    replicates: usize,
) -> Result<Vec<ReplicateResult>, SamplerError> {
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let seeded = McmcConfig {
                seed: replicate_seed(mcmc.seed, &scenario.label, r),
                ..mcmc.clone()
            };
            run_replicate(scenario, template, baselines, model, priors, &seeded)
        })
        .collect()
}

/// Per-scenario means across replicates, as CSV: mean joint probability of
/// the true structure, grand mean of the per-pair true-statement
/// probabilities, the rate of truth-consistent selected subgraphs, and the
/// mean selected density. Scenarios appear in first-occurrence order.
pub fn aggregate_results(results: &[ReplicateResult]) -> String {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&ReplicateResult>> = HashMap::new();
    for result in results {
        let label = result.scenario.label.as_str();
        if !groups.contains_key(label) {
            order.push(label);
        }
        groups.entry(label).or_default().push(result);
    }

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "scenario",
            "replicates",
            "mean_joint_prob",
            "mean_pair_prob",
            "subgraph_correct_rate",
            "mean_subgraph_density",
        ])
        .expect("writing to an in-memory buffer cannot fail");
    for label in order {
        let group = &groups[label];
        let n = group.len() as f64;
        let mean_joint =
            group.iter().map(|r| r.metrics.joint_prob_true_graph).sum::<f64>() / n;
        let mean_pair = group
            .iter()
            .map(|r| {
                r.metrics.pair_probs.iter().sum::<f64>() / r.metrics.pair_probs.len() as f64
            })
            .sum::<f64>()
            / n;
        let correct_rate =
            group.iter().filter(|r| r.metrics.subgraph_correct).count() as f64 / n;
        let mean_density = group.iter().map(|r| r.metrics.subgraph_density).sum::<f64>() / n;
        writer
            .write_record([
                label,
                &group.len().to_string(),
                &format!("{mean_joint:.6}"),
                &format!("{mean_pair:.6}"),
                &format!("{correct_rate:.6}"),
                &format!("{mean_density:.6}"),
            ])
            .expect("writing to an in-memory buffer cannot fail");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush cannot fail"))
        .expect("csv output is valid UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_network;
    use crate::graph::Comparison;
    use crate::kernels::logit;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn catalog_covers_the_full_generating_grid() {
        let catalog = scenario_catalog();
        assert_eq!(catalog.len(), 18);
        // Labels are distinct and every vector pins the reference at zero.
        let labels: std::collections::HashSet<&str> =
            catalog.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels.len(), 18);
        for sc in &catalog {
            assert_eq!(sc.d1.len(), 6);
            assert_eq!(sc.d1[0], 0.0);
            assert!(sc.d1[0].is_sign_positive(), "zeros are normalized to +0.0");
            assert!([0u8, 1, 2].contains(&sc.multiplier));
            assert!(sc.tau == 0.05 || sc.tau == 0.1);
        }
        // Each family appears 6 times, and its multiplier-1 vector is the
        // declared base.
        for (family, base) in SCENARIO_BASES {
            let members: Vec<&Scenario> =
                catalog.iter().filter(|s| s.family == family).collect();
            assert_eq!(members.len(), 6);
            let unit = members.iter().find(|s| s.multiplier == 1 && s.tau == 0.05).unwrap();
            assert_eq!(unit.d1, base.to_vec());
            let doubled = members.iter().find(|s| s.multiplier == 2 && s.tau == 0.1).unwrap();
            let expect: Vec<f64> =
                base.iter().map(|&v| if v == 0.0 { 0.0 } else { 2.0 * v }).collect();
            assert_eq!(doubled.d1, expect);
            let null = members.iter().find(|s| s.multiplier == 0 && s.tau == 0.05).unwrap();
            assert!(null.d1.iter().all(|&v| v == 0.0 && v.is_sign_positive()));
        }
        assert_eq!(catalog[0].label, "gaussian-x0-tau0.05");
        assert_eq!(catalog[17].label, "dp-spike-slab-x2-tau0.1");
    }

    #[test]
    fn truth_reads_ties_from_the_effect_vector() {
        // Zeros collapse into the reference class; equal nonzeros share a
        // class; classes order by value.
        let truth = true_relation(&[0.0, 0.3, 0.0, 0.0, 0.3, 0.3]);
        for (j, k) in [(0, 2), (0, 3), (2, 3)] {
            assert_eq!(truth.statement(j, k), Comparison::Eq, "zero class ({j}, {k})");
        }
        for (j, k) in [(1, 4), (1, 5), (4, 5)] {
            assert_eq!(truth.statement(j, k), Comparison::Eq, "0.3 class ({j}, {k})");
        }
        for &zero in &[0usize, 2, 3] {
            for &point_three in &[1usize, 4, 5] {
                assert_eq!(truth.statement(zero, point_three), Comparison::Lt);
                assert_eq!(truth.statement(point_three, zero), Comparison::Gt);
            }
        }
        // All-zero vector: one all-tied class.
        let null = true_relation(&[0.0; 6]);
        for j in 0..6 {
            for k in (j + 1)..6 {
                assert_eq!(null.statement(j, k), Comparison::Eq);
            }
        }
        // Distinct values: a strict order with no ties anywhere.
        let strict = true_relation(&[0.0, -0.6, -0.3, 0.3, 0.6, 0.9]);
        assert_eq!(strict.statement(0, 1), Comparison::Gt);
        assert_eq!(strict.statement(1, 2), Comparison::Lt);
        assert_eq!(strict.statement(0, 3), Comparison::Lt);
        for j in 0..6 {
            for k in (j + 1)..6 {
                assert_ne!(strict.statement(j, k), Comparison::Eq);
            }
        }
    }

    #[test]
    fn bundled_template_matches_its_generating_recipe() {
        let bundled = include_str!("sim/default_template.csv");
        assert_eq!(bundled, default_template_recipe(), "frozen fixture drifted from its recipe");

        let template = default_template();
        assert_eq!(template.n_treatments(), 6);
        assert_eq!(template.n_studies(), 55);
        assert_eq!(template.labels[0], "t1");
        for study in &template.studies {
            assert_eq!(study.arms.len(), 2, "every bundled study is two-arm");
            for &(_, n) in &study.arms {
                assert!((20..=120).contains(&n));
            }
        }
        // Pair frequencies: anchor pairs 7 studies each, ring pairs 4 each.
        let label_index =
            |l: &str| template.labels.iter().position(|x| x == l).expect("known label");
        let mut counts = vec![vec![0u64; 6]; 6];
        for study in &template.studies {
            let (a, b) = (study.arms[0].0, study.arms[1].0);
            counts[a][b] += 1;
            counts[b][a] += 1;
        }
        for other in ["t2", "t3", "t4", "t5", "t6"] {
            assert_eq!(counts[label_index("t1")][label_index(other)], 7);
        }
        for (a, b) in [("t2", "t3"), ("t3", "t4"), ("t4", "t5"), ("t5", "t6"), ("t6", "t2")] {
            assert_eq!(counts[label_index(a)][label_index(b)], 4);
        }
    }

    #[test]
    fn templates_parse_with_and_without_outcome_columns() {
        let bare = "study_id,treatment,total\na,x,30\na,y,40\nb,y,50\nb,z,60\n";
        let t = parse_template(bare, None).unwrap();
        assert_eq!(t.labels, vec!["x", "y", "z"]);
        assert_eq!(t.studies[0].arms, vec![(0, 30), (1, 40)]);
        assert_eq!(t.studies[0].baseline, 0);

        // A full dataset CSV is accepted; events are ignored.
        let full = "study_id,treatment,events,total\na,x,3,30\na,y,4,40\nb,y,5,50\nb,z,6,60\n";
        assert_eq!(parse_template(full, None).unwrap(), t);

        // Blank events cells are tolerated; baseline marks are honored.
        let marked = "study_id,treatment,events,total,baseline\na,x,,30,\na,y,,40,1\n";
        let t = parse_template(marked, None).unwrap();
        assert_eq!(t.studies[0].baseline, 1);

        // Structural validation is inherited from dataset parsing.
        assert!(parse_template("study_id,treatment,total\na,x,30\n", None).is_err());
        assert!(parse_template("sid,treatment,total\na,x,30\na,y,9\n", None).is_err());
        assert!(parse_template("study_id,treatment,total\na,x,30\na,x,40\n", None).is_err());
    }

    fn null_scenario() -> Scenario {
        Scenario {
            label: "null".into(),
            family: ModelKind::DpSpikeSlab,
            d1: vec![0.0; 6],
            multiplier: 0,
            tau: 0.0,
        }
    }

    #[test]
    fn degenerate_noise_gives_exactly_half_probabilities() {
        // Null effects, τ = 0, baseline SD 0: every arm's event probability
        // is exactly one half.
        let template = default_template();
        let mut rng = chain_stream(7, DATA_STREAM);
        let sim = generate_dataset(
            &null_scenario(),
            &template,
            &BaselineConfig { mean: 0.0, sd: 0.0 },
            &mut rng,
        );
        for (study, probs) in sim.dataset.studies.iter().zip(&sim.probabilities) {
            assert_eq!(study.arms.len(), probs.len());
            for (arm, &p) in study.arms.iter().zip(probs) {
                assert_eq!(p, 0.5);
                assert!(arm.events <= arm.trials);
            }
        }
        // The truth is the single all-tied class.
        for j in 0..6 {
            for k in (j + 1)..6 {
                assert_eq!(sim.truth.statement(j, k), Comparison::Eq);
            }
        }
    }

    #[test]
    fn simulated_datasets_satisfy_the_data_invariants() {
        let template = default_template();
        let catalog = scenario_catalog();
        let sc = catalog.iter().find(|s| s.label == "dp-gaussian-x1-tau0.1").unwrap();
        let mut rng = chain_stream(11, DATA_STREAM);
        let sim = generate_dataset(sc, &template, &BaselineConfig::default(), &mut rng);

        // Round-trips through the dataset parser unchanged, and the network
        // is connected and fully two-arm.
        let reparsed =
            parse_dataset(&sim.dataset.to_csv(), Some(&sim.dataset.labels[0])).unwrap();
        assert_eq!(reparsed, sim.dataset);
        let summary = validate_network(&sim.dataset);
        assert!(summary.connected);
        assert_eq!(summary.multi_arm_studies, 0);

        // Same seed, same dataset; the next state of the stream differs.
        let mut rng = chain_stream(11, DATA_STREAM);
        let again = generate_dataset(sc, &template, &BaselineConfig::default(), &mut rng);
        assert_eq!(again, sim);
        let differently = generate_dataset(sc, &template, &BaselineConfig::default(), &mut rng);
        assert_ne!(differently.dataset, sim.dataset);
    }

    #[test]
    fn simulated_contrasts_recover_their_means() {
        // One three-arm study; with the baseline SD pinned to zero the
        // contrast draws are recoverable exactly from the probabilities as
        // logit(p) − μ. Across replicates their means must sit within four
        // standard errors of the scenario contrasts.
        let template = parse_template(
            "study_id,treatment,total\nm1,t1,50\nm1,t2,60\nm1,t3,70\n",
            Some("t1"),
        )
        .unwrap();
        let scenario = Scenario {
            label: "contrast-check".into(),
            family: ModelKind::GaussianEffects,
            d1: vec![0.0, 0.4, -0.2],
            multiplier: 1,
            tau: 0.05,
        };
        let baselines = BaselineConfig { mean: 0.3, sd: 0.0 };
        let reps = 10_000usize;
        let mut sums = [0.0f64; 2];
        let mut squares = [0.0f64; 2];
        let mut rng = chain_stream(20240818, DATA_STREAM);
        for _ in 0..reps {
            let sim = generate_dataset(&scenario, &template, &baselines, &mut rng);
            for (i, &p) in sim.probabilities[0][1..].iter().enumerate() {
                let delta = logit(p) - 0.3;
                sums[i] += delta;
                squares[i] += delta * delta;
            }
        }
        for (i, want) in [0.4, -0.2].into_iter().enumerate() {
            let mean = sums[i] / reps as f64;
            let var = squares[i] / reps as f64 - mean * mean;
            let se = (var / reps as f64).sqrt();
            assert!(
                (mean - want).abs() <= 4.0 * se,
                "contrast {i}: mean {mean} vs {want} (se {se})"
            );
            // The per-draw spread is τ within a loose band.
            assert_relative_eq!(var.sqrt(), 0.05, max_relative = 0.1);
        }
    }

    /// K = 3 fixture: truth says 0 < {1, 2} with 1 and 2 tied; 7 of 10
    /// draws realize it exactly, 3 swap the tie for a strict order.
    fn recovery_fixture(model: ModelKind) -> (Relation, PosteriorSamples) {
        let truth = true_relation(&[0.0, 0.3, 0.3]);
        let mut draws = Vec::new();
        for i in 0..10 {
            let d = if i < 7 { vec![0.0, 0.3, 0.3] } else { vec![0.0, 0.6, 0.3] };
            draws.push(Draw { chain: 0, iter: i + 1, d, spike: None, tau2: 0.1, omega0: None });
        }
        let samples =
            PosteriorSamples { model, n_treatments: 3, draws, meta: None };
        (truth, samples)
    }

    #[test]
    fn recovery_metrics_count_conjunctions_exactly() {
        let (truth, samples) = recovery_fixture(ModelKind::DpGaussian);
        let metrics = evaluate_fit(&truth, &samples);
        // Brute-force recount of the joint: draws whose induced relation
        // satisfies every true statement.
        let recount = samples
            .draws
            .iter()
            .filter(|d| {
                let rel = induced_relation(d, samples.model);
                (0..3).all(|j| {
                    ((j + 1)..3).all(|k| rel.statement(j, k) == truth.statement(j, k))
                })
            })
            .count() as f64
            / 10.0;
        assert_abs_diff_eq!(metrics.joint_prob_true_graph, recount, epsilon = 0.0);
        assert_abs_diff_eq!(metrics.joint_prob_true_graph, 0.7, epsilon = 1e-15);
        // Pairs (0,1) and (0,2) are below-truth in every draw; the tie holds
        // in 7 of 10.
        assert_eq!(metrics.pair_probs.len(), 3);
        assert_abs_diff_eq!(metrics.pair_probs[0], 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(metrics.pair_probs[1], 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(metrics.pair_probs[2], 0.7, epsilon = 1e-15);
        // Trimming drops the 0.7 tie first; the remaining two-statement
        // graph holds in every draw, so the 0.9-threshold subgraph is the
        // truth-consistent pair graph of density 2/3.
        assert!(metrics.subgraph_correct);
        assert_abs_diff_eq!(metrics.subgraph_density, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn ties_in_truth_are_unreachable_for_the_independent_effects_model() {
        let (truth, samples) = recovery_fixture(ModelKind::GaussianEffects);
        let metrics = evaluate_fit(&truth, &samples);
        // The model never induces ties, so the tied truth has probability
        // zero jointly and on the tied pair.
        assert_eq!(metrics.joint_prob_true_graph, 0.0);
        assert_eq!(metrics.pair_probs[2], 0.0);
        assert_abs_diff_eq!(metrics.pair_probs[0], 1.0, epsilon = 0.0);
    }

    #[test]
    fn unanimous_draws_recover_everything() {
        let truth = true_relation(&[0.0, 0.3, 0.3]);
        let draws = (0..5)
            .map(|i| Draw {
                chain: 0,
                iter: i + 1,
                d: vec![0.0, 0.3, 0.3],
                spike: None,
                tau2: 0.1,
                omega0: None,
            })
            .collect();
        let samples = PosteriorSamples {
            model: ModelKind::DpGaussian,
            n_treatments: 3,
            draws,
            meta: None,
        };
        let metrics = evaluate_fit(&truth, &samples);
        assert_eq!(metrics.joint_prob_true_graph, 1.0);
        assert!(metrics.pair_probs.iter().all(|&p| p == 1.0));
        assert!(metrics.subgraph_correct);
        assert_eq!(metrics.subgraph_density, 1.0);
    }

    #[test]
    fn replicates_are_deterministic_and_json_round_trip() {
        let template = default_template();
        let catalog = scenario_catalog();
        let sc = catalog.iter().find(|s| s.label == "dp-gaussian-x2-tau0.1").unwrap();
        let mcmc = McmcConfig { seed: 99, ..McmcConfig::smoke() };
        let priors = PriorConfig::default();
        let baselines = BaselineConfig::default();

        let runs = run_scenario_replicates(
            sc,
            &template,
            &baselines,
            ModelKind::DpGaussian,
            &priors,
            &mcmc,
            2,
        )
        .unwrap();
        assert_eq!(runs.len(), 2);
        assert_ne!(runs[0].seed, runs[1].seed);
        for run in &runs {
            assert!((0.0..=1.0).contains(&run.metrics.joint_prob_true_graph));
            assert!((0.0..=1.0).contains(&run.metrics.subgraph_density));
            assert!(run.metrics.pair_probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }

        // Bit-identical rerun, and a lossless JSON round trip.
        let again = run_scenario_replicates(
            sc,
            &template,
            &baselines,
            ModelKind::DpGaussian,
            &priors,
            &mcmc,
            2,
        )
        .unwrap();
        assert_eq!(again, runs);
        let json = serde_json::to_string(&runs[0]).unwrap();
        let back: ReplicateResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, runs[0]);
    }

    #[test]
    fn aggregation_means_replicates_by_scenario() {
        let catalog = scenario_catalog();
        let make = |label_idx: usize, joint: f64, pairs: Vec<f64>, ok: bool, density: f64| {
            ReplicateResult {
                scenario: catalog[label_idx].clone(),
                seed: 1,
                metrics: RecoveryMetrics {
                    joint_prob_true_graph: joint,
                    pair_probs: pairs,
                    subgraph_correct: ok,
                    subgraph_density: density,
                },
                mcmc_config: McmcConfig::smoke(),
            }
        };
        let results = vec![
            make(0, 0.8, vec![1.0, 0.5], true, 1.0),
            make(0, 0.6, vec![0.5, 0.0], false, 0.5),
            make(5, 1.0, vec![1.0, 1.0], true, 1.0),
        ];
        let csv_text = aggregate_results(&results);
        let mut lines = csv_text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "scenario,replicates,mean_joint_prob,mean_pair_prob,subgraph_correct_rate,mean_subgraph_density"
        );
        let first = lines.next().unwrap();
        assert!(first.starts_with(&format!("{},2,0.700000,0.500000,0.500000,0.750000", catalog[0].label)));
        let second = lines.next().unwrap();
        assert!(second.starts_with(&format!("{},1,1.000000,1.000000,1.000000,1.000000", catalog[5].label)));
        assert!(lines.next().is_none());
    }
}
