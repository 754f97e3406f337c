//! `nma` — fits Bayesian network-meta-analysis models to arm-level trial
//! CSVs and post-processes their posteriors into comparison-graph
//! sequences, league tables, and simulation studies.
//!
//! Every command writes a `manifest.json` beside its outputs holding the
//! fully resolved configuration, input digests, and output paths; re-running
//! a command with `--config manifest.json` reproduces the outputs
//! bit-identically.
//!
//! Exit codes: 0 success; 2 configuration error (bad flags or config file);
//! 3 data error (unreadable or invalid inputs); 4 sampler abort (non-finite
//! target).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use nma_core::data::{parse_dataset, DataError, Dataset};
use nma_core::graph::{
    build_initial_graph, closest_coherent, pairwise_probabilities, select_subgraph, to_dot,
    to_json, trim_sequence, GraphError, TrimSequence,
};
use nma_core::league::{league_table, league_to_csv, league_to_markdown, CellConvention, LeagueError};
use nma_core::samplers::{
    read_samples_jsonl, run_chains, write_samples_jsonl, McmcConfig, ModelKind, PosteriorSamples,
    PriorConfig, SamplerError,
};
use nma_core::sim::{
    aggregate_results, default_template, parse_template, run_scenario_replicates,
    scenario_catalog, BaselineConfig, ReplicateResult, Scenario, TemplateNetwork,
};

/// Spike width used by `simulate` when the fitted model needs one and the
/// configuration does not set it.
const SIMULATE_DEFAULT_V0: f64 = 0.1;

#[derive(Parser)]
#[command(
    name = "nma",
    version,
    about = "Bayesian network meta-analysis: contrast models with clustered \
             treatment effects, coherent comparison graphs, league tables, \
             and a simulation harness"
)]
struct Cli {
    /// Worker threads for chains and replicates (default: all cores, or the
    /// NMA_JOBS environment variable).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to arm-level trial data and write posterior draws.
    Fit(FitArgs),
    /// Turn posterior draws into the trimmed comparison-graph sequence.
    Rank(RankArgs),
    /// Tabulate pairwise odds ratios with conditional credible intervals.
    League(LeagueArgs),
    /// Simulate scenario datasets, fit them, and score recovery.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Gaussian,
    DpGaussian,
    DpSpikeSlab,
}

impl ModelArg {
    fn kind(self) -> ModelKind {
        match self {
            ModelArg::Gaussian => ModelKind::GaussianEffects,
            ModelArg::DpGaussian => ModelKind::DpGaussian,
            ModelArg::DpSpikeSlab => ModelKind::DpSpikeSlab,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    /// 4 chains × 20,000 iterations, burn-in 10,000, thin 10.
    Desk,
    /// 5 chains × 200,000 iterations, burn-in 100,000, thin 100.
    Full,
    /// 2 chains × 600 iterations, burn-in 300, thin 3 (tests only).
    Smoke,
}

impl ProfileArg {
    fn base(self) -> McmcConfig {
        match self {
            ProfileArg::Desk => McmcConfig::desk(),
            ProfileArg::Full => McmcConfig::full(),
            ProfileArg::Smoke => McmcConfig::smoke(),
        }
    }
}

/// MCMC schedule flags shared by `fit` and `simulate`; each overrides one
/// field of the resolved configuration.
#[derive(Args)]
struct McmcFlags {
    /// Preset schedule applied before the individual overrides below.
    #[arg(long, value_enum)]
    mcmc: Option<ProfileArg>,
    #[arg(long)]
    chains: Option<usize>,
    /// Total sweeps per chain, burn-in included.
    #[arg(long)]
    iters: Option<usize>,
    /// Burn-in sweeps per chain.
    #[arg(long)]
    burn: Option<usize>,
    /// Keep every n-th post-burn-in sweep.
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Adapt proposal steps during burn-in (true/false).
    #[arg(long)]
    adapt: Option<bool>,
}

impl McmcFlags {
    fn apply(&self, mcmc: &mut McmcConfig) {
        if let Some(profile) = self.mcmc {
            *mcmc = profile.base();
        }
        if let Some(v) = self.chains {
            mcmc.chains = v;
        }
        if let Some(v) = self.iters {
            mcmc.iterations = v;
        }
        if let Some(v) = self.burn {
            mcmc.burn_in = v;
        }
        if let Some(v) = self.thin {
            mcmc.thin = v;
        }
        if let Some(v) = self.seed {
            mcmc.seed = v;
        }
        if let Some(v) = self.adapt {
            mcmc.adapt = v;
        }
    }
}

/// Prior hyperparameter flags; defaults live in the resolved configuration.
#[derive(Args)]
struct PriorFlags {
    /// Prior mean of the study baseline log-odds.
    #[arg(long)]
    baseline_mean: Option<f64>,
    /// Prior SD of the study baseline log-odds.
    #[arg(long)]
    baseline_sd: Option<f64>,
    /// Prior mean of ln tau^2.
    #[arg(long)]
    log_tau2_mean: Option<f64>,
    /// Prior SD of ln tau^2.
    #[arg(long)]
    log_tau2_sd: Option<f64>,
    /// Mean of the basic-effect prior / DP base measure.
    #[arg(long)]
    effect_mean: Option<f64>,
    /// SD of the basic-effect prior / DP base measure.
    #[arg(long)]
    effect_sd: Option<f64>,
    /// Common correlation of multi-arm contrasts.
    #[arg(long)]
    corr: Option<f64>,
    /// Dirichlet-process concentration.
    #[arg(long = "dp-alpha")]
    dp_concentration: Option<f64>,
    /// Stick-breaking truncation level (default: number of treatments).
    #[arg(long)]
    truncation: Option<usize>,
    /// Spike width v0; required by dp-spike-slab.
    #[arg(long = "v0")]
    spike_v0: Option<f64>,
    /// Beta prior shape a on the spike weight.
    #[arg(long = "spike-a")]
    spike_weight_a: Option<f64>,
    /// Beta prior shape b on the spike weight.
    #[arg(long = "spike-b")]
    spike_weight_b: Option<f64>,
}

impl PriorFlags {
    fn apply(&self, priors: &mut PriorConfig) {
        if let Some(v) = self.baseline_mean {
            priors.baseline_mean = v;
        }
        if let Some(v) = self.baseline_sd {
            priors.baseline_sd = v;
        }
        if let Some(v) = self.log_tau2_mean {
            priors.log_tau2_mean = v;
        }
        if let Some(v) = self.log_tau2_sd {
            priors.log_tau2_sd = v;
        }
        if let Some(v) = self.effect_mean {
            priors.effect_mean = v;
        }
        if let Some(v) = self.effect_sd {
            priors.effect_sd = v;
        }
        if let Some(v) = self.corr {
            priors.corr = v;
        }
        if let Some(v) = self.dp_concentration {
            priors.dp_concentration = v;
        }
        if let Some(v) = self.truncation {
            priors.truncation = Some(v);
        }
        if let Some(v) = self.spike_v0 {
            priors.spike_v0 = Some(v);
        }
        if let Some(v) = self.spike_weight_a {
            priors.spike_weight_a = v;
        }
        if let Some(v) = self.spike_weight_b {
            priors.spike_weight_b = v;
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Model to fit.
    #[arg(long, value_enum, required_unless_present = "config")]
    model: Option<ModelArg>,
    /// Arm-level CSV: study_id,treatment,events,total[,baseline].
    #[arg(long, required_unless_present = "config")]
    input: Option<PathBuf>,
    /// Treatment label mapped to index 0 (default: first declared).
    #[arg(long)]
    reference: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON configuration; a manifest from a previous run is accepted.
    /// Explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    mcmc: McmcFlags,
    #[command(flatten)]
    priors: PriorFlags,
}

#[derive(Args)]
struct RankArgs {
    /// Posterior draws (JSON lines) written by `fit`.
    #[arg(long, required_unless_present = "config")]
    samples: Option<PathBuf>,
    /// Treatment names in index order (comma-separated). Defaults to the
    /// manifest next to the samples file, else t0..tK-1.
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    /// Additionally emit the densest subgraph whose joint posterior
    /// probability reaches this threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON configuration; a manifest from a previous run is accepted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct LeagueArgs {
    /// Posterior draws (JSON lines) written by `fit`.
    #[arg(long, required_unless_present = "config")]
    samples: Option<PathBuf>,
    /// Treatment names in index order (comma-separated). Defaults to the
    /// manifest next to the samples file, else t0..tK-1.
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    /// Credible level is 1 - alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON configuration; a manifest from a previous run is accepted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario to run: a catalog index (0..=17), a scenario label, or
    /// `all`.
    #[arg(long)]
    scenario: Option<String>,
    /// Independent replicates per scenario.
    #[arg(long)]
    replicates: Option<usize>,
    /// Model to fit (default: each scenario's generating family).
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Study-skeleton CSV: study_id,treatment,total[,baseline] (default:
    /// the bundled 55-study template).
    #[arg(long)]
    template: Option<PathBuf>,
    /// Reference treatment label within the template.
    #[arg(long)]
    reference: Option<String>,
    /// Mean of the simulated baseline log-odds.
    #[arg(long)]
    baseline_mean: Option<f64>,
    /// SD of the simulated baseline log-odds.
    #[arg(long)]
    baseline_sd: Option<f64>,
    /// Spike width v0 for spike-slab fits (default 0.1).
    #[arg(long = "v0")]
    spike_v0: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON configuration; a manifest from a previous run is accepted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    mcmc: McmcFlags,
}

/// Failures mapped onto the exit-code contract.
#[derive(Debug)]
enum CliError {
    /// Exit 2: flags or configuration are invalid.
    Config(String),
    /// Exit 3: inputs are missing, unreadable, or structurally invalid.
    Data(String),
    /// Exit 4: the sampler aborted on a non-finite target.
    Abort(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Abort(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Abort(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::InvalidConfig { .. } | SamplerError::Kernel(_) => {
                CliError::Config(e.to_string())
            }
            SamplerError::NonFiniteTarget { .. } => CliError::Abort(e.to_string()),
            SamplerError::DisconnectedNetwork
            | SamplerError::Io(_)
            | SamplerError::MalformedSamples { .. } => CliError::Data(e.to_string()),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::InvalidThreshold { .. } | GraphError::LabelCount { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<LeagueError> for CliError {
    fn from(e: LeagueError) -> Self {
        match e {
            LeagueError::InvalidAlpha { .. } | LeagueError::NameCount { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_jobs(cli.jobs);
    let result = match &cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Rank(args) => cmd_rank(args),
        Command::League(args) => cmd_league(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

/// Sizes the global worker pool from `--jobs` or NMA_JOBS; unset means the
/// default pool (all cores).
fn init_jobs(flag: Option<usize>) {
    let from_env = || {
        let raw = std::env::var("NMA_JOBS").ok()?;
        match raw.parse::<usize>() {
            Ok(n) => Some(n),
            Err(_) => {
                eprintln!("warning: ignoring NMA_JOBS={raw:?}: not a thread count");
                None
            }
        }
    };
    if let Some(jobs) = flag.or_else(from_env).filter(|&n| n > 0) {
        // Errors only if a pool already exists, in which case that pool wins.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
}

// ---------------------------------------------------------------------------
// Manifests and configuration files
// ---------------------------------------------------------------------------

/// Written beside every command's outputs: enough to reproduce them
/// bit-identically via `--config manifest.json`.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    command: String,
    version: String,
    /// Fully resolved command configuration.
    config: serde_json::Value,
    /// Treatment labels in index order, when the command knows them.
    #[serde(default)]
    treatments: Option<Vec<String>>,
    /// SHA-256 digest per input path.
    inputs: BTreeMap<String, String>,
    /// Files written, relative to the output directory.
    outputs: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hex = String::with_capacity(64);
    for byte in Sha256::digest(bytes) {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// Loads a JSON configuration, accepting either the bare configuration
/// object or a manifest written by the same command (its `config` field is
/// extracted).
fn load_config<T: DeserializeOwned>(path: &Path, command: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {} is not JSON: {e}", path.display())))?;
    let value = match (value.get("command"), value.get("config")) {
        (Some(cmd), Some(cfg)) => {
            if cmd != command {
                return Err(CliError::Config(format!(
                    "manifest {} was written by `{}`, not `{command}`",
                    path.display(),
                    cmd.as_str().unwrap_or("?")
                )));
            }
            cfg.clone()
        }
        _ => value,
    };
    serde_json::from_value(value)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))
}

fn write_output(out_dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = out_dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(manifest).expect("manifests always serialize");
    text.push('\n');
    write_output(out_dir, "manifest.json", &text)
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn read_samples(path: &Path) -> Result<PosteriorSamples, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(read_samples_jsonl(BufReader::new(file))?)
}

/// Treatment names for display: the explicit list if given, else the
/// manifest next to the samples file, else generic index names.
fn resolve_labels(
    explicit: &[String],
    samples_path: &Path,
    n_treatments: usize,
) -> Result<Vec<String>, CliError> {
    if !explicit.is_empty() {
        if explicit.len() != n_treatments {
            return Err(CliError::Config(format!(
                "--labels names {} treatments, the samples have {n_treatments}",
                explicit.len()
            )));
        }
        return Ok(explicit.to_vec());
    }
    let sibling = samples_path.parent().unwrap_or(Path::new(".")).join("manifest.json");
    if let Ok(text) = fs::read_to_string(&sibling) {
        if let Ok(manifest) = serde_json::from_str::<RunManifest>(&text) {
            if let Some(treatments) = manifest.treatments {
                if treatments.len() == n_treatments {
                    return Ok(treatments);
                }
            }
        }
    }
    Ok((0..n_treatments).map(|i| format!("t{i}")).collect())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FitConfig {
    model: String,
    input: PathBuf,
    reference: Option<String>,
    priors: PriorConfig,
    mcmc: McmcConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            model: String::new(),
            input: PathBuf::new(),
            reference: None,
            priors: PriorConfig::default(),
            mcmc: McmcConfig::default(),
        }
    }
}

fn resolve_fit(args: &FitArgs) -> Result<FitConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => load_config::<FitConfig>(path, "fit")?,
        None => FitConfig::default(),
    };
    if let Some(model) = args.model {
        cfg.model = model.kind().as_str().to_string();
    }
    if let Some(input) = &args.input {
        cfg.input = input.clone();
    }
    if let Some(reference) = &args.reference {
        cfg.reference = Some(reference.clone());
    }
    args.mcmc.apply(&mut cfg.mcmc);
    args.priors.apply(&mut cfg.priors);
    if cfg.model.is_empty() {
        return Err(CliError::Config("no model: pass --model or set it in --config".into()));
    }
    if cfg.input.as_os_str().is_empty() {
        return Err(CliError::Config("no input: pass --input or set it in --config".into()));
    }
    Ok(cfg)
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let cfg = resolve_fit(args)?;
    let model = ModelKind::parse(&cfg.model)
        .ok_or_else(|| CliError::Config(format!("unknown model `{}`", cfg.model)))?;
    let csv_text = read_input(&cfg.input)?;
    let dataset: Dataset = parse_dataset(&csv_text, cfg.reference.as_deref())?;
    let samples = run_chains(&dataset, model, &cfg.priors, &cfg.mcmc)?;

    ensure_out_dir(&args.out)?;
    let file = fs::File::create(args.out.join("samples.jsonl"))
        .map_err(|e| CliError::Data(format!("cannot write samples.jsonl: {e}")))?;
    write_samples_jsonl(&samples, BufWriter::new(file))?;

    let manifest = RunManifest {
        command: "fit".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(&cfg).expect("configs always serialize"),
        treatments: Some(dataset.labels.clone()),
        inputs: BTreeMap::from([(
            cfg.input.display().to_string(),
            sha256_hex(csv_text.as_bytes()),
        )]),
        outputs: vec!["samples.jsonl".into()],
    };
    write_manifest(&args.out, &manifest)?;

    println!(
        "fit complete: model {model}, {} treatments, {} studies",
        dataset.n_treatments(),
        dataset.n_studies()
    );
    println!(
        "kept {} draws ({} chains x {})",
        samples.n_draws(),
        cfg.mcmc.chains,
        cfg.mcmc.kept_per_chain()
    );
    if let Some(meta) = &samples.meta {
        for acc in &meta.acceptance {
            println!(
                "chain {} acceptance: mu {:.2}, delta {:.2}, log_tau2 {:.2}, effect {:.2}",
                acc.chain, acc.mu, acc.delta, acc.log_tau2, acc.effect
            );
        }
    }
    println!("wrote {}", args.out.join("samples.jsonl").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// rank
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RankConfig {
    samples: PathBuf,
    labels: Option<Vec<String>>,
    threshold: Option<f64>,
}

#[derive(Serialize)]
struct RankStep {
    step: usize,
    gamma: f64,
    joint_prob: f64,
    density: f64,
    dot: String,
}

#[derive(Serialize)]
struct RankSelected {
    threshold: f64,
    joint_prob: f64,
    density: f64,
    dot: String,
}

#[derive(Serialize)]
struct RankIndex {
    steps: Vec<RankStep>,
    selected: Option<RankSelected>,
}

fn resolve_rank(args: &RankArgs) -> Result<RankConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => load_config::<RankConfig>(path, "rank")?,
        None => RankConfig::default(),
    };
    if let Some(samples) = &args.samples {
        cfg.samples = samples.clone();
    }
    if !args.labels.is_empty() {
        cfg.labels = Some(args.labels.clone());
    }
    if let Some(threshold) = args.threshold {
        cfg.threshold = Some(threshold);
    }
    if cfg.samples.as_os_str().is_empty() {
        return Err(CliError::Config("no samples: pass --samples or set it in --config".into()));
    }
    Ok(cfg)
}

/// Builds the coherent projection and its trimmed sequence from raw draws.
fn trim_pipeline(samples: &PosteriorSamples) -> Result<TrimSequence, CliError> {
    let pp = pairwise_probabilities(samples)?;
    let initial = build_initial_graph(&pp);
    let projection = closest_coherent(&initial, samples)?;
    Ok(trim_sequence(&projection, &pp, samples)?)
}

fn cmd_rank(args: &RankArgs) -> Result<(), CliError> {
    let cfg = resolve_rank(args)?;
    let samples_text = read_input(&cfg.samples)?;
    let samples = read_samples(&cfg.samples)?;
    let labels = resolve_labels(
        cfg.labels.as_deref().unwrap_or(&[]),
        &cfg.samples,
        samples.n_treatments,
    )?;
    let sequence = trim_pipeline(&samples)?;

    ensure_out_dir(&args.out)?;
    let mut outputs = Vec::new();
    let mut steps = Vec::new();
    for (i, step) in sequence.steps.iter().enumerate() {
        let name = format!("step_{i:02}.dot");
        write_output(&args.out, &name, &to_dot(&step.graph, &labels)?)?;
        steps.push(RankStep {
            step: i,
            gamma: step.gamma,
            joint_prob: step.graph.joint_prob.unwrap_or(0.0),
            density: step.graph.density(),
            dot: name.clone(),
        });
        outputs.push(name);
    }

    let selected = match cfg.threshold {
        None => None,
        Some(threshold) => {
            let (graph, density) =
                select_subgraph(&sequence, threshold, samples.n_treatments)?;
            write_output(&args.out, "selected.dot", &to_dot(&graph, &labels)?)?;
            let mut graph_json = serde_json::to_string_pretty(&to_json(&graph, &labels)?)
                .expect("graph JSON always serializes");
            graph_json.push('\n');
            write_output(&args.out, "selected.json", &graph_json)?;
            outputs.push("selected.dot".into());
            outputs.push("selected.json".into());
            Some(RankSelected {
                threshold,
                joint_prob: graph.joint_prob.unwrap_or(1.0),
                density,
                dot: "selected.dot".into(),
            })
        }
    };

    let index = RankIndex { steps, selected };
    let mut index_text =
        serde_json::to_string_pretty(&index).expect("index always serializes");
    index_text.push('\n');
    write_output(&args.out, "index.json", &index_text)?;
    outputs.push("index.json".into());
    outputs.sort();

    let manifest = RunManifest {
        command: "rank".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(&cfg).expect("configs always serialize"),
        treatments: Some(labels),
        inputs: BTreeMap::from([(
            cfg.samples.display().to_string(),
            sha256_hex(samples_text.as_bytes()),
        )]),
        outputs,
    };
    write_manifest(&args.out, &manifest)?;

    println!(
        "rank complete: {} trim steps over {} treatments -> {}",
        sequence.steps.len(),
        samples.n_treatments,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// league
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LeagueConfig {
    samples: PathBuf,
    labels: Option<Vec<String>>,
    alpha: f64,
}

impl Default for LeagueConfig {
    fn default() -> Self {
        LeagueConfig { samples: PathBuf::new(), labels: None, alpha: 0.05 }
    }
}

fn resolve_league(args: &LeagueArgs) -> Result<LeagueConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => load_config::<LeagueConfig>(path, "league")?,
        None => LeagueConfig::default(),
    };
    if let Some(samples) = &args.samples {
        cfg.samples = samples.clone();
    }
    if !args.labels.is_empty() {
        cfg.labels = Some(args.labels.clone());
    }
    if let Some(alpha) = args.alpha {
        cfg.alpha = alpha;
    }
    if cfg.samples.as_os_str().is_empty() {
        return Err(CliError::Config("no samples: pass --samples or set it in --config".into()));
    }
    Ok(cfg)
}

fn cmd_league(args: &LeagueArgs) -> Result<(), CliError> {
    let cfg = resolve_league(args)?;
    let samples_text = read_input(&cfg.samples)?;
    let samples = read_samples(&cfg.samples)?;
    let labels = resolve_labels(
        cfg.labels.as_deref().unwrap_or(&[]),
        &cfg.samples,
        samples.n_treatments,
    )?;
    let table = league_table(&samples, cfg.alpha, &labels, CellConvention::RowToColumn)?;

    ensure_out_dir(&args.out)?;
    write_output(&args.out, "league.csv", &league_to_csv(&table))?;
    write_output(&args.out, "league.md", &league_to_markdown(&table))?;

    let manifest = RunManifest {
        command: "league".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(&cfg).expect("configs always serialize"),
        treatments: Some(labels),
        inputs: BTreeMap::from([(
            cfg.samples.display().to_string(),
            sha256_hex(samples_text.as_bytes()),
        )]),
        outputs: vec!["league.csv".into(), "league.md".into()],
    };
    write_manifest(&args.out, &manifest)?;

    println!(
        "league complete: {} treatments at alpha {} -> {}",
        samples.n_treatments,
        cfg.alpha,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulateConfig {
    /// Catalog index, scenario label, or "all".
    scenario: String,
    replicates: usize,
    /// Model override; unset fits each scenario's generating family.
    model: Option<String>,
    /// External template CSV; unset uses the bundled skeleton.
    template: Option<PathBuf>,
    reference: Option<String>,
    baselines: BaselineConfig,
    priors: PriorConfig,
    mcmc: McmcConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            scenario: "all".into(),
            replicates: 1,
            model: None,
            template: None,
            reference: None,
            baselines: BaselineConfig::default(),
            priors: PriorConfig::default(),
            mcmc: McmcConfig::default(),
        }
    }
}

fn resolve_simulate(args: &SimulateArgs) -> Result<SimulateConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => load_config::<SimulateConfig>(path, "simulate")?,
        None => SimulateConfig::default(),
    };
    if let Some(scenario) = &args.scenario {
        cfg.scenario = scenario.clone();
    }
    if let Some(replicates) = args.replicates {
        cfg.replicates = replicates;
    }
    if let Some(model) = args.model {
        cfg.model = Some(model.kind().as_str().to_string());
    }
    if let Some(template) = &args.template {
        cfg.template = Some(template.clone());
    }
    if let Some(reference) = &args.reference {
        cfg.reference = Some(reference.clone());
    }
    if let Some(v) = args.baseline_mean {
        cfg.baselines.mean = v;
    }
    if let Some(v) = args.baseline_sd {
        cfg.baselines.sd = v;
    }
    if let Some(v) = args.spike_v0 {
        cfg.priors.spike_v0 = Some(v);
    }
    args.mcmc.apply(&mut cfg.mcmc);
    if cfg.replicates == 0 {
        return Err(CliError::Config("--replicates must be at least 1".into()));
    }
    Ok(cfg)
}

/// Picks the scenarios named by `selector`: "all", a catalog index, or a
/// label.
fn pick_scenarios(catalog: &[Scenario], selector: &str) -> Result<Vec<usize>, CliError> {
    if selector == "all" {
        return Ok((0..catalog.len()).collect());
    }
    if let Ok(index) = selector.parse::<usize>() {
        if index < catalog.len() {
            return Ok(vec![index]);
        }
        return Err(CliError::Config(format!(
            "scenario index {index} out of range: valid values are 0..={} or `all`",
            catalog.len() - 1
        )));
    }
    if let Some(index) = catalog.iter().position(|s| s.label == selector) {
        return Ok(vec![index]);
    }
    Err(CliError::Config(format!(
        "unknown scenario `{selector}`: use a catalog index, a label such as \
         `{}`, or `all`",
        catalog[0].label
    )))
}

fn load_template(cfg: &SimulateConfig) -> Result<(TemplateNetwork, Option<String>), CliError> {
    match &cfg.template {
        None => Ok((default_template(), None)),
        Some(path) => {
            let text = read_input(path)?;
            let template = parse_template(&text, cfg.reference.as_deref())?;
            Ok((template, Some(text)))
        }
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = resolve_simulate(args)?;
    let catalog = scenario_catalog();
    let picks = pick_scenarios(&catalog, &cfg.scenario)?;
    let (template, template_text) = load_template(&cfg)?;
    let model_override = match &cfg.model {
        None => None,
        Some(name) => Some(
            ModelKind::parse(name)
                .ok_or_else(|| CliError::Config(format!("unknown model `{name}`")))?,
        ),
    };
    if template.n_treatments() != catalog[0].d1.len() {
        return Err(CliError::Data(format!(
            "template has {} treatments; the scenario catalog needs {}",
            template.n_treatments(),
            catalog[0].d1.len()
        )));
    }

    ensure_out_dir(&args.out)?;
    let mut outputs = Vec::new();
    let mut all_runs: Vec<ReplicateResult> = Vec::new();
    for &index in &picks {
        let scenario = &catalog[index];
        let model = model_override.unwrap_or(scenario.family);
        let mut priors = cfg.priors.clone();
        if model.has_spike() && priors.spike_v0.is_none() {
            priors.spike_v0 = Some(SIMULATE_DEFAULT_V0);
        }
        let runs = run_scenario_replicates(
            scenario,
            &template,
            &cfg.baselines,
            model,
            &priors,
            &cfg.mcmc,
            cfg.replicates,
        )?;
        for (r, run) in runs.iter().enumerate() {
            let name = format!("{}_r{r:03}.json", scenario.label);
            let mut text =
                serde_json::to_string_pretty(run).expect("results always serialize");
            text.push('\n');
            write_output(&args.out, &name, &text)?;
            outputs.push(name);
        }
        let mean_joint = runs
            .iter()
            .map(|r| r.metrics.joint_prob_true_graph)
            .sum::<f64>()
            / runs.len() as f64;
        println!(
            "{} fitted with {model}: mean joint probability of the true graph {mean_joint:.3}",
            scenario.label
        );
        all_runs.extend(runs);
    }

    write_output(&args.out, "metrics_summary.csv", &aggregate_results(&all_runs))?;
    outputs.push("metrics_summary.csv".into());
    outputs.sort();

    let mut inputs = BTreeMap::new();
    if let (Some(path), Some(text)) = (&cfg.template, &template_text) {
        inputs.insert(path.display().to_string(), sha256_hex(text.as_bytes()));
    }
    let manifest = RunManifest {
        command: "simulate".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(&cfg).expect("configs always serialize"),
        treatments: Some(template.labels.clone()),
        inputs,
        outputs,
    };
    write_manifest(&args.out, &manifest)?;

    println!(
        "simulate complete: {} scenario(s) x {} replicate(s) -> {}",
        picks.len(),
        cfg.replicates,
        args.out.display()
    );
    Ok(())
}
