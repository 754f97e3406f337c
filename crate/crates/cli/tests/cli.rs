//! End-to-end tests of the `nma` binary: each spawns the compiled binary
//! against a temporary directory and asserts on exit codes, stream content,
//! and the files written.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TRIALS_CSV: &str = "\
study_id,treatment,events,total
s1,placebo,12,50
s1,drug-a,18,52
s2,placebo,10,48
s2,drug-b,22,49
s3,drug-a,15,50
s3,drug-b,16,50
s4,placebo,11,50
s4,drug-a,19,51
";

fn nma() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nma"))
}

fn run(args: &[&str]) -> Output {
    nma().args(args).output().expect("the binary launches")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout(output),
        stderr(output)
    );
}

fn write_trials(dir: &Path) -> PathBuf {
    let path = dir.join("trials.csv");
    fs::write(&path, TRIALS_CSV).unwrap();
    path
}

/// Fits the shared test dataset with the smoke schedule and returns the
/// samples path.
fn fit_smoke(dir: &Path, model: &str, out_name: &str) -> PathBuf {
    let input = write_trials(dir);
    let out = dir.join(out_name);
    let output = run(&[
        "fit",
        "--model",
        model,
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--mcmc",
        "smoke",
    ]);
    assert_exit(&output, 0);
    out.join("samples.jsonl")
}

#[test]
fn fit_writes_draws_a_manifest_and_a_summary() {
    let dir = TempDir::new().unwrap();
    let input = write_trials(dir.path());
    let out = dir.path().join("fit");
    let output = run(&[
        "fit",
        "--model",
        "dp-gaussian",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--mcmc",
        "smoke",
    ]);
    assert_exit(&output, 0);

    let samples = fs::read_to_string(out.join("samples.jsonl")).unwrap();
    assert_eq!(samples.lines().count(), 200, "2 chains x 100 kept draws");

    let text = stdout(&output);
    assert!(text.contains("kept 200 draws (2 chains x 100)"), "summary:\n{text}");
    assert!(text.contains("acceptance"), "summary reports acceptance rates:\n{text}");

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "fit");
    assert_eq!(
        manifest["treatments"],
        serde_json::json!(["placebo", "drug-a", "drug-b"]),
        "reference defaults to the first declared treatment, the rest sort"
    );
    let digest = manifest["inputs"][input.to_str().unwrap()].as_str().unwrap();
    assert_eq!(digest.len(), 64, "inputs carry a sha256 digest");
    assert!(digest.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(manifest["outputs"], serde_json::json!(["samples.jsonl"]));
    assert_eq!(manifest["config"]["mcmc"]["iterations"], 600);
}

#[test]
fn missing_required_flags_exit_with_the_usage_code() {
    let output = run(&["fit", "--model", "gaussian", "--out", "/tmp/unused"]);
    assert_exit(&output, 2);
    assert!(stderr(&output).contains("--input"), "stderr names the missing flag");
}

#[test]
fn unknown_model_values_exit_with_the_usage_code() {
    let dir = TempDir::new().unwrap();
    let input = write_trials(dir.path());
    let output = run(&[
        "fit",
        "--model",
        "bogus",
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_exit(&output, 2);
}

#[test]
fn invalid_data_exits_with_the_data_code_and_names_the_row() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "study_id,treatment,events,total\ns1,a,60,50\ns1,b,10,50\n").unwrap();
    let output = run(&[
        "fit",
        "--model",
        "gaussian",
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_exit(&output, 3);
    let text = stderr(&output);
    assert!(text.contains("s1") && text.contains('a') && text.contains("60"), "stderr:\n{text}");
}

#[test]
fn unreadable_samples_exit_with_the_data_code() {
    let dir = TempDir::new().unwrap();
    let garbled = dir.path().join("samples.jsonl");
    fs::write(&garbled, "not json\n").unwrap();
    let output = run(&[
        "rank",
        "--samples",
        garbled.to_str().unwrap(),
        "--out",
        dir.path().join("rank").to_str().unwrap(),
    ]);
    assert_exit(&output, 3);

    let missing = dir.path().join("no-such-file.jsonl");
    let output = run(&[
        "league",
        "--samples",
        missing.to_str().unwrap(),
        "--out",
        dir.path().join("league").to_str().unwrap(),
    ]);
    assert_exit(&output, 3);
}

#[test]
fn rank_emits_the_trim_sequence_with_nondecreasing_joint_probabilities() {
    let dir = TempDir::new().unwrap();
    let samples = fit_smoke(dir.path(), "dp-gaussian", "fit");
    let out = dir.path().join("rank");
    let output = run(&[
        "rank",
        "--samples",
        samples.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threshold",
        "0.8",
    ]);
    assert_exit(&output, 0);

    let index: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("index.json")).unwrap()).unwrap();
    let steps = index["steps"].as_array().unwrap();
    assert!(!steps.is_empty());
    let mut previous = 0.0;
    for step in steps {
        let dot_name = step["dot"].as_str().unwrap();
        let dot = fs::read_to_string(out.join(dot_name)).unwrap();
        assert!(dot.starts_with("digraph comparisons {"), "{dot_name}:\n{dot}");
        let joint = step["joint_prob"].as_f64().unwrap();
        assert!(joint >= previous, "joint probabilities are nondecreasing");
        previous = joint;
    }

    let selected = &index["selected"];
    assert!(selected["joint_prob"].as_f64().unwrap() >= 0.8);
    assert!(out.join("selected.dot").exists());
    assert!(out.join("selected.json").exists());

    // Labels come from the manifest written next to the samples.
    let dot = fs::read_to_string(out.join("step_00.dot")).unwrap();
    assert!(dot.contains("\"placebo\""), "{dot}");
}

#[test]
fn rank_on_independent_effects_samples_never_draws_tie_edges() {
    let dir = TempDir::new().unwrap();
    let samples = fit_smoke(dir.path(), "gaussian", "fit");
    let out = dir.path().join("rank");
    let output = run(&[
        "rank",
        "--samples",
        samples.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let mut dots = 0;
    for entry in fs::read_dir(&out).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "dot") {
            dots += 1;
            let dot = fs::read_to_string(&path).unwrap();
            assert!(
                !dot.contains("dir=both"),
                "continuous effects almost surely never tie: {}",
                path.display()
            );
        }
    }
    assert!(dots > 0);
}

#[test]
fn rank_rejects_label_lists_of_the_wrong_length() {
    let dir = TempDir::new().unwrap();
    let samples = fit_smoke(dir.path(), "gaussian", "fit");
    let output = run(&[
        "rank",
        "--samples",
        samples.to_str().unwrap(),
        "--labels",
        "a,b",
        "--out",
        dir.path().join("rank").to_str().unwrap(),
    ]);
    assert_exit(&output, 2);
}

#[test]
fn league_renders_csv_and_markdown_with_unit_cells_for_tied_pairs() {
    let dir = TempDir::new().unwrap();
    let samples = fit_smoke(dir.path(), "dp-gaussian", "fit");
    let out = dir.path().join("league");
    let output = run(&[
        "league",
        "--samples",
        samples.to_str().unwrap(),
        "--alpha",
        "0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);

    let csv = fs::read_to_string(out.join("league.csv")).unwrap();
    assert!(csv.starts_with("row,col,or,lo,hi,kind,p_eq_pct,coverage_pct\n"));
    assert_eq!(csv.lines().count(), 1 + 6, "one row per ordered pair of 3 treatments");
    assert!(csv.contains("placebo,drug-a,"));

    // With this seed the clustered model declares drug-a and drug-b tied in
    // most draws, so their cells collapse to the unit odds ratio.
    let md = fs::read_to_string(out.join("league.md")).unwrap();
    assert!(md.contains("{1}"), "tied pairs render as the unit interval:\n{md}");
    assert!(md.contains("**placebo**"), "diagonal holds the treatment names:\n{md}");
}

#[test]
fn league_rejects_alpha_outside_the_open_unit_interval() {
    let dir = TempDir::new().unwrap();
    let samples = fit_smoke(dir.path(), "gaussian", "fit");
    let output = run(&[
        "league",
        "--samples",
        samples.to_str().unwrap(),
        "--alpha",
        "1.5",
        "--out",
        dir.path().join("league").to_str().unwrap(),
    ]);
    assert_exit(&output, 2);
}

#[test]
fn simulate_covers_every_scenario_and_aggregates_metrics() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim");
    let output = run(&[
        "simulate",
        "--scenario",
        "all",
        "--replicates",
        "1",
        "--mcmc",
        "smoke",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);

    let metric_files: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|name| name.ends_with("_r000.json"))
        .collect();
    assert_eq!(metric_files.len(), 18, "one metrics file per scenario");

    let summary = fs::read_to_string(out.join("metrics_summary.csv")).unwrap();
    assert!(summary.starts_with(
        "scenario,replicates,mean_joint_prob,mean_pair_prob,subgraph_correct_rate,mean_subgraph_density\n"
    ));
    assert_eq!(summary.lines().count(), 1 + 18);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn simulate_accepts_scenario_indices_and_labels_and_rejects_unknown_ones() {
    let dir = TempDir::new().unwrap();
    let by_index = run(&[
        "simulate",
        "--scenario",
        "9",
        "--mcmc",
        "smoke",
        "--out",
        dir.path().join("a").to_str().unwrap(),
    ]);
    assert_exit(&by_index, 0);
    assert!(dir.path().join("a/dp-gaussian-x1-tau0.1_r000.json").exists());

    let by_label = run(&[
        "simulate",
        "--scenario",
        "dp-gaussian-x1-tau0.1",
        "--mcmc",
        "smoke",
        "--out",
        dir.path().join("b").to_str().unwrap(),
    ]);
    assert_exit(&by_label, 0);
    assert_eq!(
        fs::read(dir.path().join("a/dp-gaussian-x1-tau0.1_r000.json")).unwrap(),
        fs::read(dir.path().join("b/dp-gaussian-x1-tau0.1_r000.json")).unwrap(),
        "selecting by index or label runs the same scenario"
    );

    let unknown = run(&[
        "simulate",
        "--scenario",
        "nope",
        "--mcmc",
        "smoke",
        "--out",
        dir.path().join("c").to_str().unwrap(),
    ]);
    assert_exit(&unknown, 2);
}

#[test]
fn identical_invocations_write_byte_identical_outputs() {
    let dir = TempDir::new().unwrap();
    let input = write_trials(dir.path());
    for name in ["one", "two"] {
        let output = run(&[
            "fit",
            "--model",
            "dp-spike-slab",
            "--v0",
            "0.1",
            "--input",
            input.to_str().unwrap(),
            "--out",
            dir.path().join(name).to_str().unwrap(),
            "--mcmc",
            "smoke",
        ]);
        assert_exit(&output, 0);
    }
    for file in ["samples.jsonl", "manifest.json"] {
        assert_eq!(
            fs::read(dir.path().join("one").join(file)).unwrap(),
            fs::read(dir.path().join("two").join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }
}

#[test]
fn a_manifest_replays_its_run_bit_identically() {
    let dir = TempDir::new().unwrap();
    let input = write_trials(dir.path());
    let first = dir.path().join("first");
    let output = run(&[
        "fit",
        "--model",
        "dp-gaussian",
        "--input",
        input.to_str().unwrap(),
        "--out",
        first.to_str().unwrap(),
        "--mcmc",
        "smoke",
        "--seed",
        "7",
    ]);
    assert_exit(&output, 0);

    let second = dir.path().join("second");
    let output = run(&[
        "fit",
        "--config",
        first.join("manifest.json").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    assert_eq!(
        fs::read(first.join("samples.jsonl")).unwrap(),
        fs::read(second.join("samples.jsonl")).unwrap(),
        "replaying the manifest reproduces the draws"
    );
    assert_eq!(
        fs::read(first.join("manifest.json")).unwrap(),
        fs::read(second.join("manifest.json")).unwrap(),
        "the replay writes the same manifest"
    );
}

#[test]
fn manifests_from_a_different_command_are_rejected() {
    let dir = TempDir::new().unwrap();
    let samples = fit_smoke(dir.path(), "gaussian", "fit");
    let manifest = samples.parent().unwrap().join("manifest.json");
    let output = run(&[
        "rank",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        dir.path().join("rank").to_str().unwrap(),
    ]);
    assert_exit(&output, 2);
    assert!(stderr(&output).contains("fit"), "the error names the writing command");
}

#[test]
fn plain_config_files_stand_in_for_flags() {
    let dir = TempDir::new().unwrap();
    let input = write_trials(dir.path());
    let config = dir.path().join("fit.json");
    fs::write(
        &config,
        serde_json::json!({
            "model": "gaussian",
            "input": input.to_str().unwrap(),
            "mcmc": {"chains": 2, "iterations": 600, "burn_in": 300, "thin": 3, "seed": 11}
        })
        .to_string(),
    )
    .unwrap();
    let out = dir.path().join("fit");
    let output = run(&[
        "fit",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    assert!(stdout(&output).contains("kept 200 draws"));

    // A flag on top of the config overrides the matching field.
    let out2 = dir.path().join("fit2");
    let output = run(&[
        "fit",
        "--config",
        config.to_str().unwrap(),
        "--thin",
        "6",
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    assert!(stdout(&output).contains("kept 100 draws"));
}

#[test]
fn spike_slab_fits_require_the_spike_width() {
    let dir = TempDir::new().unwrap();
    let input = write_trials(dir.path());
    let output = run(&[
        "fit",
        "--model",
        "dp-spike-slab",
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().join("fit").to_str().unwrap(),
        "--mcmc",
        "smoke",
    ]);
    assert_exit(&output, 2);
    assert!(stderr(&output).to_lowercase().contains("v0"), "stderr:\n{}", stderr(&output));
}
