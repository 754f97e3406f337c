//! Trial-network data: CSV parsing, validation, and network structure.
//!
//! Input is arm-level CSV with one row per study arm:
//!
//! ```csv
//! study_id,treatment,events,total,baseline
//! s1,placebo,12,148,1
//! s1,drug-a,9,150,
//! ```
//!
//! The `baseline` column is optional; when absent (or blank for a study) the
//! study's baseline arm is the one whose treatment has the lowest internal
//! index. Treatment labels are mapped to contiguous indices `0..K`: the
//! reference treatment (the first-declared label unless overridden) becomes
//! index 0 and the remaining labels follow in ascending lexicographic order.
//! All model output is expressed against index 0, whose basic effect is
//! pinned to zero.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

/// One arm of a study: a treatment with its binomial outcome counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arm {
    /// Internal treatment index in `0..K`.
    pub treatment: usize,
    /// Number of events observed in this arm.
    pub events: u64,
    /// Number of randomized subjects in this arm (≥ 1).
    pub trials: u64,
}

/// A study: two or more arms plus a designated baseline treatment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Study {
    pub id: String,
    /// Arms sorted by ascending treatment index; treatments are distinct.
    pub arms: Vec<Arm>,
    /// Treatment index of the baseline arm (present among `arms`).
    pub baseline: usize,
}

impl Study {
    /// Number of non-baseline arms (the contrast dimension t_i).
    pub fn contrast_dim(&self) -> usize {
        self.arms.len() - 1
    }

    /// Non-baseline treatment indices in ascending order.
    pub fn non_baseline_treatments(&self) -> impl Iterator<Item = usize> + '_ {
        self.arms.iter().map(|a| a.treatment).filter(move |&t| t != self.baseline)
    }
}

/// A parsed, validated trial network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    /// Studies in order of first appearance in the source.
    pub studies: Vec<Study>,
    /// Treatment labels by internal index; `labels[0]` is the reference.
    pub labels: Vec<String>,
}

impl Dataset {
    /// Number of distinct treatments K.
    pub fn n_treatments(&self) -> usize {
        self.labels.len()
    }

    /// Number of studies N.
    pub fn n_studies(&self) -> usize {
        self.studies.len()
    }

    /// Serializes back to the arm-level CSV schema, baseline column included.
    /// Re-parsing the output with `labels[0]` as the reference reproduces
    /// `self` exactly.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["study_id", "treatment", "events", "total", "baseline"])
            .expect("writing to an in-memory buffer cannot fail");
        for study in &self.studies {
            for arm in &study.arms {
                let is_baseline = if arm.treatment == study.baseline { "1" } else { "0" };
                writer
                    .write_record([
                        study.id.as_str(),
                        self.labels[arm.treatment].as_str(),
                        &arm.events.to_string(),
                        &arm.trials.to_string(),
                        is_baseline,
                    ])
                    .expect("writing to an in-memory buffer cannot fail");
            }
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush cannot fail"))
            .expect("csv output is valid UTF-8")
    }
}

/// Structural summary of a parsed network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSummary {
    /// Total randomized subjects per treatment index.
    pub treatment_sizes: Vec<u64>,
    /// `pair_counts[j][k]` = number of studies containing both j and k
    /// (symmetric, zero diagonal).
    pub pair_counts: Vec<Vec<u64>>,
    /// Whether every treatment is reachable from every other through shared
    /// studies. Disconnected networks parse but cannot be fitted.
    pub connected: bool,
    /// Number of studies with three or more arms.
    pub multi_arm_studies: usize,
}

/// Errors raised when reading or validating a trial network.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("CSV parsing failed: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("study `{study}`, treatment `{treatment}`: events {events} exceed total {trials}")]
    EventsExceedTrials { study: String, treatment: String, events: u64, trials: u64 },

    #[error("study `{study}`, treatment `{treatment}`: arm total must be at least 1")]
    ZeroTrials { study: String, treatment: String },

    #[error("study `{study}` lists treatment `{treatment}` more than once")]
    DuplicateArm { study: String, treatment: String },

    #[error("study `{study}` has {arms} arm(s); at least two are required")]
    TooFewArms { study: String, arms: usize },

    #[error("study `{study}` marks more than one baseline arm")]
    MultipleBaselines { study: String },

    #[error("unknown treatment label `{label}`")]
    UnknownTreatment { label: String },

    #[error("dataset contains no studies")]
    Empty,
}

/// Raw row retained between the CSV pass and index mapping.
struct RawArm {
    label: String,
    events: u64,
    trials: u64,
    baseline_mark: bool,
}

/// Parses arm-level CSV into a [`Dataset`].
///
/// `reference` names the treatment mapped to index 0; `None` selects the
/// first-declared label. Duplicate arms, sub-two-arm studies, impossible
/// counts, and multiple baseline marks are hard errors. Disconnectedness is
/// *not* an error here — it is reported by [`validate_network`] and rejected
/// at fit time.
pub fn parse_dataset(csv_text: &str, reference: Option<&str>) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());

    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (study_col, treatment_col, events_col, total_col) = match (
        col("study_id"),
        col("treatment"),
        col("events"),
        col("total"),
    ) {
        (Some(s), Some(t), Some(e), Some(n)) => (s, t, e, n),
        _ => {
            return Err(DataError::MalformedRow {
                line: 1,
                message: "header must contain study_id, treatment, events, total".into(),
            })
        }
    };
    let baseline_col = col("baseline");

    // Studies and labels both keep first-appearance order.
    let mut study_order: Vec<String> = Vec::new();
    let mut study_arms: HashMap<String, Vec<RawArm>> = HashMap::new();
    let mut label_order: Vec<String> = Vec::new();
    let mut seen_labels: HashMap<String, ()> = HashMap::new();

    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |idx: usize| -> Result<&str, DataError> {
            record.get(idx).ok_or_else(|| DataError::MalformedRow {
                line,
                message: format!("missing column {idx}"),
            })
        };
        let study = field(study_col)?.to_string();
        let label = field(treatment_col)?.to_string();
        if study.is_empty() || label.is_empty() {
            return Err(DataError::MalformedRow {
                line,
                message: "study_id and treatment must be nonempty".into(),
            });
        }
        let parse_count = |raw: &str, what: &str| -> Result<u64, DataError> {
            raw.parse().map_err(|_| DataError::MalformedRow {
                line,
                message: format!("{what} must be a nonnegative integer, got `{raw}`"),
            })
        };
        let events = parse_count(field(events_col)?, "events")?;
        let trials = parse_count(field(total_col)?, "total")?;
        let baseline_mark = match baseline_col.map(|c| record.get(c).unwrap_or("")) {
            None | Some("") | Some("0") => false,
            Some("1") => true,
            Some(other) => {
                return Err(DataError::MalformedRow {
                    line,
                    message: format!("baseline must be 0, 1, or empty, got `{other}`"),
                })
            }
        };

        if trials == 0 {
            return Err(DataError::ZeroTrials { study, treatment: label });
        }
        if events > trials {
            return Err(DataError::EventsExceedTrials { study, treatment: label, events, trials });
        }

        if let Entry::Vacant(v) = seen_labels.entry(label.clone()) {
            v.insert(());
            label_order.push(label.clone());
        }
        let arms = match study_arms.entry(study.clone()) {
            Entry::Vacant(v) => {
                study_order.push(study.clone());
                v.insert(Vec::new())
            }
            Entry::Occupied(o) => o.into_mut(),
        };
        if arms.iter().any(|a| a.label == label) {
            return Err(DataError::DuplicateArm { study, treatment: label });
        }
        arms.push(RawArm { label, events, trials, baseline_mark });
    }

    if study_order.is_empty() {
        return Err(DataError::Empty);
    }

    // Index mapping: reference first, remaining labels lexicographic.
    let reference_label = match reference {
        Some(r) => {
            if !seen_labels.contains_key(r) {
                return Err(DataError::UnknownTreatment { label: r.to_string() });
            }
            r.to_string()
        }
        None => label_order[0].clone(),
    };
    let mut labels: Vec<String> =
        label_order.iter().filter(|l| **l != reference_label).cloned().collect();
    labels.sort_unstable();
    labels.insert(0, reference_label);
    let index_of: HashMap<&str, usize> =
        labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

    let mut studies = Vec::with_capacity(study_order.len());
    for id in study_order {
        let raw = study_arms.remove(&id).expect("every ordered study has arms");
        if raw.len() < 2 {
            return Err(DataError::TooFewArms { study: id, arms: raw.len() });
        }
        let marked: Vec<usize> = raw
            .iter()
            .filter(|a| a.baseline_mark)
            .map(|a| index_of[a.label.as_str()])
            .collect();
        if marked.len() > 1 {
            return Err(DataError::MultipleBaselines { study: id });
        }
        let mut arms: Vec<Arm> = raw
            .into_iter()
            .map(|a| Arm { treatment: index_of[a.label.as_str()], events: a.events, trials: a.trials })
            .collect();
        arms.sort_unstable_by_key(|a| a.treatment);
        let baseline = marked
            .first()
            .copied()
            .unwrap_or_else(|| arms.first().expect("nonempty arms").treatment);
        studies.push(Study { id, arms, baseline });
    }

    Ok(Dataset { studies, labels })
}

/// Computes the structural summary: per-treatment totals, direct-comparison
/// counts, connectivity, and the multi-arm census.
pub fn validate_network(dataset: &Dataset) -> NetworkSummary {
    let k = dataset.n_treatments();
    let mut treatment_sizes = vec![0u64; k];
    let mut pair_counts = vec![vec![0u64; k]; k];
    let mut multi_arm_studies = 0usize;

    for study in &dataset.studies {
        if study.arms.len() > 2 {
            multi_arm_studies += 1;
        }
        for arm in &study.arms {
            treatment_sizes[arm.treatment] += arm.trials;
        }
        for (i, a) in study.arms.iter().enumerate() {
            for b in &study.arms[i + 1..] {
                pair_counts[a.treatment][b.treatment] += 1;
                pair_counts[b.treatment][a.treatment] += 1;
            }
        }
    }

    // Breadth-first reachability over the co-occurrence graph.
    let mut visited = vec![false; k];
    let mut queue = vec![0usize];
    visited[0] = true;
    while let Some(j) = queue.pop() {
        for t in 0..k {
            if !visited[t] && pair_counts[j][t] > 0 {
                visited[t] = true;
                queue.push(t);
            }
        }
    }
    let connected = visited.iter().all(|&v| v);

    NetworkSummary { treatment_sizes, pair_counts, connected, multi_arm_studies }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "\
study_id,treatment,events,total
s1,1,5,10
s1,2,7,10
s2,2,3,10
s2,3,4,10
";

    #[test]
    fn maps_labels_and_defaults_baselines() {
        let ds = parse_dataset(BASIC, None).unwrap();
        assert_eq!(ds.n_studies(), 2);
        assert_eq!(ds.n_treatments(), 3);
        assert_eq!(ds.labels, vec!["1", "2", "3"]);
        // Baselines: lowest treatment index present in each study.
        assert_eq!(ds.studies[0].baseline, 0);
        assert_eq!(ds.studies[1].baseline, 1);
        assert_eq!(ds.studies[0].arms[0], Arm { treatment: 0, events: 5, trials: 10 });
        assert_eq!(ds.studies[1].contrast_dim(), 1);
    }

    #[test]
    fn reference_override_reorders_the_mapping() {
        let ds = parse_dataset(BASIC, Some("3")).unwrap();
        assert_eq!(ds.labels, vec!["3", "1", "2"]);
        // Study s2 contains treatments {2 → idx 2, 3 → idx 0}: baseline 0.
        assert_eq!(ds.studies[1].baseline, 0);
        assert!(matches!(
            parse_dataset(BASIC, Some("nope")),
            Err(DataError::UnknownTreatment { .. })
        ));
    }

    #[test]
    fn lexicographic_order_is_by_string_not_number() {
        let csv = "study_id,treatment,events,total\na,2,1,5\na,10,1,5\nb,10,2,6\nb,3,2,6\n";
        let ds = parse_dataset(csv, None).unwrap();
        // Reference = first declared ("2"); rest lexicographic: "10" < "3".
        assert_eq!(ds.labels, vec!["2", "10", "3"]);
    }

    #[test]
    fn explicit_baseline_marks_are_respected() {
        let csv = "\
study_id,treatment,events,total,baseline
s1,a,1,10,
s1,b,2,10,1
s2,a,1,10,0
s2,b,2,10,
";
        let ds = parse_dataset(csv, None).unwrap();
        assert_eq!(ds.studies[0].baseline, 1, "marked arm wins");
        assert_eq!(ds.studies[1].baseline, 0, "unmarked study falls back to lowest index");
    }

    #[test]
    fn validation_errors_are_specific() {
        let overrun = "study_id,treatment,events,total\ns,a,11,10\ns,b,0,10\n";
        assert!(matches!(
            parse_dataset(overrun, None),
            Err(DataError::EventsExceedTrials { events: 11, trials: 10, .. })
        ));
        let dup = "study_id,treatment,events,total\ns,a,1,10\ns,a,2,10\n";
        assert!(matches!(parse_dataset(dup, None), Err(DataError::DuplicateArm { .. })));
        let single = "study_id,treatment,events,total\ns,a,1,10\nt,a,1,10\nt,b,1,10\n";
        assert!(matches!(parse_dataset(single, None), Err(DataError::TooFewArms { arms: 1, .. })));
        let zero = "study_id,treatment,events,total\ns,a,0,0\ns,b,1,10\n";
        assert!(matches!(parse_dataset(zero, None), Err(DataError::ZeroTrials { .. })));
        let text = "study_id,treatment,events,total\ns,a,x,10\ns,b,1,10\n";
        assert!(matches!(parse_dataset(text, None), Err(DataError::MalformedRow { .. })));
        let two_bases = "\
study_id,treatment,events,total,baseline
s,a,1,10,1
s,b,1,10,1
";
        assert!(matches!(parse_dataset(two_bases, None), Err(DataError::MultipleBaselines { .. })));
        assert!(matches!(parse_dataset("study_id,treatment,events,total\n", None), Err(DataError::Empty)));
        let bad_header = "sid,treatment,events,total\ns,a,1,10\n";
        assert!(matches!(parse_dataset(bad_header, None), Err(DataError::MalformedRow { .. })));
    }

    #[test]
    fn summary_counts_pairs_sizes_and_multi_arm_studies() {
        let csv = "\
study_id,treatment,events,total
s1,a,1,10
s1,b,2,20
s1,c,3,30
s2,a,4,40
s2,b,5,50
";
        let ds = parse_dataset(csv, None).unwrap();
        let summary = validate_network(&ds);
        assert_eq!(summary.treatment_sizes, vec![50, 70, 30]);
        assert_eq!(summary.multi_arm_studies, 1);
        assert!(summary.connected);
        // Brute-force recount over every study and unordered arm pair.
        let k = ds.n_treatments();
        let mut expect = vec![vec![0u64; k]; k];
        for study in &ds.studies {
            for a in &study.arms {
                for b in &study.arms {
                    if a.treatment < b.treatment {
                        expect[a.treatment][b.treatment] += 1;
                        expect[b.treatment][a.treatment] += 1;
                    }
                }
            }
        }
        assert_eq!(summary.pair_counts, expect);
        assert_eq!(summary.pair_counts[0][1], 2);
        assert_eq!(summary.pair_counts[1][2], 1);
    }

    #[test]
    fn disconnected_networks_parse_with_a_flag() {
        let csv = "\
study_id,treatment,events,total
s1,a,1,10
s1,b,2,10
s2,c,3,10
s2,d,4,10
";
        let ds = parse_dataset(csv, None).unwrap();
        let summary = validate_network(&ds);
        assert!(!summary.connected);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let csv = "\
study_id,treatment,events,total,baseline
trial one,drug \"x\",3,30,1
trial one,drug y,4,40,
older trial,drug y,5,50,
older trial,placebo,6,60,1
";
        let ds = parse_dataset(csv, None).unwrap();
        let re = parse_dataset(&ds.to_csv(), Some(&ds.labels[0])).unwrap();
        assert_eq!(ds, re);
    }
}
