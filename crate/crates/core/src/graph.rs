//! Posterior comparison graphs: per-draw coherent relations, pairwise
//! probabilities, the modal graph and its coherent projection, trimmed
//! graph sequences, and sub-graph selection.
//!
//! Every posterior draw induces a complete, coherent relation over the
//! treatments — each ordered pair is equal, less, or greater — built from
//! sort keys (effective value, structural class), so transitivity holds by
//! construction. Aggregating relations over draws gives exact per-pair
//! probabilities; taking each pair's modal statement gives the initial
//! graph, which need not be coherent as a whole. Its coherent projection is
//! the closest draw-induced relation under a probability-weighted
//! disagreement distance. Trimming that projection at increasing
//! probability thresholds yields a nested sequence of ever-sparser graphs
//! whose joint posterior probability rises toward 1.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::samplers::{Draw, ModelKind, PosteriorSamples};

/// Errors from graph construction and selection.
#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("no posterior draws to summarize")]
    EmptySamples,

    #[error("operation requires a complete graph (every treatment pair represented)")]
    Incomplete,

    #[error("operation requires a coherent graph")]
    Incoherent,

    #[error("threshold must lie in (0, 1], got {value}")]
    InvalidThreshold { value: f64 },

    #[error("expected {expected} treatment labels, got {actual}")]
    LabelCount { expected: usize, actual: usize },
}

/// One pair's statement: for the unordered pair (j, k) with j < k, `Lt`
/// means treatment j's effect is below k's, `Gt` the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparison {
    Eq,
    Lt,
    Gt,
}

impl Comparison {
    /// The same statement read from the other side of the pair.
    fn flipped(self) -> Comparison {
        match self {
            Comparison::Eq => Comparison::Eq,
            Comparison::Lt => Comparison::Gt,
            Comparison::Gt => Comparison::Lt,
        }
    }
}

/// Index of the unordered pair (j, k), j < k, in a packed upper-triangle
/// layout over `n` treatments.
pub fn pair_index(j: usize, k: usize, n: usize) -> usize {
    debug_assert!(j < k && k < n, "pair ({j}, {k}) out of range for {n} treatments");
    j * (2 * n - j - 1) / 2 + (k - j - 1)
}

/// Number of unordered treatment pairs.
pub fn n_pairs(n: usize) -> usize {
    n * (n - 1) / 2
}

/// A complete coherent comparison of all treatments: one statement per
/// unordered pair, derived from per-treatment sort keys so that equality is
/// an equivalence and the strict part is a total order on the classes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Relation {
    n_treatments: usize,
    codes: Vec<Comparison>,
}

impl Relation {
    fn from_keys(keys: &[(f64, usize)]) -> Relation {
        let n = keys.len();
        let mut codes = Vec::with_capacity(n_pairs(n));
        for j in 0..n {
            for k in (j + 1)..n {
                let value_order = keys[j]
                    .0
                    .partial_cmp(&keys[k].0)
                    .expect("comparison values are finite");
                let code = match value_order.then(keys[j].1.cmp(&keys[k].1)) {
                    Ordering::Equal => Comparison::Eq,
                    Ordering::Less => Comparison::Lt,
                    Ordering::Greater => Comparison::Gt,
                };
                codes.push(code);
            }
        }
        Relation { n_treatments: n, codes }
    }

    pub fn n_treatments(&self) -> usize {
        self.n_treatments
    }

    /// The statement for any ordered pair (j, k), j ≠ k, read from j's side.
    pub fn statement(&self, j: usize, k: usize) -> Comparison {
        if j < k {
            self.codes[pair_index(j, k, self.n_treatments)]
        } else {
            self.codes[pair_index(k, j, self.n_treatments)].flipped()
        }
    }

    /// All ordered edges: (a, b) when a's effect is below b's, both
    /// directions for equal pairs. Sorted lexicographically.
    pub fn ordered_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for j in 0..self.n_treatments {
            for k in (j + 1)..self.n_treatments {
                match self.statement(j, k) {
                    Comparison::Eq => {
                        edges.push((j, k));
                        edges.push((k, j));
                    }
                    Comparison::Lt => edges.push((j, k)),
                    Comparison::Gt => edges.push((k, j)),
                }
            }
        }
        edges.sort_unstable();
        edges
    }
}

/// Sort keys (effective value, structural class) for one draw. Two
/// treatments compare equal exactly when both key components match, so
/// equality is structural — a shared zero class or a shared cluster value —
/// never an accident of floating-point arithmetic on distinct classes.
fn comparison_keys(draw: &Draw, model: ModelKind) -> Vec<(f64, usize)> {
    let d = &draw.d;
    match model {
        // Every treatment is its own class: equality is disabled, and exact
        // value ties (probability zero in real samples) break by index.
        ModelKind::GaussianEffects => d.iter().enumerate().map(|(i, &v)| (v, i)).collect(),
        // The reference is class 0 and can never merge (a cluster value of
        // exactly zero means a cluster coincidentally at the reference
        // point, not a shared cluster); other treatments share a class
        // exactly when they carry the same cluster value, which identifies
        // a shared cluster almost surely.
        ModelKind::DpGaussian => d
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if i == 0 {
                    (0.0, 0)
                } else {
                    let class = (1..=i).find(|&j| d[j] == v).expect("finds itself");
                    (v, class)
                }
            })
            .collect(),
        // The reference and every spike-flagged treatment collapse into one
        // zero class with the key (0, 0); slab treatments share a class
        // exactly when they carry the same cluster value.
        ModelKind::DpSpikeSlab => {
            let flags = draw
                .spike
                .as_ref()
                .expect("spike-slab draws carry spike flags");
            d.iter()
                .enumerate()
                .map(|(i, &v)| {
                    if i == 0 || flags[i] {
                        (0.0, 0)
                    } else {
                        let class = (1..=i)
                            .find(|&j| !flags[j] && d[j] == v)
                            .expect("finds itself");
                        (v, class)
                    }
                })
                .collect()
        }
    }
}

/// The complete coherent relation one draw induces over the treatments.
pub fn induced_relation(draw: &Draw, model: ModelKind) -> Relation {
    Relation::from_keys(&comparison_keys(draw, model))
}

/// Exact per-pair statement counts over all draws of a sample set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseProb {
    n_treatments: usize,
    draws: u64,
    /// `[eq, lt, gt]` counts per packed pair (j, k), j < k.
    counts: Vec<[u64; 3]>,
}

impl PairwiseProb {
    pub fn n_treatments(&self) -> usize {
        self.n_treatments
    }

    pub fn n_draws(&self) -> u64 {
        self.draws
    }

    /// (p_eq, p_lt, p_gt) for the pair (j, k), j < k.
    pub fn probabilities(&self, j: usize, k: usize) -> (f64, f64, f64) {
        let [eq, lt, gt] = self.counts[pair_index(j, k, self.n_treatments)];
        let n = self.draws as f64;
        (eq as f64 / n, lt as f64 / n, gt as f64 / n)
    }

    /// Probability of one specific statement about the pair (j, k), j < k.
    pub fn statement_prob(&self, j: usize, k: usize, statement: Comparison) -> f64 {
        let (eq, lt, gt) = self.probabilities(j, k);
        match statement {
            Comparison::Eq => eq,
            Comparison::Lt => lt,
            Comparison::Gt => gt,
        }
    }

    /// The modal probability p̃(j, k) = max{p_eq, p_lt, p_gt}.
    pub fn max_prob(&self, j: usize, k: usize) -> f64 {
        let (eq, lt, gt) = self.probabilities(j, k);
        eq.max(lt).max(gt)
    }

    /// The modal statement, ties broken by the precedence Eq > Lt > Gt
    /// (counts are exact integers, so ties are decided exactly).
    fn modal_statement(&self, j: usize, k: usize) -> Comparison {
        let [eq, lt, gt] = self.counts[pair_index(j, k, self.n_treatments)];
        if eq >= lt && eq >= gt {
            Comparison::Eq
        } else if lt >= gt {
            Comparison::Lt
        } else {
            Comparison::Gt
        }
    }
}

/// Empirical statement frequencies per pair over all induced relations.
pub fn pairwise_probabilities(samples: &PosteriorSamples) -> Result<PairwiseProb, GraphError> {
    if samples.draws.is_empty() {
        return Err(GraphError::EmptySamples);
    }
    let n = samples.n_treatments;
    let mut counts = vec![[0u64; 3]; n_pairs(n)];
    for draw in &samples.draws {
        let rel = induced_relation(draw, samples.model);
        for (slot, &code) in counts.iter_mut().zip(&rel.codes) {
            let bucket = match code {
                Comparison::Eq => 0,
                Comparison::Lt => 1,
                Comparison::Gt => 2,
            };
            slot[bucket] += 1;
        }
    }
    Ok(PairwiseProb { n_treatments: n, draws: samples.draws.len() as u64, counts })
}

/// One represented pair of a comparison graph: the asserted statement and
/// its retained probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStatement {
    pub kind: Comparison,
    pub prob: f64,
}

/// A directed comparison graph over the treatments: per unordered pair,
/// either an asserted statement (equality counts as both directions) or
/// nothing. May be incomplete (trimmed) and need not be coherent (the
/// initial modal graph).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonGraph {
    n_treatments: usize,
    statements: Vec<Option<PairStatement>>,
    /// Posterior probability that every represented statement holds at
    /// once; `None` until a sample set has been consulted.
    pub joint_prob: Option<f64>,
    /// The trim level that produced this graph, if any.
    pub gamma: Option<f64>,
}

impl ComparisonGraph {
    /// A graph with no represented pairs.
    pub fn empty(n_treatments: usize) -> ComparisonGraph {
        ComparisonGraph {
            n_treatments,
            statements: vec![None; n_pairs(n_treatments)],
            joint_prob: None,
            gamma: None,
        }
    }

    /// A complete graph carrying a relation's statements, each annotated
    /// with that statement's probability under `pp`.
    pub fn from_relation(rel: &Relation, pp: &PairwiseProb) -> ComparisonGraph {
        let n = rel.n_treatments;
        let mut graph = ComparisonGraph::empty(n);
        for j in 0..n {
            for k in (j + 1)..n {
                let kind = rel.statement(j, k);
                graph.set_statement(j, k, kind, pp.statement_prob(j, k, kind));
            }
        }
        graph
    }

    pub fn n_treatments(&self) -> usize {
        self.n_treatments
    }

    /// Asserts a statement about the pair {j, k}; the pair may be given in
    /// either order (the statement is read from the first argument's side).
    pub fn set_statement(&mut self, j: usize, k: usize, kind: Comparison, prob: f64) {
        let (index, kind) = if j < k {
            (pair_index(j, k, self.n_treatments), kind)
        } else {
            (pair_index(k, j, self.n_treatments), kind.flipped())
        };
        self.statements[index] = Some(PairStatement { kind, prob });
    }

    /// The statement about (j, k), j < k, if the pair is represented.
    pub fn statement(&self, j: usize, k: usize) -> Option<PairStatement> {
        self.statements[pair_index(j, k, self.n_treatments)]
    }

    /// True when every pair is represented.
    pub fn is_complete(&self) -> bool {
        self.statements.iter().all(|s| s.is_some())
    }

    /// Number of represented pairs.
    pub fn n_statements(&self) -> usize {
        self.statements.iter().filter(|s| s.is_some()).count()
    }

    /// Represented pairs / all pairs.
    pub fn density(&self) -> f64 {
        if self.statements.is_empty() {
            return 0.0;
        }
        self.n_statements() as f64 / self.statements.len() as f64
    }

    /// All ordered edges, sorted: (a, b) when a's effect is asserted below
    /// b's; equality contributes both directions.
    pub fn ordered_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        self.for_each_statement(|j, k, s| match s.kind {
            Comparison::Eq => {
                edges.push((j, k));
                edges.push((k, j));
            }
            Comparison::Lt => edges.push((j, k)),
            Comparison::Gt => edges.push((k, j)),
        });
        edges.sort_unstable();
        edges
    }

    fn for_each_statement(&self, mut f: impl FnMut(usize, usize, PairStatement)) {
        let mut index = 0;
        for j in 0..self.n_treatments {
            for k in (j + 1)..self.n_treatments {
                if let Some(s) = self.statements[index] {
                    f(j, k, s);
                }
                index += 1;
            }
        }
    }

    /// True when `rel` agrees with every represented statement
    /// (unrepresented pairs are unconstrained).
    pub fn satisfied_by(&self, rel: &Relation) -> bool {
        let mut ok = true;
        self.for_each_statement(|j, k, s| {
            if rel.statement(j, k) != s.kind {
                ok = false;
            }
        });
        ok
    }

    /// True when the graph is complete and states exactly `rel`.
    pub fn equals_relation(&self, rel: &Relation) -> bool {
        self.is_complete() && self.satisfied_by(rel)
    }
}

/// The initial graph: each pair's modal statement under `pp`, annotated
/// with the modal probability. Completeness is guaranteed; coherence is not.
pub fn build_initial_graph(pp: &PairwiseProb) -> ComparisonGraph {
    let n = pp.n_treatments;
    let mut graph = ComparisonGraph::empty(n);
    for j in 0..n {
        for k in (j + 1)..n {
            let kind = pp.modal_statement(j, k);
            graph.set_statement(j, k, kind, pp.statement_prob(j, k, kind));
        }
    }
    graph
}

/// Whether a complete graph admits real effect values realizing every
/// statement: equality must be transitive, and the strict relation it
/// quotients to must be acyclic. Errors on incomplete graphs — coherence of
/// a partial graph is not well defined here.
pub fn is_coherent(graph: &ComparisonGraph) -> Result<bool, GraphError> {
    if !graph.is_complete() {
        return Err(GraphError::Incomplete);
    }
    let n = graph.n_treatments;

    fn find(root: &mut [usize], mut x: usize) -> usize {
        while root[x] != x {
            root[x] = root[root[x]];
            x = root[x];
        }
        x
    }

    // Union treatments along Eq statements, then demand every within-class
    // pair is stated Eq (transitivity) and no cross-class pair is.
    let mut root: Vec<usize> = (0..n).collect();
    for j in 0..n {
        for k in (j + 1)..n {
            if graph.statement(j, k).expect("complete").kind == Comparison::Eq {
                let (a, b) = (find(&mut root, j), find(&mut root, k));
                root[a] = b;
            }
        }
    }

    // Record the orientation between each pair of classes; conflicting
    // orientations or strictness inside a class are incoherent.
    let mut order: HashMap<(usize, usize), Comparison> = HashMap::new();
    for j in 0..n {
        for k in (j + 1)..n {
            let kind = graph.statement(j, k).expect("complete").kind;
            let (a, b) = (find(&mut root, j), find(&mut root, k));
            if a == b {
                if kind != Comparison::Eq {
                    return Ok(false);
                }
                continue;
            }
            if kind == Comparison::Eq {
                return Ok(false);
            }
            let key = if a < b { (a, b) } else { (b, a) };
            let oriented = if a < b { kind } else { kind.flipped() };
            if let Some(previous) = order.insert(key, oriented) {
                if previous != oriented {
                    return Ok(false);
                }
            }
        }
    }

    // The strict class digraph must be acyclic; completeness then makes it
    // a transitive tournament, i.e. a total order.
    let classes: Vec<usize> = (0..n)
        .map(|x| find(&mut root, x))
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    let mut incoming: HashMap<usize, usize> = classes.iter().map(|&c| (c, 0)).collect();
    let mut successors: HashMap<usize, Vec<usize>> = HashMap::new();
    for (&(a, b), &kind) in &order {
        let (from, to) = if kind == Comparison::Lt { (a, b) } else { (b, a) };
        successors.entry(from).or_default().push(to);
        *incoming.get_mut(&to).expect("known class") += 1;
    }
    let mut ready: Vec<usize> =
        incoming.iter().filter(|(_, &deg)| deg == 0).map(|(&c, _)| c).collect();
    let mut seen = 0;
    while let Some(c) = ready.pop() {
        seen += 1;
        for &next in successors.get(&c).into_iter().flatten() {
            let deg = incoming.get_mut(&next).expect("known class");
            *deg -= 1;
            if *deg == 0 {
                ready.push(next);
            }
        }
    }
    Ok(seen == classes.len())
}

/// Disagreement score between two statements about one pair: 0 when they
/// agree, 1 when exactly one asserts equality, 2 when they point opposite
/// ways.
fn statement_score(a: Comparison, b: Comparison) -> f64 {
    match (a, b) {
        _ if a == b => 0.0,
        (Comparison::Eq, _) | (_, Comparison::Eq) => 1.0,
        _ => 2.0,
    }
}

/// Weighted disagreement between a complete graph and a relation: the sum
/// over pairs of p̃(j, k) times the disagreement score. Panics if `graph`
/// is incomplete (its callers construct complete graphs).
pub fn graph_distance(graph: &ComparisonGraph, candidate: &Relation, pp: &PairwiseProb) -> f64 {
    assert!(graph.is_complete(), "graph_distance requires a complete graph");
    let n = graph.n_treatments;
    let mut total = 0.0;
    for j in 0..n {
        for k in (j + 1)..n {
            let stated = graph.statement(j, k).expect("complete").kind;
            total += pp.max_prob(j, k) * statement_score(stated, candidate.statement(j, k));
        }
    }
    total
}

/// Distinct induced relations with their draw counts, in first-appearance
/// order (deterministic regardless of hashing).
fn distinct_relations(samples: &PosteriorSamples) -> Vec<(Relation, u64)> {
    let mut index: HashMap<Relation, usize> = HashMap::new();
    let mut ordered: Vec<(Relation, u64)> = Vec::new();
    for draw in &samples.draws {
        let rel = induced_relation(draw, samples.model);
        match index.get(&rel) {
            Some(&i) => ordered[i].1 += 1,
            None => {
                index.insert(rel.clone(), ordered.len());
                ordered.push((rel, 1));
            }
        }
    }
    ordered
}

/// The coherent projection of the initial graph: the initial graph itself
/// when some draw realizes it exactly; otherwise the draw-induced relation
/// minimizing [`graph_distance`], ties broken by higher posterior frequency
/// and then by lexicographically smaller ordered-edge set. The result
/// carries each statement's own probability and the joint probability of
/// the whole graph.
pub fn closest_coherent(
    initial: &ComparisonGraph,
    samples: &PosteriorSamples,
) -> Result<ComparisonGraph, GraphError> {
    if samples.draws.is_empty() {
        return Err(GraphError::EmptySamples);
    }
    if !initial.is_complete() {
        return Err(GraphError::Incomplete);
    }
    let pp = pairwise_probabilities(samples)?;
    let relations = distinct_relations(samples);

    if let Some((realized, _)) = relations.iter().find(|(rel, _)| initial.equals_relation(rel)) {
        let mut graph = ComparisonGraph::from_relation(realized, &pp);
        graph.joint_prob = Some(joint_probability(&graph, samples));
        return Ok(graph);
    }

    let best = relations
        .iter()
        .map(|(rel, count)| (graph_distance(initial, rel, &pp), rel, *count))
        .min_by(|(da, ra, ca), (db, rb, cb)| {
            da.partial_cmp(db)
                .expect("distances are finite")
                .then(cb.cmp(ca)) // higher frequency wins ties
                .then_with(|| ra.ordered_edges().cmp(&rb.ordered_edges()))
        })
        .map(|(_, rel, _)| rel)
        .expect("at least one draw");

    let mut graph = ComparisonGraph::from_relation(best, &pp);
    graph.joint_prob = Some(joint_probability(&graph, samples));
    Ok(graph)
}

/// Fraction of draws whose induced relation satisfies every represented
/// statement; 1 for an empty graph (a vacuous conjunction).
pub fn joint_probability(graph: &ComparisonGraph, samples: &PosteriorSamples) -> f64 {
    if graph.n_statements() == 0 {
        return 1.0;
    }
    let satisfied = samples
        .draws
        .iter()
        .filter(|draw| graph.satisfied_by(&induced_relation(draw, samples.model)))
        .count();
    satisfied as f64 / samples.draws.len() as f64
}

/// One trim level: the threshold and the graph of statements retained
/// above it (the graph carries its own joint probability).
#[derive(Debug, Clone, PartialEq)]
pub struct TrimStep {
    pub gamma: f64,
    pub graph: ComparisonGraph,
}

/// The trimmed sequence: strictly increasing thresholds, strictly nested
/// graphs, nondecreasing joint probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimSequence {
    pub steps: Vec<TrimStep>,
}

/// Trims the coherent projection at every informative threshold: each
/// pair's retained probability is the probability of the statement the
/// projection asserts; the threshold grid is 0 plus every distinct retained
/// probability except the largest (above which nothing remains — the empty
/// graph only ever appears as the selection fallback). Each level keeps the
/// pairs whose retained probability strictly exceeds the threshold.
pub fn trim_sequence(
    projection: &ComparisonGraph,
    pp: &PairwiseProb,
    samples: &PosteriorSamples,
) -> Result<TrimSequence, GraphError> {
    if samples.draws.is_empty() {
        return Err(GraphError::EmptySamples);
    }
    if !is_coherent(projection)? {
        return Err(GraphError::Incoherent);
    }
    let n = projection.n_treatments;

    let mut retained: Vec<(usize, usize, Comparison, f64)> = Vec::with_capacity(n_pairs(n));
    for j in 0..n {
        for k in (j + 1)..n {
            let kind = projection
                .statement(j, k)
                .expect("coherence check demands completeness")
                .kind;
            retained.push((j, k, kind, pp.statement_prob(j, k, kind)));
        }
    }

    let mut grid: Vec<f64> = retained.iter().map(|&(_, _, _, p)| p).collect();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("probabilities are finite"));
    grid.dedup();
    grid.pop(); // the largest value would retain nothing
    grid.insert(0, 0.0);
    grid.dedup();

    let mut steps: Vec<TrimStep> = Vec::new();
    for &gamma in &grid {
        let mut graph = ComparisonGraph::empty(n);
        for &(j, k, kind, p) in &retained {
            if p > gamma {
                graph.set_statement(j, k, kind, p);
            }
        }
        if let Some(last) = steps.last() {
            if last.graph.statements == graph.statements {
                continue;
            }
        }
        graph.joint_prob = Some(joint_probability(&graph, samples));
        graph.gamma = Some(gamma);
        steps.push(TrimStep { gamma, graph });
    }
    Ok(TrimSequence { steps })
}

/// The densest trim level whose joint probability meets the threshold,
/// together with its density; the empty graph (joint probability 1,
/// density 0) when no level qualifies.
pub fn select_subgraph(
    sequence: &TrimSequence,
    threshold: f64,
    n_treatments: usize,
) -> Result<(ComparisonGraph, f64), GraphError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(GraphError::InvalidThreshold { value: threshold });
    }
    for step in &sequence.steps {
        let joint = step.graph.joint_prob.unwrap_or(0.0);
        if joint >= threshold {
            let density = step.graph.density();
            return Ok((step.graph.clone(), density));
        }
    }
    let mut empty = ComparisonGraph::empty(n_treatments);
    empty.joint_prob = Some(1.0);
    Ok((empty, 0.0))
}

fn check_labels(graph: &ComparisonGraph, labels: &[String]) -> Result<(), GraphError> {
    if labels.len() != graph.n_treatments {
        return Err(GraphError::LabelCount {
            expected: graph.n_treatments,
            actual: labels.len(),
        });
    }
    Ok(())
}

fn dot_escape(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT rendering: equal pairs as one solid bidirectional edge, directional
/// pairs as a dashed arrow toward the treatment with the larger effect.
pub fn to_dot(graph: &ComparisonGraph, labels: &[String]) -> Result<String, GraphError> {
    check_labels(graph, labels)?;
    let mut out = String::from("digraph comparisons {\n");
    for label in labels {
        writeln!(out, "  \"{}\";", dot_escape(label)).expect("writing to a String cannot fail");
    }
    graph.for_each_statement(|j, k, s| {
        let (from, to, attrs) = match s.kind {
            Comparison::Eq => (j, k, "dir=both, style=solid"),
            Comparison::Lt => (j, k, "style=dashed"),
            Comparison::Gt => (k, j, "style=dashed"),
        };
        writeln!(
            out,
            "  \"{}\" -> \"{}\" [{attrs}, label=\"{:.2}\"];",
            dot_escape(&labels[from]),
            dot_escape(&labels[to]),
            s.prob
        )
        .expect("writing to a String cannot fail");
    });
    out.push_str("}\n");
    Ok(out)
}

/// JSON rendering: `{nodes, edges: [{from, to, kind: "eq"|"lt", prob}],
/// joint_prob, gamma}`; directional edges run from the smaller effect to
/// the larger, equal pairs appear once with kind `"eq"`.
pub fn to_json(graph: &ComparisonGraph, labels: &[String]) -> Result<serde_json::Value, GraphError> {
    check_labels(graph, labels)?;
    let mut edges = Vec::new();
    graph.for_each_statement(|j, k, s| {
        let (from, to, kind) = match s.kind {
            Comparison::Eq => (j, k, "eq"),
            Comparison::Lt => (j, k, "lt"),
            Comparison::Gt => (k, j, "lt"),
        };
        edges.push(serde_json::json!({
            "from": labels[from],
            "to": labels[to],
            "kind": kind,
            "prob": s.prob,
        }));
    });
    Ok(serde_json::json!({
        "nodes": labels,
        "edges": edges,
        "joint_prob": graph.joint_prob,
        "gamma": graph.gamma,
    }))
}
