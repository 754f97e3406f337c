//! Odds-ratio summaries: conditional credible intervals per treatment pair
//! and the full league table with CSV and Markdown renderings.
//!
//! For a pair (j, k) the per-draw odds ratio is exp(e_k − e_j) over the
//! effective comparison values, so draws in which the two treatments are
//! structurally tied contribute exactly 1. The credible interval branches
//! on which pairwise statement dominates: a tie yields the singleton {1}
//! with coverage equal to the tie probability, while a directional majority
//! yields an equal-tailed interval whose quantile levels are scaled by that
//! majority's probability. Quantiles are interpolated order statistics over
//! the whole odds-ratio pool.

use std::fmt::Write as _;

use crate::graph::{pairwise_probabilities, Comparison, PairwiseProb};
use crate::samplers::PosteriorSamples;

/// Errors from interval construction and table assembly.
#[derive(Debug, thiserror::Error)]
pub enum LeagueError {
    #[error("no posterior draws to summarize")]
    EmptySamples,

    #[error("invalid treatment pair ({j}, {k}) for {n} treatments")]
    InvalidPair { j: usize, k: usize, n: usize },

    #[error("alpha must lie in (0, 1), got {alpha}")]
    InvalidAlpha { alpha: f64 },

    #[error("expected {expected} treatment names, got {actual}")]
    NameCount { expected: usize, actual: usize },
}

/// An interval for an odds ratio: the singleton {1} or a closed range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrInterval {
    /// The singleton {1}: the pair is declared tied.
    Unit,
    /// A closed interval [lo, hi].
    Range { lo: f64, hi: f64 },
}

impl OrInterval {
    /// Whether a value lies inside the interval.
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            OrInterval::Unit => x == 1.0,
            OrInterval::Range { lo, hi } => lo <= x && x <= hi,
        }
    }
}

/// A conditional credible interval for the odds ratio of one ordered pair:
/// `pair` = (base, comparator), `point` = posterior mean of
/// exp(e_comparator − e_base).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCI {
    pub pair: (usize, usize),
    /// Posterior mean odds ratio over all draws.
    pub point: f64,
    pub interval: OrInterval,
    /// The dominant statement the interval conditions on: `Eq` for the
    /// singleton, `Lt`/`Gt` for directional intervals (read from the base's
    /// side: `Lt` means the base's effect is below the comparator's).
    pub kind: Comparison,
    /// Fraction of odds-ratio draws inside the interval.
    pub coverage: f64,
    /// Posterior probability the pair is structurally tied.
    pub p_eq: f64,
}

/// Per-draw odds ratios exp(e_k − e_j) over the effective comparison
/// values, so structurally tied draws give exactly 1.
pub fn odds_ratio_samples(
    samples: &PosteriorSamples,
    j: usize,
    k: usize,
) -> Result<Vec<f64>, LeagueError> {
    let n = samples.n_treatments;
    if j == k || j >= n || k >= n {
        return Err(LeagueError::InvalidPair { j, k, n });
    }
    Ok(samples
        .draws
        .iter()
        .map(|draw| {
            let e = draw.comparison_values();
            (e[k] - e[j]).exp()
        })
        .collect())
}

/// Interpolated order statistic: h = (n−1)q, linear between the two
/// adjacent sorted values.
fn type7_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let q = q.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// (p_eq, p_lt, p_gt) for the ordered pair (j, k), read from j's side.
fn ordered_probs(pp: &PairwiseProb, j: usize, k: usize) -> (f64, f64, f64) {
    if j < k {
        pp.probabilities(j, k)
    } else {
        let (eq, lt, gt) = pp.probabilities(k, j);
        (eq, gt, lt)
    }
}

fn validate_pair_and_alpha(
    samples: &PosteriorSamples,
    j: usize,
    k: usize,
    alpha: f64,
) -> Result<(), LeagueError> {
    let n = samples.n_treatments;
    if j == k || j >= n || k >= n {
        return Err(LeagueError::InvalidPair { j, k, n });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LeagueError::InvalidAlpha { alpha });
    }
    if samples.draws.is_empty() {
        return Err(LeagueError::EmptySamples);
    }
    Ok(())
}

/// Shared interval construction once the pairwise probabilities and the
/// odds-ratio pool are at hand. The pool is sorted in place.
fn conditional_ci_from_parts(
    pp: &PairwiseProb,
    mut pool: Vec<f64>,
    j: usize,
    k: usize,
    alpha: f64,
) -> ConditionalCI {
    let point = pool.iter().sum::<f64>() / pool.len() as f64;
    let (p_eq, p_lt, p_gt) = ordered_probs(pp, j, k);

    // Dominant statement with the precedence Eq > Lt > Gt on exact ties
    // (probabilities share one denominator, so ties compare exactly).
    let kind = if p_eq >= p_lt && p_eq >= p_gt {
        Comparison::Eq
    } else if p_lt >= p_gt {
        Comparison::Lt
    } else {
        Comparison::Gt
    };

    pool.sort_by(|a, b| a.partial_cmp(b).expect("odds ratios are finite"));
    let (interval, coverage) = match kind {
        Comparison::Eq => {
            let inside = pool.iter().filter(|&&o| o == 1.0).count();
            (OrInterval::Unit, inside as f64 / pool.len() as f64)
        }
        Comparison::Lt => {
            let lo = type7_quantile(&pool, (alpha / 2.0) * p_lt);
            let hi = type7_quantile(&pool, (1.0 - alpha / 2.0) * p_lt);
            range_with_coverage(&pool, lo, hi)
        }
        Comparison::Gt => {
            let lo = type7_quantile(&pool, 1.0 - (1.0 - alpha / 2.0) * p_gt);
            let hi = type7_quantile(&pool, 1.0 - (alpha / 2.0) * p_gt);
            range_with_coverage(&pool, lo, hi)
        }
    };

    ConditionalCI { pair: (j, k), point, interval, kind, coverage, p_eq }
}

fn range_with_coverage(sorted_pool: &[f64], lo: f64, hi: f64) -> (OrInterval, f64) {
    let inside = sorted_pool.iter().filter(|&&o| lo <= o && o <= hi).count();
    (OrInterval::Range { lo, hi }, inside as f64 / sorted_pool.len() as f64)
}

/// The conditional credible interval for the ordered pair (j, k) at level
/// 1−alpha: the singleton {1} when the tie statement dominates (coverage =
/// tie probability), otherwise an equal-tailed interval whose levels are
/// scaled by the dominant direction's probability, with coverage recounted
/// over the pool.
pub fn conditional_credible_interval(
    samples: &PosteriorSamples,
    j: usize,
    k: usize,
    alpha: f64,
) -> Result<ConditionalCI, LeagueError> {
    validate_pair_and_alpha(samples, j, k, alpha)?;
    let pp = pairwise_probabilities(samples).map_err(|_| LeagueError::EmptySamples)?;
    let pool = odds_ratio_samples(samples, j, k)?;
    Ok(conditional_ci_from_parts(&pp, pool, j, k, alpha))
}

/// A plain equal-tailed interval at level 1−alpha with nominal coverage —
/// the league-table rule for the independent-effects model, whose tie
/// probability is identically zero.
fn plain_ci_from_parts(
    pp: &PairwiseProb,
    mut pool: Vec<f64>,
    j: usize,
    k: usize,
    alpha: f64,
) -> ConditionalCI {
    let point = pool.iter().sum::<f64>() / pool.len() as f64;
    let (_, p_lt, p_gt) = ordered_probs(pp, j, k);
    let kind = if p_lt >= p_gt { Comparison::Lt } else { Comparison::Gt };
    pool.sort_by(|a, b| a.partial_cmp(b).expect("odds ratios are finite"));
    let lo = type7_quantile(&pool, alpha / 2.0);
    let hi = type7_quantile(&pool, 1.0 - alpha / 2.0);
    ConditionalCI {
        pair: (j, k),
        point,
        interval: OrInterval::Range { lo, hi },
        kind,
        coverage: 1.0 - alpha,
        p_eq: 0.0,
    }
}

/// The exact reciprocal of a cell, for the mirrored pair: 1/point,
/// endpoints swapped and inverted, direction flipped, tie probability and
/// coverage unchanged.
fn reciprocal(ci: &ConditionalCI) -> ConditionalCI {
    ConditionalCI {
        pair: (ci.pair.1, ci.pair.0),
        point: 1.0 / ci.point,
        interval: match ci.interval {
            OrInterval::Unit => OrInterval::Unit,
            OrInterval::Range { lo, hi } => OrInterval::Range { lo: 1.0 / hi, hi: 1.0 / lo },
        },
        kind: match ci.kind {
            Comparison::Eq => Comparison::Eq,
            Comparison::Lt => Comparison::Gt,
            Comparison::Gt => Comparison::Lt,
        },
        coverage: ci.coverage,
        p_eq: ci.p_eq,
    }
}

/// Which odds ratio an off-diagonal cell reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellConvention {
    /// Cell (row, col) reports exp(e_col − e_row): the column treatment
    /// relative to the row treatment.
    RowToColumn,
    /// Cell (row, col) reports exp(e_row − e_col).
    ColumnToRow,
}

/// One off-diagonal league cell: the interval and its display string.
#[derive(Debug, Clone, PartialEq)]
pub struct LeagueCell {
    pub ci: ConditionalCI,
    pub formatted: String,
}

/// The K×K league table: diagonal cells are treatment names, off-diagonal
/// cells hold conditional credible intervals. Mirror cells are exact
/// reciprocals of one another.
#[derive(Debug, Clone, PartialEq)]
pub struct LeagueTable {
    pub names: Vec<String>,
    pub alpha: f64,
    pub convention: CellConvention,
    cells: Vec<Option<LeagueCell>>,
}

/// Display string for one cell: odds ratios with 2 decimals, probabilities
/// as percentages with 2 decimals.
fn format_cell(ci: &ConditionalCI) -> String {
    match ci.interval {
        OrInterval::Unit => format!(
            "{:.2} {{1}} (eq {:.2}%, cov {:.2}%)",
            ci.point,
            ci.p_eq * 100.0,
            ci.coverage * 100.0
        ),
        OrInterval::Range { lo, hi } => format!(
            "{:.2} [{:.2}, {:.2}] (eq {:.2}%, cov {:.2}%)",
            ci.point,
            lo,
            hi,
            ci.p_eq * 100.0,
            ci.coverage * 100.0
        ),
    }
}

impl LeagueTable {
    pub fn n_treatments(&self) -> usize {
        self.names.len()
    }

    /// The cell at (row, col); `None` on the diagonal.
    pub fn cell(&self, row: usize, col: usize) -> Option<&LeagueCell> {
        self.cells[row * self.names.len() + col].as_ref()
    }
}

/// Builds the league table: every unordered pair is summarized once — by
/// the conditional rule, or by a plain equal-tailed interval under the
/// independent-effects model — and the mirror cell is its exact reciprocal.
pub fn league_table(
    samples: &PosteriorSamples,
    alpha: f64,
    names: &[String],
    convention: CellConvention,
) -> Result<LeagueTable, LeagueError> {
    let n = samples.n_treatments;
    if names.len() != n {
        return Err(LeagueError::NameCount { expected: n, actual: names.len() });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LeagueError::InvalidAlpha { alpha });
    }
    if samples.draws.is_empty() {
        return Err(LeagueError::EmptySamples);
    }
    let pp = pairwise_probabilities(samples).map_err(|_| LeagueError::EmptySamples)?;
    let plain = !samples.model.is_clustered();

    let mut cells: Vec<Option<LeagueCell>> = vec![None; n * n];
    for j in 0..n {
        for k in (j + 1)..n {
            let pool = odds_ratio_samples(samples, j, k)?;
            let forward = if plain {
                plain_ci_from_parts(&pp, pool, j, k, alpha)
            } else {
                conditional_ci_from_parts(&pp, pool, j, k, alpha)
            };
            let backward = reciprocal(&forward);
            let (fwd_row, fwd_col) = match convention {
                CellConvention::RowToColumn => (j, k),
                CellConvention::ColumnToRow => (k, j),
            };
            cells[fwd_row * n + fwd_col] =
                Some(LeagueCell { formatted: format_cell(&forward), ci: forward });
            cells[fwd_col * n + fwd_row] =
                Some(LeagueCell { formatted: format_cell(&backward), ci: backward });
        }
    }
    Ok(LeagueTable { names: names.to_vec(), alpha, convention, cells })
}

/// Machine-readable rendering: one CSV row per off-diagonal cell with
/// 2-decimal odds ratios and percentage-scaled probabilities.
pub fn league_to_csv(table: &LeagueTable) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["row", "col", "or", "lo", "hi", "kind", "p_eq_pct", "coverage_pct"])
        .expect("writing to a Vec cannot fail");
    let n = table.names.len();
    for row in 0..n {
        for col in 0..n {
            let Some(cell) = table.cell(row, col) else { continue };
            let (lo, hi) = match cell.ci.interval {
                OrInterval::Unit => (1.0, 1.0),
                OrInterval::Range { lo, hi } => (lo, hi),
            };
            let kind = match cell.ci.kind {
                Comparison::Eq => "eq",
                Comparison::Lt => "lt",
                Comparison::Gt => "gt",
            };
            writer
                .write_record([
                    table.names[row].as_str(),
                    table.names[col].as_str(),
                    &format!("{:.2}", cell.ci.point),
                    &format!("{lo:.2}"),
                    &format!("{hi:.2}"),
                    kind,
                    &format!("{:.2}", cell.ci.p_eq * 100.0),
                    &format!("{:.2}", cell.ci.coverage * 100.0),
                ])
                .expect("writing to a Vec cannot fail");
        }
    }
    String::from_utf8(writer.into_inner().expect("no flush failure on a Vec"))
        .expect("CSV output is UTF-8")
}

/// Human-readable rendering: an aligned Markdown grid with treatment names
/// on the diagonal.
pub fn league_to_markdown(table: &LeagueTable) -> String {
    let n = table.names.len();
    let grid: Vec<Vec<String>> = (0..n)
        .map(|row| {
            (0..n)
                .map(|col| {
                    if row == col {
                        format!("**{}**", table.names[row])
                    } else {
                        table.cell(row, col).expect("off-diagonal cells are filled").formatted.clone()
                    }
                })
                .collect()
        })
        .collect();

    let widths: Vec<usize> = (0..n)
        .map(|col| grid.iter().map(|row| row[col].chars().count()).max().unwrap_or(0))
        .collect();

    let mut out = String::new();
    for (i, row) in grid.iter().enumerate() {
        out.push('|');
        for (col, cell) in row.iter().enumerate() {
            let pad = widths[col] - cell.chars().count();
            write!(out, " {}{} |", cell, " ".repeat(pad)).expect("writing to a String cannot fail");
        }
        out.push('\n');
        if i == 0 {
            out.push('|');
            for width in &widths {
                write!(out, "{}|", "-".repeat(width + 2)).expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
    }
    out
}
