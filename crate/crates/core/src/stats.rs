//! Two-sided Wilcoxon rank-sum (Mann-Whitney) test.
//!
//! Ties receive mid-ranks. Small samples use the permutation distribution of
//! the rank sum conditional on the observed tie pattern; larger samples use
//! the tie-corrected normal approximation with a 0.5 continuity correction.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::hwdata::SESSIONS;

/// Exact distribution is used when `n_a + n_b` is at most this.
pub const DEFAULT_EXACT_THRESHOLD: usize = 25;

/// Session pairs in the column order used by the pairwise table.
pub const SESSION_PAIRS: [(u8, u8); 10] = [
    (1, 2),
    (1, 3),
    (1, 4),
    (1, 5),
    (2, 3),
    (2, 4),
    (2, 5),
    (3, 4),
    (3, 5),
    (4, 5),
];

pub fn pair_label(a: u8, b: u8) -> String {
    format!("S{a}-S{b}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    NormalApprox,
}

/// Statistic and p-value of one rank-sum comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumOutcome {
    /// Sum of the pooled ranks of sample A.
    pub rank_sum: f64,
    pub p_value: f64,
    pub method: Method,
    pub n_a: usize,
    pub n_b: usize,
}

/// One session-pair comparison for one task. `session_a < session_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub task_id: u8,
    pub session_a: u8,
    pub session_b: u8,
    pub rank_sum: f64,
    pub p_value: f64,
    pub method: Method,
    pub n_a: usize,
    pub n_b: usize,
}

impl TestResult {
    pub fn pair_label(&self) -> String {
        pair_label(self.session_a, self.session_b)
    }
}

fn sort_index(values: &[f64]) -> Result<Vec<usize>, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    Ok(order)
}

/// Ranks (1-based) of each value; tied values share the mean of the positions
/// they occupy.
pub fn midranks(values: &[f64]) -> Result<Vec<f64>, StatsError> {
    Ok(midranks_with_ties(values)?.0)
}

/// Mid-ranks plus the size of every tie group.
fn midranks_with_ties(values: &[f64]) -> Result<(Vec<f64>, Vec<usize>), StatsError> {
    let order = sort_index(values)?;
    let mut ranks = vec![0.0; values.len()];
    let mut groups = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        // -0.0 and 0.0 must tie, so compare with == rather than total_cmp.
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        groups.push(end - start);
        start = end;
    }
    Ok((ranks, groups))
}

struct Pooled {
    ranks: Vec<f64>,
    tie_groups: Vec<usize>,
    n_a: usize,
    n_b: usize,
}

impl Pooled {
    fn new(a: &[f64], b: &[f64]) -> Result<Self, StatsError> {
        if a.is_empty() || b.is_empty() {
            return Err(StatsError::EmptySample);
        }
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let (ranks, tie_groups) = midranks_with_ties(&pooled)?;
        Ok(Self {
            ranks,
            tie_groups,
            n_a: a.len(),
            n_b: b.len(),
        })
    }

    fn rank_sum(&self) -> f64 {
        self.ranks[..self.n_a].iter().sum()
    }
}

/// Exact null distribution of the sum of `k` ranks drawn without replacement
/// from `doubled` (mid-ranks times two, so every entry is an integer).
///
/// Entry `s` counts the subsets whose doubled sum equals `s`.
fn subset_sum_counts(doubled: &[usize], k: usize) -> Vec<f64> {
    let max_sum: usize = doubled.iter().sum();
    // counts[j][s]: subsets of size j with doubled sum s.
    let mut counts = vec![vec![0.0f64; max_sum + 1]; k + 1];
    counts[0][0] = 1.0;
    for (seen, &r) in doubled.iter().enumerate() {
        for j in (1..=k.min(seen + 1)).rev() {
            let (lower, upper) = counts.split_at_mut(j);
            let prev = &lower[j - 1];
            let cur = &mut upper[0];
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    counts.swap_remove(k)
}

/// Two-sided rank-sum test using the exact permutation distribution.
///
/// `p = min(1, 2 * min(P(W <= w), P(W >= w)))`.
pub fn ranksum_exact(a: &[f64], b: &[f64]) -> Result<RankSumOutcome, StatsError> {
    let pooled = Pooled::new(a, b)?;
    let doubled: Vec<usize> = pooled.ranks.iter().map(|r| (r * 2.0) as usize).collect();
    let observed: usize = doubled[..pooled.n_a].iter().sum();
    let counts = subset_sum_counts(&doubled, pooled.n_a);

    let total: f64 = counts.iter().sum();
    let lower: f64 = counts[..=observed].iter().sum();
    let upper: f64 = counts[observed..].iter().sum();
    let p_value = (2.0 * lower.min(upper) / total).min(1.0);

    Ok(RankSumOutcome {
        rank_sum: pooled.rank_sum(),
        p_value,
        method: Method::Exact,
        n_a: pooled.n_a,
        n_b: pooled.n_b,
    })
}

/// Two-sided rank-sum test using the normal approximation.
///
/// `sigma^2 = n_a n_b / 12 * ((N + 1) - sum(t^3 - t) / (N (N - 1)))` over tie
/// groups of size `t`, and the statistic is moved 0.5 toward its mean before
/// standardising. When every value is tied the variance vanishes and `p = 1`.
pub fn ranksum_normal(a: &[f64], b: &[f64]) -> Result<RankSumOutcome, StatsError> {
    let pooled = Pooled::new(a, b)?;
    let (n_a, n_b) = (pooled.n_a as f64, pooled.n_b as f64);
    let n = n_a + n_b;
    let w = pooled.rank_sum();

    let tie_term: f64 = pooled
        .tie_groups
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let variance = n_a * n_b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));

    let p_value = if pooled.tie_groups.len() == 1 || variance <= 0.0 {
        1.0
    } else {
        let mean = n_a * (n + 1.0) / 2.0;
        let deviation = w - mean;
        let corrected = (deviation.abs() - 0.5).max(0.0);
        let z = corrected / variance.sqrt();
        // 2 * Phi(-|z|)
        erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
    };

    Ok(RankSumOutcome {
        rank_sum: w,
        p_value,
        method: Method::NormalApprox,
        n_a: pooled.n_a,
        n_b: pooled.n_b,
    })
}

pub fn ranksum(a: &[f64], b: &[f64]) -> Result<RankSumOutcome, StatsError> {
    ranksum_with_threshold(a, b, DEFAULT_EXACT_THRESHOLD)
}

/// Exact when `a.len() + b.len() <= exact_threshold`, normal otherwise.
pub fn ranksum_with_threshold(
    a: &[f64],
    b: &[f64],
    exact_threshold: usize,
) -> Result<RankSumOutcome, StatsError> {
    if a.len() + b.len() <= exact_threshold {
        ranksum_exact(a, b)
    } else {
        ranksum_normal(a, b)
    }
}

/// Per-subject feature values keyed by (task, session).
pub type SessionValues = BTreeMap<(u8, u8), Vec<f64>>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairwiseTests {
    /// Task-major, pairs in [`SESSION_PAIRS`] order.
    pub results: Vec<TestResult>,
    pub warnings: Vec<String>,
}

/// Compares every pair of sessions within each task present in `values`.
///
/// A pair is skipped, with a warning, when either session has no values.
pub fn pairwise_session_tests(
    values: &SessionValues,
    exact_threshold: usize,
) -> Result<PairwiseTests, StatsError> {
    let tasks: BTreeSet<u8> = values.keys().map(|&(task, _)| task).collect();
    let mut out = PairwiseTests::default();
    for task in tasks {
        let cell = |session: u8| values.get(&(task, session)).filter(|v| !v.is_empty());
        for &(sa, sb) in &SESSION_PAIRS {
            debug_assert!(sb <= SESSIONS);
            match (cell(sa), cell(sb)) {
                (Some(a), Some(b)) => {
                    let r = ranksum_with_threshold(a, b, exact_threshold)?;
                    out.results.push(TestResult {
                        task_id: task,
                        session_a: sa,
                        session_b: sb,
                        rank_sum: r.rank_sum,
                        p_value: r.p_value,
                        method: r.method,
                        n_a: r.n_a,
                        n_b: r.n_b,
                    });
                }
                (a, _) => {
                    let missing = if a.is_none() { sa } else { sb };
                    out.warnings.push(format!(
                        "task {task}: {} skipped, session {missing} has no values",
                        pair_label(sa, sb)
                    ));
                }
            }
        }
    }
    Ok(out)
}
