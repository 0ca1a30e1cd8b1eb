use std::collections::BTreeMap;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

pub const RECALL_KS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    I2t,
    T2i,
    T2t,
    I2i,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub direction: Direction,
    pub lang: String,
    /// Fraction of queries whose best gold item ranks within K.
    pub r_at: BTreeMap<usize, f64>,
    pub mean_rank: f64,
    /// Mean rank again, under the column name used by caption benchmarks.
    pub avg_r: f64,
    pub n_queries: usize,
}

impl RetrievalReport {
    pub fn recall(&self, k: usize) -> f64 {
        self.r_at.get(&k).copied().unwrap_or(f64::NAN)
    }
}

/// 1-based rank of the best gold candidate for every query.
///
/// Candidates are ordered by descending similarity with ties broken by
/// ascending candidate index.
pub fn rank_all<T: Scalar>(queries: ArrayView2<T>, candidates: ArrayView2<T>, gold: &[Vec<usize>]) -> Result<Vec<usize>> {
    let m = candidates.nrows();
    if m == 0 {
        return Err(Error::invalid("empty candidate set"));
    }
    if gold.len() != queries.nrows() {
        return Err(Error::invalid(format!(
            "{} gold sets for {} queries",
            gold.len(),
            queries.nrows()
        )));
    }
    let sims = queries.dot(&candidates.t());
    gold.iter()
        .enumerate()
        .map(|(q, golds)| {
            if golds.is_empty() {
                return Err(Error::invalid(format!("query {q} has no gold candidate")));
            }
            let row = sims.row(q);
            let mut best = usize::MAX;
            for &g in golds {
                if g >= m {
                    return Err(Error::invalid(format!("gold index {g} out of {m} candidates")));
                }
                let sg = row[g];
                let ahead = row
                    .iter()
                    .enumerate()
                    .filter(|&(c, &s)| s > sg || (s == sg && c < g))
                    .count();
                best = best.min(ahead + 1);
            }
            Ok(best)
        })
        .collect()
}

pub fn recall_report(ranks: &[usize], direction: Direction, lang: &str) -> RetrievalReport {
    let n = ranks.len();
    let r_at = RECALL_KS
        .iter()
        .map(|&k| {
            let hits = ranks.iter().filter(|&&r| r <= k).count();
            (k, if n == 0 { 0.0 } else { hits as f64 / n as f64 })
        })
        .collect();
    let mean_rank = if n == 0 {
        f64::NAN
    } else {
        ranks.iter().map(|&r| r as f64).sum::<f64>() / n as f64
    };
    RetrievalReport {
        direction,
        lang: lang.to_string(),
        r_at,
        mean_rank,
        avg_r: mean_rank,
        n_queries: n,
    }
}

/// Mean of R@1, R@5, R@10 over both retrieval directions.
pub fn mean_recall(a: &RetrievalReport, b: &RetrievalReport) -> f64 {
    let sum: f64 = RECALL_KS.iter().map(|&k| a.recall(k) + b.recall(k)).sum();
    sum / (2 * RECALL_KS.len()) as f64
}
