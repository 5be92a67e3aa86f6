//! Pairwise records and Bradley–Terry ratings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::runner::EpisodeResult;

pub const ANCHOR: f64 = 1000.0;
/// Rating points per factor of ten in strength.
pub const SCALE: f64 = 400.0;
/// Stop when no strength moves by more than this relative amount.
pub const TOLERANCE: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EloError {
    #[error("policy `{0}` has no comparisons")]
    DegenerateRecord(String),
    #[error("need at least two policies")]
    TooFewPolicies,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    /// Wins of the first policy of the pair.
    pub wins: u32,
    pub losses: u32,
    pub draws: u32,
}

/// Records keyed by `(a, b)` with `a < b`.
pub type Records = BTreeMap<(String, String), PairRecord>;

/// Every pair of policies present in an episode is compared on game score.
pub fn pairwise_records(results: &[EpisodeResult]) -> Records {
    let mut out = Records::new();
    for r in results {
        let mut named: Vec<(&String, f64)> = r.policies.iter().zip(r.scores.iter().copied()).collect();
        named.sort_by(|a, b| a.0.cmp(b.0));
        named.dedup_by(|a, b| a.0 == b.0);
        for i in 0..named.len() {
            for j in i + 1..named.len() {
                let rec = out.entry((named[i].0.clone(), named[j].0.clone())).or_default();
                let (a, b) = (named[i].1, named[j].1);
                if a > b {
                    rec.wins += 1;
                } else if a < b {
                    rec.losses += 1;
                } else {
                    rec.draws += 1;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EloTable {
    pub ratings: BTreeMap<String, f64>,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Whether a half-draw prior was added because some policy never won
    /// or never lost.
    pub regularized: bool,
}

/// Bradley–Terry strengths fit by minorization–maximization, draws counted
/// as half a win each way, mapped to `ANCHOR + SCALE * log10(s / geomean)`.
pub fn elo_ratings(records: &Records) -> Result<EloTable, EloError> {
    let mut names: Vec<String> = records
        .keys()
        .flat_map(|(a, b)| [a.clone(), b.clone()])
        .collect();
    names.sort();
    names.dedup();
    if names.len() < 2 {
        return Err(EloError::TooFewPolicies);
    }
    let k = names.len();
    let idx = |n: &String| names.binary_search(n).expect("known name");
    // wins[i][j]: (fractional) wins of i over j.
    let mut wins = vec![vec![0.0f64; k]; k];
    for ((a, b), r) in records {
        let (i, j) = (idx(a), idx(b));
        let half = r.draws as f64 / 2.0;
        wins[i][j] += r.wins as f64 + half;
        wins[j][i] += r.losses as f64 + half;
    }
    for (i, name) in names.iter().enumerate() {
        let games: f64 = (0..k).map(|j| wins[i][j] + wins[j][i]).sum();
        if games == 0.0 {
            return Err(EloError::DegenerateRecord(name.clone()));
        }
    }
    let total_wins = |w: &Vec<Vec<f64>>, i: usize| -> f64 { w[i].iter().sum() };
    let total_losses = |w: &Vec<Vec<f64>>, i: usize| -> f64 { (0..k).map(|j| w[j][i]).sum() };
    let regularized = (0..k).any(|i| total_wins(&wins, i) == 0.0 || total_losses(&wins, i) == 0.0);
    if regularized {
        for i in 0..k {
            for j in 0..k {
                if i != j && wins[i][j] + wins[j][i] > 0.0 {
                    wins[i][j] += 0.5;
                }
            }
        }
    }
    let mut s = vec![1.0f64; k];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut next = vec![0.0; k];
        for i in 0..k {
            let w: f64 = total_wins(&wins, i);
            let denom: f64 = (0..k)
                .filter(|j| *j != i)
                .map(|j| (wins[i][j] + wins[j][i]) / (s[i] + s[j]))
                .sum();
            next[i] = w / denom;
        }
        let g = geomean(&next);
        for x in next.iter_mut() {
            *x /= g;
        }
        let change = next
            .iter()
            .zip(&s)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        s = next;
        if change < TOLERANCE {
            break;
        }
    }
    let mut ll = 0.0;
    for i in 0..k {
        for j in 0..k {
            if wins[i][j] > 0.0 {
                ll += wins[i][j] * (s[i] / (s[i] + s[j])).ln();
            }
        }
    }
    let g = geomean(&s);
    let ratings = names
        .into_iter()
        .zip(&s)
        .map(|(n, v)| (n, ANCHOR + SCALE * (v / g).log10()))
        .collect();
    Ok(EloTable {
        ratings,
        iterations,
        log_likelihood: ll,
        regularized,
    })
}

fn geomean(xs: &[f64]) -> f64 {
    (xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp()
}
