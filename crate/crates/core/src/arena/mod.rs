//! Episode runner, scripted policies, replays, ratings and reports.

pub mod elo;
pub mod policy;
pub mod replay;
pub mod report;
pub mod runner;

pub use elo::{elo_ratings, pairwise_records, EloError, EloTable, PairRecord, Records};
pub use policy::{by_name, EpisodeInfo, Policy, POLICY_NAMES};
pub use replay::{Replay, ReplayError};
pub use report::{benchmark, task_completion_report, BenchReport, PolicyReport};
pub use runner::{game_scores, run_episode, run_many, EpisodeResult, EpisodeRun, RunStats, WINNER_BONUS};

use std::path::Path;

/// Writes one JSON record per episode into `dir`.
pub fn write_results(dir: &Path, results: &[EpisodeResult]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for r in results {
        let name = format!("{}-{:06}.json", r.kind, r.seed);
        let text = serde_json::to_string_pretty(r).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}

/// Reads every `*.json` episode record in `dir`, sorted by file name.
pub fn read_results(dir: &Path) -> std::io::Result<Vec<EpisodeResult>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p)?;
            serde_json::from_str(&text).map_err(std::io::Error::other)
        })
        .collect()
}
