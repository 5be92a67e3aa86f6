//! Task-completion reports and the throughput benchmark.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::policy::Policy;
use super::runner::{run_many, EpisodeResult};
use crate::config::GameConfig;
use crate::env::{EnvError, PhaseTimes};
use crate::minigame::MinigameKind;
use crate::tasks::{evaluation_suite, normalized_score};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: String,
    pub agents: usize,
    pub mean_lifespan: f64,
    /// Fraction of assigned tasks reaching full progress.
    pub completion_rate: f64,
    /// Weighted suite score; suite tasks nobody was assigned count as 0.
    pub normalized_score: f64,
}

/// Aggregates per policy over every agent in `results`.
pub fn task_completion_report(results: &[EpisodeResult]) -> Vec<PolicyReport> {
    let suite = evaluation_suite();
    let canon: Vec<String> = suite.iter().map(|t| t.predicate.canonical()).collect();
    // policy -> (lifespans, progress per suite task, completions)
    let mut acc: BTreeMap<String, (Vec<u32>, Vec<Vec<f64>>, Vec<bool>)> = BTreeMap::new();
    for r in results {
        for (i, p) in r.agent_policy.iter().enumerate() {
            let e = acc
                .entry(r.policies[*p].clone())
                .or_insert_with(|| (Vec::new(), vec![Vec::new(); suite.len()], Vec::new()));
            e.0.push(r.lifespans[i]);
            e.2.push(r.max_progress[i] >= 1.0);
            if let Some(k) = canon.iter().position(|c| *c == r.tasks[i]) {
                e.1[k].push(r.max_progress[i]);
            }
        }
    }
    acc.into_iter()
        .map(|(policy, (life, per_task, done))| {
            let per: Vec<_> = suite
                .iter()
                .zip(&per_task)
                .map(|(t, v)| {
                    let m = if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
                    (t.category, m)
                })
                .collect();
            PolicyReport {
                agents: life.len(),
                mean_lifespan: life.iter().map(|x| *x as f64).sum::<f64>() / life.len().max(1) as f64,
                completion_rate: done.iter().filter(|d| **d).count() as f64 / done.len().max(1) as f64,
                normalized_score: normalized_score(&per).expect("suite covers every category"),
                policy,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub profile: String,
    pub kind: MinigameKind,
    pub episodes: usize,
    pub workers: usize,
    pub agent_steps: u64,
    /// Simulation plus codec seconds, summed over episodes.
    pub engine_seconds: f64,
    /// Agent steps per engine second.
    pub throughput: f64,
    /// Agent steps per wall second across all workers.
    pub wall_throughput: f64,
    pub decode_seconds: f64,
    pub simulate_seconds: f64,
    pub score_seconds: f64,
    pub observe_seconds: f64,
    pub policy_seconds: f64,
    pub wall_seconds: f64,
}

/// Runs `episodes` seeded episodes and reports agent steps per second of
/// engine time (policy time excluded).
pub fn benchmark(
    cfg: &GameConfig,
    kind: MinigameKind,
    episodes: usize,
    policies: &[&dyn Policy],
    workers: usize,
) -> Result<BenchReport, EnvError> {
    let mut report = BenchReport {
        profile: cfg.profile().name().to_string(),
        kind,
        episodes,
        workers,
        agent_steps: 0,
        engine_seconds: 0.0,
        throughput: 0.0,
        wall_throughput: 0.0,
        decode_seconds: 0.0,
        simulate_seconds: 0.0,
        score_seconds: 0.0,
        observe_seconds: 0.0,
        policy_seconds: 0.0,
        wall_seconds: 0.0,
    };
    if episodes == 0 || cfg.int("PLAYER_N") <= 0 || policies.is_empty() {
        return Ok(report);
    }
    let seeds: Vec<u64> = (0..episodes as u64).collect();
    let start = Instant::now();
    let runs = run_many(cfg, kind, policies, &seeds, workers)?;
    let wall = start.elapsed().as_secs_f64();
    let mut phases = PhaseTimes::default();
    let mut policy = 0.0;
    for r in &runs {
        phases.add(&r.stats.phases);
        policy += r.stats.policy.as_secs_f64();
    }
    let engine = phases.total().as_secs_f64();
    report.agent_steps = phases.agent_steps;
    report.engine_seconds = engine;
    report.throughput = if engine > 0.0 { phases.agent_steps as f64 / engine } else { 0.0 };
    report.wall_throughput = if wall > 0.0 { phases.agent_steps as f64 / wall } else { 0.0 };
    report.decode_seconds = phases.decode.as_secs_f64();
    report.simulate_seconds = phases.simulate.as_secs_f64();
    report.score_seconds = phases.score.as_secs_f64();
    report.observe_seconds = phases.observe.as_secs_f64();
    report.policy_seconds = policy;
    report.wall_seconds = wall;
    Ok(report)
}
