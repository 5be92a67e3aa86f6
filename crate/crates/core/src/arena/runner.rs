//! Episode runner and per-episode results.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policy::{EpisodeInfo, Policy};
use super::replay::{Replay, ReplayHeader, TickRecord};
use crate::config::GameConfig;
use crate::entity::EntityId;
use crate::env::{Env, EnvError, PhaseTimes};
use crate::events::LogRecord;
use crate::minigame::{EpisodeSetup, GamePack, MinigameKind, Referee};
use crate::tasks::{FactsLedger, Winner};
use crate::world::Pos;

/// Bonus added to the winning policy's game score.
pub const WINNER_BONUS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub kind: MinigameKind,
    pub seed: u64,
    pub policies: Vec<String>,
    /// Policy index of each agent.
    pub agent_policy: Vec<usize>,
    pub winner: Option<Winner>,
    pub winner_policy: Option<usize>,
    /// Game score of each policy, by index into `policies`.
    pub scores: Vec<f64>,
    pub lifespans: Vec<u32>,
    /// Max progress of each agent's primary task.
    pub max_progress: Vec<f64>,
    /// Canonical primary task of each agent.
    pub tasks: Vec<String>,
    /// Distinct (kind, item, level) events per agent.
    pub unique_events: Vec<u32>,
    /// Best `1 - distance / radius` each agent reached.
    pub center_progress: Vec<f64>,
    pub ticks: u32,
    pub digest: String,
}

impl EpisodeResult {
    pub fn score_of(&self, policy: &str) -> Option<f64> {
        self.policies.iter().position(|p| p == policy).map(|i| self.scores[i])
    }
}

/// Timing of one run, kept apart from the result so results compare exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunStats {
    pub wall: Duration,
    pub policy: Duration,
    pub phases: PhaseTimes,
}

/// Maps agents to policies: whole teams round-robin in team games, single
/// agents round-robin otherwise.
pub fn assign_policies(setup: &EpisodeSetup, n_policies: usize) -> Vec<usize> {
    let n = setup.tasks.len();
    let mut out = vec![0; n];
    match &setup.teams {
        Some(teams) => {
            for (t, members) in teams.iter().enumerate() {
                for m in members {
                    out[*m as usize - 1] = t % n_policies;
                }
            }
        }
        None => {
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = i % n_policies;
            }
        }
    }
    out
}

/// Game score of each policy: mean primary-task max progress over its
/// agents, plus the winner bonus.
pub fn game_scores(max_progress: &[f64], agent_policy: &[usize], n_policies: usize, winner_policy: Option<usize>) -> Vec<f64> {
    (0..n_policies)
        .map(|p| {
            let mine: Vec<f64> = agent_policy
                .iter()
                .zip(max_progress)
                .filter(|(a, _)| **a == p)
                .map(|(_, m)| *m)
                .collect();
            let mean = if mine.is_empty() { 0.0 } else { mine.iter().sum::<f64>() / mine.len() as f64 };
            mean + if winner_policy == Some(p) { WINNER_BONUS } else { 0.0 }
        })
        .collect()
}

/// Statistics read from log records alone.
pub fn log_statistics(records: &[LogRecord], n: usize, center: Pos, radius: i32) -> (Vec<u32>, Vec<f64>) {
    let mut seen: Vec<BTreeSet<(u8, u8, u8)>> = vec![BTreeSet::new(); n];
    let mut best = vec![f64::NEG_INFINITY; n];
    for r in records {
        match r {
            LogRecord::Event(e) if e.subject > 0 && (e.subject as usize) <= n => {
                seen[e.subject as usize - 1].insert((e.kind as u8, e.item, e.level));
            }
            LogRecord::Position { id, pos, .. } if *id > 0 && (*id as usize) <= n => {
                let p = if radius > 0 {
                    1.0 - pos.chebyshev(center) as f64 / radius as f64
                } else {
                    1.0
                };
                let b = &mut best[*id as usize - 1];
                *b = b.max(p);
            }
            _ => {}
        }
    }
    let best = best.into_iter().map(|b| if b.is_finite() { b } else { 0.0 }).collect();
    (seen.into_iter().map(|s| s.len() as u32).collect(), best)
}

/// Builds a result from a finished referee and ledger. Shared by the live
/// runner and replay re-scoring.
pub(crate) fn summarize(
    header: &ReplayHeader,
    referee: &Referee,
    ledger: &FactsLedger,
    records: &[LogRecord],
    ticks: u32,
    digest: String,
) -> EpisodeResult {
    let n = header.agent_policy.len();
    let max_progress: Vec<f64> = referee.primary.iter().map(|(_, s)| s.max_progress).collect();
    let winner_policy = (1..=n as EntityId)
        .find(|id| referee.is_winner(*id))
        .map(|id| header.agent_policy[id as usize - 1]);
    let lifespans = (1..=n as EntityId)
        .map(|id| {
            let f = &ledger.facts(id).expect("player").state;
            f.died.unwrap_or(ticks).saturating_sub(f.born)
        })
        .collect();
    let (unique_events, center_progress) = log_statistics(records, n, header.center, header.radius);
    EpisodeResult {
        kind: header.setup.kind,
        seed: header.seed,
        policies: header.policies.clone(),
        agent_policy: header.agent_policy.clone(),
        winner: referee.winner,
        winner_policy,
        scores: game_scores(&max_progress, &header.agent_policy, header.policies.len(), winner_policy),
        lifespans,
        max_progress,
        tasks: header.setup.tasks.iter().map(|p| p.canonical()).collect(),
        unique_events,
        center_progress,
        ticks,
        digest,
    }
}

/// Output of one episode.
#[derive(Debug, Clone)]
pub struct EpisodeRun {
    pub result: EpisodeResult,
    pub replay: Replay,
    pub stats: RunStats,
    /// Summed reward of each agent.
    pub reward_sums: Vec<f64>,
}

/// Plays one episode of `kind` to completion.
pub fn run_episode(
    cfg: &GameConfig,
    kind: MinigameKind,
    policies: &[&dyn Policy],
    seed: u64,
) -> Result<EpisodeRun, EnvError> {
    let start = Instant::now();
    let pack = GamePack::new(vec![(kind, 1.0)])?;
    let mut env = Env::with_pack(cfg.clone(), pack);
    env.reset(seed, Some(kind))?;
    let layout = env.layout().clone();
    let dims = layout.actions.len();
    let ep = env.episode().expect("reset");
    let n = ep.state.players.len();
    let agent_policy = assign_policies(&ep.setup, policies.len());
    let info = EpisodeInfo {
        kind,
        center: ep.state.map.center(),
    };
    let header = ReplayHeader {
        seed,
        policies: policies.iter().map(|p| p.name().to_string()).collect(),
        agent_policy: agent_policy.clone(),
        setup: ep.setup.clone(),
        center: ep.state.map.center(),
        radius: ep.state.map.radius(),
        config_text: ep.config_text.clone(),
    };
    let initial: Vec<LogRecord> = ep.state.log.records().to_vec();
    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(2 + i as u64);
            r
        })
        .collect();
    let noop = layout.actions.noop();
    let mut flat = vec![0i64; n * dims];
    let mut ticks = Vec::new();
    let mut reward_sums = vec![0.0; n];
    let mut policy_time = Duration::ZERO;
    loop {
        let ep = env.episode().expect("live");
        let log_start = ep.state.log.records().len();
        let t0 = Instant::now();
        let frame = &ep.frame;
        let alive: Vec<bool> = ep.state.players.iter().map(|p| p.alive).collect();
        flat.par_chunks_mut(dims)
            .zip(rngs.par_iter_mut())
            .enumerate()
            .for_each(|(i, (out, rng))| {
                if alive[i] {
                    policies[agent_policy[i]].act(frame.agent(&layout, i), &layout, &info, rng, out);
                } else {
                    out.copy_from_slice(&noop);
                }
            });
        policy_time += t0.elapsed();
        let actions: Vec<(u32, Vec<i64>)> = (0..n)
            .filter(|i| alive[*i] && flat[i * dims..(i + 1) * dims] != noop[..])
            .map(|i| (i as u32 + 1, flat[i * dims..(i + 1) * dims].to_vec()))
            .collect();
        let out = env.step(&flat)?;
        for (s, r) in reward_sums.iter_mut().zip(&out.rewards) {
            *s += r;
        }
        let ep = env.episode().expect("live");
        ticks.push(TickRecord {
            tick: out.tick,
            actions,
            records: ep.state.log.records()[log_start..].to_vec(),
        });
        if out.done {
            break;
        }
    }
    let replay = Replay { header, initial, ticks };
    let digest = replay.digest();
    let ep = env.episode().expect("finished");
    let result = summarize(
        &replay.header,
        &ep.referee,
        &ep.state.ledger,
        ep.state.log.records(),
        ep.state.tick,
        digest,
    );
    let stats = RunStats {
        wall: start.elapsed(),
        policy: policy_time,
        phases: env.timings,
    };
    Ok(EpisodeRun {
        result,
        replay,
        stats,
        reward_sums,
    })
}

/// Runs `seeds` on a pool of `workers` threads; output follows seed order.
pub fn run_many(
    cfg: &GameConfig,
    kind: MinigameKind,
    policies: &[&dyn Policy],
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<EpisodeRun>, EnvError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| seeds.par_iter().map(|s| run_episode(cfg, kind, policies, *s)).collect())
}
