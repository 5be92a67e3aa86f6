//! Reset/step driver tying minigame setup, the tick pipeline, referee and
//! observation codec together.
//!
//! Randomness: the reset seed feeds two independent ChaCha streams. Stream 0
//! draws the minigame, its randomized parameters and the map; stream 1 is
//! the episode's own generator (spawns, NPCs, combat rolls).

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, GameConfig, Settings, Violation};
use crate::entity::EntityId;
use crate::minigame::{setup_episode, team_mask_actions, EpisodeSetup, GameHistory, GamePack, MinigameError, MinigameKind, Referee};
use crate::obs::{build_frame, decode_and_validate, rebuild_frame, CodecError, ObsFrame, ObservationLayout};
use crate::sim;
use crate::state::{Action, KeyTarget, StateError, WorldState};
use crate::tasks::{embed_task, shaped_reward, EmbedFlags, ShapingDelta, Winner, EMBED_LEN};
use crate::world::{generate_map, FogClock, WorldError};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid configuration: {0:?}")]
    ConfigInvalid(Vec<Violation>),
    #[error(transparent)]
    Minigame(#[from] MinigameError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("episode finished; call reset")]
    EpisodeFinished,
    #[error("no episode; call reset")]
    NoEpisode,
    #[error("expected {expected} action entries, got {got}")]
    ActionShape { expected: usize, got: usize },
}

/// Quantities the optional shaping terms difference between ticks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct ShapingSnapshot {
    health: f64,
    xp: f64,
    equipment: f64,
    gold: f64,
}

fn snapshot(st: &WorldState, i: usize) -> ShapingSnapshot {
    let p = &st.players[i];
    let (off, def) = crate::items::equipment_stats(&p.inventory, &crate::combat::equipment_rules(&st.s));
    ShapingSnapshot {
        health: p.health.max(0) as f64,
        xp: p.skills.iter().map(|s| s.xp as f64).sum(),
        equipment: (off + def) as f64,
        gold: p.gold as f64,
    }
}

/// One live episode.
#[derive(Debug, Clone)]
pub struct Episode {
    pub seed: u64,
    pub setup: EpisodeSetup,
    pub state: WorldState,
    pub referee: Referee,
    pub tasks: Vec<[f32; EMBED_LEN]>,
    pub frame: ObsFrame,
    /// Effective config of this episode, as text.
    pub config_text: String,
    pub done: bool,
    shaping: Vec<ShapingSnapshot>,
}

impl Episode {
    pub fn kind(&self) -> MinigameKind {
        self.setup.kind
    }

    pub fn tick(&self) -> u32 {
        self.state.tick
    }

    pub fn winner(&self) -> Option<Winner> {
        self.referee.winner
    }
}

/// Per-step outputs besides the observation frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub done: bool,
    pub tick: u32,
    pub winner: Option<Winner>,
}

/// Wall time spent in each stage of `step`, summed since construction.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimes {
    pub decode: Duration,
    pub simulate: Duration,
    pub score: Duration,
    pub observe: Duration,
    /// Live agents stepped, summed over ticks.
    pub agent_steps: u64,
}

impl PhaseTimes {
    pub fn total(&self) -> Duration {
        self.decode + self.simulate + self.score + self.observe
    }

    pub fn add(&mut self, o: &PhaseTimes) {
        self.decode += o.decode;
        self.simulate += o.simulate;
        self.score += o.score;
        self.observe += o.observe;
        self.agent_steps += o.agent_steps;
    }
}

/// An environment instance: config, game pack, history and at most one live
/// episode.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: GameConfig,
    pack: GamePack,
    history: GameHistory,
    layout: ObservationLayout,
    episode: Option<Episode>,
    pub timings: PhaseTimes,
}

impl Env {
    pub fn new(cfg: GameConfig) -> Result<Self, EnvError> {
        let pack = match cfg.game_packs() {
            Some(text) => text.parse()?,
            None => GamePack::default_for(cfg.profile()),
        };
        Ok(Self::with_pack(cfg, pack))
    }

    pub fn with_pack(cfg: GameConfig, pack: GamePack) -> Self {
        let layout = ObservationLayout::new(cfg.profile());
        Env {
            cfg,
            pack,
            history: GameHistory::default(),
            layout,
            episode: None,
            timings: PhaseTimes::default(),
        }
    }

    pub fn layout(&self) -> &ObservationLayout {
        &self.layout
    }

    pub fn config(&self) -> &GameConfig {
        &self.cfg
    }

    pub fn history(&self) -> &GameHistory {
        &self.history
    }

    pub fn history_mut(&mut self) -> &mut GameHistory {
        &mut self.history
    }

    pub fn episode(&self) -> Option<&Episode> {
        self.episode.as_ref()
    }

    pub fn episode_mut(&mut self) -> Option<&mut Episode> {
        self.episode.as_mut()
    }

    pub fn num_agents(&self) -> usize {
        self.episode.as_ref().map_or(0, |e| e.state.players.len())
    }

    /// Starts an episode, sampling the minigame from the pack unless forced.
    pub fn reset(&mut self, seed: u64, kind: Option<MinigameKind>) -> Result<&Episode, EnvError> {
        let mut game_rng = ChaCha8Rng::seed_from_u64(seed);
        game_rng.set_stream(0);
        let kind = kind.unwrap_or_else(|| self.pack.sample(&mut game_rng));
        let setup = setup_episode(kind, &mut self.cfg, &self.history, &mut game_rng)?;
        let violations = self.cfg.validate();
        if !violations.is_empty() {
            return Err(EnvError::ConfigInvalid(violations));
        }
        let s = Settings::resolve(&self.cfg);
        let map_seed = game_rng.random::<u32>() as i64;
        let map = generate_map(map_seed, &self.cfg)?;
        let fog = FogClock {
            onset: s.fog_onset,
            speed: s.fog_speed,
            final_size: s.fog_final_size,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut st = WorldState::new(s, map, fog, setup.teams.clone(), rng);
        st.npc_region = setup.npc_region;
        st.key_target = setup.key_target;
        st.leader_elimination = setup.leader_elimination;
        st.spawn_players(setup.spawn)?;
        if setup.key_target == KeyTarget::Leader {
            st.mark_leaders();
        }
        st.rebuild_occupancy();
        let referee = Referee::new(&setup, st.map.center(), st.map.radius());
        let flags = EmbedFlags {
            team_game: setup.teams.is_some(),
            agent_game: setup.teams.is_none(),
            subsystems: self.cfg.subsystems().clone(),
        };
        let tasks: Vec<[f32; EMBED_LEN]> = setup.tasks.iter().map(|p| embed_task(p, &flags)).collect();
        let frame = build_frame(&st, &self.layout, &tasks);
        let shaping = (0..st.players.len()).map(|i| snapshot(&st, i)).collect();
        self.episode = Some(Episode {
            seed,
            config_text: self.cfg.effective_text(),
            setup,
            state: st,
            referee,
            tasks,
            frame,
            done: false,
            shaping,
        });
        Ok(self.episode.as_ref().expect("just set"))
    }

    /// Decodes a batch-major flat action buffer into engine actions.
    pub fn decode(&self, flat: &[i64]) -> Result<Vec<Action>, EnvError> {
        let ep = self.episode.as_ref().ok_or(EnvError::NoEpisode)?;
        let n = ep.state.players.len();
        let dims = self.layout.actions.len();
        if flat.len() != n * dims {
            return Err(EnvError::ActionShape {
                expected: n * dims,
                got: flat.len(),
            });
        }
        (0..n)
            .map(|i| {
                decode_and_validate(
                    &flat[i * dims..(i + 1) * dims],
                    ep.frame.agent(&self.layout, i),
                    &ep.frame.views[i],
                    &ep.frame.listings,
                    &self.layout,
                )
                .map_err(EnvError::from)
            })
            .collect()
    }

    /// Advances one tick from a batch-major flat action buffer.
    pub fn step(&mut self, flat: &[i64]) -> Result<StepOutcome, EnvError> {
        if self.episode.as_ref().ok_or(EnvError::NoEpisode)?.done {
            return Err(EnvError::EpisodeFinished);
        }
        let t0 = Instant::now();
        let actions = self.decode(flat)?;
        self.timings.decode += t0.elapsed();
        self.step_actions(actions)
    }

    /// Advances one tick from already-decoded actions.
    pub fn step_actions(&mut self, mut actions: Vec<Action>) -> Result<StepOutcome, EnvError> {
        let ep = self.episode.as_mut().ok_or(EnvError::NoEpisode)?;
        if ep.done {
            return Err(EnvError::EpisodeFinished);
        }
        let st = &mut ep.state;
        actions.resize(st.players.len(), Action::default());
        let t0 = Instant::now();
        self.timings.agent_steps += st.alive_players() as u64;
        team_mask_actions(st, &mut actions);
        sim::step(st, &actions);
        let t1 = Instant::now();
        self.timings.simulate += t1 - t0;
        let mut rewards = ep.referee.update(st.tick, &st.ledger);
        if st.s.reward_shaping {
            let w = st.s.reward_weights;
            for (i, r) in rewards.iter_mut().enumerate() {
                let now = snapshot(st, i);
                let before = ep.shaping[i];
                let d = ShapingDelta {
                    health: now.health - before.health,
                    xp: now.xp - before.xp,
                    equipment: now.equipment - before.equipment,
                    gold: now.gold - before.gold,
                };
                *r = shaped_reward(*r, &d, &w);
                ep.shaping[i] = now;
            }
        }
        let done = ep.referee.winner.is_some() || st.tick >= st.s.horizon || st.alive_players() == 0;
        ep.done = done;
        let dones = st.players.iter().map(|p| done || !p.alive).collect();
        let t2 = Instant::now();
        self.timings.score += t2 - t1;
        rebuild_frame(st, &self.layout, &ep.tasks, &mut ep.frame);
        self.timings.observe += t2.elapsed();
        let outcome = StepOutcome {
            rewards,
            dones,
            done,
            tick: st.tick,
            winner: ep.referee.winner,
        };
        if done {
            self.history
                .record(ep.setup.kind, ep.referee.winner.is_some(), ep.setup.difficulty);
        }
        Ok(outcome)
    }

    /// Whether player `id` is alive in the current episode.
    pub fn alive(&self, id: EntityId) -> bool {
        self.episode
            .as_ref()
            .and_then(|e| e.state.entity(id))
            .is_some_and(|p| p.alive)
    }
}
