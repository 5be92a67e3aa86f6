//! Minigame rule sets: subsystem toggles, episode setup, adaptive
//! difficulty, game packs, win detection, team masking and the
//! communication protocol.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{team_dict, GameConfig, Profile, Subsystem, Teams, Value};
use crate::entity::EntityId;
use crate::state::{Action, KeyTarget, NpcRegion, SpawnMode, WorldState};
use crate::tasks::{
    agent_progress, evaluation_suite, team_progress, EvalContext, FactsLedger, Predicate, TaskState, Winner,
};
use crate::world::Pos;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MinigameError {
    #[error("{kind} is not available under the {} profile", profile.name())]
    ProfileMismatch { kind: MinigameKind, profile: Profile },
    #[error("game pack is empty")]
    EmptyPack,
    #[error("unknown minigame `{0}`")]
    UnknownKind(String),
    #[error("bad game pack entry `{0}`")]
    BadPack(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MinigameKind {
    Survival,
    TeamBattle,
    MultiTask,
    ProtectTheKing,
    RaceToCenter,
    KingOfTheHill,
    Sandwich,
}

impl MinigameKind {
    pub const ALL: [MinigameKind; 7] = [
        MinigameKind::Survival,
        MinigameKind::TeamBattle,
        MinigameKind::MultiTask,
        MinigameKind::ProtectTheKing,
        MinigameKind::RaceToCenter,
        MinigameKind::KingOfTheHill,
        MinigameKind::Sandwich,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MinigameKind::Survival => "survival",
            MinigameKind::TeamBattle => "battle",
            MinigameKind::MultiTask => "multitask",
            MinigameKind::ProtectTheKing => "ptk",
            MinigameKind::RaceToCenter => "race",
            MinigameKind::KingOfTheHill => "koh",
            MinigameKind::Sandwich => "sandwich",
        }
    }

    pub fn is_team_game(self) -> bool {
        matches!(
            self,
            MinigameKind::TeamBattle | MinigameKind::ProtectTheKing | MinigameKind::KingOfTheHill | MinigameKind::Sandwich
        )
    }

    /// Games that need the Full profile.
    pub fn requires_full(self) -> bool {
        self == MinigameKind::MultiTask
    }
}

impl fmt::Display for MinigameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MinigameKind {
    type Err = MinigameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Ok(match k.as_str() {
            "survival" | "survive" => MinigameKind::Survival,
            "battle" | "teambattle" => MinigameKind::TeamBattle,
            "multitask" | "multitasktraining" => MinigameKind::MultiTask,
            "ptk" | "protecttheking" => MinigameKind::ProtectTheKing,
            "race" | "racetocenter" => MinigameKind::RaceToCenter,
            "koh" | "kingofthehill" => MinigameKind::KingOfTheHill,
            "sandwich" => MinigameKind::Sandwich,
            _ => return Err(MinigameError::UnknownKind(s.into())),
        })
    }
}

/// Optional subsystems each game enables, before intersecting with the
/// profile. Terrain is always on.
pub fn game_subsystems(kind: MinigameKind, profile: Profile) -> BTreeSet<Subsystem> {
    use Subsystem as S;
    let core = [S::Resource, S::Combat, S::Npc, S::Communication];
    let mut set: BTreeSet<Subsystem> = match kind {
        MinigameKind::Survival | MinigameKind::MultiTask => core.into_iter().chain(S::EXTRAS).collect(),
        MinigameKind::TeamBattle if profile == Profile::Full => core.into_iter().chain(S::EXTRAS).collect(),
        MinigameKind::TeamBattle | MinigameKind::ProtectTheKing => core.into_iter().collect(),
        MinigameKind::RaceToCenter => [S::Resource].into_iter().collect(),
        MinigameKind::KingOfTheHill => [S::Resource, S::Combat, S::Communication].into_iter().collect(),
        MinigameKind::Sandwich => [S::Combat, S::Npc, S::Communication].into_iter().collect(),
    };
    set.insert(S::Terrain);
    set
}

/// Adaptive difficulty constants.
pub const RACE_START_MAP: u32 = 40;
pub const RACE_MAP_STEP: u32 = 8;
pub const KOH_START_HOLD: u32 = 10;
pub const KOH_HOLD_STEP: u32 = 10;
pub const KOH_MAX_HOLD: u32 = 200;
pub const SANDWICH_START_MULT: f64 = 1.0;
pub const SANDWICH_MULT_STEP: f64 = 0.5;
pub const SANDWICH_MAX_MULT: f64 = 8.0;
/// Wins needed at the current difficulty before stepping up.
pub const NUM_GAME_WON: u32 = 1;

/// Fixed per-game layout constants.
pub const KOH_MAP: u32 = 60;
pub const SANDWICH_MAP: u32 = 80;
pub const TEAM_SIZE: u32 = 8;
pub const SANDWICH_TEAM_SIZE: u32 = 16;
pub const SANDWICH_MIN_TICK: u32 = 500;
/// NPC population at multiplier 1.
pub const SANDWICH_BASE_NPC: u32 = 32;
pub const SANDWICH_FOG_ONSET: u32 = 64;
pub const SANDWICH_FOG_SPEED: f64 = 1.0 / 16.0;

/// The difficulty knob a game used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Difficulty {
    None,
    MapSize(u32),
    Hold(u32),
    NpcMultiplier(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub kind: MinigameKind,
    pub won: bool,
    pub difficulty: Difficulty,
}

/// Append-only record of finished games.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GameHistory {
    entries: Vec<HistoryEntry>,
}

impl GameHistory {
    pub fn record(&mut self, kind: MinigameKind, won: bool, difficulty: Difficulty) {
        self.entries.push(HistoryEntry { kind, won, difficulty });
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    fn of(&self, kind: MinigameKind) -> impl Iterator<Item = &HistoryEntry> {
        self.entries.iter().filter(move |e| e.kind == kind)
    }
}

fn initial_difficulty(kind: MinigameKind) -> Difficulty {
    match kind {
        MinigameKind::RaceToCenter => Difficulty::MapSize(RACE_START_MAP),
        MinigameKind::KingOfTheHill => Difficulty::Hold(KOH_START_HOLD),
        MinigameKind::Sandwich => Difficulty::NpcMultiplier(SANDWICH_START_MULT),
        _ => Difficulty::None,
    }
}

/// Difficulty for the next game of `kind`: the level last played, stepped
/// up once if the last game of this kind was won, enough games were won at
/// that level, and the step stays within bounds.
pub fn determine_difficulty(kind: MinigameKind, history: &GameHistory, cfg: &GameConfig) -> Difficulty {
    let games: Vec<&HistoryEntry> = history.of(kind).collect();
    let current = games.last().map_or(initial_difficulty(kind), |e| e.difficulty);
    if !cfg.flag("ADAPTIVE_DIFFICULTY") || !games.last().is_some_and(|e| e.won) {
        return current;
    }
    let wins = games.iter().filter(|e| e.won && e.difficulty == current).count() as u32;
    if wins < NUM_GAME_WON {
        return current;
    }
    match current {
        Difficulty::MapSize(m) => {
            let original = match cfg.original("MAP_CENTER") {
                Ok(Value::Int(v)) => v as u32,
                _ => m,
            };
            if m + RACE_MAP_STEP <= original {
                Difficulty::MapSize(m + RACE_MAP_STEP)
            } else {
                current
            }
        }
        Difficulty::Hold(h) if h + KOH_HOLD_STEP <= KOH_MAX_HOLD => Difficulty::Hold(h + KOH_HOLD_STEP),
        Difficulty::NpcMultiplier(x) if x + SANDWICH_MULT_STEP <= SANDWICH_MAX_MULT => {
            Difficulty::NpcMultiplier(x + SANDWICH_MULT_STEP)
        }
        other => other,
    }
}

/// Weighted set of minigames sampled at reset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamePack {
    pub entries: Vec<(MinigameKind, f64)>,
}

impl GamePack {
    pub fn new(entries: Vec<(MinigameKind, f64)>) -> Result<Self, MinigameError> {
        if entries.is_empty() {
            return Err(MinigameError::EmptyPack);
        }
        if entries.iter().any(|(_, w)| !(w.is_finite() && *w > 0.0)) {
            return Err(MinigameError::BadPack("weights must be positive".into()));
        }
        Ok(GamePack { entries })
    }

    /// Every game the profile supports, equally weighted.
    pub fn default_for(profile: Profile) -> Self {
        let kinds: Vec<MinigameKind> = match profile {
            Profile::Mini => vec![
                MinigameKind::TeamBattle,
                MinigameKind::ProtectTheKing,
                MinigameKind::RaceToCenter,
                MinigameKind::KingOfTheHill,
                MinigameKind::Sandwich,
            ],
            Profile::Full => vec![MinigameKind::Survival, MinigameKind::TeamBattle, MinigameKind::MultiTask],
        };
        GamePack {
            entries: kinds.into_iter().map(|k| (k, 1.0)).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MinigameKind {
        let total: f64 = self.entries.iter().map(|e| e.1).sum();
        let mut x = rng.random::<f64>() * total;
        for (k, w) in &self.entries {
            if x < *w {
                return *k;
            }
            x -= w;
        }
        self.entries.last().expect("nonempty").0
    }
}

impl FromStr for GamePack {
    type Err = MinigameError;

    /// `kind:weight,kind:weight,...`; a bare kind has weight 1.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut entries = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, w) = part.split_once(':').unwrap_or((part, "1"));
            let w: f64 = w.trim().parse().map_err(|_| MinigameError::BadPack(part.into()))?;
            entries.push((k.parse()?, w));
        }
        GamePack::new(entries)
    }
}

impl fmt::Display for GamePack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(|(k, w)| format!("{k}:{w}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// Everything an episode needs beyond the effective config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSetup {
    pub kind: MinigameKind,
    pub difficulty: Difficulty,
    pub spawn: SpawnMode,
    pub npc_region: NpcRegion,
    pub key_target: KeyTarget,
    pub leader_elimination: bool,
    pub teams: Option<Teams>,
    /// Primary task of each agent, by player index.
    pub tasks: Vec<Predicate>,
    /// Shared task of every team, if any.
    pub team_task: Option<Predicate>,
}

/// Applies a game's rules to `cfg` as episode overrides and draws its
/// randomized parameters.
pub fn setup_episode<R: Rng + ?Sized>(
    kind: MinigameKind,
    cfg: &mut GameConfig,
    history: &GameHistory,
    rng: &mut R,
) -> Result<EpisodeSetup, MinigameError> {
    cfg.reset_overrides();
    if kind.requires_full() && cfg.profile() != Profile::Full {
        return Err(MinigameError::ProfileMismatch {
            kind,
            profile: cfg.profile(),
        });
    }
    let subs: BTreeSet<Subsystem> = game_subsystems(kind, cfg.profile())
        .intersection(cfg.original_subsystems())
        .copied()
        .collect();
    cfg.set_subsystems_for_episode(subs);
    let set = |cfg: &mut GameConfig, k: &str, v: Value| cfg.set_for_episode(k, v).expect("schema key");
    let n = cfg.int("PLAYER_N") as u32;
    let horizon = cfg.int("HORIZON") as u32;
    let difficulty = determine_difficulty(kind, history, cfg);
    let mut setup = EpisodeSetup {
        kind,
        difficulty,
        spawn: SpawnMode::EdgeScatter,
        npc_region: NpcRegion::Anywhere,
        key_target: KeyTarget::None,
        leader_elimination: false,
        teams: None,
        tasks: vec![Predicate::TickGE { n: horizon }; n as usize],
        team_task: None,
    };
    match kind {
        MinigameKind::Survival => {
            let onset = rng.random_range(32..256);
            let speed = 1.0 / rng.random_range(7..12) as f64;
            let npcs = rng.random_range(64..256);
            set(cfg, "DEATH_FOG_ONSET", Value::Int(onset));
            set(cfg, "DEATH_FOG_SPEED", Value::Real(speed));
            set(cfg, "NPC_N", Value::Int(npcs));
        }
        MinigameKind::TeamBattle => {
            setup.spawn = SpawnMode::TeamTile;
            setup.teams = Some(team_dict(n, TEAM_SIZE));
            setup.team_task = Some(Predicate::LastTeamStanding);
        }
        MinigameKind::MultiTask => {
            let suite = evaluation_suite();
            setup.tasks = (0..n)
                .map(|_| suite[rng.random_range(0..suite.len())].predicate)
                .collect();
        }
        MinigameKind::ProtectTheKing => {
            setup.spawn = SpawnMode::TeamTile;
            setup.teams = Some(team_dict(n, TEAM_SIZE));
            setup.team_task = Some(Predicate::ProtectLeader);
            setup.key_target = KeyTarget::Leader;
            setup.leader_elimination = true;
        }
        MinigameKind::RaceToCenter => {
            let Difficulty::MapSize(m) = difficulty else { unreachable!() };
            set(cfg, "MAP_CENTER", Value::Int(m as i64));
            setup.tasks = vec![Predicate::ReachCenterFirst; n as usize];
            setup.key_target = KeyTarget::Center;
        }
        MinigameKind::KingOfTheHill => {
            let Difficulty::Hold(h) = difficulty else { unreachable!() };
            set(cfg, "MAP_CENTER", Value::Int(KOH_MAP as i64));
            setup.spawn = SpawnMode::TeamTile;
            setup.teams = Some(team_dict(n, TEAM_SIZE));
            setup.team_task = Some(Predicate::SeizeCenter { duration: h });
            setup.key_target = KeyTarget::Center;
        }
        MinigameKind::Sandwich => {
            let Difficulty::NpcMultiplier(x) = difficulty else { unreachable!() };
            set(cfg, "MAP_CENTER", Value::Int(SANDWICH_MAP as i64));
            set(cfg, "DEATH_FOG_ONSET", Value::Int(SANDWICH_FOG_ONSET as i64));
            set(cfg, "DEATH_FOG_SPEED", Value::Real(SANDWICH_FOG_SPEED));
            set(cfg, "NPC_N", Value::Int((SANDWICH_BASE_NPC as f64 * x).round() as i64));
            set(cfg, "NPC_DEFAULT_REFILL_DEAD_NPCS", Value::Bool(true));
            setup.spawn = SpawnMode::Circle;
            setup.npc_region = NpcRegion::EdgeAndCenter;
            setup.teams = Some(team_dict(n, SANDWICH_TEAM_SIZE));
            setup.team_task = Some(Predicate::LastTeamStanding);
        }
    }
    cfg.set_teams_for_episode(setup.teams.clone());
    Ok(setup)
}

/// Win detection and task bookkeeping for one episode.
///
/// Reads only the facts ledger, so the same referee fed a recorded log
/// reproduces the live outcome.
#[derive(Debug, Clone)]
pub struct Referee {
    pub kind: MinigameKind,
    pub teams: Option<Teams>,
    pub team_of: Vec<Option<u16>>,
    pub center: Pos,
    pub radius: i32,
    pub hold_required: u32,
    pub primary: Vec<(Predicate, TaskState)>,
    pub team_task: Option<Predicate>,
    pub team_states: Vec<TaskState>,
    pub hold: Vec<u32>,
    pub winner: Option<Winner>,
    /// Summed reward per agent since reset.
    pub reward_sum: Vec<f64>,
}

impl Referee {
    pub fn new(setup: &EpisodeSetup, center: Pos, radius: i32) -> Self {
        let n = setup.tasks.len();
        let mut team_of = vec![None; n];
        let nteams = setup.teams.as_ref().map_or(0, Vec::len);
        if let Some(teams) = &setup.teams {
            for (t, members) in teams.iter().enumerate() {
                for m in members {
                    if let Some(slot) = team_of.get_mut(*m as usize - 1) {
                        *slot = Some(t as u16);
                    }
                }
            }
        }
        let hold_required = match setup.team_task {
            Some(Predicate::SeizeCenter { duration }) => duration,
            _ => 0,
        };
        Referee {
            kind: setup.kind,
            teams: setup.teams.clone(),
            team_of,
            center,
            radius,
            hold_required,
            primary: setup.tasks.iter().map(|p| (*p, TaskState::default())).collect(),
            team_task: setup.team_task,
            team_states: vec![TaskState::default(); if setup.team_task.is_some() { nteams } else { 0 }],
            hold: vec![0; nteams],
            winner: None,
            reward_sum: vec![0.0; n],
        }
    }

    fn team_alive(&self, ledger: &FactsLedger) -> Vec<bool> {
        self.teams.as_ref().map_or_else(Vec::new, |teams| {
            teams
                .iter()
                .map(|m| m.iter().any(|id| ledger.facts(*id as EntityId).is_some_and(|f| f.state.alive)))
                .collect()
        })
    }

    fn leader_alive(&self, ledger: &FactsLedger) -> Vec<bool> {
        self.teams.as_ref().map_or_else(Vec::new, |teams| {
            teams
                .iter()
                .map(|m| {
                    m.first()
                        .is_some_and(|id| ledger.facts(*id as EntityId).is_some_and(|f| f.state.alive))
                })
                .collect()
        })
    }

    fn check_winner(&mut self, tick: u32, ledger: &FactsLedger) {
        if self.winner.is_some() {
            return;
        }
        let n = self.primary.len();
        let alive_at = |id: EntityId, p: Pos| ledger.facts(id).is_some_and(|f| f.state.alive && f.state.pos == p);
        match self.kind {
            MinigameKind::Survival | MinigameKind::MultiTask => {}
            MinigameKind::TeamBattle | MinigameKind::ProtectTheKing | MinigameKind::Sandwich => {
                if self.kind == MinigameKind::Sandwich && tick < SANDWICH_MIN_TICK {
                    return;
                }
                let alive = self.team_alive(ledger);
                let standing: Vec<usize> = (0..alive.len()).filter(|t| alive[*t]).collect();
                if alive.len() > 1 && standing.len() == 1 {
                    self.winner = Some(Winner::Team(standing[0] as u16));
                }
            }
            MinigameKind::RaceToCenter => {
                self.winner = (1..=n as EntityId)
                    .find(|id| alive_at(*id, self.center))
                    .map(Winner::Agent);
            }
            MinigameKind::KingOfTheHill => {
                let teams = self.teams.clone().unwrap_or_default();
                for (t, members) in teams.iter().enumerate() {
                    let held = members.iter().any(|id| alive_at(*id as EntityId, self.center));
                    self.hold[t] = if held { self.hold[t] + 1 } else { 0 };
                }
                self.winner = (0..teams.len())
                    .find(|t| self.hold_required > 0 && self.hold[*t] >= self.hold_required)
                    .map(|t| Winner::Team(t as u16));
            }
        }
    }

    /// Evaluates the end of `tick` and returns each agent's task reward.
    pub fn update(&mut self, tick: u32, ledger: &FactsLedger) -> Vec<f64> {
        self.check_winner(tick, ledger);
        let leader_alive = self.leader_alive(ledger);
        let ctx = EvalContext {
            tick,
            center: self.center,
            radius: self.radius,
            winner: self.winner,
            team_hold: &self.hold,
            leader_alive: &leader_alive,
        };
        let mut team_rewards = vec![0.0; self.team_states.len()];
        if let Some(pred) = self.team_task {
            for (t, st) in self.team_states.iter_mut().enumerate() {
                team_rewards[t] = st.update(team_progress(&pred, t as u16, &ctx));
            }
        }
        let mut rewards = vec![0.0; self.primary.len()];
        for (i, (pred, st)) in self.primary.iter_mut().enumerate() {
            let id = i as EntityId + 1;
            let facts = ledger.facts(id).expect("player facts");
            let mut r = st.update(agent_progress(pred, id, self.team_of[i], facts, &ctx));
            if let Some(t) = self.team_of[i] {
                r += team_rewards.get(t as usize).copied().unwrap_or(0.0);
            }
            rewards[i] = r;
            self.reward_sum[i] += r;
        }
        rewards
    }

    /// Final maximum progress summed over every task an agent is credited for.
    pub fn total_max_progress(&self, i: usize) -> f64 {
        let team = self.team_of[i]
            .and_then(|t| self.team_states.get(t as usize))
            .map_or(0.0, |s| s.max_progress);
        self.primary[i].1.max_progress + team
    }

    /// Whether `id` belongs to the winner.
    pub fn is_winner(&self, id: EntityId) -> bool {
        match self.winner {
            Some(Winner::Agent(w)) => w == id,
            Some(Winner::Team(t)) => self.team_of[id as usize - 1] == Some(t),
            None => false,
        }
    }
}

/// Drops attacks on teammates and transfers to other teams.
pub fn team_mask_actions(st: &WorldState, actions: &mut [Action]) {
    if !st.team_game() {
        return;
    }
    for (i, a) in actions.iter_mut().enumerate() {
        let me = &st.players[i];
        let friend = |id: EntityId| st.entity(id).is_some_and(|e| e.is_player() && me.same_team(e));
        if a.attack.is_some_and(|(_, t)| friend(t)) {
            a.attack = None;
        }
        if a.give_item.is_some_and(|(_, t)| !friend(t)) {
            a.give_item = None;
        }
        if a.give_gold.is_some_and(|(t, _)| !friend(t)) {
            a.give_gold = None;
        }
    }
}

/// Structured form of a protocol token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CommMessage {
    /// 0..=3
    pub health_quartile: u8,
    /// Visible NPCs, clamped to 3.
    pub npcs: u8,
    /// Visible non-teammate players, clamped to 3.
    pub foes: u8,
    pub key_visible: bool,
}

pub fn encode_message(m: CommMessage) -> u8 {
    (m.health_quartile & 3) | (m.npcs.min(3) << 2) | (m.foes.min(3) << 4) | ((m.key_visible as u8) << 6)
}

pub fn decode_message(token: u8) -> CommMessage {
    CommMessage {
        health_quartile: token & 3,
        npcs: (token >> 2) & 3,
        foes: (token >> 4) & 3,
        key_visible: token & 64 != 0,
    }
}

/// The message an agent broadcasts this tick.
pub fn protocol_message(st: &WorldState, id: EntityId) -> CommMessage {
    let me = st.entity(id).expect("player");
    let vision = st.s.vision_radius;
    let (mut npcs, mut foes) = (0u8, 0u8);
    for e in st.visible(me.pos, vision) {
        if e.id == id {
            continue;
        }
        if e.is_npc() {
            npcs = (npcs + 1).min(3);
        } else if !me.same_team(e) {
            foes = (foes + 1).min(3);
        }
    }
    let key_visible = match st.key_target {
        KeyTarget::None => false,
        KeyTarget::Center => me.pos.chebyshev(st.map.center()) <= vision,
        KeyTarget::Leader => st.teams.as_ref().is_some_and(|teams| {
            me.team
                .and_then(|t| teams.get(t as usize))
                .and_then(|m| m.first())
                .and_then(|l| st.entity(*l as EntityId))
                .is_some_and(|l| l.alive && l.pos.chebyshev(me.pos) <= vision)
        }),
    };
    let q = if me.max_health > 0 {
        (4 * me.health.max(0) / me.max_health).min(3) as u8
    } else {
        0
    };
    CommMessage {
        health_quartile: q,
        npcs,
        foes,
        key_visible,
    }
}

/// Token broadcast under the protocol. Zero is reserved for silence, so an
/// all-zero message goes out as 1.
pub fn protocol_token(st: &WorldState, id: EntityId) -> u8 {
    encode_message(protocol_message(st, id)).max(1)
}
