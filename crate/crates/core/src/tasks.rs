//! Task predicates, progress tracking, rewards, scoring and task embeddings.
//!
//! Progress for the agent-level predicates is a pure function of
//! [`AgentFacts`], which can be assembled either live (event counters plus
//! the world state) or from a serialized log via [`FactsLedger`]. Both paths
//! must agree exactly.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::Subsystem;
use crate::entity::{Entity, EntityId, LevelRule, Profession, Skill, Style};
use crate::events::{EventKind, GameEvent, LogRecord};
use crate::items::{ItemType, Slot};
use crate::world::Pos;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaskError {
    #[error("no tasks in category {0:?}")]
    MissingCategory(Category),
    #[error("unknown assignee {0}")]
    UnknownAssignee(i32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Survival,
    Combat,
    Exploration,
    Skill,
    Item,
    Market,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Survival,
        Category::Combat,
        Category::Exploration,
        Category::Skill,
        Category::Item,
        Category::Market,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Predicate {
    TickGE { n: u32 },
    CountEvent { kind: EventKind, n: u32 },
    DefeatEntity { min_level: u8, n: u32 },
    OccupyTile { row: i32, col: i32 },
    AttainSkill { skill: Skill, level: u8 },
    HarvestItem { item: ItemType, min_level: u8, n: u32 },
    ConsumeItem { item: ItemType, min_level: u8, n: u32 },
    EquipItem { item: ItemType, min_level: u8, n: u32 },
    FullyArmed { style: Style, min_level: u8, n: u32 },
    EarnGold { amount: u64 },
    HoardGold { amount: u64 },
    MakeProfit { amount: u64 },
    SeizeCenter { duration: u32 },
    ProtectLeader,
    LastTeamStanding,
    ReachCenterFirst,
}

impl Predicate {
    pub fn name(&self) -> &'static str {
        match self {
            Predicate::TickGE { .. } => "TickGE",
            Predicate::CountEvent { .. } => "CountEvent",
            Predicate::DefeatEntity { .. } => "DefeatEntity",
            Predicate::OccupyTile { .. } => "OccupyTile",
            Predicate::AttainSkill { .. } => "AttainSkill",
            Predicate::HarvestItem { .. } => "HarvestItem",
            Predicate::ConsumeItem { .. } => "ConsumeItem",
            Predicate::EquipItem { .. } => "EquipItem",
            Predicate::FullyArmed { .. } => "FullyArmed",
            Predicate::EarnGold { .. } => "EarnGold",
            Predicate::HoardGold { .. } => "HoardGold",
            Predicate::MakeProfit { .. } => "MakeProfit",
            Predicate::SeizeCenter { .. } => "SeizeCenter",
            Predicate::ProtectLeader => "ProtectLeader",
            Predicate::LastTeamStanding => "LastTeamStanding",
            Predicate::ReachCenterFirst => "ReachCenterFirst",
        }
    }

    fn params(&self) -> Vec<(&'static str, String)> {
        match *self {
            Predicate::TickGE { n } => vec![("num_tick", n.to_string())],
            Predicate::CountEvent { kind, n } => {
                vec![("event", kind.name().to_string()), ("n", n.to_string())]
            }
            Predicate::DefeatEntity { min_level, n } => vec![
                ("agent_type", "npc".into()),
                ("level", min_level.to_string()),
                ("n", n.to_string()),
            ],
            Predicate::OccupyTile { row, col } => {
                vec![("row", row.to_string()), ("col", col.to_string())]
            }
            Predicate::AttainSkill { skill, level } => {
                vec![("skill", skill.name().into()), ("level", level.to_string())]
            }
            Predicate::HarvestItem { item, min_level, n }
            | Predicate::ConsumeItem { item, min_level, n }
            | Predicate::EquipItem { item, min_level, n } => vec![
                ("item", item.name().into()),
                ("level", min_level.to_string()),
                ("n", n.to_string()),
            ],
            Predicate::FullyArmed { style, min_level, n } => vec![
                ("style", style.name().into()),
                ("level", min_level.to_string()),
                ("n", n.to_string()),
            ],
            Predicate::EarnGold { amount }
            | Predicate::HoardGold { amount }
            | Predicate::MakeProfit { amount } => vec![("amount", amount.to_string())],
            Predicate::SeizeCenter { duration } => vec![("duration", duration.to_string())],
            Predicate::ProtectLeader | Predicate::LastTeamStanding | Predicate::ReachCenterFirst => {
                vec![]
            }
        }
    }

    /// `NAME(key=value,...)` with keys sorted; the hash domain for embeddings.
    pub fn canonical(&self) -> String {
        let mut params = self.params();
        params.sort();
        let body: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.name(), body.join(","))
    }

    /// Team-level predicates are evaluated once per team.
    pub fn is_team_level(&self) -> bool {
        matches!(
            self,
            Predicate::SeizeCenter { .. } | Predicate::ProtectLeader | Predicate::LastTeamStanding
        )
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Assignee {
    Agent(EntityId),
    Team(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskSpec {
    pub predicate: Predicate,
    pub category: Category,
}

impl TaskSpec {
    pub const fn new(predicate: Predicate, category: Category) -> Self {
        TaskSpec { predicate, category }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskState {
    pub progress: f64,
    pub max_progress: f64,
    pub completed: bool,
}

impl TaskState {
    /// Records a new progress value and returns the reward: the increase in
    /// maximum progress.
    pub fn update(&mut self, progress: f64) -> f64 {
        let p = progress.clamp(0.0, 1.0);
        self.progress = p;
        let reward = task_reward(self.max_progress, p.max(self.max_progress));
        self.max_progress = self.max_progress.max(p);
        self.completed = self.max_progress >= 1.0;
        reward
    }
}

pub fn task_reward(prev_max: f64, cur_max: f64) -> f64 {
    (cur_max - prev_max).max(0.0)
}

/// Who won an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Winner {
    Agent(EntityId),
    Team(u16),
}

/// Event-derived counters for one player.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventCounts {
    pub by_kind: [u32; 18],
    pub defeats_by_level: [u32; 11],
    pub harvest: [[u32; 11]; 16],
    pub consume: [[u32; 11]; 16],
    pub equip: [[u32; 11]; 16],
    pub earned: i64,
    pub spent: i64,
}

impl EventCounts {
    fn at_least(row: &[u32; 11], min_level: u8) -> u32 {
        row[(min_level as usize).min(10)..].iter().sum()
    }
}

/// The slice of an entity's state that tasks read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateFacts {
    pub alive: bool,
    pub born: u32,
    pub died: Option<u32>,
    pub pos: Pos,
    pub levels: [u8; 8],
    pub gold: i64,
    /// Hat, Top, Bottom, Weapon, Tool, Ammunition: `(item, level)`.
    pub equipped: [Option<(ItemType, u8)>; 6],
    pub max_distance: i32,
}

fn slot_index(slot: Slot) -> usize {
    match slot {
        Slot::Hat => 0,
        Slot::Top => 1,
        Slot::Bottom => 2,
        Slot::Weapon => 3,
        Slot::Tool => 4,
        Slot::Ammunition => 5,
    }
}

impl StateFacts {
    pub fn from_entity(e: &Entity) -> Self {
        let mut equipped = [None; 6];
        for item in e.inventory.equipped_items() {
            if let Some(slot) = item.kind.slot() {
                equipped[slot_index(slot)] = Some((item.kind, item.level));
            }
        }
        StateFacts {
            alive: e.alive,
            born: e.born,
            died: e.died,
            pos: e.pos,
            levels: std::array::from_fn(|i| e.skills[i].level),
            gold: e.gold as i64,
            equipped,
            max_distance: e.max_distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentFacts {
    pub counts: EventCounts,
    pub state: StateFacts,
}

/// Context shared by all agents at evaluation time.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub tick: u32,
    pub center: Pos,
    pub radius: i32,
    pub winner: Option<Winner>,
    /// Consecutive ticks each team has held the center.
    pub team_hold: &'a [u32],
    /// Whether each team's leader (if any) is alive.
    pub leader_alive: &'a [bool],
}

/// Progress of an agent-level predicate.
pub fn agent_progress(pred: &Predicate, id: EntityId, team: Option<u16>, f: &AgentFacts, ctx: &EvalContext) -> f64 {
    let ratio = |num: f64, den: f64| if den <= 0.0 { 1.0 } else { (num / den).clamp(0.0, 1.0) };
    let s = &f.state;
    let c = &f.counts;
    match *pred {
        Predicate::TickGE { n } => {
            let lived = s.died.unwrap_or(ctx.tick).saturating_sub(s.born);
            ratio(lived as f64, n as f64)
        }
        Predicate::CountEvent { kind: EventKind::GoFarthest, n } => ratio(s.max_distance as f64, n as f64),
        Predicate::CountEvent { kind, n } => ratio(c.by_kind[kind.index()] as f64, n as f64),
        Predicate::DefeatEntity { min_level, n } => {
            ratio(EventCounts::at_least(&c.defeats_by_level, min_level) as f64, n as f64)
        }
        Predicate::OccupyTile { row, col } => {
            let target = Pos::new(row, col);
            if s.pos == target {
                1.0
            } else if ctx.radius <= 0 {
                0.0
            } else {
                0.99 * (1.0 - s.pos.chebyshev(target) as f64 / ctx.radius as f64).max(0.0)
            }
        }
        Predicate::AttainSkill { skill, level } => {
            let cur = s.levels[skill.index()] as f64;
            ratio(cur - 1.0, level as f64 - 1.0)
        }
        Predicate::HarvestItem { item, min_level, n } => {
            ratio(EventCounts::at_least(&c.harvest[item as usize], min_level) as f64, n as f64)
        }
        Predicate::ConsumeItem { item, min_level, n } => {
            ratio(EventCounts::at_least(&c.consume[item as usize], min_level) as f64, n as f64)
        }
        Predicate::EquipItem { item, min_level, n } => {
            ratio(EventCounts::at_least(&c.equip[item as usize], min_level) as f64, n as f64)
        }
        Predicate::FullyArmed { style, min_level, .. } => {
            let weapon = ItemType::weapon_for(style);
            let ok = |slot: usize, want: Option<ItemType>| {
                matches!(s.equipped[slot], Some((k, l)) if l >= min_level && want.is_none_or(|w| w == k))
            };
            let pieces = [ok(0, None), ok(1, None), ok(2, None), ok(3, Some(weapon))]
                .iter()
                .filter(|b| **b)
                .count();
            if pieces == 4 {
                1.0
            } else {
                0.99 * pieces as f64 / 4.0
            }
        }
        Predicate::EarnGold { amount } => ratio(c.earned as f64, amount as f64),
        Predicate::HoardGold { amount } => ratio(s.gold as f64, amount as f64),
        Predicate::MakeProfit { amount } => ratio((c.earned - c.spent) as f64, amount as f64),
        Predicate::ReachCenterFirst => {
            if ctx.winner == Some(Winner::Agent(id)) {
                1.0
            } else {
                let p = if ctx.radius <= 0 {
                    1.0
                } else {
                    (1.0 - s.pos.chebyshev(ctx.center) as f64 / ctx.radius as f64).clamp(0.0, 1.0)
                };
                0.99 * p
            }
        }
        Predicate::SeizeCenter { .. } | Predicate::ProtectLeader | Predicate::LastTeamStanding => {
            team.map_or(0.0, |t| team_progress(pred, t, ctx))
        }
    }
}

/// Progress of a team-level predicate.
pub fn team_progress(pred: &Predicate, team: u16, ctx: &EvalContext) -> f64 {
    let t = team as usize;
    match *pred {
        Predicate::SeizeCenter { duration } => {
            let held = ctx.team_hold.get(t).copied().unwrap_or(0);
            if duration == 0 {
                1.0
            } else {
                (held as f64 / duration as f64).min(1.0)
            }
        }
        Predicate::ProtectLeader => {
            if ctx.leader_alive.get(t).copied().unwrap_or(false) {
                1.0
            } else {
                0.0
            }
        }
        Predicate::LastTeamStanding => {
            if ctx.winner == Some(Winner::Team(team)) {
                1.0
            } else {
                0.0
            }
        }
        _ => 0.0,
    }
}

/// XP and starting values the ledger needs to reconstruct state from events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRules {
    pub progression: bool,
    pub combat_xp: u64,
    pub ammunition_xp: u64,
    pub consumable_xp: u64,
    pub level: LevelRule,
    pub base_gold: i64,
}

/// Profession trained by harvesting an item, with its XP class.
pub fn harvest_skill(item: ItemType) -> Option<(Profession, bool)> {
    match item {
        ItemType::Ration => Some((Profession::Fishing, false)),
        ItemType::Potion => Some((Profession::Herbalism, false)),
        ItemType::Whetstone => Some((Profession::Prospecting, true)),
        ItemType::Arrow => Some((Profession::Carving, true)),
        ItemType::Runes => Some((Profession::Alchemy, true)),
        _ => None,
    }
}

/// Rebuilds per-player [`AgentFacts`] from log records alone.
#[derive(Debug, Clone)]
pub struct FactsLedger {
    rules: LedgerRules,
    facts: Vec<AgentFacts>,
    xp: Vec<[u64; 8]>,
}

impl FactsLedger {
    pub fn new(players: usize, rules: LedgerRules) -> Self {
        let base = rules.level.base;
        let fresh = AgentFacts {
            counts: EventCounts::default(),
            state: StateFacts {
                alive: true,
                born: 0,
                died: None,
                pos: Pos::default(),
                levels: [base; 8],
                gold: rules.base_gold,
                equipped: [None; 6],
                max_distance: 0,
            },
        };
        FactsLedger {
            rules,
            facts: vec![fresh; players],
            xp: vec![[0; 8]; players],
        }
    }

    fn slot(&self, id: EntityId) -> Option<usize> {
        (id > 0 && (id as usize) <= self.facts.len()).then(|| id as usize - 1)
    }

    pub fn facts(&self, id: EntityId) -> Option<&AgentFacts> {
        self.slot(id).map(|i| &self.facts[i])
    }

    pub fn counts(&self, id: EntityId) -> &EventCounts {
        &self.facts[id as usize - 1].counts
    }

    pub fn apply(&mut self, rec: &LogRecord) {
        match rec {
            LogRecord::Position { id, pos, .. } => {
                if let Some(i) = self.slot(*id) {
                    self.facts[i].state.pos = *pos;
                }
            }
            LogRecord::Event(e) => self.apply_event(e),
        }
    }

    fn gain(&mut self, i: usize, skill: Skill, xp: u64) {
        self.xp[i][skill.index()] += xp;
        let lvl = self.rules.level.level_for(self.xp[i][skill.index()]);
        let cur = &mut self.facts[i].state.levels[skill.index()];
        *cur = (*cur).max(lvl);
    }

    pub fn apply_event(&mut self, e: &GameEvent) {
        // Gold received by a player who is not the subject.
        if e.kind == EventKind::GiveGold {
            if let Some(j) = self.slot(e.target) {
                self.facts[j].state.gold += e.amount;
            }
        }
        let Some(i) = self.slot(e.subject) else { return };
        let lvl = (e.level as usize).min(10);
        let item = ItemType::from_u8(e.item);
        let f = &mut self.facts[i];
        f.counts.by_kind[e.kind.index()] += 1;
        match e.kind {
            EventKind::ScoreHit => {
                if self.rules.progression {
                    if let Some(style) = Style::from_index(e.item as usize) {
                        self.gain(i, Skill::Combat(style), self.rules.combat_xp);
                    }
                }
            }
            EventKind::PlayerKill => f.state.gold += e.amount,
            EventKind::DefeatNpc => {
                f.counts.defeats_by_level[lvl] += 1;
                f.state.gold += e.amount;
            }
            EventKind::GoFarthest => f.state.max_distance = e.amount as i32,
            EventKind::HarvestItem => {
                if let Some(item) = item {
                    f.counts.harvest[item as usize][lvl] += 1;
                    if let Some((prof, ammo)) = harvest_skill(item) {
                        let xp = if ammo { self.rules.ammunition_xp } else { self.rules.consumable_xp };
                        self.gain(i, Skill::Harvest(prof), xp);
                    }
                }
            }
            EventKind::ConsumeItem => {
                if let Some(item) = item {
                    f.counts.consume[item as usize][lvl] += 1;
                }
            }
            EventKind::EquipItem => {
                if let Some(slot) = item.and_then(|k| k.slot()) {
                    if e.amount == 1 {
                        f.counts.equip[e.item as usize][lvl] += 1;
                        f.state.equipped[slot_index(slot)] = Some((item.unwrap(), e.level));
                    } else {
                        f.state.equipped[slot_index(slot)] = None;
                    }
                }
            }
            EventKind::FireAmmo => {
                if e.amount == 0 {
                    f.state.equipped[slot_index(Slot::Ammunition)] = None;
                }
            }
            EventKind::BuyItem => {
                f.state.gold -= e.amount;
                f.counts.spent += e.amount;
            }
            EventKind::EarnGold => {
                f.state.gold += e.amount;
                f.counts.earned += e.amount;
            }
            EventKind::GiveGold => f.state.gold -= e.amount,
            EventKind::AgentDeath => {
                f.state.alive = false;
                f.state.died = Some(e.tick);
                f.state.gold -= e.amount;
                f.state.equipped = [None; 6];
            }
            _ => {}
        }
    }
}

/// Weights for optional dense shaping terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShapingWeights {
    pub health: f64,
    pub xp: f64,
    pub equipment: f64,
    pub gold: f64,
}

/// Per-tick change in an agent's shaping quantities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShapingDelta {
    pub health: f64,
    pub xp: f64,
    pub equipment: f64,
    pub gold: f64,
}

pub fn shaped_reward(task_reward: f64, d: &ShapingDelta, w: &ShapingWeights) -> f64 {
    task_reward + w.health * d.health + w.xp * d.xp + w.equipment * d.equipment + w.gold * d.gold
}

/// Context bits copied into the first 11 embedding entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbedFlags {
    pub team_game: bool,
    pub agent_game: bool,
    pub subsystems: BTreeSet<Subsystem>,
}

pub const EMBED_FLAGS: usize = 11;
pub const EMBED_HASH: usize = 16;
pub const EMBED_LEN: usize = EMBED_FLAGS + EMBED_HASH;

pub fn embed_task(pred: &Predicate, flags: &EmbedFlags) -> [f32; EMBED_LEN] {
    let mut out = [0f32; EMBED_LEN];
    out[0] = flags.team_game as u8 as f32;
    out[1] = flags.agent_game as u8 as f32;
    for (i, sub) in Subsystem::OPTIONAL.iter().enumerate() {
        out[2 + i] = flags.subsystems.contains(sub) as u8 as f32;
    }
    let digest = Sha256::digest(pred.canonical().as_bytes());
    for (i, b) in digest.iter().take(EMBED_HASH).enumerate() {
        out[EMBED_FLAGS + i] = (*b as f64 / 127.5 - 1.0) as f32;
    }
    out
}

/// The 63-task evaluation suite.
pub fn evaluation_suite() -> Vec<TaskSpec> {
    use Category as C;
    use Predicate as P;
    let mut s = vec![TaskSpec::new(P::TickGE { n: 1024 }, C::Survival)];
    s.push(TaskSpec::new(P::CountEvent { kind: EventKind::PlayerKill, n: 20 }, C::Combat));
    for min_level in [1, 3] {
        s.push(TaskSpec::new(P::DefeatEntity { min_level, n: 20 }, C::Combat));
    }
    s.push(TaskSpec::new(P::CountEvent { kind: EventKind::GoFarthest, n: 64 }, C::Exploration));
    s.push(TaskSpec::new(P::OccupyTile { row: 80, col: 80 }, C::Exploration));
    for skill in Skill::ALL {
        s.push(TaskSpec::new(P::AttainSkill { skill, level: 10 }, C::Skill));
    }
    for min_level in [1, 3] {
        for item in [ItemType::Whetstone, ItemType::Arrow, ItemType::Runes] {
            s.push(TaskSpec::new(P::HarvestItem { item, min_level, n: 20 }, C::Item));
        }
        for item in [ItemType::Ration, ItemType::Potion] {
            s.push(TaskSpec::new(P::ConsumeItem { item, min_level, n: 20 }, C::Item));
        }
        for item in ItemType::ALL.iter().copied().filter(|k| k.slot().is_some()) {
            s.push(TaskSpec::new(P::EquipItem { item, min_level, n: 1 }, C::Item));
        }
        for style in Style::ALL {
            s.push(TaskSpec::new(P::FullyArmed { style, min_level, n: 1 }, C::Item));
        }
    }
    s.push(TaskSpec::new(P::CountEvent { kind: EventKind::EarnGold, n: 20 }, C::Market));
    s.push(TaskSpec::new(P::CountEvent { kind: EventKind::BuyItem, n: 20 }, C::Market));
    s.push(TaskSpec::new(P::EarnGold { amount: 100 }, C::Market));
    s.push(TaskSpec::new(P::HoardGold { amount: 100 }, C::Market));
    s.push(TaskSpec::new(P::MakeProfit { amount: 100 }, C::Market));
    s
}

/// Parameterized variants of the suite's predicate families, for curricula.
pub fn task_variants(thresholds: &[u32], levels: &[u8]) -> Vec<TaskSpec> {
    use Category as C;
    use Predicate as P;
    let mut out = Vec::new();
    for &n in thresholds {
        out.push(TaskSpec::new(P::TickGE { n }, C::Survival));
        for kind in [EventKind::PlayerKill, EventKind::EatFood, EventKind::DrinkWater, EventKind::ScoreHit] {
            out.push(TaskSpec::new(P::CountEvent { kind, n }, C::Combat));
        }
        for &min_level in levels {
            out.push(TaskSpec::new(P::DefeatEntity { min_level, n }, C::Combat));
            for item in ItemType::ALL {
                let pred = if item.is_consumable() {
                    P::ConsumeItem { item, min_level, n }
                } else {
                    P::HarvestItem { item, min_level, n }
                };
                out.push(TaskSpec::new(pred, C::Item));
            }
        }
    }
    for &level in levels {
        for skill in Skill::ALL {
            out.push(TaskSpec::new(P::AttainSkill { skill, level: level.max(2) }, C::Skill));
        }
    }
    out
}

/// Weighted score in `[0, 100]`: each category contributes `100/6` times the
/// mean max-progress of its tasks.
pub fn normalized_score(results: &[(Category, f64)]) -> Result<f64, TaskError> {
    let mut total = 0.0;
    for cat in Category::ALL {
        let vals: Vec<f64> = results.iter().filter(|(c, _)| *c == cat).map(|(_, v)| *v).collect();
        if vals.is_empty() {
            return Err(TaskError::MissingCategory(cat));
        }
        total += 100.0 / 6.0 * vals.iter().sum::<f64>() / vals.len() as f64;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rules() -> LedgerRules {
        LedgerRules {
            progression: true,
            combat_xp: 10,
            ammunition_xp: 10,
            consumable_xp: 10,
            level: LevelRule { base: 1, max: 10, threshold: 20 },
            base_gold: 0,
        }
    }

    fn ctx() -> EvalContext<'static> {
        EvalContext {
            tick: 512,
            center: Pos::new(80, 80),
            radius: 63,
            winner: None,
            team_hold: &[],
            leader_alive: &[],
        }
    }

    #[test]
    fn suite_shape() {
        let suite = evaluation_suite();
        assert_eq!(suite.len(), 63);
        let count = |c| suite.iter().filter(|t| t.category == c).count();
        assert_eq!(
            Category::ALL.map(count),
            [1, 3, 2, 8, 44, 5]
        );
        let unique: BTreeSet<String> = suite.iter().map(|t| t.predicate.canonical()).collect();
        assert_eq!(unique.len(), 63);
    }

    #[test]
    fn canonical_form() {
        assert_eq!(Predicate::TickGE { n: 1024 }.canonical(), "TickGE(num_tick=1024)");
        assert_eq!(
            Predicate::OccupyTile { row: 80, col: 80 }.canonical(),
            "OccupyTile(col=80,row=80)"
        );
        assert_eq!(
            Predicate::CountEvent { kind: EventKind::PlayerKill, n: 20 }.canonical(),
            "CountEvent(event=PLAYER_KILL,n=20)"
        );
    }

    #[test]
    fn embeddings() {
        let flags = EmbedFlags::default();
        let p = Predicate::TickGE { n: 1024 };
        let a = embed_task(&p, &flags);
        assert_eq!(a, embed_task(&p, &flags));
        assert!(a[..EMBED_FLAGS].iter().all(|v| *v == 0.0));
        assert!(a[EMBED_FLAGS..].iter().all(|v| (-1.0..=1.0).contains(v)));
        // first digest byte of the canonical string, mapped independently
        let digest = Sha256::digest(b"TickGE(num_tick=1024)");
        assert_eq!(a[11], (digest[0] as f64 / 127.5 - 1.0) as f32);

        let vecs: BTreeSet<Vec<u32>> = evaluation_suite()
            .iter()
            .map(|t| embed_task(&t.predicate, &flags).iter().map(|v| v.to_bits()).collect())
            .collect();
        assert_eq!(vecs.len(), 63);

        let mut flags = EmbedFlags { team_game: true, ..Default::default() };
        flags.subsystems.insert(Subsystem::Exchange);
        let v = embed_task(&p, &flags);
        assert_eq!(&v[..11], &[1., 0., 0., 0., 0., 0., 0., 0., 0., 0., 1.]);
    }

    #[test]
    fn predicate_examples() {
        let mut ledger = FactsLedger::new(1, rules());
        let f = ledger.facts(1).unwrap().clone();
        assert_eq!(agent_progress(&Predicate::TickGE { n: 1024 }, 1, None, &f, &ctx()), 0.5);
        for t in 0..20 {
            ledger.apply_event(&GameEvent::new(t, 1, EventKind::PlayerKill).target(2));
        }
        let f = ledger.facts(1).unwrap().clone();
        let kills = Predicate::CountEvent { kind: EventKind::PlayerKill, n: 20 };
        assert_eq!(agent_progress(&kills, 1, None, &f, &ctx()), 1.0);
        ledger.apply(&LogRecord::Position { tick: 3, id: 1, pos: Pos::new(80, 80) });
        let f = ledger.facts(1).unwrap().clone();
        let occupy = Predicate::OccupyTile { row: 80, col: 80 };
        assert_eq!(agent_progress(&occupy, 1, None, &f, &ctx()), 1.0);
        ledger.apply(&LogRecord::Position { tick: 4, id: 1, pos: Pos::new(80, 81) });
        let f = ledger.facts(1).unwrap().clone();
        let p = agent_progress(&occupy, 1, None, &f, &ctx());
        assert!((p - 0.99 * (1.0 - 1.0 / 63.0)).abs() < 1e-12);
    }

    #[test]
    fn reward_examples() {
        let mut st = TaskState::default();
        st.update(0.30);
        assert!((st.update(0.45) - 0.15).abs() < 1e-12);
        assert_eq!(st.update(0.2), 0.0);
        assert_eq!(st.max_progress, 0.45);
        st.update(0.95);
        assert!((st.update(1.0) - 0.05).abs() < 1e-12);
        assert!(st.completed);
    }

    #[test]
    fn shaping_examples() {
        let w = ShapingWeights { health: 0.01, ..Default::default() };
        assert_eq!(shaped_reward(0.0, &ShapingDelta::default(), &w), 0.0);
        let d = ShapingDelta { health: -10.0, ..Default::default() };
        assert!((shaped_reward(0.0, &d, &w) + 0.1).abs() < 1e-12);
        let d = ShapingDelta { health: 3.0, xp: 5.0, equipment: 2.0, gold: 7.0 };
        assert_eq!(shaped_reward(0.25, &d, &ShapingWeights::default()), 0.25);
    }

    #[test]
    fn normalized_score_examples() {
        let suite = evaluation_suite();
        let all: Vec<_> = suite.iter().map(|t| (t.category, 1.0)).collect();
        assert!((normalized_score(&all).unwrap() - 100.0).abs() < 1e-9);
        let surv: Vec<_> = suite
            .iter()
            .map(|t| (t.category, if t.category == Category::Survival { 1.0 } else { 0.0 }))
            .collect();
        assert!((normalized_score(&surv).unwrap() - 100.0 / 6.0).abs() < 1e-12);
        assert_eq!(
            normalized_score(&[(Category::Survival, 1.0)]),
            Err(TaskError::MissingCategory(Category::Combat))
        );
    }

    #[test]
    fn fully_armed_partial_credit() {
        let mut ledger = FactsLedger::new(1, rules());
        let equip = |item: ItemType, lvl: u8| GameEvent::new(1, 1, EventKind::EquipItem).item(item as u8, lvl).amount(1);
        ledger.apply_event(&equip(ItemType::Hat, 1));
        ledger.apply_event(&equip(ItemType::Top, 1));
        let armed = Predicate::FullyArmed { style: Style::Melee, min_level: 1, n: 1 };
        let f = ledger.facts(1).unwrap().clone();
        assert!((agent_progress(&armed, 1, None, &f, &ctx()) - 0.495).abs() < 1e-12);
        ledger.apply_event(&equip(ItemType::Bottom, 1));
        ledger.apply_event(&equip(ItemType::Bow, 1));
        let f = ledger.facts(1).unwrap().clone();
        assert!((agent_progress(&armed, 1, None, &f, &ctx()) - 0.7425).abs() < 1e-12);
        ledger.apply_event(&equip(ItemType::Spear, 1));
        let f = ledger.facts(1).unwrap().clone();
        assert_eq!(agent_progress(&armed, 1, None, &f, &ctx()), 1.0);
    }

    proptest! {
        #[test]
        fn max_progress_monotone_and_telescoping(seq in proptest::collection::vec(0.0f64..1.2, 1..200)) {
            let mut st = TaskState::default();
            let mut sum = 0.0;
            let mut last = 0.0;
            for p in seq {
                sum += st.update(p);
                prop_assert!(st.max_progress >= last);
                prop_assert!((0.0..=1.0).contains(&st.progress));
                prop_assert!(st.max_progress >= st.progress);
                prop_assert_eq!(st.completed, st.max_progress >= 1.0);
                last = st.max_progress;
            }
            prop_assert!((sum - st.max_progress).abs() < 1e-9);
        }
    }
}
