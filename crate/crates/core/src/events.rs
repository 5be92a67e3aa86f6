//! Append-only event log and its line-delimited text form.
//!
//! Each record is one line. Events:
//!
//! ```text
//! E <tick> <subject> <KIND> <target> <item> <level> <amount>
//! ```
//!
//! Position records (written whenever a player's tile changes):
//!
//! ```text
//! P <tick> <id> <row> <col>
//! ```
//!
//! Payload conventions per kind are listed on [`EventKind`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entity::EntityId;
use crate::world::Pos;

/// Event types. Payload fields not listed are zero.
///
/// * `SCORE_HIT`: target, item = style index, amount = damage
/// * `PLAYER_KILL`: target = victim, amount = gold taken
/// * `DEFEAT_NPC`: target = npc, level = npc level, amount = gold taken
/// * `GO_FARTHEST`: amount = new max distance from spawn
/// * `HARVEST_ITEM`, `CONSUME_ITEM`, `DESTROY_ITEM`, `FIRE_AMMO`: item, level, amount = quantity
/// * `EQUIP_ITEM`: item, level, amount = 1 when equipping, 0 when unequipping
/// * `GIVE_ITEM`: target, item, level, amount = quantity
/// * `LIST_ITEM`: item, level, amount = price
/// * `BUY_ITEM`: target = seller, item, level, amount = price
/// * `EARN_GOLD`: target = buyer, item, level, amount = price
/// * `GIVE_GOLD`: target, amount
/// * `SEIZE_TILE`: target = row, amount = col
/// * `AGENT_DEATH`: target = killer or 0, amount = gold lost
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum EventKind {
    EatFood,
    DrinkWater,
    ScoreHit,
    PlayerKill,
    DefeatNpc,
    GoFarthest,
    HarvestItem,
    ConsumeItem,
    EquipItem,
    GiveItem,
    DestroyItem,
    ListItem,
    BuyItem,
    EarnGold,
    GiveGold,
    FireAmmo,
    SeizeTile,
    AgentDeath,
}

impl EventKind {
    pub const ALL: [EventKind; 18] = [
        EventKind::EatFood,
        EventKind::DrinkWater,
        EventKind::ScoreHit,
        EventKind::PlayerKill,
        EventKind::DefeatNpc,
        EventKind::GoFarthest,
        EventKind::HarvestItem,
        EventKind::ConsumeItem,
        EventKind::EquipItem,
        EventKind::GiveItem,
        EventKind::DestroyItem,
        EventKind::ListItem,
        EventKind::BuyItem,
        EventKind::EarnGold,
        EventKind::GiveGold,
        EventKind::FireAmmo,
        EventKind::SeizeTile,
        EventKind::AgentDeath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::EatFood => "EAT_FOOD",
            EventKind::DrinkWater => "DRINK_WATER",
            EventKind::ScoreHit => "SCORE_HIT",
            EventKind::PlayerKill => "PLAYER_KILL",
            EventKind::DefeatNpc => "DEFEAT_NPC",
            EventKind::GoFarthest => "GO_FARTHEST",
            EventKind::HarvestItem => "HARVEST_ITEM",
            EventKind::ConsumeItem => "CONSUME_ITEM",
            EventKind::EquipItem => "EQUIP_ITEM",
            EventKind::GiveItem => "GIVE_ITEM",
            EventKind::DestroyItem => "DESTROY_ITEM",
            EventKind::ListItem => "LIST_ITEM",
            EventKind::BuyItem => "BUY_ITEM",
            EventKind::EarnGold => "EARN_GOLD",
            EventKind::GiveGold => "GIVE_GOLD",
            EventKind::FireAmmo => "FIRE_AMMO",
            EventKind::SeizeTile => "SEIZE_TILE",
            EventKind::AgentDeath => "AGENT_DEATH",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = LogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LogError(format!("unknown event kind {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameEvent {
    pub tick: u32,
    pub subject: EntityId,
    pub kind: EventKind,
    pub target: i32,
    pub item: u8,
    pub level: u8,
    pub amount: i64,
}

impl GameEvent {
    pub fn new(tick: u32, subject: EntityId, kind: EventKind) -> Self {
        GameEvent {
            tick,
            subject,
            kind,
            target: 0,
            item: 0,
            level: 0,
            amount: 0,
        }
    }

    pub fn target(mut self, t: i32) -> Self {
        self.target = t;
        self
    }

    pub fn item(mut self, item: u8, level: u8) -> Self {
        self.item = item;
        self.level = level;
        self
    }

    pub fn amount(mut self, a: i64) -> Self {
        self.amount = a;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogRecord {
    Event(GameEvent),
    Position { tick: u32, id: EntityId, pos: Pos },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("event log: {0}")]
pub struct LogError(pub String);

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogRecord::Event(e) => write!(
                f,
                "E {} {} {} {} {} {} {}",
                e.tick, e.subject, e.kind, e.target, e.item, e.level, e.amount
            ),
            LogRecord::Position { tick, id, pos } => {
                write!(f, "P {} {} {} {}", tick, id, pos.r, pos.c)
            }
        }
    }
}

impl FromStr for LogRecord {
    type Err = LogError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || LogError(format!("malformed record `{line}`"));
        fn num<T: FromStr>(s: &str) -> Result<T, LogError> {
            s.parse().map_err(|_| LogError(format!("bad number `{s}`")))
        }
        match parts.first() {
            Some(&"E") if parts.len() == 8 => Ok(LogRecord::Event(GameEvent {
                tick: num(parts[1])?,
                subject: num(parts[2])?,
                kind: parts[3].parse()?,
                target: num(parts[4])?,
                item: num(parts[5])?,
                level: num(parts[6])?,
                amount: num(parts[7])?,
            })),
            Some(&"P") if parts.len() == 5 => Ok(LogRecord::Position {
                tick: num(parts[1])?,
                id: num(parts[2])?,
                pos: Pos::new(num(parts[3])?, num(parts[4])?),
            }),
            _ => Err(bad()),
        }
    }
}

/// Append-only log of one episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    records: Vec<LogRecord>,
    events: usize,
}

impl EventLog {
    pub fn push_event(&mut self, e: GameEvent) {
        self.records.push(LogRecord::Event(e));
        self.events += 1;
    }

    pub fn push_position(&mut self, tick: u32, id: EntityId, pos: Pos) {
        self.records.push(LogRecord::Position { tick, id, pos });
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn event_count(&self) -> usize {
        self.events
    }

    pub fn events(&self) -> impl Iterator<Item = &GameEvent> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Event(e) => Some(e),
            _ => None,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.records.len() * 24);
        for r in &self.records {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, LogError> {
        let mut log = EventLog::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match line.parse()? {
                LogRecord::Event(e) => log.push_event(e),
                r @ LogRecord::Position { .. } => log.records.push(r),
            }
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn text_round_trip(tick in 0u32..5000, subject in -300i32..300, k in 0usize..18,
                           target in -300i32..300, item in 0u8..16, level in 0u8..11,
                           amount in -1000i64..1000, r in 0i32..200, c in 0i32..200) {
            let mut log = EventLog::default();
            log.push_event(GameEvent::new(tick, subject, EventKind::ALL[k]).target(target).item(item, level).amount(amount));
            log.push_position(tick, subject, Pos::new(r, c));
            let back = EventLog::from_text(&log.to_text()).unwrap();
            prop_assert_eq!(back, log);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(EventLog::from_text("E 1 2 NOT_AN_EVENT 0 0 0 0").is_err());
        assert!(EventLog::from_text("X 1 2").is_err());
    }
}
