//! Players and NPCs.

use serde::{Deserialize, Serialize};

use crate::items::Inventory;
use crate::world::Pos;

/// Entity identifier: players are positive, NPCs negative.
pub type EntityId = i32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Style {
    Melee,
    Range,
    Mage,
}

impl Style {
    pub const ALL: [Style; 3] = [Style::Melee, Style::Range, Style::Mage];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Style> {
        Style::ALL.get(i).copied()
    }

    /// The style this one is super-effective against.
    pub fn beats(self) -> Style {
        match self {
            Style::Melee => Style::Range,
            Style::Range => Style::Mage,
            Style::Mage => Style::Melee,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Style::Melee => "Melee",
            Style::Range => "Range",
            Style::Mage => "Mage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Profession {
    Fishing,
    Herbalism,
    Prospecting,
    Carving,
    Alchemy,
}

impl Profession {
    pub const ALL: [Profession; 5] = [
        Profession::Fishing,
        Profession::Herbalism,
        Profession::Prospecting,
        Profession::Carving,
        Profession::Alchemy,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Profession::Fishing => "Fishing",
            Profession::Herbalism => "Herbalism",
            Profession::Prospecting => "Prospecting",
            Profession::Carving => "Carving",
            Profession::Alchemy => "Alchemy",
        }
    }
}

/// One of the eight trainable skills: three combat styles then five professions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Skill {
    Combat(Style),
    Harvest(Profession),
}

impl Skill {
    pub const ALL: [Skill; 8] = [
        Skill::Combat(Style::Melee),
        Skill::Combat(Style::Range),
        Skill::Combat(Style::Mage),
        Skill::Harvest(Profession::Fishing),
        Skill::Harvest(Profession::Herbalism),
        Skill::Harvest(Profession::Prospecting),
        Skill::Harvest(Profession::Carving),
        Skill::Harvest(Profession::Alchemy),
    ];

    pub fn index(self) -> usize {
        match self {
            Skill::Combat(s) => s.index(),
            Skill::Harvest(p) => 3 + p.index(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Skill::Combat(s) => s.name(),
            Skill::Harvest(p) => p.name(),
        }
    }
}

/// Experience-to-level law. Advancing from level `L` to `L + 1` costs
/// `threshold * (L - base + 1)` XP, so the cumulative requirement for
/// `base + k` is `threshold * k * (k + 1) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRule {
    pub base: u8,
    pub max: u8,
    pub threshold: u32,
}

impl LevelRule {
    pub fn xp_for(&self, level: u8) -> u64 {
        let k = level.saturating_sub(self.base) as u64;
        self.threshold as u64 * k * (k + 1) / 2
    }

    pub fn level_for(&self, xp: u64) -> u8 {
        let mut level = self.base;
        while level < self.max && xp >= self.xp_for(level + 1) {
            level += 1;
        }
        level
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SkillState {
    pub level: u8,
    pub xp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Disposition {
    Passive,
    Neutral,
    Aggressive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    Player,
    Npc(Disposition),
}

/// Fixed stats rolled when an NPC spawns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NpcStats {
    pub level: u8,
    pub damage: i32,
    pub defense: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub team: Option<u16>,
    pub pos: Pos,
    pub spawn_pos: Pos,
    pub health: i32,
    pub max_health: i32,
    pub food: i32,
    pub water: i32,
    pub max_gauge: i32,
    /// Melee, Range, Mage, then the five professions.
    pub skills: [SkillState; 8],
    pub gold: u64,
    pub immune_until: u32,
    pub in_combat_until: u32,
    pub alive: bool,
    pub born: u32,
    pub died: Option<u32>,
    /// Token broadcast this tick; 0 means silent.
    pub token: u8,
    /// Most recent attacker, 0 if none.
    pub last_attacker: EntityId,
    /// Style used most recently; defines weakness for incoming attacks.
    pub active_style: Style,
    pub resilient: bool,
    pub leader: bool,
    pub inventory: Inventory,
    pub npc: Option<NpcStats>,
    pub damage_taken: i32,
    pub max_distance: i32,
}

impl Entity {
    pub fn is_player(&self) -> bool {
        self.kind == EntityKind::Player
    }

    pub fn is_npc(&self) -> bool {
        !self.is_player()
    }

    pub fn level(&self, skill: Skill) -> u8 {
        self.skills[skill.index()].level
    }

    pub fn style_level(&self, style: Style) -> u8 {
        self.level(Skill::Combat(style))
    }

    pub fn max_combat_level(&self) -> u8 {
        Style::ALL.iter().map(|s| self.style_level(*s)).max().unwrap_or(1)
    }

    pub fn max_skill_level(&self) -> u8 {
        self.skills.iter().map(|s| s.level).max().unwrap_or(1)
    }

    /// Highest-level combat style; ties go to the earlier style.
    pub fn best_style(&self) -> Style {
        let mut best = Style::Melee;
        for s in Style::ALL {
            if self.style_level(s) > self.style_level(best) {
                best = s;
            }
        }
        best
    }

    /// Adds XP and returns the new level.
    pub fn gain_xp(&mut self, skill: Skill, xp: u64, rule: &LevelRule) -> u8 {
        let st = &mut self.skills[skill.index()];
        st.xp += xp;
        st.level = rule.level_for(st.xp).max(st.level);
        st.level
    }

    pub fn in_combat(&self, tick: u32) -> bool {
        tick < self.in_combat_until
    }

    pub fn immune(&self, tick: u32) -> bool {
        tick < self.immune_until
    }

    pub fn same_team(&self, other: &Entity) -> bool {
        matches!((self.team, other.team), (Some(a), Some(b)) if a == b)
    }

    pub fn lifespan(&self, now: u32) -> u32 {
        self.died.unwrap_or(now).saturating_sub(self.born)
    }
}
