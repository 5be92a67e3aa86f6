//! Damage law and NPC stat rolls.

use crate::config::Settings;
use crate::entity::{Disposition, Entity, NpcStats, Style};
use crate::items::{equipment_stats, EquipmentRules};

pub fn equipment_rules(s: &Settings) -> EquipmentRules {
    EquipmentRules {
        weapon: (s.weapon_base, s.weapon_level),
        ammunition: (s.ammo_base, s.ammo_level),
        tool: (s.tool_base, s.tool_level),
        armor: (s.armor_base, s.armor_level),
    }
}

/// Raw offense before the weakness multiplier.
pub fn offense(attacker: &Entity, style: Style, s: &Settings) -> f64 {
    if let Some(npc) = attacker.npc {
        return npc.damage as f64;
    }
    let i = style.index();
    let base = if s.progression {
        s.progression_style_base[i] + s.progression_style_level[i] * attacker.style_level(style) as i32
    } else {
        s.style_damage[i]
    };
    let gear = if s.equipment {
        equipment_stats(&attacker.inventory, &equipment_rules(s)).0
    } else {
        0
    };
    (base + gear) as f64
}

pub fn defense(defender: &Entity, s: &Settings) -> f64 {
    if let Some(npc) = defender.npc {
        return npc.defense as f64;
    }
    let level = if s.progression {
        s.progression_base_defense + s.progression_level_defense * defender.max_combat_level() as i32
    } else {
        0
    };
    let gear = if s.equipment {
        equipment_stats(&defender.inventory, &equipment_rules(s)).1
    } else {
        0
    };
    (level + gear) as f64
}

/// `max(floor(offense - defense), ceil(min_proportion * offense))`, with
/// offense multiplied when the style beats the defender's active style.
pub fn compute_damage(attacker: &Entity, defender: &Entity, style: Style, s: &Settings) -> i32 {
    let mut off = offense(attacker, style, s);
    if style.beats() == defender.active_style {
        off *= s.weakness_multiplier;
    }
    let def = defense(defender, s);
    let raw = (off - def).floor();
    let floor = (s.min_damage_proportion * off - 1e-9).ceil();
    raw.max(floor).max(0.0) as i32
}

/// NPC stats at spawn: health unscaled, damage and defense scaled by the
/// level multiplier and rounded down.
pub fn npc_stats(level: u8, s: &Settings) -> (i32, NpcStats) {
    let l = level as i32;
    let health = s.npc_base_health + s.npc_level_health * l;
    let damage = ((s.npc_base_damage + s.npc_level_damage * l) as f64 * s.npc_level_multiplier).floor() as i32;
    let defense = ((s.npc_base_defense + s.npc_level_defense * l) as f64 * s.npc_level_multiplier).floor() as i32;
    (health, NpcStats { level, damage, defense })
}

/// Disposition from the spawn tile's fractional distance to the center.
/// Each threshold is a closed upper bound.
pub fn disposition(frac: f64, s: &Settings) -> Disposition {
    if frac <= s.npc_aggressive {
        Disposition::Aggressive
    } else if frac <= s.npc_neutral {
        Disposition::Neutral
    } else {
        Disposition::Passive
    }
}
