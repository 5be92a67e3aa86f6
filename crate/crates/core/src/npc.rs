//! Scripted NPC behavior and population upkeep.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::combat::{disposition, npc_stats};
use crate::entity::{Disposition, Entity, EntityId, EntityKind, SkillState, Style};
use crate::items::Inventory;
use crate::state::{Action, NpcRegion, WorldState};
use crate::world::{Dir, Pos};

/// Rejection-sampling budget for one placement.
const PLACEMENT_TRIES: usize = 32;

/// Chebyshev width of the edge and center spawn bands.
pub const SPAWN_BAND: i32 = 4;

/// Chooses this tick's action for a live NPC.
pub fn decide(st: &mut WorldState, id: EntityId) -> Action {
    let npc = st.entity(id).expect("live npc");
    let EntityKind::Npc(disp) = npc.kind else {
        return Action::default();
    };
    let pos = npc.pos;
    let style = npc.active_style;
    let reach = st.s.style_reach[style.index()];
    let target = match disp {
        Disposition::Passive => None,
        Disposition::Neutral => {
            let t = npc.last_attacker;
            (npc.in_combat(st.tick) && t != 0)
                .then(|| st.entity(t))
                .flatten()
                .filter(|e| e.alive && e.health > 0)
                .map(|e| (e.id, e.pos))
        }
        Disposition::Aggressive => nearest_target(st, npc),
    };
    match target {
        Some((tid, tpos)) if pos.chebyshev(tpos) <= reach => Action {
            attack: Some((style, tid)),
            ..Action::default()
        },
        Some((_, tpos)) => Action {
            mv: Some(step_toward(st, pos, tpos)),
            ..Action::default()
        },
        None => Action {
            mv: Some(wander(st, pos)),
            ..Action::default()
        },
    }
}

/// Nearest visible attackable entity by (distance, id).
fn nearest_target(st: &WorldState, npc: &Entity) -> Option<(EntityId, Pos)> {
    let allow_npcs = st.s.npc_attack_npcs;
    st.visible(npc.pos, st.s.vision_radius)
        .filter(|e| e.id != npc.id && e.health > 0 && !e.immune(st.tick) && (e.is_player() || allow_npcs))
        .min_by_key(|e| (npc.pos.chebyshev(e.pos), e.id))
        .map(|e| (e.id, e.pos))
}

/// Greedy step that most reduces Chebyshev distance; ties keep direction order.
pub fn step_toward(st: &WorldState, from: Pos, to: Pos) -> Dir {
    let mut best = Dir::Stay;
    let mut best_d = from.chebyshev(to);
    let mut best_m = from.manhattan(to);
    for d in Dir::MOVES {
        let p = from.step(d);
        if !st.map.passable(p) {
            continue;
        }
        let (cd, md) = (p.chebyshev(to), p.manhattan(to));
        if (cd, md) < (best_d, best_m) {
            best = d;
            best_d = cd;
            best_m = md;
        }
    }
    best
}

fn wander(st: &mut WorldState, from: Pos) -> Dir {
    let mut options = [Dir::Stay; 4];
    let mut n = 0;
    for d in Dir::MOVES {
        if st.map.passable(from.step(d)) {
            options[n] = d;
            n += 1;
        }
    }
    options[..n].choose(&mut st.rng).copied().unwrap_or(Dir::Stay)
}

fn region_tile(st: &mut WorldState, region: NpcRegion, attempt: u32) -> Pos {
    let ctr = st.map.center();
    let radius = st.map.radius();
    let band = match region {
        NpcRegion::Anywhere => (0, radius),
        NpcRegion::EdgeRing => ((radius - SPAWN_BAND).max(0), radius),
        NpcRegion::Center => (0, SPAWN_BAND.min(radius)),
        NpcRegion::EdgeAndCenter if attempt % 2 == 0 => ((radius - SPAWN_BAND).max(0), radius),
        NpcRegion::EdgeAndCenter => (0, SPAWN_BAND.min(radius)),
    };
    loop {
        let r = st.rng.random_range(-band.1..=band.1);
        let c = st.rng.random_range(-band.1..=band.1);
        if r.abs().max(c.abs()) >= band.0 {
            return Pos::new(ctr.r + r, ctr.c + c);
        }
    }
}

/// Runs one tick of NPC upkeep and returns the number of NPCs placed.
///
/// Up to `NPC_SPAWN_ATTEMPTS` placements happen while the live population is
/// below target. Without refill the total ever spawned is capped at the
/// target as well.
pub fn spawn_tick(st: &mut WorldState) -> u32 {
    if !st.s.npc {
        return 0;
    }
    let mut placed = 0;
    for attempt in 0..st.s.npc_spawn_attempts {
        if st.npc_alive >= st.npc_target {
            break;
        }
        if !st.s.npc_refill && st.npc_spawned >= st.npc_target {
            break;
        }
        let region = st.npc_region;
        let mut spot = None;
        for _ in 0..PLACEMENT_TRIES {
            let p = region_tile(st, region, attempt);
            if st.map.passable(p) && !st.occ.occupied(p) {
                spot = Some(p);
                break;
            }
        }
        let Some(pos) = spot else { continue };
        spawn_npc(st, pos);
        placed += 1;
    }
    placed
}

fn spawn_npc(st: &mut WorldState, pos: Pos) {
    let s = &st.s;
    let level = st.rng.random_range(s.npc_level_min..=s.npc_level_max.max(s.npc_level_min)) as u8;
    let (health, stats) = npc_stats(level, s);
    let frac = if st.map.radius() > 0 {
        st.map.center_distance(pos) as f64 / st.map.radius() as f64
    } else {
        0.0
    };
    let disp = disposition(frac, s);
    let style = Style::ALL[st.rng.random_range(0..3)];
    let id = -(st.npcs.len() as EntityId + 1);
    let gold = if st.s.exchange { level as u64 } else { 0 };
    let npc = Entity {
        id,
        kind: EntityKind::Npc(disp),
        team: None,
        pos,
        spawn_pos: pos,
        health,
        max_health: health,
        food: 0,
        water: 0,
        max_gauge: 0,
        skills: [SkillState { level, xp: 0 }; 8],
        gold,
        immune_until: 0,
        in_combat_until: 0,
        alive: true,
        born: st.tick,
        died: None,
        token: 0,
        last_attacker: 0,
        active_style: style,
        resilient: false,
        leader: false,
        inventory: Inventory::default(),
        npc: Some(stats),
        damage_taken: 0,
        max_distance: 0,
    };
    st.npcs.push(npc);
    st.npc_alive += 1;
    st.npc_spawned += 1;
    st.occ_add(st.players.len() + st.npcs.len() - 1, pos);
}
