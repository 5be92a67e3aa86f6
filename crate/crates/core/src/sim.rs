//! The fixed per-tick pipeline.
//!
//! Phases run in this order, each over entities in ascending id (NPCs, most
//! negative first, then players):
//!
//! 1. intake: NPC decisions, communication tokens, damage counters reset
//! 2. movement
//! 3. attacks
//! 4. items, market, harvesting, ground items (when Item is enabled)
//! 5. metabolism (when Resource is enabled)
//! 6. fog damage
//! 7. NPC spawning and tile regeneration
//! 8. culling of entities at zero health
//!
//! An entity whose health reached zero earlier in the tick acts no further
//! and cannot be targeted; it is removed at culling.

use rand::seq::IndexedRandom;

use crate::combat::compute_damage;
use crate::economy;
use crate::entity::{EntityId, Skill, Style};
use crate::events::{EventKind, GameEvent};
use crate::items::{Item, ItemType, Slot};
use crate::minigame::protocol_token;
use crate::npc;
use crate::state::{level_rule, Action, WorldState};
use crate::world::{fog_damage, Dir, Material};

/// Items an NPC can drop on defeat.
const NPC_LOOT: [ItemType; 8] = [
    ItemType::Hat,
    ItemType::Top,
    ItemType::Bottom,
    ItemType::Rod,
    ItemType::Gloves,
    ItemType::Pickaxe,
    ItemType::Axe,
    ItemType::Chisel,
];

/// Advances the world one tick. `actions[i]` belongs to player `i + 1`;
/// actions of dead players are ignored.
pub fn step(st: &mut WorldState, actions: &[Action]) {
    st.tick += 1;
    let ids = st.live_ids();
    let npc_actions = intake(st, &ids, actions);
    let act = |id: EntityId| -> Action {
        if id < 0 {
            npc_actions[(-id) as usize - 1]
        } else {
            actions.get(id as usize - 1).copied().unwrap_or_default()
        }
    };

    for &id in &ids {
        if let Some(dir) = act(id).mv {
            move_entity(st, id, dir);
        }
    }
    st.rebuild_occupancy();

    if st.s.combat {
        for &id in &ids {
            if let Some((style, target)) = act(id).attack {
                resolve_attack(st, id, style, target);
            }
        }
    }

    if st.s.item {
        item_phase(st, &ids, actions);
    }
    if st.s.resource {
        for i in 0..st.players.len() {
            metabolism(st, i);
        }
    }
    fog_phase(st);
    npc::spawn_tick(st);
    st.map.tick_regeneration(&mut st.rng);
    cull(st);
    st.rebuild_occupancy();
}

fn acting(st: &WorldState, id: EntityId) -> bool {
    st.entity(id).is_some_and(|e| e.alive && e.health > 0)
}

fn intake(st: &mut WorldState, ids: &[EntityId], actions: &[Action]) -> Vec<Action> {
    let mut npc_actions = vec![Action::default(); st.npcs.len()];
    for &id in ids {
        if id < 0 {
            st.npcs[(-id) as usize - 1].damage_taken = 0;
            npc_actions[(-id) as usize - 1] = npc::decide(st, id);
        }
    }
    for i in 0..st.players.len() {
        st.players[i].damage_taken = 0;
        if !st.players[i].alive {
            st.players[i].token = 0;
            continue;
        }
        let id = i as EntityId + 1;
        st.players[i].token = if !st.s.communication {
            0
        } else if st.s.comm_protocol {
            protocol_token(st, id)
        } else {
            actions.get(i).map_or(0, |a| a.comm)
        };
    }
    npc_actions
}

fn move_entity(st: &mut WorldState, id: EntityId, dir: Dir) {
    if dir == Dir::Stay || !acting(st, id) {
        return;
    }
    let from = st.entity(id).expect("live").pos;
    let to = from.step(dir);
    if !st.map.passable(to) {
        return;
    }
    if !st.s.allow_move_into_occupied && st.occ.count_at(to) > 0 {
        return;
    }
    let fi = st.map.index(from);
    let ti = st.map.index(to);
    st.occ.count[fi] -= 1;
    st.occ.count[ti] += 1;
    let e = st.entity_mut(id).expect("live");
    e.pos = to;
    if id < 0 {
        return;
    }
    st.record_position(id, to);
    let e = &mut st.players[id as usize - 1];
    let d = to.chebyshev(e.spawn_pos);
    if d > e.max_distance {
        e.max_distance = d;
        let ev = GameEvent::new(st.tick, id, EventKind::GoFarthest).amount(d as i64);
        st.emit(ev);
    }
    if to == st.map.center() {
        let ev = GameEvent::new(st.tick, id, EventKind::SeizeTile)
            .target(to.r)
            .amount(to.c as i64);
        st.emit(ev);
    }
}

/// Applies one attack. Illegal attacks are silently ignored.
pub fn resolve_attack(st: &mut WorldState, aid: EntityId, style: Style, tid: EntityId) {
    if aid == tid || !acting(st, aid) || !acting(st, tid) {
        return;
    }
    let s = &st.s;
    let a = st.entity(aid).expect("attacker");
    let t = st.entity(tid).expect("target");
    if a.is_player() && !s.flexible_style && style != a.best_style() {
        return;
    }
    if a.pos.chebyshev(t.pos) > s.style_reach[style.index()] {
        return;
    }
    if t.immune(st.tick) || a.same_team(t) {
        return;
    }
    if a.is_npc() && t.is_npc() && !s.npc_attack_npcs {
        return;
    }
    let dmg = compute_damage(a, t, style, s);
    let tick = st.tick;
    let until = tick + st.s.status_duration;
    {
        let t = st.entity_mut(tid).expect("target");
        t.health -= dmg;
        t.damage_taken += dmg;
        t.last_attacker = aid;
        t.in_combat_until = until;
    }
    {
        let a = st.entity_mut(aid).expect("attacker");
        a.in_combat_until = until;
        a.active_style = style;
    }
    st.emit(
        GameEvent::new(tick, aid, EventKind::ScoreHit)
            .target(tid)
            .item(style.index() as u8, 0)
            .amount(dmg as i64),
    );
    if aid > 0 {
        let i = aid as usize - 1;
        if st.s.progression {
            let rule = level_rule(&st.s);
            let xp = st.s.combat_xp as u64;
            st.players[i].gain_xp(Skill::Combat(style), xp, &rule);
        }
        if st.s.equipment {
            fire_ammo(st, i);
        }
    }
    if st.entity(tid).expect("target").health <= 0 {
        on_kill(st, aid, tid);
    }
}

fn fire_ammo(st: &mut WorldState, i: usize) {
    let inv = &mut st.players[i].inventory;
    let Some(k) = inv.equipped_index(Slot::Ammunition) else { return };
    let item = inv.items[k];
    let remaining = item.quantity.saturating_sub(1);
    if remaining == 0 {
        inv.items.remove(k);
    } else {
        inv.items[k].quantity = remaining;
    }
    let ev = GameEvent::new(st.tick, i as EntityId + 1, EventKind::FireAmmo)
        .item(item.kind as u8, item.level)
        .amount(remaining as i64);
    st.emit(ev);
}

fn on_kill(st: &mut WorldState, aid: EntityId, tid: EntityId) {
    let tick = st.tick;
    let gold = std::mem::take(&mut st.entity_mut(tid).expect("target").gold);
    st.entity_mut(aid).expect("attacker").gold += gold;
    if tid > 0 {
        let v = tid as usize - 1;
        st.pending_loss[v] += gold;
        st.killer[v] = aid;
        if aid > 0 {
            st.emit(
                GameEvent::new(tick, aid, EventKind::PlayerKill)
                    .target(tid)
                    .amount(gold as i64),
            );
        }
        return;
    }
    if aid < 0 {
        return;
    }
    let level = st.entity(tid).and_then(|e| e.npc).map_or(1, |n| n.level);
    st.emit(
        GameEvent::new(tick, aid, EventKind::DefeatNpc)
            .target(tid)
            .item(0, level)
            .amount(gold as i64),
    );
    if st.s.equipment {
        let kind = *NPC_LOOT.choose(&mut st.rng).expect("nonempty");
        let item = Item::new(kind, level.div_ceil(3).max(1));
        let i = aid as usize - 1;
        let cap = st.s.inventory_capacity;
        if let Err(item) = st.players[i].inventory.add(item, cap) {
            let pos = st.players[i].pos;
            st.drop_item(pos, item);
        }
    }
}

fn item_phase(st: &mut WorldState, ids: &[EntityId], actions: &[Action]) {
    for &id in ids.iter().filter(|id| **id > 0) {
        let Some(a) = actions.get(id as usize - 1).copied() else { continue };
        if !acting(st, id) {
            continue;
        }
        if let Some(slot) = a.use_item {
            let _ = economy::use_item(st, id, slot);
        }
        if let Some(slot) = a.destroy {
            let _ = economy::destroy_item(st, id, slot);
        }
        if let Some((slot, to)) = a.give_item {
            let _ = economy::give_item(st, id, slot, to);
        }
        if let Some((to, amount)) = a.give_gold {
            let _ = economy::give_gold(st, id, to, amount);
        }
        if let Some((slot, price)) = a.sell {
            let _ = economy::sell(st, id, slot, price);
        }
        if let Some(listing) = a.buy {
            let _ = economy::buy(st, id, listing);
        }
    }
    for &id in ids.iter().filter(|id| **id > 0) {
        if !acting(st, id) {
            continue;
        }
        if st.s.profession {
            let _ = economy::harvest(st, id);
        }
        economy::pick_up(st, id);
    }
    economy::expire(st);
}

/// Food and water upkeep for player `i`.
pub fn metabolism(st: &mut WorldState, i: usize) {
    let id = i as EntityId + 1;
    if !acting(st, id) {
        return;
    }
    let s = &st.s;
    let (rate, starve, dehydrate) = (s.depletion_rate, s.starvation_rate, s.dehydration_rate);
    let restore_frac = s.harvest_restore_fraction;
    let regen_frac = s.regen_threshold;
    let heal_frac = s.health_restore_fraction;
    let increment = s.health_increment;
    let reduction = s.damage_reduction;
    let tick = st.tick;
    let pos = st.players[i].pos;
    let mut events = Vec::new();
    {
        let p = &mut st.players[i];
        p.food = (p.food - rate).max(0);
        p.water = (p.water - rate).max(0);
    }
    let cap = st.players[i].max_gauge;
    let restore = (restore_frac * cap as f64).floor() as i32;
    if st.players[i].food < cap && st.map.material(pos) == Material::Foliage && st.map.harvest(pos) {
        let p = &mut st.players[i];
        p.food = (p.food + restore).min(cap);
        events.push(GameEvent::new(tick, id, EventKind::EatFood));
    }
    if st.players[i].water < cap && st.map.adjacent_to(pos, Material::Water) {
        let p = &mut st.players[i];
        p.water = (p.water + restore).min(cap);
        events.push(GameEvent::new(tick, id, EventKind::DrinkWater));
    }
    let p = &mut st.players[i];
    let scale = |dmg: i32| {
        if p.resilient {
            (dmg as f64 * (1.0 - reduction)).floor() as i32
        } else {
            dmg
        }
    };
    let mut dmg = 0;
    if p.food == 0 {
        dmg += scale(starve);
    }
    if p.water == 0 {
        dmg += scale(dehydrate);
    }
    p.health -= dmg;
    p.damage_taken += dmg;
    let threshold = regen_frac * cap as f64;
    if p.health > 0 && p.food as f64 >= threshold && p.water as f64 >= threshold {
        let heal = (heal_frac * p.max_health as f64).floor() as i32 + increment;
        p.health = (p.health + heal).min(p.max_health);
    }
    for e in events {
        st.emit(e);
    }
}

fn fog_phase(st: &mut WorldState) {
    if st.fog.onset.is_none_or(|o| st.tick < o) {
        return;
    }
    let hits: Vec<(EntityId, i32)> = st
        .players
        .iter()
        .chain(&st.npcs)
        .filter(|e| e.alive && e.health > 0)
        .filter_map(|e| {
            let d = fog_damage(st.fog_depth(e.pos));
            (d > 0).then_some((e.id, d))
        })
        .collect();
    for (id, d) in hits {
        let e = st.entity_mut(id).expect("live");
        e.health -= d;
        e.damage_taken += d;
    }
}

fn cull(st: &mut WorldState) {
    let tick = st.tick;
    let mut dead: Vec<EntityId> = st
        .players
        .iter()
        .filter(|e| e.alive && e.health <= 0)
        .map(|e| e.id)
        .collect();
    if st.leader_elimination {
        if let Some(teams) = st.teams.clone() {
            for members in teams {
                let Some(&leader) = members.first() else { continue };
                if dead.contains(&(leader as EntityId)) {
                    for m in members {
                        let m = m as EntityId;
                        if st.players[m as usize - 1].alive && !dead.contains(&m) {
                            dead.push(m);
                        }
                    }
                }
            }
        }
        dead.sort_unstable();
    }
    for id in dead {
        let i = id as usize - 1;
        let p = &mut st.players[i];
        p.alive = false;
        p.health = 0;
        p.died = Some(tick);
        p.token = 0;
        st.emit_death(id);
        if st.s.item {
            economy::drop_estate(st, id);
        }
    }
    for e in st.npcs.iter_mut().filter(|e| e.alive && e.health <= 0) {
        e.alive = false;
        e.health = 0;
        e.died = Some(tick);
        st.npc_alive -= 1;
    }
}
