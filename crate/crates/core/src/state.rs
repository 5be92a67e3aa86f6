//! Per-episode simulation state.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Settings, Teams};
use crate::entity::{Entity, EntityId, EntityKind, LevelRule, SkillState, Style};
use crate::events::{EventKind, EventLog, GameEvent};
use crate::items::{Inventory, Item};
use crate::tasks::{AgentFacts, FactsLedger, LedgerRules, StateFacts};
use crate::world::{FogClock, Pos, TileMap};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StateError {
    #[error("need {needed} spawn tiles, only {available} available")]
    InsufficientSpawnCapacity { needed: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpawnMode {
    /// Each agent on its own edge tile.
    EdgeScatter,
    /// Each team on one shared edge tile.
    TeamTile,
    /// Teams equally spaced by angle around the edge ring.
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NpcRegion {
    Anywhere,
    EdgeRing,
    Center,
    /// Alternate between edge ring and center on successive attempts.
    EdgeAndCenter,
}

/// What the "key target" bit of the communication protocol tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KeyTarget {
    None,
    Center,
    Leader,
}

/// Semantic per-agent action after decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Action {
    pub mv: Option<crate::world::Dir>,
    pub attack: Option<(Style, EntityId)>,
    pub comm: u8,
    pub use_item: Option<usize>,
    pub destroy: Option<usize>,
    pub give_item: Option<(usize, EntityId)>,
    pub give_gold: Option<(EntityId, u64)>,
    pub sell: Option<(usize, u32)>,
    pub buy: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Listing {
    pub id: u64,
    pub seller: EntityId,
    pub item: Item,
    pub price: u32,
    pub expires: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Market {
    pub listings: Vec<Listing>,
    pub next_id: u64,
}

impl Market {
    pub fn find(&self, id: u64) -> Option<usize> {
        self.listings.binary_search_by_key(&id, |l| l.id).ok()
    }

    pub fn escrow_gold(&self) -> u64 {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundItem {
    pub pos: Pos,
    pub item: Item,
    pub expires: u32,
}

/// Ticks a dropped item stays on the ground.
pub const GROUND_ITEM_LIFETIME: u32 = 50;

/// Tile occupancy: live counts plus per-tile intrusive lists of entity slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    side: usize,
    pub count: Vec<u16>,
    head: Vec<u32>,
    next: Vec<u32>,
}

impl Occupancy {
    fn new(side: usize) -> Self {
        Occupancy {
            side,
            count: vec![0; side * side],
            head: vec![0; side * side],
            next: Vec::new(),
        }
    }

    fn idx(&self, p: Pos) -> usize {
        p.r as usize * self.side + p.c as usize
    }

    pub fn occupied(&self, p: Pos) -> bool {
        self.count[self.idx(p)] > 0
    }

    pub fn count_at(&self, p: Pos) -> u16 {
        self.count[self.idx(p)]
    }

    fn insert(&mut self, slot: usize, p: Pos) {
        if self.next.len() <= slot {
            self.next.resize(slot + 1, 0);
        }
        let i = self.idx(p);
        self.next[slot] = self.head[i];
        self.head[i] = slot as u32 + 1;
    }

    /// Iterates the entity slots on a tile.
    pub fn slots_at(&self, p: Pos) -> SlotIter<'_> {
        self.slots_at_index(self.idx(p))
    }

    /// As [`Occupancy::slots_at`], by row-major tile index.
    pub fn slots_at_index(&self, i: usize) -> SlotIter<'_> {
        SlotIter { occ: self, cur: self.head[i] }
    }
}

pub struct SlotIter<'a> {
    occ: &'a Occupancy,
    cur: u32,
}

impl Iterator for SlotIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.cur == 0 {
            return None;
        }
        let slot = self.cur as usize - 1;
        self.cur = self.occ.next[slot];
        Some(slot)
    }
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub s: Settings,
    pub map: TileMap,
    pub tick: u32,
    pub fog: FogClock,
    pub players: Vec<Entity>,
    /// NPC with id `-k` lives at index `k - 1`; dead NPCs stay in place.
    pub npcs: Vec<Entity>,
    pub npc_alive: u32,
    pub npc_spawned: u32,
    pub npc_target: u32,
    pub npc_region: NpcRegion,
    pub teams: Option<Teams>,
    pub key_target: KeyTarget,
    /// A team dies with its leader.
    pub leader_elimination: bool,
    pub occ: Occupancy,
    pub log: EventLog,
    pub ledger: FactsLedger,
    pub market: Market,
    pub ground: Vec<GroundItem>,
    pub rng: ChaCha8Rng,
    /// Gold taken from a player by a kill this tick, reported on death.
    pub(crate) pending_loss: Vec<u64>,
    pub(crate) killer: Vec<EntityId>,
}

pub fn level_rule(s: &Settings) -> LevelRule {
    LevelRule {
        base: s.base_level,
        max: s.level_max,
        threshold: s.exp_threshold,
    }
}

pub fn ledger_rules(s: &Settings) -> LedgerRules {
    LedgerRules {
        progression: s.progression,
        combat_xp: s.combat_xp as u64,
        ammunition_xp: s.ammunition_xp as u64,
        consumable_xp: s.consumable_xp as u64,
        level: level_rule(s),
        base_gold: if s.exchange { s.base_gold as i64 } else { 0 },
    }
}

impl WorldState {
    pub fn new(s: Settings, map: TileMap, fog: FogClock, teams: Option<Teams>, rng: ChaCha8Rng) -> Self {
        let side = map.side();
        let n = s.player_n as usize;
        WorldState {
            ledger: FactsLedger::new(n, ledger_rules(&s)),
            npc_target: if s.npc { s.npc_n } else { 0 },
            s,
            map,
            tick: 0,
            fog,
            players: Vec::new(),
            npcs: Vec::new(),
            npc_alive: 0,
            npc_spawned: 0,
            npc_region: NpcRegion::Anywhere,
            teams,
            key_target: KeyTarget::None,
            leader_elimination: false,
            occ: Occupancy::new(side),
            log: EventLog::default(),
            market: Market::default(),
            ground: Vec::new(),
            rng,
            pending_loss: vec![0; n],
            killer: vec![0; n],
        }
    }

    pub fn team_game(&self) -> bool {
        self.teams.is_some()
    }

    pub fn team_count(&self) -> usize {
        self.teams.as_ref().map_or(0, Vec::len)
    }

    pub fn slot_of(&self, id: EntityId) -> usize {
        if id > 0 {
            id as usize - 1
        } else {
            self.players.len() + (-id) as usize - 1
        }
    }

    pub fn id_of_slot(&self, slot: usize) -> EntityId {
        if slot < self.players.len() {
            slot as EntityId + 1
        } else {
            -((slot - self.players.len()) as EntityId + 1)
        }
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        if id > 0 {
            self.players.get(id as usize - 1)
        } else if id < 0 {
            self.npcs.get((-id) as usize - 1)
        } else {
            None
        }
    }

    pub fn entity_mut(&mut self, id: EntityId) -> Option<&mut Entity> {
        if id > 0 {
            self.players.get_mut(id as usize - 1)
        } else if id < 0 {
            self.npcs.get_mut((-id) as usize - 1)
        } else {
            None
        }
    }

    pub fn by_slot(&self, slot: usize) -> &Entity {
        if slot < self.players.len() {
            &self.players[slot]
        } else {
            &self.npcs[slot - self.players.len()]
        }
    }

    /// Live ids in ascending order: NPCs (most negative first), then players.
    pub fn live_ids(&self) -> Vec<EntityId> {
        let mut ids: Vec<EntityId> = self
            .npcs
            .iter()
            .rev()
            .filter(|e| e.alive)
            .map(|e| e.id)
            .collect();
        ids.extend(self.players.iter().filter(|e| e.alive).map(|e| e.id));
        ids
    }

    pub fn alive_players(&self) -> usize {
        self.players.iter().filter(|e| e.alive).count()
    }

    pub fn emit(&mut self, e: GameEvent) {
        self.ledger.apply_event(&e);
        self.log.push_event(e);
    }

    pub fn record_position(&mut self, id: EntityId, pos: Pos) {
        let rec = crate::events::LogRecord::Position { tick: self.tick, id, pos };
        self.ledger.apply(&rec);
        self.log.push_position(self.tick, id, pos);
    }

    /// Live facts: event counters from the ledger, state from the entity.
    pub fn live_facts(&self, id: EntityId) -> AgentFacts {
        let e = &self.players[id as usize - 1];
        AgentFacts {
            counts: self.ledger.counts(id).clone(),
            state: StateFacts::from_entity(e),
        }
    }

    pub fn rebuild_occupancy(&mut self) {
        self.occ.head.fill(0);
        self.occ.count.fill(0);
        let np = self.players.len();
        for (i, e) in self.npcs.iter().enumerate() {
            if e.alive {
                let idx = self.occ.idx(e.pos);
                self.occ.count[idx] += 1;
                self.occ.insert(np + i, e.pos);
            }
        }
        for (i, e) in self.players.iter().enumerate() {
            if e.alive {
                let idx = self.occ.idx(e.pos);
                self.occ.count[idx] += 1;
                self.occ.insert(i, e.pos);
            }
        }
    }

    pub fn occ_add(&mut self, slot: usize, p: Pos) {
        let i = self.occ.idx(p);
        self.occ.count[i] += 1;
        self.occ.insert(slot, p);
    }

    /// Ids of live entities within Chebyshev `radius` of `center`, sorted by
    /// (distance, id).
    pub fn nearby(&self, center: Pos, radius: i32) -> Vec<(i32, EntityId)> {
        let mut out: Vec<_> = self.visible(center, radius).map(|e| (center.chebyshev(e.pos), e.id)).collect();
        out.sort_unstable();
        out
    }

    /// Live entities within `radius` of `center`, in no particular order.
    pub fn visible(&self, center: Pos, radius: i32) -> impl Iterator<Item = &Entity> + '_ {
        let side = self.map.side() as i32;
        let (c0, c1) = ((center.c - radius).max(0), (center.c + radius).min(side - 1));
        ((center.r - radius).max(0)..=(center.r + radius).min(side - 1))
            .flat_map(move |r| (c0..=c1).map(move |c| (r * side + c) as usize))
            .filter(|i| self.occ.count[*i] > 0)
            .flat_map(|i| self.occ.slots_at_index(i))
            .map(|slot| self.by_slot(slot))
            .filter(|e| e.alive)
    }

    pub fn fog_depth(&self, p: Pos) -> f64 {
        crate::world::fog_depth(p, self.tick, &self.fog, &self.map)
    }

    fn new_player(&mut self, id: EntityId, pos: Pos, team: Option<u16>) -> Entity {
        let s = &self.s;
        let resilient = s.resource && self.rng.random::<f64>() < s.resilient_population;
        Entity {
            id,
            kind: EntityKind::Player,
            team,
            pos,
            spawn_pos: pos,
            health: s.base_health,
            max_health: s.base_health,
            food: s.resource_base,
            water: s.resource_base,
            max_gauge: s.resource_base,
            skills: [SkillState { level: s.base_level, xp: 0 }; 8],
            gold: if s.exchange { s.base_gold as u64 } else { 0 },
            immune_until: self.tick + s.spawn_immunity,
            in_combat_until: 0,
            alive: true,
            born: self.tick,
            died: None,
            token: 0,
            last_attacker: 0,
            active_style: Style::Melee,
            resilient,
            leader: false,
            inventory: Inventory::default(),
            npc: None,
            damage_taken: 0,
            max_distance: 0,
        }
    }

    /// Places all players. Team membership comes from `self.teams`; in
    /// free-for-all games every agent is its own group.
    pub fn spawn_players(&mut self, mode: SpawnMode) -> Result<(), StateError> {
        let n = self.s.player_n as usize;
        let ring = self.map.edge_ring();
        let groups: Vec<Vec<u32>> = match &self.teams {
            Some(t) => t.clone(),
            None => (1..=n as u32).map(|i| vec![i]).collect(),
        };
        let mut team_of = vec![None; n];
        if let Some(t) = &self.teams {
            for (ti, members) in t.iter().enumerate() {
                for m in members {
                    team_of[*m as usize - 1] = Some(ti as u16);
                }
            }
        }
        let positions: Vec<Pos> = match mode {
            SpawnMode::EdgeScatter | SpawnMode::TeamTile => {
                let needed = if mode == SpawnMode::EdgeScatter { n } else { groups.len() };
                if needed > ring.len() {
                    return Err(StateError::InsufficientSpawnCapacity {
                        needed,
                        available: ring.len(),
                    });
                }
                let mut tiles = ring.clone();
                tiles.shuffle(&mut self.rng);
                tiles.truncate(needed);
                tiles
            }
            SpawnMode::Circle => {
                let k = groups.len().max(1);
                let offset = self.rng.random::<f64>() * std::f64::consts::TAU / k as f64;
                (0..k).map(|i| self.circle_tile(offset + std::f64::consts::TAU * i as f64 / k as f64)).collect()
            }
        };
        let mut players = Vec::with_capacity(n);
        for id in 1..=n {
            let pos = match mode {
                SpawnMode::EdgeScatter => positions[id - 1],
                _ => {
                    let g = groups.iter().position(|g| g.contains(&(id as u32))).unwrap_or(0);
                    positions[g % positions.len()]
                }
            };
            players.push(self.new_player(id as EntityId, pos, team_of[id - 1]));
        }
        self.players = players;
        for id in 1..=n {
            self.record_position(id as EntityId, self.players[id - 1].pos);
        }
        self.rebuild_occupancy();
        Ok(())
    }

    /// Point on the edge ring at angle `theta` (0 = north, clockwise).
    pub fn circle_tile(&self, theta: f64) -> Pos {
        let r = self.map.radius() as f64;
        let (dr, dc) = (-theta.cos(), theta.sin());
        let scale = r / dr.abs().max(dc.abs());
        let ctr = self.map.center();
        Pos::new(ctr.r + (dr * scale).round() as i32, ctr.c + (dc * scale).round() as i32)
    }

    pub fn mark_leaders(&mut self) {
        if let Some(teams) = &self.teams {
            for members in teams {
                if let Some(first) = members.first() {
                    self.players[*first as usize - 1].leader = true;
                }
            }
        }
    }

    pub fn leader_alive(&self) -> Vec<bool> {
        match &self.teams {
            Some(teams) => teams
                .iter()
                .map(|m| m.first().is_some_and(|id| self.players[*id as usize - 1].alive))
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn team_alive(&self) -> Vec<bool> {
        match &self.teams {
            Some(teams) => teams
                .iter()
                .map(|m| m.iter().any(|id| self.players[*id as usize - 1].alive))
                .collect(),
            None => Vec::new(),
        }
    }

    /// Total gold held by every entity, alive or dead.
    pub fn total_gold(&self) -> u64 {
        self.players.iter().chain(&self.npcs).map(|e| e.gold).sum::<u64>() + self.market.escrow_gold()
    }

    pub fn drop_item(&mut self, pos: Pos, item: Item) {
        self.ground.push(GroundItem {
            pos,
            item,
            expires: self.tick + GROUND_ITEM_LIFETIME,
        });
    }

    pub fn emit_death(&mut self, id: EntityId) {
        let i = id as usize - 1;
        let ev = GameEvent::new(self.tick, id, EventKind::AgentDeath)
            .target(self.killer[i])
            .amount(self.pending_loss[i] as i64);
        self.emit(ev);
    }
}
