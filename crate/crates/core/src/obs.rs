//! Flat observation assembly, action masks and action decoding.
//!
//! One agent's observation is a contiguous `f32` slice laid out by
//! [`ObservationLayout`]: feature blocks first, then one mask block per
//! action dimension. A flat action holds one index per action dimension in
//! [`ActionLayout`] order. Target dimensions refer to rows of the entity or
//! market block of the observation the action answers, and their last index
//! is the no-op sentinel.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::combat::equipment_rules;
use crate::config::{Profile, Settings};
use crate::economy::can_use;
use crate::entity::{Disposition, Entity, EntityId, EntityKind, Skill, Style};
use crate::items::{equipment_stats, Item, ItemType, Slot};
use crate::state::{level_rule, Action, KeyTarget, WorldState};
use crate::tasks::EMBED_LEN;
use crate::world::{Dir, Pos};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("unknown agent {0}")]
    UnknownAgent(EntityId),
    #[error("action has {got} entries, expected {expected}")]
    WrongLength { got: usize, expected: usize },
    #[error("index {index} out of range for `{dim}`")]
    OutOfRangeIndex { dim: &'static str, index: i64 },
    #[error("bad layout manifest: {0}")]
    BadManifest(String),
}

/// Fixed row counts.
pub const VISION_RADIUS: i32 = 7;
pub const TILE_ROWS: usize = ((2 * VISION_RADIUS + 1) * (2 * VISION_RADIUS + 1)) as usize;
pub const ENTITY_ROWS: usize = 100;
pub const COMM_ROWS: usize = 32;
pub const INVENTORY_ROWS: usize = 12;
pub const MARKET_ROWS: usize = 384;
pub const PRICE_LEVELS: usize = 99;
pub const GOLD_LEVELS: usize = 99;
pub const TOKEN_VALUES: usize = 127;

/// Feature names with their divisors. A divisor of 1 means raw.
pub const TILE_FEATURES: [(&str, f32); 7] = [
    ("row", 1.0),
    ("col", 1.0),
    ("material", 1.0),
    ("occupant", 1.0),
    ("resource_fraction", 1.0),
    ("fog_depth", FOG_SCALE),
    ("harvestable", 1.0),
];

pub const ENTITY_FEATURES: [(&str, f32); 31] = [
    ("id", 1.0),
    ("kind", 1.0),
    ("same_team", 1.0),
    ("self", 1.0),
    ("attacker_id", 1.0),
    ("token", TOKEN_SCALE),
    ("row", 1.0),
    ("col", 1.0),
    ("time_alive", TIME_SCALE),
    ("health", GAUGE_SCALE),
    ("food", GAUGE_SCALE),
    ("water", GAUGE_SCALE),
    ("melee_level", LEVEL_SCALE),
    ("melee_xp_bucket", 1.0),
    ("range_level", LEVEL_SCALE),
    ("range_xp_bucket", 1.0),
    ("mage_level", LEVEL_SCALE),
    ("mage_xp_bucket", 1.0),
    ("fishing_level", LEVEL_SCALE),
    ("herbalism_level", LEVEL_SCALE),
    ("prospecting_level", LEVEL_SCALE),
    ("carving_level", LEVEL_SCALE),
    ("alchemy_level", LEVEL_SCALE),
    ("gold", GOLD_SCALE),
    ("offense", STAT_SCALE),
    ("defense", STAT_SCALE),
    ("combat_remaining", 1.0),
    ("immunity_remaining", 1.0),
    ("fog_depth", FOG_SCALE),
    ("damage_last_tick", GAUGE_SCALE),
    ("key_target", 1.0),
];

pub const COMM_FEATURES: [(&str, f32); 4] = [("id", 1.0), ("row", 1.0), ("col", 1.0), ("token", TOKEN_SCALE)];

pub const ITEM_FEATURES: [(&str, f32); 16] = [
    ("present", 1.0),
    ("type", 1.0),
    ("level", LEVEL_SCALE),
    ("quantity", QUANTITY_SCALE),
    ("equipped", 1.0),
    ("slot", 1.0),
    ("offense", STAT_SCALE),
    ("defense", STAT_SCALE),
    ("style", 1.0),
    ("profession", 1.0),
    ("usable", 1.0),
    ("consumable", 1.0),
    ("stackable", 1.0),
    ("armor", 1.0),
    ("tool", 1.0),
    ("ammunition", 1.0),
];

pub const MARKET_FEATURES: [(&str, f32); 16] = [
    ("listing_id", 1.0),
    ("seller", 1.0),
    ("price", GOLD_SCALE),
    ("expires_in", TIME_SCALE),
    ("type", 1.0),
    ("level", LEVEL_SCALE),
    ("quantity", QUANTITY_SCALE),
    ("slot", 1.0),
    ("offense", STAT_SCALE),
    ("defense", STAT_SCALE),
    ("style", 1.0),
    ("profession", 1.0),
    ("consumable", 1.0),
    ("stackable", 1.0),
    ("armor", 1.0),
    ("tool", 1.0),
];

const FOG_SCALE: f32 = 8.0;
const TOKEN_SCALE: f32 = 127.0;
const TIME_SCALE: f32 = 1024.0;
const GAUGE_SCALE: f32 = 100.0;
const LEVEL_SCALE: f32 = 10.0;
const GOLD_SCALE: f32 = 100.0;
const STAT_SCALE: f32 = 50.0;
const QUANTITY_SCALE: f32 = 10.0;

/// Occupant codes in the tile block.
pub const OCCUPANT_EMPTY: f32 = 0.0;
pub const OCCUPANT_PLAYER: f32 = 1.0;
pub const OCCUPANT_TEAMMATE: f32 = 2.0;
pub const OCCUPANT_SELF: f32 = 6.0;

fn npc_code(d: Disposition) -> f32 {
    match d {
        Disposition::Passive => 3.0,
        Disposition::Neutral => 4.0,
        Disposition::Aggressive => 5.0,
    }
}

/// Action dimensions in flat-action order, with their widths.
pub const MINI_ACTIONS: [(&str, usize); 4] = [
    ("move", 5),
    ("attack_style", 3),
    ("attack_target", ENTITY_ROWS + 1),
    ("comm_token", TOKEN_VALUES),
];

pub const FULL_EXTRA_ACTIONS: [(&str, usize); 9] = [
    ("use", INVENTORY_ROWS + 1),
    ("destroy", INVENTORY_ROWS + 1),
    ("give_item", INVENTORY_ROWS + 1),
    ("give_target", ENTITY_ROWS + 1),
    ("sell", INVENTORY_ROWS + 1),
    ("price", PRICE_LEVELS),
    ("buy", MARKET_ROWS + 1),
    ("gold_target", ENTITY_ROWS + 1),
    ("gold_amount", GOLD_LEVELS),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionLayout {
    pub dims: Vec<(&'static str, usize)>,
}

impl ActionLayout {
    pub fn new(profile: Profile) -> Self {
        let mut dims = MINI_ACTIONS.to_vec();
        if profile == Profile::Full {
            dims.extend(FULL_EXTRA_ACTIONS);
        }
        ActionLayout { dims }
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.0 == name)
    }

    /// The all-no-op flat action. Dimensions without a sentinel use 0,
    /// which is inert once the paired target is the sentinel.
    pub fn noop(&self) -> Vec<i64> {
        self.dims
            .iter()
            .map(|(name, w)| match *name {
                "attack_style" | "comm_token" | "price" | "gold_amount" => 0,
                _ => *w as i64 - 1,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Component {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Ordered components of one agent's flat observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationLayout {
    pub profile: Profile,
    pub components: Vec<Component>,
    pub actions: ActionLayout,
    pub len: usize,
}

impl ObservationLayout {
    pub fn new(profile: Profile) -> Self {
        let mut shapes: Vec<(String, usize, usize)> = vec![
            ("tick".into(), 1, 1),
            ("agent_id".into(), 1, 1),
            ("task".into(), 1, EMBED_LEN),
            ("tile".into(), TILE_ROWS, TILE_FEATURES.len()),
            ("entity".into(), ENTITY_ROWS, ENTITY_FEATURES.len()),
            ("comm".into(), COMM_ROWS, COMM_FEATURES.len()),
        ];
        if profile == Profile::Full {
            shapes.push(("inventory".into(), INVENTORY_ROWS, ITEM_FEATURES.len()));
            shapes.push(("market".into(), MARKET_ROWS, MARKET_FEATURES.len()));
        }
        let actions = ActionLayout::new(profile);
        for (name, w) in &actions.dims {
            shapes.push((format!("mask_{name}"), 1, *w));
        }
        let mut offset = 0;
        let components = shapes
            .into_iter()
            .map(|(name, rows, cols)| {
                let c = Component { name, rows, cols, offset };
                offset += rows * cols;
                c
            })
            .collect();
        ObservationLayout {
            profile,
            components,
            actions,
            len: offset,
        }
    }

    pub fn component(&self, name: &str) -> &Component {
        self.try_component(name)
            .unwrap_or_else(|| panic!("no component `{name}`"))
    }

    /// Position-based lookup: the component order is fixed by `new`, so
    /// this avoids scanning names on the per-agent hot path.
    pub fn try_component(&self, name: &str) -> Option<&Component> {
        let full = self.profile == Profile::Full;
        let i = match name {
            "tick" => 0,
            "agent_id" => 1,
            "task" => 2,
            "tile" => 3,
            "entity" => 4,
            "comm" => 5,
            "inventory" if full => 6,
            "market" if full => 7,
            _ => {
                let dim = name.strip_prefix("mask_")?;
                self.mask_start() + self.actions.index_of(dim)?
            }
        };
        let c = &self.components[i];
        debug_assert_eq!(c.name, name);
        Some(c)
    }

    fn mask_start(&self) -> usize {
        if self.profile == Profile::Full {
            8
        } else {
            6
        }
    }

    /// Mask slice of `obs` for action dimension `dim`.
    pub fn mask<'a>(&self, obs: &'a [f32], dim: &str) -> &'a [f32] {
        &obs[self.mask_component(dim).range()]
    }

    fn mask_component(&self, dim: &str) -> &Component {
        self.actions
            .index_of(dim)
            .map(|k| &self.components[self.mask_start() + k])
            .unwrap_or_else(|| panic!("no mask for `{dim}`"))
    }

    /// Line-oriented manifest: `component NAME ROWS COLS OFFSET`, then
    /// `feature BLOCK INDEX NAME DIVISOR` and `action INDEX NAME WIDTH`.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "layout_version 1");
        let _ = writeln!(out, "profile {}", self.profile.name());
        let _ = writeln!(out, "length {}", self.len);
        for c in &self.components {
            let _ = writeln!(out, "component {} {} {} {}", c.name, c.rows, c.cols, c.offset);
        }
        let blocks: [(&str, &[(&str, f32)]); 5] = [
            ("tile", &TILE_FEATURES),
            ("entity", &ENTITY_FEATURES),
            ("comm", &COMM_FEATURES),
            ("inventory", &ITEM_FEATURES),
            ("market", &MARKET_FEATURES),
        ];
        for (block, feats) in blocks {
            if self.try_component(block).is_none() {
                continue;
            }
            for (i, (name, div)) in feats.iter().enumerate() {
                let _ = writeln!(out, "feature {block} {i} {name} {div}");
            }
        }
        for (i, (name, w)) in self.actions.dims.iter().enumerate() {
            let _ = writeln!(out, "action {i} {name} {w}");
        }
        out
    }

    /// Reads back the component table of a manifest.
    pub fn parse_manifest(text: &str) -> Result<Vec<Component>, CodecError> {
        let bad = |l: &str| CodecError::BadManifest(l.to_string());
        let mut out = Vec::new();
        for line in text.lines() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.first() != Some(&"component") {
                continue;
            }
            if parts.len() != 5 {
                return Err(bad(line));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|_| bad(line));
            out.push(Component {
                name: parts[1].to_string(),
                rows: num(parts[2])?,
                cols: num(parts[3])?,
                offset: num(parts[4])?,
            });
        }
        Ok(out)
    }
}

/// Row tables needed to decode one agent's action.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AgentView {
    pub id: EntityId,
    /// Entity id of each filled entity row.
    pub entities: Vec<EntityId>,
}

/// Observations for every player at one tick.
#[derive(Debug, Clone)]
pub struct ObsFrame {
    pub data: Vec<f32>,
    pub views: Vec<AgentView>,
    /// Listing id of each filled market row, shared by all agents.
    pub listings: Vec<u64>,
}

impl ObsFrame {
    pub fn agent<'a>(&'a self, layout: &ObservationLayout, i: usize) -> &'a [f32] {
        &self.data[i * layout.len..(i + 1) * layout.len]
    }
}

/// Viewer-relative same-team and key-target flags for one entity row.
pub fn team_augmentation(row: &mut [f32], viewer: &Entity, e: &Entity, st: &WorldState) {
    row[2] = (viewer.id != e.id && viewer.same_team(e)) as u8 as f32;
    row[30] = is_key_target(viewer, e, st) as u8 as f32;
}

fn is_key_target(viewer: &Entity, e: &Entity, st: &WorldState) -> bool {
    match st.key_target {
        KeyTarget::None => false,
        KeyTarget::Center => e.pos == st.map.center(),
        KeyTarget::Leader => e.leader && e.is_player() && viewer.same_team(e),
    }
}

fn item_stats(item: &Item, s: &Settings) -> (i32, i32) {
    let rules = equipment_rules(s);
    let lin = |(base, per): (i32, i32)| base + per * item.level as i32;
    match item.kind.slot() {
        Some(Slot::Weapon) => (lin(rules.weapon), 0),
        Some(Slot::Ammunition) => (lin(rules.ammunition), 0),
        Some(Slot::Tool) => (0, lin(rules.tool)),
        Some(Slot::Hat | Slot::Top | Slot::Bottom) => (0, lin(rules.armor)),
        None => (0, 0),
    }
}

fn slot_code(kind: ItemType) -> f32 {
    match kind.slot() {
        None => 0.0,
        Some(Slot::Hat) => 1.0,
        Some(Slot::Top) => 2.0,
        Some(Slot::Bottom) => 3.0,
        Some(Slot::Weapon) => 4.0,
        Some(Slot::Tool) => 5.0,
        Some(Slot::Ammunition) => 6.0,
    }
}

/// Shared per-item columns, in market order after the listing header.
fn item_columns(item: &Item, s: &Settings) -> [f32; 12] {
    let (off, def) = item_stats(item, s);
    let k = item.kind;
    [
        k as u8 as f32,
        item.level as f32 / LEVEL_SCALE,
        item.quantity as f32 / QUANTITY_SCALE,
        slot_code(k),
        off as f32 / STAT_SCALE,
        def as f32 / STAT_SCALE,
        k.style().map_or(0.0, |x| x.index() as f32 + 1.0),
        k.profession().map_or(0.0, |p| p.index() as f32 + 1.0),
        k.is_consumable() as u8 as f32,
        k.stackable() as u8 as f32,
        ItemType::ARMOR.contains(&k) as u8 as f32,
        ItemType::TOOLS.contains(&k) as u8 as f32,
    ]
}

fn xp_bucket(e: &Entity, skill: Skill, st: &WorldState) -> f32 {
    let rule = level_rule(&st.s);
    let sk = e.skills[skill.index()];
    let lo = rule.xp_for(sk.level);
    let hi = rule.xp_for(sk.level.saturating_add(1));
    if hi <= lo {
        return 0.0;
    }
    let frac = sk.xp.saturating_sub(lo) as f64 / (hi - lo) as f64;
    ((frac * 10.0).floor() / 10.0).clamp(0.0, 1.0) as f32
}

fn entity_row(row: &mut [f32], viewer: &Entity, e: &Entity, st: &WorldState) {
    let s = &st.s;
    let tick = st.tick;
    row[0] = e.id as f32;
    row[1] = match e.kind {
        EntityKind::Player => 0.0,
        EntityKind::Npc(d) => npc_code(d) - 2.0,
    };
    row[3] = (e.id == viewer.id) as u8 as f32;
    row[4] = e.last_attacker as f32;
    row[5] = e.token as f32 / TOKEN_SCALE;
    row[6] = e.pos.r as f32;
    row[7] = e.pos.c as f32;
    row[8] = e.lifespan(tick) as f32 / TIME_SCALE;
    row[9] = e.health.max(0) as f32 / GAUGE_SCALE;
    row[10] = e.food as f32 / GAUGE_SCALE;
    row[11] = e.water as f32 / GAUGE_SCALE;
    for style in Style::ALL {
        let i = style.index();
        row[12 + 2 * i] = e.style_level(style) as f32 / LEVEL_SCALE;
        row[13 + 2 * i] = if e.is_player() { xp_bucket(e, Skill::Combat(style), st) } else { 0.0 };
    }
    for k in 0..5 {
        row[18 + k] = e.skills[3 + k].level as f32 / LEVEL_SCALE;
    }
    row[23] = e.gold as f32 / GOLD_SCALE;
    let (off, def) = match e.npc {
        Some(n) => (n.damage, n.defense),
        None => equipment_stats(&e.inventory, &equipment_rules(s)),
    };
    row[24] = off as f32 / STAT_SCALE;
    row[25] = def as f32 / STAT_SCALE;
    let remaining = |until: u32, span: u32| {
        if span == 0 {
            0.0
        } else {
            until.saturating_sub(tick) as f32 / span as f32
        }
    };
    row[26] = remaining(e.in_combat_until, s.status_duration);
    row[27] = remaining(e.immune_until, s.spawn_immunity);
    row[28] = st.fog_depth(e.pos) as f32 / FOG_SCALE;
    row[29] = e.damage_taken as f32 / GAUGE_SCALE;
    team_augmentation(row, viewer, e, st);
}

fn occupant_code(st: &WorldState, viewer: &Entity, p: Pos) -> f32 {
    let mut code = OCCUPANT_EMPTY;
    let mut rank = 0;
    for slot in st.occ.slots_at(p) {
        let e = st.by_slot(slot);
        if !e.alive {
            continue;
        }
        // Self outranks foes, foes outrank teammates, teammates outrank NPCs.
        let (r, c) = match e.kind {
            _ if e.id == viewer.id => (6, OCCUPANT_SELF),
            EntityKind::Player if viewer.same_team(e) => (4, OCCUPANT_TEAMMATE),
            EntityKind::Player => (5, OCCUPANT_PLAYER),
            EntityKind::Npc(d) => (npc_code(d) as i32 - 2, npc_code(d)),
        };
        if r > rank {
            rank = r;
            code = c;
        }
    }
    code
}

/// Attack target legality at observation time.
fn attackable(st: &WorldState, me: &Entity, e: &Entity, reach: i32) -> bool {
    st.s.combat
        && e.id != me.id
        && e.alive
        && e.health > 0
        && !e.immune(st.tick)
        && !me.same_team(e)
        && me.pos.chebyshev(e.pos) <= reach
}

fn gift_target(st: &WorldState, me: &Entity, e: &Entity) -> bool {
    st.s.allow_gift
        && e.is_player()
        && e.id != me.id
        && e.alive
        && e.health > 0
        && (!st.team_game() || me.same_team(e))
}

fn allowed_styles(st: &WorldState, me: &Entity) -> Vec<Style> {
    if st.s.flexible_style {
        Style::ALL.to_vec()
    } else {
        vec![me.best_style()]
    }
}

/// Writes one agent's observation into `out` and returns its row table.
pub fn build_observation(
    st: &WorldState,
    layout: &ObservationLayout,
    task: &[f32; EMBED_LEN],
    id: EntityId,
    listings: &[u64],
    out: &mut [f32],
) -> Result<AgentView, CodecError> {
    write_observation(st, layout, task, id, listings, out, ENTITY_ROWS)
}

/// As [`build_observation`], trusting that entity rows at or beyond
/// `dirty_rows` in `out` are already zero.
fn write_observation(
    st: &WorldState,
    layout: &ObservationLayout,
    task: &[f32; EMBED_LEN],
    id: EntityId,
    listings: &[u64],
    out: &mut [f32],
    dirty_rows: usize,
) -> Result<AgentView, CodecError> {
    if id <= 0 || id as usize > st.players.len() {
        return Err(CodecError::UnknownAgent(id));
    }
    let mut view = AgentView { id, entities: Vec::new() };
    let me = &st.players[id as usize - 1];
    let tile = layout.component("tile");
    let ent = layout.component("entity");
    let alive = me.alive && me.health > 0;
    // Tile and entity blocks are adjacent and written in full below.
    debug_assert_eq!(tile.offset + tile.len(), ent.offset);
    if alive {
        out[..tile.offset].fill(0.0);
        out[ent.offset + ent.len()..].fill(0.0);
    } else {
        out.fill(0.0);
    }
    let sentinel = |out: &mut [f32], name: &str| {
        let c = layout.mask_component(name);
        out[c.offset + c.len() - 1] = 1.0;
    };
    for (name, _) in &layout.actions.dims {
        if !matches!(*name, "attack_style" | "price" | "gold_amount") {
            sentinel(out, name);
        }
    }
    if !alive {
        return Ok(view);
    }
    let s = &st.s;
    out[layout.component("tick").offset] = st.tick as f32;
    out[layout.component("agent_id").offset] = id as f32;
    out[layout.component("task").range()].copy_from_slice(task);

    let map = &st.map;
    let (materials, harvests, capacity) = (map.materials(), map.harvest_counts(), &map.rules().capacity);
    // Depth is zero everywhere before onset.
    let fog_visible = s.provide_fog_obs && st.fog.onset.is_some_and(|t| st.tick >= t);
    let mut k = tile.offset;
    let side = map.side() as i32;
    for dr in -VISION_RADIUS..=VISION_RADIUS {
        let r = me.pos.r + dr;
        let row_inside = (0..side).contains(&r);
        for dc in -VISION_RADIUS..=VISION_RADIUS {
            let p = Pos::new(r, me.pos.c + dc);
            let row = &mut out[k..k + TILE_FEATURES.len()];
            k += TILE_FEATURES.len();
            row[0] = p.r as f32;
            row[1] = p.c as f32;
            row[5] = if fog_visible { st.fog_depth(p) as f32 / FOG_SCALE } else { 0.0 };
            if !(row_inside && (0..side).contains(&p.c)) {
                row[2..5].fill(0.0);
                row[6] = 0.0;
                continue;
            }
            let i = (r * side + p.c) as usize;
            let m = materials[i];
            let cap = capacity[m as usize];
            row[2] = m as u8 as f32;
            row[3] = if st.occ.count[i] > 0 { occupant_code(st, me, p) } else { OCCUPANT_EMPTY };
            row[4] = if cap > 0 { harvests[i] as f32 / cap as f32 } else { 0.0 };
            row[6] = (m.is_resource() && harvests[i] > 0) as u8 as f32;
        }
    }

    let styles = allowed_styles(st, me);
    let reach = styles.iter().map(|x| s.style_reach[x.index()]).min().unwrap_or(0);
    let target_mask = layout.component("mask_attack_target").offset;
    let give_mask = layout.try_component("mask_give_target").map(|c| c.offset);
    let gold_mask = layout.try_component("mask_gold_target").map(|c| c.offset);
    for (j, (_, eid)) in st.nearby(me.pos, VISION_RADIUS).into_iter().take(ENTITY_ROWS).enumerate() {
        let e = st.entity(eid).expect("visible entity");
        let base = ent.offset + j * ENTITY_FEATURES.len();
        entity_row(&mut out[base..base + ENTITY_FEATURES.len()], me, e, st);
        view.entities.push(eid);
        if attackable(st, me, e, reach) {
            out[target_mask + j] = 1.0;
        }
        if gift_target(st, me, e) {
            if let Some(g) = give_mask {
                let room = e.inventory.len() < s.inventory_capacity;
                if s.item && room {
                    out[g + j] = 1.0;
                }
            }
            if let Some(g) = gold_mask {
                if s.exchange && me.gold > 0 {
                    out[g + j] = 1.0;
                }
            }
        }
    }
    let stale = view.entities.len()..dirty_rows.max(view.entities.len());
    out[ent.offset + stale.start * ENTITY_FEATURES.len()..ent.offset + stale.end * ENTITY_FEATURES.len()].fill(0.0);

    let comm = layout.component("comm");
    let roster = st.teams.as_ref().zip(me.team).and_then(|(t, k)| t.get(k as usize));
    let mates: Vec<&Entity> = if let (true, Some(roster)) = (st.team_game(), roster) {
        let mut m: Vec<&Entity> = roster
            .iter()
            .filter_map(|x| st.entity(*x as EntityId))
            .filter(|p| p.id != id && p.alive && me.same_team(p))
            .collect();
        m.sort_unstable_by_key(|p| p.id);
        m.truncate(COMM_ROWS);
        m
    } else if st.team_game() {
        st.players
            .iter()
            .filter(|p| p.id != id && p.alive && me.same_team(p))
            .take(COMM_ROWS)
            .collect()
    } else {
        view.entities
            .iter()
            .filter(|e| **e > 0 && **e != id)
            .filter_map(|e| st.entity(*e))
            .take(COMM_ROWS)
            .collect()
    };
    for (j, m) in mates.iter().enumerate() {
        let base = comm.offset + j * COMM_FEATURES.len();
        out[base] = m.id as f32;
        out[base + 1] = m.pos.r as f32;
        out[base + 2] = m.pos.c as f32;
        out[base + 3] = m.token as f32 / TOKEN_SCALE;
    }

    let mv = layout.component("mask_move").offset;
    for d in Dir::MOVES {
        let p = me.pos.step(d);
        if st.map.passable(p) && (s.allow_move_into_occupied || !st.occ.occupied(p)) {
            out[mv + d.index()] = 1.0;
        }
    }
    let sm = layout.component("mask_attack_style").offset;
    for x in &styles {
        out[sm + x.index()] = 1.0;
    }
    if s.communication && !s.comm_protocol {
        let c = layout.component("mask_comm_token");
        out[c.range()].fill(1.0);
    }

    if layout.profile == Profile::Full {
        inventory_block(st, layout, me, out);
        market_block(st, layout, me, listings, out);
    }
    Ok(view)
}

fn inventory_block(st: &WorldState, layout: &ObservationLayout, me: &Entity, out: &mut [f32]) {
    let s = &st.s;
    let inv = layout.component("inventory");
    let (use_m, destroy_m, give_m, sell_m) = (
        layout.component("mask_use").offset,
        layout.component("mask_destroy").offset,
        layout.component("mask_give_item").offset,
        layout.component("mask_sell").offset,
    );
    let has_gift_target = layout.mask(out, "give_target")[..ENTITY_ROWS].iter().any(|v| *v > 0.0);
    for (j, item) in me.inventory.items.iter().enumerate().take(INVENTORY_ROWS) {
        let usable = can_use(st, me.id, item);
        let base = inv.offset + j * ITEM_FEATURES.len();
        let cols = item_columns(item, s);
        let row = &mut out[base..base + ITEM_FEATURES.len()];
        row[0] = 1.0;
        row[1] = cols[0];
        row[2] = cols[1];
        row[3] = cols[2];
        row[4] = item.equipped as u8 as f32;
        row[5] = cols[3];
        row[6] = cols[4];
        row[7] = cols[5];
        row[8] = cols[6];
        row[9] = cols[7];
        row[10] = usable as u8 as f32;
        row[11] = cols[8];
        row[12] = cols[9];
        row[13] = cols[10];
        row[14] = cols[11];
        row[15] = (item.kind.slot() == Some(Slot::Ammunition)) as u8 as f32;
        let can_equip = s.equipment && item.kind.slot().is_some() && (item.equipped || usable);
        let can_eat = s.item && item.kind.is_consumable() && usable;
        if can_equip || can_eat {
            out[use_m + j] = 1.0;
        }
        if s.item && !item.equipped {
            out[destroy_m + j] = 1.0;
            if has_gift_target {
                out[give_m + j] = 1.0;
            }
            if s.exchange {
                out[sell_m + j] = 1.0;
            }
        }
    }
    if s.exchange {
        let price = layout.component("mask_price");
        let levels = (st.s.price_n_obs as usize).min(price.len());
        out[price.offset..price.offset + levels].fill(1.0);
        let gold = layout.component("mask_gold_amount");
        let affordable = (me.gold as usize).min(gold.len());
        out[gold.offset..gold.offset + affordable].fill(1.0);
    }
}

fn market_block(st: &WorldState, layout: &ObservationLayout, me: &Entity, listings: &[u64], out: &mut [f32]) {
    let s = &st.s;
    let mk = layout.component("market");
    let buy_m = layout.component("mask_buy").offset;
    for (j, lid) in listings.iter().enumerate() {
        let Some(k) = st.market.find(*lid) else { continue };
        let l = &st.market.listings[k];
        let base = mk.offset + j * MARKET_FEATURES.len();
        let row = &mut out[base..base + MARKET_FEATURES.len()];
        row[0] = l.id as f32;
        row[1] = l.seller as f32;
        row[2] = l.price as f32 / GOLD_SCALE;
        row[3] = l.expires.saturating_sub(st.tick) as f32 / TIME_SCALE;
        row[4..16].copy_from_slice(&item_columns(&l.item, s));
        let legal = s.exchange
            && l.seller != me.id
            && me.gold >= l.price as u64
            && me.inventory.can_accept(&l.item, s.inventory_capacity);
        if legal {
            out[buy_m + j] = 1.0;
        }
    }
}

/// Listing ids shown this tick, oldest first.
pub fn market_snapshot(st: &WorldState) -> Vec<u64> {
    st.market.listings.iter().take(MARKET_ROWS).map(|l| l.id).collect()
}

/// Builds every player's observation, in parallel over agents.
pub fn build_frame(st: &WorldState, layout: &ObservationLayout, tasks: &[[f32; EMBED_LEN]]) -> ObsFrame {
    let mut frame = ObsFrame {
        data: Vec::new(),
        views: Vec::new(),
        listings: Vec::new(),
    };
    rebuild_frame(st, layout, tasks, &mut frame);
    frame
}

/// Like [`build_frame`], reusing the buffer of a previous frame.
pub fn rebuild_frame(st: &WorldState, layout: &ObservationLayout, tasks: &[[f32; EMBED_LEN]], frame: &mut ObsFrame) {
    let n = st.players.len();
    frame.listings = if layout.profile == Profile::Full { market_snapshot(st) } else { Vec::new() };
    // A buffer of the same shape still holds the previous frame, whose
    // entity rows past each agent's filled count are zero.
    let reuse = frame.data.len() == n * layout.len && frame.views.len() == n;
    frame.data.resize(n * layout.len, 0.0);
    let dirty: Vec<usize> = if reuse {
        frame.views.iter().map(|v| v.entities.len()).collect()
    } else {
        vec![ENTITY_ROWS; n]
    };
    let listings = &frame.listings;
    frame.views = frame
        .data
        .par_chunks_mut(layout.len.max(1))
        .enumerate()
        .map(|(i, out)| {
            write_observation(st, layout, &tasks[i], i as EntityId + 1, listings, out, dirty[i])
                .expect("player id in range")
        })
        .collect();
}

fn allowed(mask: &[f32], i: usize) -> bool {
    mask.get(i).is_some_and(|v| *v > 0.0)
}

/// Turns a flat action into an engine action. Masked-off choices fall back
/// to their no-op; indices outside a dimension are an error.
pub fn decode_and_validate(
    action: &[i64],
    obs: &[f32],
    view: &AgentView,
    listings: &[u64],
    layout: &ObservationLayout,
) -> Result<Action, CodecError> {
    let dims = &layout.actions.dims;
    if action.len() != dims.len() {
        return Err(CodecError::WrongLength {
            got: action.len(),
            expected: dims.len(),
        });
    }
    let mut idx = [0usize; 13];
    for (k, ((name, w), a)) in dims.iter().zip(action).enumerate() {
        if *a < 0 || *a >= *w as i64 {
            return Err(CodecError::OutOfRangeIndex { dim: name, index: *a });
        }
        idx[k] = *a as usize;
    }
    let ok = |dim: &str, i: usize| allowed(layout.mask(obs, dim), i);
    let mut out = Action::default();
    if idx[0] < 4 && ok("move", idx[0]) {
        out.mv = Some(Dir::from_index(idx[0]));
    }
    if idx[2] < ENTITY_ROWS && ok("attack_target", idx[2]) && ok("attack_style", idx[1]) {
        let style = Style::from_index(idx[1]).expect("style in range");
        out.attack = view.entities.get(idx[2]).map(|t| (style, *t));
    }
    if ok("comm_token", idx[3]) {
        out.comm = idx[3] as u8;
    }
    if layout.profile != Profile::Full {
        return Ok(out);
    }
    let slot = |dim: &str, i: usize| (i < INVENTORY_ROWS && ok(dim, i)).then_some(i);
    out.use_item = slot("use", idx[4]);
    out.destroy = slot("destroy", idx[5]);
    if let (Some(s), true) = (slot("give_item", idx[6]), idx[7] < ENTITY_ROWS && ok("give_target", idx[7])) {
        out.give_item = view.entities.get(idx[7]).map(|t| (s, *t));
    }
    if let (Some(s), true) = (slot("sell", idx[8]), ok("price", idx[9])) {
        out.sell = Some((s, idx[9] as u32 + 1));
    }
    if idx[10] < MARKET_ROWS && ok("buy", idx[10]) {
        out.buy = listings.get(idx[10]).copied();
    }
    if idx[11] < ENTITY_ROWS && ok("gold_target", idx[11]) && ok("gold_amount", idx[12]) {
        out.give_gold = view.entities.get(idx[11]).map(|t| (*t, idx[12] as u64 + 1));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_totals() {
        assert_eq!(ObservationLayout::new(Profile::Mini).len, 5068);
        assert_eq!(ObservationLayout::new(Profile::Full).len, 12241);
    }

    #[test]
    fn manifest_round_trip() {
        let l = ObservationLayout::new(Profile::Full);
        let parsed = ObservationLayout::parse_manifest(&l.manifest()).unwrap();
        assert_eq!(parsed, l.components);
        let mut end = 0;
        for c in &parsed {
            assert_eq!(c.offset, end);
            end += c.len();
        }
        assert_eq!(end, l.len);
    }

    #[test]
    fn noop_action_dims() {
        let a = ActionLayout::new(Profile::Full);
        let noop = a.noop();
        assert_eq!(noop[a.index_of("move").unwrap()], 4);
        assert_eq!(noop[a.index_of("attack_target").unwrap()], 100);
        assert_eq!(noop[a.index_of("buy").unwrap()], 384);
    }

    #[test]
    fn reused_frame_matches_fresh_build() {
        use crate::arena::{by_name, EpisodeInfo};
        use crate::config::GameConfig;
        use crate::env::Env;
        use crate::minigame::MinigameKind;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        for profile in [Profile::Mini, Profile::Full] {
            let mut cfg = GameConfig::new(profile);
            cfg.apply_assignment("PLAYER_N=32").unwrap();
            cfg.apply_assignment("MAP_CENTER=24").unwrap();
            let mut env = Env::new(cfg).unwrap();
            let ep = env.reset(4, Some(MinigameKind::TeamBattle)).unwrap();
            let info = EpisodeInfo { kind: ep.setup.kind, center: ep.state.map.center() };
            let layout = env.layout().clone();
            let width = layout.actions.len();
            let brawler = by_name("brawler").unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let mut flat = vec![0i64; env.num_agents() * width];
            for _ in 0..40 {
                let ep = env.episode().unwrap();
                if ep.done {
                    break;
                }
                for i in 0..env.num_agents() {
                    let obs = ep.frame.agent(&layout, i);
                    brawler.act(obs, &layout, &info, &mut rng, &mut flat[i * width..(i + 1) * width]);
                }
                env.step(&flat).unwrap();
                let ep = env.episode().unwrap();
                let fresh = build_frame(&ep.state, &layout, &ep.tasks);
                assert!(fresh.data == ep.frame.data, "{profile:?} tick {}", ep.tick());
                assert_eq!(fresh.views, ep.frame.views);
            }
        }
    }
}
