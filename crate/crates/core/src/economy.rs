//! Item use, harvesting, gifts and the global market.
//!
//! Every operation validates fully before mutating anything, so a rejected
//! order leaves the state untouched and emits no events.

use rand::Rng;
use thiserror::Error;

use crate::entity::{EntityId, Profession, Skill};
use crate::events::{EventKind, GameEvent};
use crate::items::{InventoryError, Item, ItemType, Slot};
use crate::state::{level_rule, GroundItem, Listing, WorldState};
use crate::world::Material;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TradeError {
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error("insufficient gold")]
    InsufficientGold,
    #[error("gift not allowed")]
    GiftDisallowed,
    #[error("listing expired or sold")]
    ListingExpired,
    #[error("nothing to harvest here")]
    WrongTile,
    #[error("subsystem disabled")]
    Disabled,
    #[error("invalid target")]
    InvalidTarget,
}

/// Harvest yields cap at this level.
pub const MAX_ITEM_LEVEL: u8 = 10;

/// Item level produced by a harvest at the given skill level.
pub fn harvest_level(skill: u8) -> u8 {
    skill.div_ceil(3).clamp(1, MAX_ITEM_LEVEL)
}

/// Skill that gates using an item, `None` when any level may use it.
pub fn use_gate(kind: ItemType) -> Option<Skill> {
    if let Some(style) = kind.style() {
        return Some(Skill::Combat(style));
    }
    match kind {
        ItemType::Rod | ItemType::Ration => Some(Skill::Harvest(Profession::Fishing)),
        ItemType::Gloves | ItemType::Potion => Some(Skill::Harvest(Profession::Herbalism)),
        ItemType::Pickaxe => Some(Skill::Harvest(Profession::Prospecting)),
        ItemType::Axe => Some(Skill::Harvest(Profession::Carving)),
        ItemType::Chisel => Some(Skill::Harvest(Profession::Alchemy)),
        _ => None,
    }
}

/// Level the holder must have to use `item`. Armor checks the highest skill.
pub fn can_use(st: &WorldState, id: EntityId, item: &Item) -> bool {
    let e = st.entity(id).expect("player");
    let have = match use_gate(item.kind) {
        Some(skill) => e.level(skill),
        None => e.max_skill_level(),
    };
    have >= item.level
}

fn player_index(st: &WorldState, id: EntityId) -> Result<usize, TradeError> {
    match st.entity(id) {
        Some(e) if e.is_player() && e.alive && e.health > 0 => Ok(id as usize - 1),
        _ => Err(TradeError::InvalidTarget),
    }
}

/// Equips, unequips or consumes the item in `slot`.
pub fn use_item(st: &mut WorldState, id: EntityId, slot: usize) -> Result<(), TradeError> {
    let i = player_index(st, id)?;
    let item = *st.players[i].inventory.get(slot).ok_or(InventoryError::EmptySlot)?;
    if item.kind.is_consumable() {
        if !can_use(st, id, &item) {
            return Err(InventoryError::LevelTooLow.into());
        }
        let restore = st.s.consumable_restore;
        let p = &mut st.players[i];
        p.inventory.take_one(slot)?;
        if item.kind == ItemType::Ration {
            p.food = (p.food + restore).min(p.max_gauge);
            p.water = (p.water + restore).min(p.max_gauge);
        } else {
            p.health = (p.health + restore).min(p.max_health);
        }
        let ev = GameEvent::new(st.tick, id, EventKind::ConsumeItem)
            .item(item.kind as u8, item.level)
            .amount(1);
        st.emit(ev);
        return Ok(());
    }
    let Some(kind_slot) = item.kind.slot() else {
        return Err(InventoryError::EmptySlot.into());
    };
    if item.equipped {
        st.players[i].inventory.items[slot].equipped = false;
        let ev = GameEvent::new(st.tick, id, EventKind::EquipItem)
            .item(item.kind as u8, item.level)
            .amount(0);
        st.emit(ev);
        return Ok(());
    }
    if !can_use(st, id, &item) {
        return Err(InventoryError::LevelTooLow.into());
    }
    if let Some(old) = st.players[i].inventory.equipped_index(kind_slot) {
        let prev = st.players[i].inventory.items[old];
        st.players[i].inventory.items[old].equipped = false;
        let ev = GameEvent::new(st.tick, id, EventKind::EquipItem)
            .item(prev.kind as u8, prev.level)
            .amount(0);
        st.emit(ev);
    }
    st.players[i].inventory.items[slot].equipped = true;
    let ev = GameEvent::new(st.tick, id, EventKind::EquipItem)
        .item(item.kind as u8, item.level)
        .amount(1);
    st.emit(ev);
    Ok(())
}

pub fn destroy_item(st: &mut WorldState, id: EntityId, slot: usize) -> Result<(), TradeError> {
    let i = player_index(st, id)?;
    let item = *st.players[i].inventory.get(slot).ok_or(InventoryError::EmptySlot)?;
    if item.equipped {
        return Err(InventoryError::Equipped.into());
    }
    st.players[i].inventory.take(slot)?;
    let ev = GameEvent::new(st.tick, id, EventKind::DestroyItem)
        .item(item.kind as u8, item.level)
        .amount(item.quantity as i64);
    st.emit(ev);
    Ok(())
}

fn gift_allowed(st: &WorldState, from: EntityId, to: EntityId) -> Result<usize, TradeError> {
    if !st.s.allow_gift {
        return Err(TradeError::GiftDisallowed);
    }
    if from == to {
        return Err(TradeError::InvalidTarget);
    }
    let j = player_index(st, to)?;
    if st.team_game() && !st.players[from as usize - 1].same_team(&st.players[j]) {
        return Err(TradeError::GiftDisallowed);
    }
    Ok(j)
}

pub fn give_item(st: &mut WorldState, id: EntityId, slot: usize, to: EntityId) -> Result<(), TradeError> {
    let i = player_index(st, id)?;
    let j = gift_allowed(st, id, to)?;
    let item = *st.players[i].inventory.get(slot).ok_or(InventoryError::EmptySlot)?;
    if item.equipped {
        return Err(InventoryError::Equipped.into());
    }
    let cap = st.s.inventory_capacity;
    if !st.players[j].inventory.can_accept(&item, cap) {
        return Err(InventoryError::InventoryFull.into());
    }
    let item = st.players[i].inventory.take(slot)?;
    st.players[j]
        .inventory
        .add(item, cap)
        .expect("capacity checked");
    let ev = GameEvent::new(st.tick, id, EventKind::GiveItem)
        .target(to)
        .item(item.kind as u8, item.level)
        .amount(item.quantity as i64);
    st.emit(ev);
    Ok(())
}

pub fn give_gold(st: &mut WorldState, id: EntityId, to: EntityId, amount: u64) -> Result<(), TradeError> {
    if !st.s.exchange {
        return Err(TradeError::Disabled);
    }
    let i = player_index(st, id)?;
    let j = gift_allowed(st, id, to)?;
    if amount == 0 || st.players[i].gold < amount {
        return Err(TradeError::InsufficientGold);
    }
    st.players[i].gold -= amount;
    st.players[j].gold += amount;
    let ev = GameEvent::new(st.tick, id, EventKind::GiveGold)
        .target(to)
        .amount(amount as i64);
    st.emit(ev);
    Ok(())
}

pub fn sell(st: &mut WorldState, id: EntityId, slot: usize, price: u32) -> Result<(), TradeError> {
    if !st.s.exchange {
        return Err(TradeError::Disabled);
    }
    let i = player_index(st, id)?;
    let item = *st.players[i].inventory.get(slot).ok_or(InventoryError::EmptySlot)?;
    if item.equipped {
        return Err(InventoryError::Equipped.into());
    }
    if price == 0 || price > st.s.price_n_obs {
        return Err(TradeError::InvalidTarget);
    }
    let item = st.players[i].inventory.take(slot)?;
    let listing = Listing {
        id: st.market.next_id,
        seller: id,
        item,
        price,
        expires: st.tick + st.s.listing_duration,
    };
    st.market.next_id += 1;
    st.market.listings.push(listing);
    let ev = GameEvent::new(st.tick, id, EventKind::ListItem)
        .item(item.kind as u8, item.level)
        .amount(price as i64);
    st.emit(ev);
    Ok(())
}

pub fn buy(st: &mut WorldState, id: EntityId, listing_id: u64) -> Result<(), TradeError> {
    if !st.s.exchange {
        return Err(TradeError::Disabled);
    }
    let i = player_index(st, id)?;
    let k = st.market.find(listing_id).ok_or(TradeError::ListingExpired)?;
    let listing = st.market.listings[k];
    if listing.seller == id {
        return Err(TradeError::InvalidTarget);
    }
    if st.players[i].gold < listing.price as u64 {
        return Err(TradeError::InsufficientGold);
    }
    let cap = st.s.inventory_capacity;
    if !st.players[i].inventory.can_accept(&listing.item, cap) {
        return Err(InventoryError::InventoryFull.into());
    }
    st.market.listings.remove(k);
    let price = listing.price as u64;
    st.players[i].gold -= price;
    st.players[i]
        .inventory
        .add(listing.item, cap)
        .expect("capacity checked");
    let seller = listing.seller as usize - 1;
    st.players[seller].gold += price;
    let (kind, level) = (listing.item.kind as u8, listing.item.level);
    st.emit(
        GameEvent::new(st.tick, id, EventKind::BuyItem)
            .target(listing.seller)
            .item(kind, level)
            .amount(price as i64),
    );
    st.emit(
        GameEvent::new(st.tick, listing.seller, EventKind::EarnGold)
            .target(id)
            .item(kind, level)
            .amount(price as i64),
    );
    Ok(())
}

/// Harvest yield for a material: the item and whether it is ammunition.
fn yield_of(m: Material) -> Option<(ItemType, Profession)> {
    match m {
        Material::Tree => Some((ItemType::Arrow, Profession::Carving)),
        Material::Ore => Some((ItemType::Whetstone, Profession::Prospecting)),
        Material::Crystal => Some((ItemType::Runes, Profession::Alchemy)),
        Material::Herb => Some((ItemType::Potion, Profession::Herbalism)),
        Material::Fish => Some((ItemType::Ration, Profession::Fishing)),
        _ => None,
    }
}

/// Weapon that shares a style with an ammunition type.
fn matching_weapon(ammo: ItemType) -> Option<ItemType> {
    ammo.style().map(ItemType::weapon_for)
}

/// Gives an item to a player, dropping it on their tile when full.
fn grant(st: &mut WorldState, i: usize, item: Item) {
    let cap = st.s.inventory_capacity;
    if let Err(item) = st.players[i].inventory.add(item, cap) {
        let pos = st.players[i].pos;
        st.drop_item(pos, item);
    }
}

/// Harvests the profession tile under the player, or an adjacent fish tile.
pub fn harvest(st: &mut WorldState, id: EntityId) -> Result<(), TradeError> {
    if !st.s.profession {
        return Err(TradeError::Disabled);
    }
    let i = player_index(st, id)?;
    let pos = st.players[i].pos;
    let here = st.map.material(pos);
    let tile = if yield_of(here).is_some() && here != Material::Fish && st.map.harvests(pos) > 0 {
        pos
    } else {
        st.map
            .adjacent_harvestable(pos, Material::Fish)
            .ok_or(TradeError::WrongTile)?
    };
    let (kind, prof) = yield_of(st.map.material(tile)).expect("resource tile");
    let skill = Skill::Harvest(prof);
    let level = harvest_level(st.players[i].level(skill));
    st.map.harvest(tile);
    let ammo = kind.slot() == Some(Slot::Ammunition);
    let xp = if ammo { st.s.ammunition_xp } else { st.s.consumable_xp } as u64;
    let rule = level_rule(&st.s);
    st.players[i].gain_xp(skill, xp, &rule);
    let mut item = Item::new(kind, level);
    if ammo {
        item.quantity = 1;
    }
    grant(st, i, item);
    st.emit(
        GameEvent::new(st.tick, id, EventKind::HarvestItem)
            .item(kind as u8, level)
            .amount(1),
    );
    if ammo && st.s.equipment {
        let roll: f64 = st.rng.random();
        if roll < st.s.weapon_drop_prob {
            let weapon = matching_weapon(kind).expect("ammunition has a style");
            grant(st, i, Item::new(weapon, level));
            st.emit(
                GameEvent::new(st.tick, id, EventKind::HarvestItem)
                    .item(weapon as u8, level)
                    .amount(1),
            );
        }
    }
    Ok(())
}

/// Moves ground items on the player's tile into their inventory.
pub fn pick_up(st: &mut WorldState, id: EntityId) {
    let i = id as usize - 1;
    let pos = st.players[i].pos;
    let cap = st.s.inventory_capacity;
    let mut k = 0;
    while k < st.ground.len() {
        if st.ground[k].pos == pos && st.players[i].inventory.can_accept(&st.ground[k].item, cap) {
            let g = st.ground.remove(k);
            st.players[i].inventory.add(g.item, cap).expect("capacity checked");
        } else {
            k += 1;
        }
    }
}

/// Returns expired listings to sellers and despawns old ground items.
pub fn expire(st: &mut WorldState) {
    let tick = st.tick;
    let cap = st.s.inventory_capacity;
    let (expired, live): (Vec<Listing>, Vec<Listing>) =
        st.market.listings.drain(..).partition(|l| l.expires <= tick);
    st.market.listings = live;
    for l in expired {
        let i = l.seller as usize - 1;
        if let Err(item) = st.players[i].inventory.add(l.item, cap) {
            let pos = st.players[i].pos;
            st.drop_item(pos, item);
        }
    }
    st.ground.retain(|g| g.expires > tick);
}

/// Moves a dead player's listings and inventory to the ground.
pub fn drop_estate(st: &mut WorldState, id: EntityId) {
    let i = id as usize - 1;
    let pos = st.players[i].pos;
    let (mine, rest): (Vec<Listing>, Vec<Listing>) =
        st.market.listings.drain(..).partition(|l| l.seller == id);
    st.market.listings = rest;
    let expires = st.tick + crate::state::GROUND_ITEM_LIFETIME;
    let mut items: Vec<Item> = mine.into_iter().map(|l| l.item).collect();
    items.extend(st.players[i].inventory.drain());
    for mut item in items {
        item.equipped = false;
        st.ground.push(GroundItem { pos, item, expires });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{team_dict, GameConfig, Profile, Settings};
    use crate::state::SpawnMode;
    use crate::world::{FogClock, ResourceRules, TileMap};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn full_state(teams: bool) -> WorldState {
        let mut cfg = GameConfig::new(Profile::Full);
        cfg.set("PLAYER_N", crate::config::Value::Int(4)).unwrap();
        cfg.set("EXCHANGE_BASE_GOLD", crate::config::Value::Int(100)).unwrap();
        let s = Settings::resolve(&cfg);
        let map = TileMap::flat(32, 16, ResourceRules::from_config(&cfg));
        let fog = FogClock { onset: None, speed: 0.0, final_size: 8 };
        let t = teams.then(|| team_dict(4, 2));
        let mut st = WorldState::new(s, map, fog, t, ChaCha8Rng::seed_from_u64(9));
        st.spawn_players(SpawnMode::EdgeScatter).unwrap();
        st.tick = 1;
        st
    }

    #[test]
    fn equip_hat_level_one() {
        let mut st = full_state(false);
        st.players[0].inventory.items.push(Item::new(ItemType::Hat, 1));
        use_item(&mut st, 1, 0).unwrap();
        assert!(st.players[0].inventory.items[0].equipped);
        let last = st.log.events().last().unwrap();
        assert_eq!((last.kind, last.amount), (EventKind::EquipItem, 1));
    }

    #[test]
    fn spear_gate() {
        let mut st = full_state(false);
        st.players[0].inventory.items.push(Item::new(ItemType::Spear, 3));
        assert_eq!(use_item(&mut st, 1, 0), Err(TradeError::Inventory(InventoryError::LevelTooLow)));
        assert_eq!(st.log.event_count(), 0);
    }

    #[test]
    fn ration_restores() {
        let mut st = full_state(false);
        st.players[0].food = 10;
        st.players[0].water = 20;
        st.players[0].inventory.items.push(Item { quantity: 2, ..Item::new(ItemType::Ration, 1) });
        use_item(&mut st, 1, 0).unwrap();
        assert_eq!((st.players[0].food, st.players[0].water), (60, 70));
        assert_eq!(st.players[0].inventory.items[0].quantity, 1);
    }

    #[test]
    fn buy_settles() {
        let mut st = full_state(false);
        st.players[1].inventory.items.push(Item::new(ItemType::Hat, 1));
        sell(&mut st, 2, 0, 10).unwrap();
        buy(&mut st, 1, 0).unwrap();
        assert_eq!(st.players[0].gold, 90);
        assert_eq!(st.players[1].gold, 110);
        let kinds: Vec<_> = st.log.events().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![EventKind::ListItem, EventKind::BuyItem, EventKind::EarnGold]);
        assert_eq!(buy(&mut st, 3, 0), Err(TradeError::ListingExpired));
    }

    #[test]
    fn listing_expires() {
        let mut st = full_state(false);
        st.players[1].inventory.items.push(Item::new(ItemType::Hat, 1));
        sell(&mut st, 2, 0, 10).unwrap();
        let d = st.s.listing_duration;
        st.tick = d;
        expire(&mut st);
        assert_eq!(st.market.listings.len(), 1);
        st.tick = 1 + d;
        expire(&mut st);
        assert!(st.market.listings.is_empty());
        assert_eq!(st.players[1].inventory.len(), 1);
    }

    #[test]
    fn gift_to_foe_rejected() {
        let mut st = full_state(true);
        st.players[0].inventory.items.push(Item::new(ItemType::Hat, 1));
        assert_eq!(give_item(&mut st, 1, 0, 3), Err(TradeError::GiftDisallowed));
        give_item(&mut st, 1, 0, 2).unwrap();
        assert_eq!(st.players[1].inventory.len(), 1);
    }

    #[test]
    fn ore_yields_whetstone() {
        let mut st = full_state(false);
        let p = st.players[0].pos;
        st.map.set_material(p, Material::Ore);
        harvest(&mut st, 1).unwrap();
        let item = st.players[0].inventory.items[0];
        assert_eq!((item.kind, item.level), (ItemType::Whetstone, 1));
        assert_eq!(st.players[0].skills[Skill::Harvest(Profession::Prospecting).index()].xp, 10);
        assert_eq!(harvest(&mut st, 1), Err(TradeError::WrongTile));
    }

    #[test]
    fn no_weapon_at_zero_probability() {
        let mut st = full_state(false);
        st.s.weapon_drop_prob = 0.0;
        let p = st.players[0].pos;
        st.map.set_material(p, Material::Tree);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut done = 0;
        while done < 100_000 {
            st.players[0].inventory.items.clear();
            if harvest(&mut st, 1).is_ok() {
                done += 1;
            }
            st.map.tick_regeneration(&mut rng);
        }
        assert!(st.log.events().all(|e| e.item != ItemType::Bow as u8));
    }

    #[test]
    fn harvest_levels() {
        assert_eq!(harvest_level(1), 1);
        assert_eq!(harvest_level(3), 1);
        assert_eq!(harvest_level(4), 2);
        assert_eq!(harvest_level(9), 3);
        assert_eq!(harvest_level(10), 4);
    }
}
