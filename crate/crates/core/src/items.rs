//! Item classes, stacked inventories and equipment bonuses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entity::{Profession, Style};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum ItemType {
    Hat = 0,
    Top,
    Bottom,
    Spear,
    Bow,
    Wand,
    Axe,
    Gloves,
    Rod,
    Pickaxe,
    Chisel,
    Whetstone,
    Arrow,
    Runes,
    Ration,
    Potion,
}

/// Which equipment slot an item occupies when used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    Hat,
    Top,
    Bottom,
    Weapon,
    Tool,
    Ammunition,
}

impl ItemType {
    pub const ALL: [ItemType; 16] = [
        ItemType::Hat,
        ItemType::Top,
        ItemType::Bottom,
        ItemType::Spear,
        ItemType::Bow,
        ItemType::Wand,
        ItemType::Axe,
        ItemType::Gloves,
        ItemType::Rod,
        ItemType::Pickaxe,
        ItemType::Chisel,
        ItemType::Whetstone,
        ItemType::Arrow,
        ItemType::Runes,
        ItemType::Ration,
        ItemType::Potion,
    ];

    pub const ARMOR: [ItemType; 3] = [ItemType::Hat, ItemType::Top, ItemType::Bottom];
    pub const TOOLS: [ItemType; 5] = [
        ItemType::Axe,
        ItemType::Gloves,
        ItemType::Rod,
        ItemType::Pickaxe,
        ItemType::Chisel,
    ];

    pub fn from_u8(b: u8) -> Option<ItemType> {
        ItemType::ALL.get(b as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ItemType::Hat => "Hat",
            ItemType::Top => "Top",
            ItemType::Bottom => "Bottom",
            ItemType::Spear => "Spear",
            ItemType::Bow => "Bow",
            ItemType::Wand => "Wand",
            ItemType::Axe => "Axe",
            ItemType::Gloves => "Gloves",
            ItemType::Rod => "Rod",
            ItemType::Pickaxe => "Pickaxe",
            ItemType::Chisel => "Chisel",
            ItemType::Whetstone => "Whetstone",
            ItemType::Arrow => "Arrow",
            ItemType::Runes => "Runes",
            ItemType::Ration => "Ration",
            ItemType::Potion => "Potion",
        }
    }

    pub fn slot(self) -> Option<Slot> {
        Some(match self {
            ItemType::Hat => Slot::Hat,
            ItemType::Top => Slot::Top,
            ItemType::Bottom => Slot::Bottom,
            ItemType::Spear | ItemType::Bow | ItemType::Wand => Slot::Weapon,
            ItemType::Axe | ItemType::Gloves | ItemType::Rod | ItemType::Pickaxe | ItemType::Chisel => {
                Slot::Tool
            }
            ItemType::Whetstone | ItemType::Arrow | ItemType::Runes => Slot::Ammunition,
            ItemType::Ration | ItemType::Potion => return None,
        })
    }

    pub fn is_consumable(self) -> bool {
        matches!(self, ItemType::Ration | ItemType::Potion)
    }

    pub fn stackable(self) -> bool {
        self.is_consumable() || self.slot() == Some(Slot::Ammunition)
    }

    /// Combat style served by a weapon or ammunition.
    pub fn style(self) -> Option<Style> {
        match self {
            ItemType::Spear | ItemType::Whetstone => Some(Style::Melee),
            ItemType::Bow | ItemType::Arrow => Some(Style::Range),
            ItemType::Wand | ItemType::Runes => Some(Style::Mage),
            _ => None,
        }
    }

    pub fn weapon_for(style: Style) -> ItemType {
        match style {
            Style::Melee => ItemType::Spear,
            Style::Range => ItemType::Bow,
            Style::Mage => ItemType::Wand,
        }
    }

    /// Skill that gates use of this item, if it is a profession item.
    pub fn profession(self) -> Option<Profession> {
        match self {
            ItemType::Rod | ItemType::Ration => Some(Profession::Fishing),
            ItemType::Gloves | ItemType::Potion => Some(Profession::Herbalism),
            ItemType::Pickaxe => Some(Profession::Prospecting),
            ItemType::Axe => Some(Profession::Carving),
            ItemType::Chisel => Some(Profession::Alchemy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub kind: ItemType,
    pub level: u8,
    pub quantity: u32,
    pub equipped: bool,
}

impl Item {
    pub fn new(kind: ItemType, level: u8) -> Self {
        Item {
            kind,
            level: level.max(1),
            quantity: 1,
            equipped: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InventoryError {
    #[error("inventory slot is empty")]
    EmptySlot,
    #[error("inventory is full")]
    InventoryFull,
    #[error("skill level too low for this item")]
    LevelTooLow,
    #[error("item is equipped")]
    Equipped,
}

/// Ordered item slots; stackables merge with an unequipped stack of the same
/// kind and level.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Inventory {
    pub items: Vec<Item>,
}

impl Inventory {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, slot: usize) -> Option<&Item> {
        self.items.get(slot)
    }

    pub fn can_accept(&self, item: &Item, capacity: usize) -> bool {
        self.items.len() < capacity || self.stack_target(item).is_some()
    }

    fn stack_target(&self, item: &Item) -> Option<usize> {
        if !item.kind.stackable() {
            return None;
        }
        self.items
            .iter()
            .position(|i| i.kind == item.kind && i.level == item.level && !i.equipped)
    }

    /// Adds an item; returns it back when there is no room.
    pub fn add(&mut self, mut item: Item, capacity: usize) -> Result<(), Item> {
        item.equipped = false;
        if let Some(i) = self.stack_target(&item) {
            self.items[i].quantity += item.quantity;
            return Ok(());
        }
        if self.items.len() >= capacity {
            return Err(item);
        }
        self.items.push(item);
        Ok(())
    }

    /// Removes a whole slot.
    pub fn take(&mut self, slot: usize) -> Result<Item, InventoryError> {
        if slot >= self.items.len() {
            return Err(InventoryError::EmptySlot);
        }
        Ok(self.items.remove(slot))
    }

    /// Removes one unit from a slot, dropping the slot when it empties.
    pub fn take_one(&mut self, slot: usize) -> Result<Item, InventoryError> {
        let item = self.items.get_mut(slot).ok_or(InventoryError::EmptySlot)?;
        let mut one = *item;
        one.quantity = 1;
        one.equipped = false;
        item.quantity -= 1;
        if item.quantity == 0 {
            self.items.remove(slot);
        }
        Ok(one)
    }

    pub fn equipped(&self, slot: Slot) -> Option<&Item> {
        self.items
            .iter()
            .find(|i| i.equipped && i.kind.slot() == Some(slot))
    }

    pub fn equipped_index(&self, slot: Slot) -> Option<usize> {
        self.items
            .iter()
            .position(|i| i.equipped && i.kind.slot() == Some(slot))
    }

    pub fn equipped_items(&self) -> impl Iterator<Item = &Item> {
        self.items.iter().filter(|i| i.equipped)
    }

    pub fn drain(&mut self) -> Vec<Item> {
        std::mem::take(&mut self.items)
            .into_iter()
            .map(|mut i| {
                i.equipped = false;
                i
            })
            .collect()
    }
}

/// Per-piece equipment coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquipmentRules {
    pub weapon: (i32, i32),
    pub ammunition: (i32, i32),
    pub tool: (i32, i32),
    pub armor: (i32, i32),
}

/// `(offense, defense)` from equipped items only.
pub fn equipment_stats(inv: &Inventory, rules: &EquipmentRules) -> (i32, i32) {
    let lin = |(base, per): (i32, i32), level: u8| base + per * level as i32;
    let mut offense = 0;
    let mut defense = 0;
    for item in inv.equipped_items() {
        match item.kind.slot() {
            Some(Slot::Weapon) => offense += lin(rules.weapon, item.level),
            Some(Slot::Ammunition) => offense += lin(rules.ammunition, item.level),
            Some(Slot::Tool) => defense += lin(rules.tool, item.level),
            Some(Slot::Hat | Slot::Top | Slot::Bottom) => defense += lin(rules.armor, item.level),
            None => {}
        }
    }
    (offense, defense)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules() -> EquipmentRules {
        EquipmentRules {
            weapon: (5, 3),
            ammunition: (2, 1),
            tool: (1, 1),
            armor: (2, 1),
        }
    }

    fn equipped(kind: ItemType, level: u8) -> Item {
        Item {
            equipped: true,
            ..Item::new(kind, level)
        }
    }

    #[test]
    fn nothing_equipped() {
        let mut inv = Inventory::default();
        inv.add(Item::new(ItemType::Spear, 4), 12).unwrap();
        assert_eq!(equipment_stats(&inv, &rules()), (0, 0));
    }

    #[test]
    fn weapon_linear() {
        let inv = Inventory {
            items: vec![equipped(ItemType::Spear, 2)],
        };
        assert_eq!(equipment_stats(&inv, &rules()).0, 5 + 3 * 2);
    }

    #[test]
    fn three_armor_pieces() {
        let inv = Inventory {
            items: ItemType::ARMOR.iter().map(|k| equipped(*k, 1)).collect(),
        };
        assert_eq!(equipment_stats(&inv, &rules()).1, 3 * (2 + 1));
    }

    #[test]
    fn stacking_and_capacity() {
        let mut inv = Inventory::default();
        for _ in 0..3 {
            inv.add(Item::new(ItemType::Arrow, 1), 2).unwrap();
        }
        assert_eq!(inv.len(), 1);
        assert_eq!(inv.items[0].quantity, 3);
        inv.add(Item::new(ItemType::Hat, 1), 2).unwrap();
        assert!(inv.add(Item::new(ItemType::Top, 1), 2).is_err());
        // stacks still merge when full
        inv.add(Item::new(ItemType::Arrow, 1), 2).unwrap();
        assert_eq!(inv.take_one(0).unwrap().quantity, 1);
        assert_eq!(inv.items[0].quantity, 3);
        assert_eq!(inv.take(5), Err(InventoryError::EmptySlot));
    }
}
