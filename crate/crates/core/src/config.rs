//! Layered game configuration.
//!
//! A [`GameConfig`] holds the original attribute values (loaded from the
//! shipped defaults, a config file, or `--set` flags) and a separate layer of
//! per-episode overrides written by minigame setup. Episode logic only ever
//! touches the override layer; [`GameConfig::reset_overrides`] restores the
//! original view exactly.
//!
//! Attribute access by string key is for setup time. The tick loop reads the
//! typed snapshot produced by [`Settings::resolve`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULTS: &str = include_str!("defaults.toml");

/// Version tag of the shipped defaults file.
pub const DEFAULTS_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("attribute `{key}` expects {expected}, got {got}")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        got: String,
    },
    #[error("malformed assignment `{0}` (expected KEY=VALUE)")]
    BadAssignment(String),
    #[error("config file error: {0}")]
    File(String),
    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),
}

/// The ten toggleable game subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    Terrain,
    Resource,
    Combat,
    Npc,
    Communication,
    Item,
    Equipment,
    Profession,
    Progression,
    Exchange,
}

impl Subsystem {
    pub const ALL: [Subsystem; 10] = [
        Subsystem::Terrain,
        Subsystem::Resource,
        Subsystem::Combat,
        Subsystem::Npc,
        Subsystem::Communication,
        Subsystem::Item,
        Subsystem::Equipment,
        Subsystem::Profession,
        Subsystem::Progression,
        Subsystem::Exchange,
    ];

    /// Subsystems that can be switched off per minigame (everything but Terrain).
    pub const OPTIONAL: [Subsystem; 9] = [
        Subsystem::Resource,
        Subsystem::Combat,
        Subsystem::Npc,
        Subsystem::Communication,
        Subsystem::Item,
        Subsystem::Equipment,
        Subsystem::Profession,
        Subsystem::Progression,
        Subsystem::Exchange,
    ];

    /// The "extras" bundle only present in the full profile.
    pub const EXTRAS: [Subsystem; 5] = [
        Subsystem::Item,
        Subsystem::Equipment,
        Subsystem::Profession,
        Subsystem::Progression,
        Subsystem::Exchange,
    ];

    /// Direct prerequisites.
    pub fn requires(self) -> &'static [Subsystem] {
        match self {
            Subsystem::Resource => &[Subsystem::Terrain],
            Subsystem::Npc => &[Subsystem::Combat],
            Subsystem::Equipment | Subsystem::Exchange => &[Subsystem::Item],
            Subsystem::Profession => &[Subsystem::Terrain, Subsystem::Item],
            _ => &[],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Subsystem::Terrain => "terrain",
            Subsystem::Resource => "resource",
            Subsystem::Combat => "combat",
            Subsystem::Npc => "npc",
            Subsystem::Communication => "communication",
            Subsystem::Item => "item",
            Subsystem::Equipment => "equipment",
            Subsystem::Profession => "profession",
            Subsystem::Progression => "progression",
            Subsystem::Exchange => "exchange",
        }
    }
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subsystem {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subsystem::ALL
            .into_iter()
            .find(|sub| sub.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ConfigError::UnknownSubsystem(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Profile {
    Mini,
    Full,
}

impl Profile {
    pub fn subsystems(self) -> BTreeSet<Subsystem> {
        let mini = [
            Subsystem::Terrain,
            Subsystem::Resource,
            Subsystem::Combat,
            Subsystem::Npc,
            Subsystem::Communication,
        ];
        let mut set: BTreeSet<_> = mini.into_iter().collect();
        if self == Profile::Full {
            set.extend(Subsystem::EXTRAS);
        }
        set
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Mini => "mini",
            Profile::Full => "full",
        }
    }
}

impl FromStr for Profile {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mini" => Ok(Profile::Mini),
            "full" => Ok(Profile::Full),
            other => Err(ConfigError::BadAssignment(format!("PROFILE={other}"))),
        }
    }
}

/// An attribute value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
    Range(f64, f64),
    None,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v:?}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Range(a, b) => write!(f, "[{a:?}, {b:?}]"),
            Value::None => f.write_str("\"none\""),
        }
    }
}

impl Value {
    /// Parses the textual form used by `--set KEY=VALUE`.
    pub fn parse(text: &str) -> Value {
        let t = text.trim();
        if t.eq_ignore_ascii_case("none") || t == "\"none\"" {
            return Value::None;
        }
        if t.eq_ignore_ascii_case("true") {
            return Value::Bool(true);
        }
        if t.eq_ignore_ascii_case("false") {
            return Value::Bool(false);
        }
        if let Ok(i) = t.parse::<i64>() {
            return Value::Int(i);
        }
        if let Ok(x) = t.parse::<f64>() {
            return Value::Real(x);
        }
        let inner = t.trim_start_matches('[').trim_end_matches(']');
        let parts: Vec<_> = inner.split(',').map(str::trim).collect();
        if parts.len() == 2 {
            if let (Ok(a), Ok(b)) = (parts[0].parse::<f64>(), parts[1].parse::<f64>()) {
                return Value::Range(a, b);
            }
        }
        // Anything else is kept as a marker that fails type-checking.
        Value::Range(f64::NAN, f64::NAN)
    }

    fn describe(&self) -> String {
        match self {
            Value::Int(_) => "integer".into(),
            Value::Real(_) => "real".into(),
            Value::Bool(_) => "boolean".into(),
            Value::Range(a, b) if a.is_nan() && b.is_nan() => "unparseable text".into(),
            Value::Range(..) => "range".into(),
            Value::None => "none".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Int,
    Real,
    Bool,
    Range,
    /// Integer or none.
    OptInt,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Int => "integer",
            Kind::Real => "real",
            Kind::Bool => "boolean",
            Kind::Range => "range",
            Kind::OptInt => "integer or none",
        }
    }

    /// Type-checks `value`, coercing integers into real slots.
    fn admit(self, value: Value) -> Option<Value> {
        match (self, value) {
            (Kind::Int, Value::Int(_)) => Some(value),
            (Kind::Real, Value::Real(x)) if !x.is_nan() => Some(value),
            (Kind::Real, Value::Int(i)) => Some(Value::Real(i as f64)),
            (Kind::Bool, Value::Bool(_)) => Some(value),
            (Kind::Range, Value::Range(a, b)) if !a.is_nan() && !b.is_nan() => Some(value),
            (Kind::OptInt, Value::Int(_) | Value::None) => Some(value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Any,
    Probability,
    Positive,
    NonNegative,
}

struct Attr {
    key: &'static str,
    kind: Kind,
    bound: Bound,
}

const fn attr(key: &'static str, kind: Kind, bound: Bound) -> Attr {
    Attr { key, kind, bound }
}

use Bound::{Any, NonNegative, Positive, Probability};
use Kind::{Bool, Int, OptInt, Range, Real};

static SCHEMA: &[Attr] = &[
    attr("HORIZON", Int, Positive),
    attr("PLAYER_N", Int, NonNegative),
    attr("MAP_CENTER", Int, Positive),
    attr("MAP_BORDER", Int, Positive),
    attr("MAP_N", Int, Positive),
    attr("MAP_RESET_FROM_FRACTAL", Bool, Any),
    attr("ALLOW_MOVE_INTO_OCCUPIED_TILE", Bool, Any),
    attr("PLAYER_VISION_RADIUS", Int, Positive),
    attr("PLAYER_BASE_HEALTH", Int, Positive),
    attr("PLAYER_HEALTH_INCREMENT", Int, NonNegative),
    attr("DEATH_FOG_ONSET", OptInt, NonNegative),
    attr("DEATH_FOG_SPEED", Real, NonNegative),
    attr("DEATH_FOG_FINAL_SIZE", Int, NonNegative),
    attr("PROVIDE_ACTION_TARGETS", Bool, Any),
    attr("PROVIDE_NOOP_ACTION_TARGET", Bool, Any),
    attr("PROVIDE_DEATH_FOG_OBS", Bool, Any),
    attr("TASK_EMBED_DIM", Int, Positive),
    attr("ADAPTIVE_DIFFICULTY", Bool, Any),
    attr("REWARD_SHAPING", Bool, Any),
    attr("REWARD_HEALTH_WEIGHT", Real, Any),
    attr("REWARD_XP_WEIGHT", Real, Any),
    attr("REWARD_EQUIPMENT_WEIGHT", Real, Any),
    attr("REWARD_GOLD_WEIGHT", Real, Any),
    attr("TERRAIN_FLIP_SEED", Bool, Any),
    attr("TERRAIN_FREQUENCY", Range, Any),
    attr("TERRAIN_FREQUENCY_OFFSET", Real, Any),
    attr("TERRAIN_LOG_INTERPOLATE_MIN", Real, Any),
    attr("TERRAIN_LOG_INTERPOLATE_MAX", Real, Any),
    attr("TERRAIN_TILES_PER_OCTAVE", Int, Positive),
    attr("TERRAIN_VOID", Real, Probability),
    attr("TERRAIN_WATER", Real, Probability),
    attr("TERRAIN_GRASS", Real, Probability),
    attr("TERRAIN_FOILAGE", Real, Probability),
    attr("TERRAIN_RESET_TO_GRASS", Bool, Any),
    attr("TERRAIN_DISABLE_STONE", Bool, Any),
    attr("TERRAIN_SCATTER_EXTRA_RESOURCES", Bool, Any),
    attr("RESOURCE_BASE", Int, Positive),
    attr("RESOURCE_DEPLETION_RATE", Int, NonNegative),
    attr("RESOURCE_STARVATION_RATE", Int, NonNegative),
    attr("RESOURCE_DEHYDRATION_RATE", Int, NonNegative),
    attr("RESOURCE_RESILIENT_POPULATION", Real, Probability),
    attr("RESOURCE_DAMAGE_REDUCTION", Real, Probability),
    attr("RESOURCE_FOILAGE_CAPACITY", Int, Positive),
    attr("RESOURCE_FOILAGE_RESPAWN", Real, Probability),
    attr("RESOURCE_HARVEST_RESTORE_FRACTION", Real, Probability),
    attr("RESOURCE_HEALTH_REGEN_THRESHOLD", Real, Probability),
    attr("RESOURCE_HEALTH_RESTORE_FRACTION", Real, Probability),
    attr("COMBAT_SPAWN_IMMUNITY", Int, NonNegative),
    attr("COMBAT_ALLOW_FLEXIBLE_STYLE", Bool, Any),
    attr("COMBAT_STATUS_DURATION", Int, NonNegative),
    attr("COMBAT_WEAKNESS_MULTIPLIER", Real, NonNegative),
    attr("COMBAT_MINIMUM_DAMAGE_PROPORTION", Real, Probability),
    attr("COMBAT_MELEE_DAMAGE", Int, NonNegative),
    attr("COMBAT_MELEE_REACH", Int, Positive),
    attr("COMBAT_RANGE_DAMAGE", Int, NonNegative),
    attr("COMBAT_RANGE_REACH", Int, Positive),
    attr("COMBAT_MAGE_DAMAGE", Int, NonNegative),
    attr("COMBAT_MAGE_REACH", Int, Positive),
    attr("NPC_N", Int, NonNegative),
    attr("NPC_DEFAULT_REFILL_DEAD_NPCS", Bool, Any),
    attr("NPC_SPAWN_ATTEMPTS", Int, NonNegative),
    attr("NPC_SPAWN_AGGRESSIVE", Real, Probability),
    attr("NPC_SPAWN_NEUTRAL", Real, Probability),
    attr("NPC_SPAWN_PASSIVE", Real, Probability),
    attr("NPC_LEVEL_MIN", Int, Positive),
    attr("NPC_LEVEL_MAX", Int, Positive),
    attr("NPC_BASE_HEALTH", Int, Positive),
    attr("NPC_LEVEL_HEALTH", Int, NonNegative),
    attr("NPC_BASE_DEFENSE", Int, NonNegative),
    attr("NPC_LEVEL_DEFENSE", Int, NonNegative),
    attr("NPC_BASE_DAMAGE", Int, NonNegative),
    attr("NPC_LEVEL_DAMAGE", Int, NonNegative),
    attr("NPC_LEVEL_MULTIPLIER", Real, NonNegative),
    attr("NPC_ALLOW_ATTACK_OTHER_NPCS", Bool, Any),
    attr("COMMUNICATION_N_OBS", Int, Positive),
    attr("COMMUNICATION_NUM_TOKENS", Int, Positive),
    attr("COMMUNICATION_PROTOCOL", Bool, Any),
    attr("ITEM_N", Int, Positive),
    attr("ITEM_INVENTORY_CAPACITY", Int, Positive),
    attr("ITEM_ALLOW_GIFT", Bool, Any),
    attr("INVENTORY_N_OBS", Int, Positive),
    attr("WEAPON_DROP_PROB", Real, Probability),
    attr("EQUIPMENT_WEAPON_BASE_DAMAGE", Int, NonNegative),
    attr("EQUIPMENT_WEAPON_LEVEL_DAMAGE", Int, NonNegative),
    attr("EQUIPMENT_AMMUNITION_BASE_DAMAGE", Int, NonNegative),
    attr("EQUIPMENT_AMMUNITION_LEVEL_DAMAGE", Int, NonNegative),
    attr("EQUIPMENT_TOOL_BASE_DEFENSE", Int, NonNegative),
    attr("EQUIPMENT_TOOL_LEVEL_DEFENSE", Int, NonNegative),
    attr("EQUIPMENT_ARMOR_BASE_DEFENSE", Int, NonNegative),
    attr("EQUIPMENT_ARMOR_LEVEL_DEFENSE", Int, NonNegative),
    attr("PROFESSION_TREE_CAPACITY", Int, Positive),
    attr("PROFESSION_TREE_RESPAWN", Real, Probability),
    attr("PROFESSION_ORE_CAPACITY", Int, Positive),
    attr("PROFESSION_ORE_RESPAWN", Real, Probability),
    attr("PROFESSION_CRYSTAL_CAPACITY", Int, Positive),
    attr("PROFESSION_CRYSTAL_RESPAWN", Real, Probability),
    attr("PROFESSION_HERB_CAPACITY", Int, Positive),
    attr("PROFESSION_HERB_RESPAWN", Real, Probability),
    attr("PROFESSION_FISH_CAPACITY", Int, Positive),
    attr("PROFESSION_FISH_RESPAWN", Real, Probability),
    attr("PROFESSION_CONSUMABLE_RESTORE", Int, NonNegative),
    attr("PROGRESSION_BASE_LEVEL", Int, Positive),
    attr("PROGRESSION_LEVEL_MAX", Int, Positive),
    attr("PROGRESSION_EXP_THRESHOLD", Int, Positive),
    attr("PROGRESSION_COMBAT_XP_SCALE", Int, NonNegative),
    attr("PROGRESSION_AMMUNITION_XP_SCALE", Int, NonNegative),
    attr("PROGRESSION_CONSUMABLE_XP_SCALE", Int, NonNegative),
    attr("PROGRESSION_MELEE_BASE_DAMAGE", Int, NonNegative),
    attr("PROGRESSION_MELEE_LEVEL_DAMAGE", Int, NonNegative),
    attr("PROGRESSION_RANGE_BASE_DAMAGE", Int, NonNegative),
    attr("PROGRESSION_RANGE_LEVEL_DAMAGE", Int, NonNegative),
    attr("PROGRESSION_MAGE_BASE_DAMAGE", Int, NonNegative),
    attr("PROGRESSION_MAGE_LEVEL_DAMAGE", Int, NonNegative),
    attr("PROGRESSION_BASE_DEFENSE", Int, NonNegative),
    attr("PROGRESSION_LEVEL_DEFENSE", Int, NonNegative),
    attr("EXCHANGE_BASE_GOLD", Int, NonNegative),
    attr("EXCHANGE_LISTING_DURATION", Int, Positive),
    attr("MARKET_N_OBS", Int, Positive),
    attr("PRICE_N_OBS", Int, Positive),
];

fn schema(key: &str) -> Option<&'static Attr> {
    SCHEMA.iter().find(|a| a.key == key)
}

/// A single problem reported by [`GameConfig::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `dependent` is enabled but its prerequisite is not.
    Dependency {
        dependent: Subsystem,
        requires: Subsystem,
    },
    Range { key: String, value: Value },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dependency {
                dependent,
                requires,
            } => write!(f, "{dependent} requires {requires}"),
            Violation::Range { key, value } => write!(f, "{key} = {value} is out of range"),
        }
    }
}

/// Team roster: team index → ordered player ids.
pub type Teams = Vec<Vec<u32>>;

/// Equivalent of the baseline `get_team_dict(num_agents, num_agents_per_team)`:
/// consecutive ids grouped into teams of `per_team`.
pub fn team_dict(num_agents: u32, per_team: u32) -> Teams {
    let per_team = per_team.max(1);
    (1..=num_agents)
        .collect::<Vec<_>>()
        .chunks(per_team as usize)
        .map(<[u32]>::to_vec)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    profile: Profile,
    attributes: BTreeMap<&'static str, Value>,
    episode_overrides: BTreeMap<&'static str, Value>,
    subsystems: BTreeSet<Subsystem>,
    episode_subsystems: Option<BTreeSet<Subsystem>>,
    teams: Option<Teams>,
    episode_teams: Option<Option<Teams>>,
    game_packs: Option<String>,
}

fn shipped_defaults() -> BTreeMap<&'static str, Value> {
    let table: toml::Table = DEFAULTS.parse().expect("shipped defaults parse");
    let mut out = BTreeMap::new();
    for attr in SCHEMA {
        let raw = table
            .get(attr.key)
            .unwrap_or_else(|| panic!("defaults file lacks {}", attr.key));
        let value = toml_to_value(raw).expect("shipped default value");
        let value = attr
            .kind
            .admit(value)
            .unwrap_or_else(|| panic!("default for {} has wrong type", attr.key));
        out.insert(attr.key, value);
    }
    out
}

fn toml_to_value(raw: &toml::Value) -> Option<Value> {
    Some(match raw {
        toml::Value::Integer(i) => Value::Int(*i),
        toml::Value::Float(x) => Value::Real(*x),
        toml::Value::Boolean(b) => Value::Bool(*b),
        toml::Value::String(s) if s.eq_ignore_ascii_case("none") => Value::None,
        toml::Value::Array(items) if items.len() == 2 => {
            let num = |v: &toml::Value| v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
            Value::Range(num(&items[0])?, num(&items[1])?)
        }
        _ => return None,
    })
}

impl GameConfig {
    pub fn new(profile: Profile) -> Self {
        GameConfig {
            profile,
            attributes: shipped_defaults(),
            episode_overrides: BTreeMap::new(),
            subsystems: profile.subsystems(),
            episode_subsystems: None,
            teams: None,
            episode_teams: None,
            game_packs: None,
        }
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    /// All known attribute keys in schema order.
    pub fn keys() -> impl Iterator<Item = &'static str> {
        SCHEMA.iter().map(|a| a.key)
    }

    pub fn is_known(key: &str) -> bool {
        schema(key).is_some()
    }

    /// Effective value: the episode override if present, else the original.
    pub fn get(&self, key: &str) -> Result<Value, ConfigError> {
        let attr = schema(key).ok_or_else(|| ConfigError::UnknownAttribute(key.into()))?;
        Ok(self
            .episode_overrides
            .get(attr.key)
            .or_else(|| self.attributes.get(attr.key))
            .copied()
            .expect("schema key has a default"))
    }

    pub fn original(&self, key: &str) -> Result<Value, ConfigError> {
        let attr = schema(key).ok_or_else(|| ConfigError::UnknownAttribute(key.into()))?;
        Ok(self.attributes[attr.key])
    }

    fn check(key: &str, value: Value) -> Result<(&'static str, Value), ConfigError> {
        let attr = schema(key).ok_or_else(|| ConfigError::UnknownAttribute(key.into()))?;
        let value = attr.kind.admit(value).ok_or_else(|| ConfigError::TypeMismatch {
            key: key.into(),
            expected: attr.kind.name(),
            got: value.describe(),
        })?;
        Ok((attr.key, value))
    }

    /// Changes an original value. Used while building a config (file, CLI),
    /// never by episode logic.
    pub fn set(&mut self, key: &str, value: Value) -> Result<(), ConfigError> {
        let (key, value) = Self::check(key, value)?;
        self.attributes.insert(key, value);
        Ok(())
    }

    /// Records a per-episode override; the original stays untouched.
    pub fn set_for_episode(&mut self, key: &str, value: Value) -> Result<(), ConfigError> {
        let (key, value) = Self::check(key, value)?;
        self.episode_overrides.insert(key, value);
        Ok(())
    }

    pub fn reset_overrides(&mut self) {
        self.episode_overrides.clear();
        self.episode_subsystems = None;
        self.episode_teams = None;
    }

    pub fn override_count(&self) -> usize {
        self.episode_overrides.len()
    }

    /// Applies a `KEY=VALUE` assignment to the originals. The pseudo-keys
    /// `SUBSYSTEMS` (comma separated names) and `GAME_PACKS` are accepted too.
    pub fn apply_assignment(&mut self, text: &str) -> Result<(), ConfigError> {
        let (key, value) = text
            .split_once('=')
            .ok_or_else(|| ConfigError::BadAssignment(text.into()))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "SUBSYSTEMS" => {
                self.subsystems = parse_subsystems(value)?;
                Ok(())
            }
            "GAME_PACKS" => {
                self.game_packs = Some(value.trim_matches('"').to_string());
                Ok(())
            }
            _ => self.set(key, Value::parse(value)),
        }
    }

    pub fn subsystems(&self) -> &BTreeSet<Subsystem> {
        self.episode_subsystems.as_ref().unwrap_or(&self.subsystems)
    }

    pub fn original_subsystems(&self) -> &BTreeSet<Subsystem> {
        &self.subsystems
    }

    pub fn enabled(&self, sub: Subsystem) -> bool {
        self.subsystems().contains(&sub)
    }

    pub fn set_subsystems(&mut self, set: BTreeSet<Subsystem>) {
        self.subsystems = set;
    }

    pub fn set_subsystems_for_episode(&mut self, set: BTreeSet<Subsystem>) {
        self.episode_subsystems = Some(set);
    }

    pub fn teams(&self) -> Option<&Teams> {
        match &self.episode_teams {
            Some(t) => t.as_ref(),
            None => self.teams.as_ref(),
        }
    }

    pub fn set_teams_for_episode(&mut self, teams: Option<Teams>) {
        self.episode_teams = Some(teams);
    }

    pub fn game_packs(&self) -> Option<&str> {
        self.game_packs.as_deref()
    }

    pub fn set_game_packs(&mut self, spec: impl Into<String>) {
        self.game_packs = Some(spec.into());
    }

    /// Dependency closure and range checks over the effective view.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let enabled = self.subsystems();
        for &sub in enabled {
            for &req in sub.requires() {
                if !enabled.contains(&req) {
                    out.push(Violation::Dependency {
                        dependent: sub,
                        requires: req,
                    });
                }
            }
        }
        for attr in SCHEMA {
            let value = self.get(attr.key).expect("schema key");
            let ok = match (attr.bound, value) {
                (Bound::Any, _) | (_, Value::None) => true,
                (Bound::Probability, Value::Real(x)) => (0.0..=1.0).contains(&x),
                (Bound::Positive, Value::Int(i)) => i > 0,
                (Bound::Positive, Value::Real(x)) => x > 0.0,
                (Bound::NonNegative, Value::Int(i)) => i >= 0,
                (Bound::NonNegative, Value::Real(x)) => x >= 0.0,
                _ => true,
            };
            if !ok {
                out.push(Violation::Range {
                    key: attr.key.to_string(),
                    value,
                });
            }
        }
        out
    }

    pub fn int(&self, key: &str) -> i64 {
        match self.get(key) {
            Ok(Value::Int(i)) => i,
            other => panic!("attribute {key} is not an integer: {other:?}"),
        }
    }

    pub fn real(&self, key: &str) -> f64 {
        match self.get(key) {
            Ok(Value::Real(x)) => x,
            Ok(Value::Int(i)) => i as f64,
            other => panic!("attribute {key} is not a real: {other:?}"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.get(key) {
            Ok(Value::Bool(b)) => b,
            other => panic!("attribute {key} is not a boolean: {other:?}"),
        }
    }

    pub fn range(&self, key: &str) -> (f64, f64) {
        match self.get(key) {
            Ok(Value::Range(a, b)) => (a, b),
            other => panic!("attribute {key} is not a range: {other:?}"),
        }
    }

    pub fn opt_int(&self, key: &str) -> Option<i64> {
        match self.get(key) {
            Ok(Value::Int(i)) => Some(i),
            Ok(Value::None) => None,
            other => panic!("attribute {key} is not an optional integer: {other:?}"),
        }
    }

    /// Serializes the original layer as a flat `KEY = value` document.
    pub fn to_text(&self) -> String {
        self.render(false)
    }

    /// Serializes the effective layer: originals with the current episode
    /// overrides folded in. Parsing it back yields a config whose originals
    /// equal this episode's effective values.
    pub fn effective_text(&self) -> String {
        self.render(true)
    }

    fn render(&self, effective: bool) -> String {
        let mut out = String::new();
        out.push_str(&format!("PROFILE = \"{}\"\n", self.profile.name()));
        let subsystems = if effective { self.subsystems() } else { &self.subsystems };
        let subs: Vec<_> = subsystems.iter().map(|s| s.name()).collect();
        out.push_str(&format!("SUBSYSTEMS = \"{}\"\n", subs.join(",")));
        if let Some(packs) = &self.game_packs {
            out.push_str(&format!("GAME_PACKS = \"{packs}\"\n"));
        }
        for attr in SCHEMA {
            let v = if effective { self.get(attr.key).expect("schema key") } else { self.attributes[attr.key] };
            out.push_str(&format!("{} = {}\n", attr.key, v));
        }
        out
    }

    /// Parses a document produced by [`GameConfig::to_text`] or written by hand.
    /// Keys not present keep their shipped defaults.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::File(e.to_string()))?;
        let profile = match table.get("PROFILE") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(_) => return Err(ConfigError::File("PROFILE must be a string".into())),
            None => Profile::Mini,
        };
        let mut cfg = GameConfig::new(profile);
        for (key, raw) in &table {
            match key.as_str() {
                "PROFILE" => {}
                "SUBSYSTEMS" => {
                    let s = raw
                        .as_str()
                        .ok_or_else(|| ConfigError::File("SUBSYSTEMS must be a string".into()))?;
                    cfg.subsystems = parse_subsystems(s)?;
                }
                "GAME_PACKS" => {
                    let s = raw
                        .as_str()
                        .ok_or_else(|| ConfigError::File("GAME_PACKS must be a string".into()))?;
                    cfg.game_packs = Some(s.to_string());
                }
                _ => {
                    let value = toml_to_value(raw).ok_or_else(|| ConfigError::TypeMismatch {
                        key: key.clone(),
                        expected: "scalar, range or \"none\"",
                        got: raw.type_str().into(),
                    })?;
                    cfg.set(key, value)?;
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File(e.to_string()))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        std::fs::write(path, self.to_text()).map_err(|e| ConfigError::File(e.to_string()))
    }
}

fn parse_subsystems(text: &str) -> Result<BTreeSet<Subsystem>, ConfigError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Typed snapshot of the effective configuration, read by the tick loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub profile: Profile,
    pub resource: bool,
    pub combat: bool,
    pub npc: bool,
    pub communication: bool,
    pub item: bool,
    pub equipment: bool,
    pub profession: bool,
    pub progression: bool,
    pub exchange: bool,

    pub horizon: u32,
    pub player_n: u32,
    pub map_center: u32,
    pub map_border: u32,
    pub allow_move_into_occupied: bool,
    pub vision_radius: i32,
    pub base_health: i32,
    pub health_increment: i32,
    pub fog_onset: Option<u32>,
    pub fog_speed: f64,
    pub fog_final_size: u32,
    pub provide_fog_obs: bool,

    pub resource_base: i32,
    pub depletion_rate: i32,
    pub starvation_rate: i32,
    pub dehydration_rate: i32,
    pub resilient_population: f64,
    pub damage_reduction: f64,
    pub foliage_capacity: u16,
    pub foliage_respawn: f64,
    pub harvest_restore_fraction: f64,
    pub regen_threshold: f64,
    pub health_restore_fraction: f64,

    pub spawn_immunity: u32,
    pub flexible_style: bool,
    pub status_duration: u32,
    pub weakness_multiplier: f64,
    pub min_damage_proportion: f64,
    pub style_damage: [i32; 3],
    pub style_reach: [i32; 3],

    pub npc_n: u32,
    pub npc_refill: bool,
    pub npc_spawn_attempts: u32,
    pub npc_aggressive: f64,
    pub npc_neutral: f64,
    pub npc_passive: f64,
    pub npc_level_min: u32,
    pub npc_level_max: u32,
    pub npc_base_health: i32,
    pub npc_level_health: i32,
    pub npc_base_defense: i32,
    pub npc_level_defense: i32,
    pub npc_base_damage: i32,
    pub npc_level_damage: i32,
    pub npc_level_multiplier: f64,
    pub npc_attack_npcs: bool,

    pub comm_n_obs: usize,
    pub comm_protocol: bool,

    pub inventory_capacity: usize,
    pub allow_gift: bool,

    pub weapon_drop_prob: f64,
    pub weapon_base: i32,
    pub weapon_level: i32,
    pub ammo_base: i32,
    pub ammo_level: i32,
    pub tool_base: i32,
    pub tool_level: i32,
    pub armor_base: i32,
    pub armor_level: i32,

    /// Capacity and respawn probability for Tree, Ore, Crystal, Herb, Fish.
    pub profession_capacity: [u16; 5],
    pub profession_respawn: [f64; 5],
    pub consumable_restore: i32,

    pub base_level: u8,
    pub level_max: u8,
    pub exp_threshold: u32,
    pub combat_xp: u32,
    pub ammunition_xp: u32,
    pub consumable_xp: u32,
    pub progression_style_base: [i32; 3],
    pub progression_style_level: [i32; 3],
    pub progression_base_defense: i32,
    pub progression_level_defense: i32,

    pub base_gold: u32,
    pub listing_duration: u32,
    pub market_n_obs: usize,
    pub price_n_obs: u32,

    pub reward_shaping: bool,
    pub reward_weights: crate::tasks::ShapingWeights,
}

impl Settings {
    pub fn resolve(cfg: &GameConfig) -> Settings {
        let on = |s| cfg.enabled(s);
        let int = |k: &str| cfg.int(k);
        let real = |k: &str| cfg.real(k);
        let flag = |k: &str| cfg.flag(k);
        Settings {
            profile: cfg.profile(),
            resource: on(Subsystem::Resource),
            combat: on(Subsystem::Combat),
            npc: on(Subsystem::Npc),
            communication: on(Subsystem::Communication),
            item: on(Subsystem::Item),
            equipment: on(Subsystem::Equipment),
            profession: on(Subsystem::Profession),
            progression: on(Subsystem::Progression),
            exchange: on(Subsystem::Exchange),
            horizon: int("HORIZON") as u32,
            player_n: int("PLAYER_N") as u32,
            map_center: int("MAP_CENTER") as u32,
            map_border: int("MAP_BORDER") as u32,
            allow_move_into_occupied: flag("ALLOW_MOVE_INTO_OCCUPIED_TILE"),
            vision_radius: int("PLAYER_VISION_RADIUS") as i32,
            base_health: int("PLAYER_BASE_HEALTH") as i32,
            health_increment: int("PLAYER_HEALTH_INCREMENT") as i32,
            fog_onset: cfg.opt_int("DEATH_FOG_ONSET").map(|t| t as u32),
            fog_speed: real("DEATH_FOG_SPEED"),
            fog_final_size: int("DEATH_FOG_FINAL_SIZE") as u32,
            provide_fog_obs: flag("PROVIDE_DEATH_FOG_OBS"),
            resource_base: int("RESOURCE_BASE") as i32,
            depletion_rate: int("RESOURCE_DEPLETION_RATE") as i32,
            starvation_rate: int("RESOURCE_STARVATION_RATE") as i32,
            dehydration_rate: int("RESOURCE_DEHYDRATION_RATE") as i32,
            resilient_population: real("RESOURCE_RESILIENT_POPULATION"),
            damage_reduction: real("RESOURCE_DAMAGE_REDUCTION"),
            foliage_capacity: int("RESOURCE_FOILAGE_CAPACITY") as u16,
            foliage_respawn: real("RESOURCE_FOILAGE_RESPAWN"),
            harvest_restore_fraction: real("RESOURCE_HARVEST_RESTORE_FRACTION"),
            regen_threshold: real("RESOURCE_HEALTH_REGEN_THRESHOLD"),
            health_restore_fraction: real("RESOURCE_HEALTH_RESTORE_FRACTION"),
            spawn_immunity: int("COMBAT_SPAWN_IMMUNITY") as u32,
            flexible_style: flag("COMBAT_ALLOW_FLEXIBLE_STYLE"),
            status_duration: int("COMBAT_STATUS_DURATION") as u32,
            weakness_multiplier: real("COMBAT_WEAKNESS_MULTIPLIER"),
            min_damage_proportion: real("COMBAT_MINIMUM_DAMAGE_PROPORTION"),
            style_damage: [
                int("COMBAT_MELEE_DAMAGE") as i32,
                int("COMBAT_RANGE_DAMAGE") as i32,
                int("COMBAT_MAGE_DAMAGE") as i32,
            ],
            style_reach: [
                int("COMBAT_MELEE_REACH") as i32,
                int("COMBAT_RANGE_REACH") as i32,
                int("COMBAT_MAGE_REACH") as i32,
            ],
            npc_n: int("NPC_N") as u32,
            npc_refill: flag("NPC_DEFAULT_REFILL_DEAD_NPCS"),
            npc_spawn_attempts: int("NPC_SPAWN_ATTEMPTS") as u32,
            npc_aggressive: real("NPC_SPAWN_AGGRESSIVE"),
            npc_neutral: real("NPC_SPAWN_NEUTRAL"),
            npc_passive: real("NPC_SPAWN_PASSIVE"),
            npc_level_min: int("NPC_LEVEL_MIN") as u32,
            npc_level_max: int("NPC_LEVEL_MAX") as u32,
            npc_base_health: int("NPC_BASE_HEALTH") as i32,
            npc_level_health: int("NPC_LEVEL_HEALTH") as i32,
            npc_base_defense: int("NPC_BASE_DEFENSE") as i32,
            npc_level_defense: int("NPC_LEVEL_DEFENSE") as i32,
            npc_base_damage: int("NPC_BASE_DAMAGE") as i32,
            npc_level_damage: int("NPC_LEVEL_DAMAGE") as i32,
            npc_level_multiplier: real("NPC_LEVEL_MULTIPLIER"),
            npc_attack_npcs: flag("NPC_ALLOW_ATTACK_OTHER_NPCS"),
            comm_n_obs: int("COMMUNICATION_N_OBS") as usize,
            comm_protocol: flag("COMMUNICATION_PROTOCOL"),
            inventory_capacity: int("ITEM_INVENTORY_CAPACITY") as usize,
            allow_gift: flag("ITEM_ALLOW_GIFT"),
            weapon_drop_prob: real("WEAPON_DROP_PROB"),
            weapon_base: int("EQUIPMENT_WEAPON_BASE_DAMAGE") as i32,
            weapon_level: int("EQUIPMENT_WEAPON_LEVEL_DAMAGE") as i32,
            ammo_base: int("EQUIPMENT_AMMUNITION_BASE_DAMAGE") as i32,
            ammo_level: int("EQUIPMENT_AMMUNITION_LEVEL_DAMAGE") as i32,
            tool_base: int("EQUIPMENT_TOOL_BASE_DEFENSE") as i32,
            tool_level: int("EQUIPMENT_TOOL_LEVEL_DEFENSE") as i32,
            armor_base: int("EQUIPMENT_ARMOR_BASE_DEFENSE") as i32,
            armor_level: int("EQUIPMENT_ARMOR_LEVEL_DEFENSE") as i32,
            profession_capacity: [
                int("PROFESSION_TREE_CAPACITY") as u16,
                int("PROFESSION_ORE_CAPACITY") as u16,
                int("PROFESSION_CRYSTAL_CAPACITY") as u16,
                int("PROFESSION_HERB_CAPACITY") as u16,
                int("PROFESSION_FISH_CAPACITY") as u16,
            ],
            profession_respawn: [
                real("PROFESSION_TREE_RESPAWN"),
                real("PROFESSION_ORE_RESPAWN"),
                real("PROFESSION_CRYSTAL_RESPAWN"),
                real("PROFESSION_HERB_RESPAWN"),
                real("PROFESSION_FISH_RESPAWN"),
            ],
            consumable_restore: int("PROFESSION_CONSUMABLE_RESTORE") as i32,
            base_level: int("PROGRESSION_BASE_LEVEL") as u8,
            level_max: int("PROGRESSION_LEVEL_MAX") as u8,
            exp_threshold: int("PROGRESSION_EXP_THRESHOLD") as u32,
            combat_xp: int("PROGRESSION_COMBAT_XP_SCALE") as u32,
            ammunition_xp: int("PROGRESSION_AMMUNITION_XP_SCALE") as u32,
            consumable_xp: int("PROGRESSION_CONSUMABLE_XP_SCALE") as u32,
            progression_style_base: [
                int("PROGRESSION_MELEE_BASE_DAMAGE") as i32,
                int("PROGRESSION_RANGE_BASE_DAMAGE") as i32,
                int("PROGRESSION_MAGE_BASE_DAMAGE") as i32,
            ],
            progression_style_level: [
                int("PROGRESSION_MELEE_LEVEL_DAMAGE") as i32,
                int("PROGRESSION_RANGE_LEVEL_DAMAGE") as i32,
                int("PROGRESSION_MAGE_LEVEL_DAMAGE") as i32,
            ],
            progression_base_defense: int("PROGRESSION_BASE_DEFENSE") as i32,
            progression_level_defense: int("PROGRESSION_LEVEL_DEFENSE") as i32,
            base_gold: int("EXCHANGE_BASE_GOLD") as u32,
            listing_duration: int("EXCHANGE_LISTING_DURATION") as u32,
            market_n_obs: int("MARKET_N_OBS") as usize,
            price_n_obs: int("PRICE_N_OBS") as u32,
            reward_shaping: flag("REWARD_SHAPING"),
            reward_weights: crate::tasks::ShapingWeights {
                health: real("REWARD_HEALTH_WEIGHT"),
                xp: real("REWARD_XP_WEIGHT"),
                equipment: real("REWARD_EQUIPMENT_WEIGHT"),
                gold: real("REWARD_GOLD_WEIGHT"),
            },
        }
    }

    /// Half-width of the playable area measured from the center tile to the
    /// spawn ring.
    pub fn ring_radius(&self) -> i32 {
        (self.map_center as i32 - 1) / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mini_defaults() {
        let cfg = GameConfig::new(Profile::Mini);
        assert_eq!(cfg.int("PLAYER_N"), 128);
        assert_eq!(cfg.int("HORIZON"), 1024);
        assert_eq!(cfg.real("NPC_LEVEL_MULTIPLIER"), 0.5);
        assert_eq!(cfg.int("COMBAT_SPAWN_IMMUNITY"), 20);
        assert_eq!(cfg.int("MAP_CENTER"), 128);
        assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
        assert!(!cfg.enabled(Subsystem::Item));
        assert!(cfg.enabled(Subsystem::Communication));
    }

    #[test]
    fn full_adds_extras() {
        let cfg = GameConfig::new(Profile::Full);
        for sub in Subsystem::ALL {
            assert!(cfg.enabled(sub), "{sub}");
        }
        assert!(cfg.validate().is_empty());
    }

    #[test]
    fn override_layering() {
        let mut cfg = GameConfig::new(Profile::Mini);
        cfg.set_for_episode("MAP_CENTER", Value::Int(40)).unwrap();
        assert_eq!(cfg.get("MAP_CENTER").unwrap(), Value::Int(40));
        assert_eq!(cfg.original("MAP_CENTER").unwrap(), Value::Int(128));
        cfg.reset_overrides();
        assert_eq!(cfg.get("MAP_CENTER").unwrap(), Value::Int(128));
    }

    #[test]
    fn unknown_and_mistyped() {
        let mut cfg = GameConfig::new(Profile::Mini);
        assert_eq!(
            cfg.set_for_episode("NOT_A_KEY", Value::Int(1)),
            Err(ConfigError::UnknownAttribute("NOT_A_KEY".into()))
        );
        assert!(matches!(
            cfg.set_for_episode("HORIZON", Value::Real(1.5)),
            Err(ConfigError::TypeMismatch { .. })
        ));
        assert!(matches!(
            cfg.set_for_episode("TERRAIN_DISABLE_STONE", Value::Int(1)),
            Err(ConfigError::TypeMismatch { .. })
        ));
        // integers coerce into real slots
        cfg.set_for_episode("DEATH_FOG_SPEED", Value::Int(1)).unwrap();
        assert_eq!(cfg.real("DEATH_FOG_SPEED"), 1.0);
        assert_eq!(cfg.override_count(), 1);
    }

    #[test]
    fn reset_clears_all_and_is_idempotent() {
        let mut cfg = GameConfig::new(Profile::Mini);
        cfg.reset_overrides();
        assert_eq!(cfg, GameConfig::new(Profile::Mini));
        cfg.set_for_episode("MAP_CENTER", Value::Int(40)).unwrap();
        cfg.set_for_episode("NPC_N", Value::Int(3)).unwrap();
        cfg.set_for_episode("DEATH_FOG_ONSET", Value::Int(32)).unwrap();
        assert_eq!(cfg.override_count(), 3);
        cfg.reset_overrides();
        assert_eq!(cfg.override_count(), 0);
        let once = cfg.clone();
        cfg.reset_overrides();
        assert_eq!(cfg, once);
    }

    #[test]
    fn originals_survive_many_cycles() {
        let mut cfg = GameConfig::new(Profile::Mini);
        for i in 0..100 {
            cfg.set_for_episode("MAP_CENTER", Value::Int(40 + i)).unwrap();
            cfg.reset_overrides();
        }
        assert_eq!(cfg.original("MAP_CENTER").unwrap(), Value::Int(128));
    }

    #[test]
    fn dependency_violation() {
        let mut cfg = GameConfig::new(Profile::Mini);
        let mut subs = cfg.subsystems().clone();
        subs.remove(&Subsystem::Combat);
        cfg.set_subsystems(subs);
        assert_eq!(
            cfg.validate(),
            vec![Violation::Dependency {
                dependent: Subsystem::Npc,
                requires: Subsystem::Combat
            }]
        );
    }

    #[test]
    fn range_violation() {
        let mut cfg = GameConfig::new(Profile::Mini);
        cfg.set_for_episode("RESOURCE_FOILAGE_RESPAWN", Value::Real(1.5))
            .unwrap();
        let v = cfg.validate();
        assert_eq!(v.len(), 1);
        assert!(matches!(&v[0], Violation::Range { key, .. } if key == "RESOURCE_FOILAGE_RESPAWN"));
        let before = cfg.clone();
        let _ = cfg.validate();
        assert_eq!(cfg, before);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = GameConfig::new(Profile::Full);
        cfg.apply_assignment("MAP_CENTER=64").unwrap();
        cfg.apply_assignment("DEATH_FOG_ONSET=none").unwrap();
        cfg.apply_assignment("TERRAIN_FREQUENCY=[-5, -2]").unwrap();
        cfg.apply_assignment("GAME_PACKS=survival:1,team_battle:2").unwrap();
        let back = GameConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert!(GameConfig::from_text("BOGUS = 1").is_err());
    }

    #[test]
    fn team_dict_groups_consecutive_ids() {
        let teams = team_dict(16, 8);
        assert_eq!(teams.len(), 2);
        assert_eq!(teams[1], (9..=16).collect::<Vec<_>>());
        assert_eq!(team_dict(10, 4).last().unwrap().len(), 2);
    }
}
