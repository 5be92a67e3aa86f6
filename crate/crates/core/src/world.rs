//! Terrain generation, tile materials, resource regeneration and death fog.
//!
//! Coordinates are `(row, col)` in a square grid of side
//! `MAP_CENTER + 2 * MAP_BORDER`. Everything outside the playable square is
//! Void. All distances are Chebyshev.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{GameConfig, Subsystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("terrain subsystem is disabled")]
    TerrainDisabled,
    #[error("terrain thresholds must satisfy void < water < grass < foliage")]
    ThresholdOrderViolation,
    #[error("map format: {0}")]
    MapFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Pos {
    pub r: i32,
    pub c: i32,
}

impl Pos {
    pub const fn new(r: i32, c: i32) -> Self {
        Pos { r, c }
    }

    pub fn chebyshev(self, other: Pos) -> i32 {
        (self.r - other.r).abs().max((self.c - other.c).abs())
    }

    pub fn manhattan(self, other: Pos) -> i32 {
        (self.r - other.r).abs() + (self.c - other.c).abs()
    }

    pub fn step(self, dir: Dir) -> Pos {
        let (dr, dc) = dir.delta();
        Pos::new(self.r + dr, self.c + dc)
    }
}

/// Movement directions in action-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir {
    North,
    South,
    West,
    East,
    Stay,
}

impl Dir {
    pub const MOVES: [Dir; 4] = [Dir::North, Dir::South, Dir::West, Dir::East];

    pub fn from_index(i: usize) -> Dir {
        match i {
            0 => Dir::North,
            1 => Dir::South,
            2 => Dir::West,
            3 => Dir::East,
            _ => Dir::Stay,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Dir::North => 0,
            Dir::South => 1,
            Dir::West => 2,
            Dir::East => 3,
            Dir::Stay => 4,
        }
    }

    pub fn delta(self) -> (i32, i32) {
        match self {
            Dir::North => (-1, 0),
            Dir::South => (1, 0),
            Dir::West => (0, -1),
            Dir::East => (0, 1),
            Dir::Stay => (0, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Material {
    Void = 0,
    Water = 1,
    Grass = 2,
    Foliage = 3,
    Stone = 4,
    Tree = 5,
    Ore = 6,
    Crystal = 7,
    Herb = 8,
    Fish = 9,
}

impl Material {
    pub const ALL: [Material; 10] = [
        Material::Void,
        Material::Water,
        Material::Grass,
        Material::Foliage,
        Material::Stone,
        Material::Tree,
        Material::Ore,
        Material::Crystal,
        Material::Herb,
        Material::Fish,
    ];

    pub fn from_u8(b: u8) -> Option<Material> {
        Material::ALL.get(b as usize).copied()
    }

    pub fn passable(self) -> bool {
        !matches!(
            self,
            Material::Void | Material::Water | Material::Stone | Material::Fish
        )
    }

    /// Tiles that hold a finite, regenerating number of harvests.
    pub fn is_resource(self) -> bool {
        matches!(
            self,
            Material::Foliage
                | Material::Tree
                | Material::Ore
                | Material::Crystal
                | Material::Herb
                | Material::Fish
        )
    }

    /// Index into the profession resource tables (Tree, Ore, Crystal, Herb, Fish).
    pub fn profession_index(self) -> Option<usize> {
        match self {
            Material::Tree => Some(0),
            Material::Ore => Some(1),
            Material::Crystal => Some(2),
            Material::Herb => Some(3),
            Material::Fish => Some(4),
            _ => None,
        }
    }

    fn glyph(self) -> char {
        match self {
            Material::Void => ' ',
            Material::Water => '~',
            Material::Grass => '.',
            Material::Foliage => '"',
            Material::Stone => '#',
            Material::Tree => 'T',
            Material::Ore => 'o',
            Material::Crystal => '*',
            Material::Herb => '%',
            Material::Fish => 'f',
        }
    }

    fn color(self) -> [u8; 3] {
        match self {
            Material::Void => [0, 0, 0],
            Material::Water => [40, 90, 200],
            Material::Grass => [110, 170, 80],
            Material::Foliage => [40, 120, 40],
            Material::Stone => [120, 120, 120],
            Material::Tree => [90, 60, 30],
            Material::Ore => [170, 110, 60],
            Material::Crystal => [200, 120, 220],
            Material::Herb => [220, 220, 90],
            Material::Fish => [60, 200, 220],
        }
    }
}

/// Read-only view of one tile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tile {
    pub material: Material,
    pub harvests_remaining: u16,
    pub capacity: u16,
    pub respawn_probability: f64,
}

/// Capacity and per-tick respawn probability for each material.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceRules {
    pub capacity: [u16; 10],
    pub respawn: [f64; 10],
}

impl ResourceRules {
    pub fn from_config(cfg: &GameConfig) -> Self {
        let mut capacity = [0u16; 10];
        let mut respawn = [0.0; 10];
        capacity[Material::Foliage as usize] = cfg.int("RESOURCE_FOILAGE_CAPACITY") as u16;
        respawn[Material::Foliage as usize] = cfg.real("RESOURCE_FOILAGE_RESPAWN");
        for (m, name) in [
            (Material::Tree, "TREE"),
            (Material::Ore, "ORE"),
            (Material::Crystal, "CRYSTAL"),
            (Material::Herb, "HERB"),
            (Material::Fish, "FISH"),
        ] {
            capacity[m as usize] = cfg.int(&format!("PROFESSION_{name}_CAPACITY")) as u16;
            respawn[m as usize] = cfg.real(&format!("PROFESSION_{name}_RESPAWN"));
        }
        ResourceRules { capacity, respawn }
    }
}

/// Noise-shaping knobs read from the terrain attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainParams {
    pub size: usize,
    pub frequency: (f64, f64),
    pub frequency_offset: f64,
    pub log_interpolate: (f64, f64),
    pub tiles_per_octave: usize,
    pub flip_seed: bool,
}

impl TerrainParams {
    pub fn from_config(cfg: &GameConfig) -> Self {
        TerrainParams {
            size: cfg.int("MAP_CENTER") as usize,
            frequency: cfg.range("TERRAIN_FREQUENCY"),
            frequency_offset: cfg.real("TERRAIN_FREQUENCY_OFFSET"),
            log_interpolate: (
                cfg.real("TERRAIN_LOG_INTERPOLATE_MIN"),
                cfg.real("TERRAIN_LOG_INTERPOLATE_MAX"),
            ),
            tiles_per_octave: cfg.int("TERRAIN_TILES_PER_OCTAVE").max(1) as usize,
            flip_seed: cfg.flag("TERRAIN_FLIP_SEED"),
        }
    }

    pub fn octaves(&self) -> usize {
        (self.size / self.tiles_per_octave).max(1)
    }

    /// Log2-spaced octave frequencies in cycles per tile.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.octaves();
        let (lo, hi) = self.frequency;
        (0..n)
            .map(|k| {
                let t = if n == 1 { 0.5 } else { k as f64 / (n - 1) as f64 };
                (lo + (hi - lo) * t + self.frequency_offset).exp2()
            })
            .collect()
    }
}

/// Square grid of noise values in `[0, 1]`, covering the playable area only.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseGrid {
    pub size: usize,
    pub values: Vec<f64>,
}

impl NoiseGrid {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.size + c]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len().max(1) as f64
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice(seed: u64, octave: u64, x: i64, y: i64) -> f64 {
    let mut h = splitmix(seed ^ octave.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    h = splitmix(h ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    h = splitmix(h ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn value_noise(seed: u64, octave: u64, y: f64, x: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (tx, ty) = (smooth(x - x0), smooth(y - y0));
    let (xi, yi) = (x0 as i64, y0 as i64);
    let a = lattice(seed, octave, xi, yi);
    let b = lattice(seed, octave, xi + 1, yi);
    let c = lattice(seed, octave, xi, yi + 1);
    let d = lattice(seed, octave, xi + 1, yi + 1);
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * ty
}

/// Multi-octave value noise over the playable square, min-max normalized.
///
/// Octave weights at a tile are `2^(s * k / (n - 1))` for octave `k`, where
/// the strength `s` interpolates from the log-interpolate minimum at the
/// center to the maximum at the edge.
pub fn noise_from_params(seed: i64, p: &TerrainParams) -> NoiseGrid {
    let seed = if p.flip_seed { seed.wrapping_neg() } else { seed };
    let seed = seed as u64;
    let n = p.size;
    let freqs = p.frequencies();
    let octaves = freqs.len();
    let half = (n as f64 - 1.0) / 2.0;
    let (smin, smax) = p.log_interpolate;
    let mut raw = vec![0.0; n * n];
    let mut layer = vec![0.0; octaves];
    for r in 0..n {
        for c in 0..n {
            for (k, f) in freqs.iter().enumerate() {
                layer[k] = value_noise(seed, k as u64, r as f64 * f, c as f64 * f);
            }
            let d = (r as f64 - half).abs().max((c as f64 - half).abs());
            let frac = if half > 0.0 { (d / half).min(1.0) } else { 0.0 };
            let s = smin + (smax - smin) * frac;
            let mut num = 0.0;
            let mut den = 0.0;
            for (k, v) in layer.iter().enumerate() {
                let t = if octaves == 1 { 0.0 } else { k as f64 / (octaves - 1) as f64 };
                let w = (s * t).exp2();
                num += w * v;
                den += w;
            }
            raw[r * n + c] = num / den;
        }
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for v in &mut raw {
        *v = if span > 0.0 { (*v - lo) / span } else { 0.5 };
    }
    NoiseGrid { size: n, values: raw }
}

pub fn generate_noise(seed: i64, cfg: &GameConfig) -> Result<NoiseGrid, WorldError> {
    if !cfg.enabled(Subsystem::Terrain) {
        return Err(WorldError::TerrainDisabled);
    }
    Ok(noise_from_params(seed, &TerrainParams::from_config(cfg)))
}

/// Threshold bands mapping noise to base materials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bands {
    pub void: f64,
    pub water: f64,
    pub grass: f64,
    pub foliage: f64,
}

impl Bands {
    pub fn from_config(cfg: &GameConfig) -> Result<Self, WorldError> {
        let b = Bands {
            void: cfg.real("TERRAIN_VOID"),
            water: cfg.real("TERRAIN_WATER"),
            grass: cfg.real("TERRAIN_GRASS"),
            foliage: cfg.real("TERRAIN_FOILAGE"),
        };
        if b.void < b.water && b.water < b.grass && b.grass < b.foliage {
            Ok(b)
        } else {
            Err(WorldError::ThresholdOrderViolation)
        }
    }

    pub fn classify(&self, v: f64) -> Material {
        if v < self.void {
            Material::Void
        } else if v < self.water {
            Material::Water
        } else if v < self.grass {
            Material::Grass
        } else if v < self.foliage {
            Material::Foliage
        } else {
            Material::Stone
        }
    }
}

/// Scatter probabilities for extra food/water and profession tiles.
pub const SCATTER_FOLIAGE: f64 = 0.02;
pub const SCATTER_WATER: f64 = 0.01;
pub const SCATTER_PROFESSION: f64 = 0.01;
pub const SCATTER_FISH: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TileMap {
    side: usize,
    border: usize,
    playable: usize,
    seed: i64,
    material: Vec<Material>,
    harvests: Vec<u16>,
    rules: ResourceRules,
    /// Tile indices with fewer harvests than capacity.
    depleted: BTreeSet<u32>,
}

impl TileMap {
    /// Builds a map from materials alone, with every resource tile full.
    pub fn from_materials(
        side: usize,
        border: usize,
        seed: i64,
        material: Vec<Material>,
        rules: ResourceRules,
    ) -> Self {
        assert_eq!(material.len(), side * side);
        let harvests = material.iter().map(|m| rules.capacity[*m as usize]).collect();
        TileMap {
            side,
            border,
            playable: side - 2 * border,
            seed,
            material,
            harvests,
            rules,
            depleted: BTreeSet::new(),
        }
    }

    /// All-grass playable square: handy for tests and scripted setups.
    pub fn flat(playable: usize, border: usize, rules: ResourceRules) -> Self {
        let side = playable + 2 * border;
        let mut material = vec![Material::Void; side * side];
        for r in border..border + playable {
            for c in border..border + playable {
                material[r * side + c] = Material::Grass;
            }
        }
        TileMap::from_materials(side, border, 0, material, rules)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn border(&self) -> usize {
        self.border
    }

    pub fn playable(&self) -> usize {
        self.playable
    }

    pub fn seed(&self) -> i64 {
        self.seed
    }

    pub fn rules(&self) -> &ResourceRules {
        &self.rules
    }

    pub fn contains(&self, p: Pos) -> bool {
        p.r >= 0 && p.c >= 0 && (p.r as usize) < self.side && (p.c as usize) < self.side
    }

    pub fn index(&self, p: Pos) -> usize {
        p.r as usize * self.side + p.c as usize
    }

    pub fn material(&self, p: Pos) -> Material {
        if self.contains(p) {
            self.material[self.index(p)]
        } else {
            Material::Void
        }
    }

    pub fn set_material(&mut self, p: Pos, m: Material) {
        let i = self.index(p);
        self.material[i] = m;
        self.harvests[i] = self.rules.capacity[m as usize];
        self.depleted.remove(&(i as u32));
    }

    pub fn materials(&self) -> &[Material] {
        &self.material
    }

    /// Remaining harvests by tile index.
    pub fn harvest_counts(&self) -> &[u16] {
        &self.harvests
    }

    pub fn tile(&self, p: Pos) -> Tile {
        let m = self.material(p);
        Tile {
            material: m,
            harvests_remaining: if self.contains(p) { self.harvests[self.index(p)] } else { 0 },
            capacity: self.rules.capacity[m as usize],
            respawn_probability: self.rules.respawn[m as usize],
        }
    }

    pub fn passable(&self, p: Pos) -> bool {
        self.material(p).passable()
    }

    pub fn harvests(&self, p: Pos) -> u16 {
        if self.contains(p) {
            self.harvests[self.index(p)]
        } else {
            0
        }
    }

    /// Takes one harvest from a resource tile. Returns false if none remain.
    pub fn harvest(&mut self, p: Pos) -> bool {
        if !self.contains(p) {
            return false;
        }
        let i = self.index(p);
        if !self.material[i].is_resource() || self.harvests[i] == 0 {
            return false;
        }
        self.harvests[i] -= 1;
        self.depleted.insert(i as u32);
        true
    }

    pub fn depleted_count(&self) -> usize {
        self.depleted.len()
    }

    /// Each depleted tile independently refills to capacity with its
    /// material's respawn probability. Tiles are visited in index order so
    /// random draws are reproducible.
    pub fn tick_regeneration<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut refilled = Vec::new();
        for &i in &self.depleted {
            let m = self.material[i as usize] as usize;
            if rng.random::<f64>() < self.rules.respawn[m] {
                self.harvests[i as usize] = self.rules.capacity[m];
                refilled.push(i);
            }
        }
        for i in refilled {
            self.depleted.remove(&i);
        }
    }

    pub fn center(&self) -> Pos {
        let c = (self.border + self.playable / 2) as i32;
        Pos::new(c, c)
    }

    /// Chebyshev radius of the spawn ring around the center.
    pub fn radius(&self) -> i32 {
        (self.playable as i32 - 1) / 2
    }

    pub fn center_distance(&self, p: Pos) -> i32 {
        p.chebyshev(self.center())
    }

    /// 1 at the center, 0 on the spawn ring and beyond, linear between.
    pub fn center_progress(&self, p: Pos) -> f64 {
        let r = self.radius();
        if r <= 0 {
            return 1.0;
        }
        (1.0 - self.center_distance(p) as f64 / r as f64).clamp(0.0, 1.0)
    }

    pub fn in_playable(&self, p: Pos) -> bool {
        let lo = self.border as i32;
        let hi = (self.border + self.playable) as i32;
        p.r >= lo && p.r < hi && p.c >= lo && p.c < hi
    }

    /// Tiles at exactly the given Chebyshev distance from the center,
    /// clockwise from the top-left corner.
    pub fn ring(&self, d: i32) -> Vec<Pos> {
        let ctr = self.center();
        if d == 0 {
            return vec![ctr];
        }
        let mut out = Vec::with_capacity(8 * d as usize);
        let (top, left) = (ctr.r - d, ctr.c - d);
        let len = 2 * d;
        for i in 0..len {
            out.push(Pos::new(top, left + i));
        }
        for i in 0..len {
            out.push(Pos::new(top + i, left + len));
        }
        for i in 0..len {
            out.push(Pos::new(top + len, left + len - i));
        }
        for i in 0..len {
            out.push(Pos::new(top + len - i, left));
        }
        out
    }

    /// The spawn ring: all tiles at the maximum radius.
    pub fn edge_ring(&self) -> Vec<Pos> {
        self.ring(self.radius())
    }

    /// Fewest impassable tiles that must become walkable to join the center
    /// to the spawn ring, found by a 0-1 search over the playable area.
    /// Empty when the center is already reachable.
    pub fn center_corridor(&self) -> Vec<Pos> {
        let start = self.center();
        let ring = self.radius();
        let mut cost = vec![u32::MAX; self.side * self.side];
        let mut parent: Vec<Option<Pos>> = vec![None; self.side * self.side];
        let mut queue = std::collections::VecDeque::from([start]);
        cost[self.index(start)] = 0;
        let mut end = None;
        while let Some(p) = queue.pop_front() {
            if self.center_distance(p) == ring {
                end = Some(p);
                break;
            }
            let here = cost[self.index(p)];
            for d in Dir::MOVES {
                let q = p.step(d);
                if !self.in_playable(q) {
                    continue;
                }
                let step = u32::from(!self.passable(q));
                let i = self.index(q);
                if here + step < cost[i] {
                    cost[i] = here + step;
                    parent[i] = Some(p);
                    if step == 0 {
                        queue.push_front(q);
                    } else {
                        queue.push_back(q);
                    }
                }
            }
        }
        let mut out = Vec::new();
        let mut at = end;
        while let Some(p) = at {
            if !self.passable(p) {
                out.push(p);
            }
            at = parent[self.index(p)];
        }
        out
    }

    /// Whether any 4-neighbour has the given material.
    pub fn adjacent_to(&self, p: Pos, m: Material) -> bool {
        Dir::MOVES.iter().any(|d| self.material(p.step(*d)) == m)
    }

    /// First 4-neighbour of the given material that still has harvests.
    pub fn adjacent_harvestable(&self, p: Pos, m: Material) -> Option<Pos> {
        Dir::MOVES
            .iter()
            .map(|d| p.step(*d))
            .find(|q| self.material(*q) == m && self.harvests(*q) > 0)
    }

    pub fn histogram(&self) -> [usize; 10] {
        let mut h = [0; 10];
        for m in &self.material {
            h[*m as usize] += 1;
        }
        h
    }

    /// Compact binary form: `GMAP`, version byte, side (u32 LE),
    /// border (u32 LE), seed (i64 LE), then one material byte per tile.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(21 + self.material.len());
        out.extend_from_slice(b"GMAP");
        out.push(1);
        out.extend_from_slice(&(self.side as u32).to_le_bytes());
        out.extend_from_slice(&(self.border as u32).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend(self.material.iter().map(|m| *m as u8));
        out
    }

    pub fn from_bytes(bytes: &[u8], rules: ResourceRules) -> Result<Self, WorldError> {
        let bad = |m: &str| WorldError::MapFormat(m.to_string());
        if bytes.len() < 21 || &bytes[..4] != b"GMAP" {
            return Err(bad("missing header"));
        }
        if bytes[4] != 1 {
            return Err(bad("unsupported version"));
        }
        let side = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let border = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
        let seed = i64::from_le_bytes(bytes[13..21].try_into().unwrap());
        if bytes.len() != 21 + side * side || 2 * border >= side {
            return Err(bad("size mismatch"));
        }
        let material = bytes[21..]
            .iter()
            .map(|b| Material::from_u8(*b).ok_or_else(|| bad("unknown material")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TileMap::from_materials(side, border, seed, material, rules))
    }

    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity(self.side * (self.side + 1));
        for r in 0..self.side {
            for c in 0..self.side {
                s.push(self.material[r * self.side + c].glyph());
            }
            s.push('\n');
        }
        s
    }

    /// Binary PPM (P6), one pixel per tile.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut header = String::new();
        let _ = write!(header, "P6\n{} {}\n255\n", self.side, self.side);
        let mut out = header.into_bytes();
        for m in &self.material {
            out.extend_from_slice(&m.color());
        }
        out
    }
}

/// Generates a full map: noise bands, spawn ring and center forced walkable,
/// then random scatter of extra resources.
pub fn materialize<R: Rng + ?Sized>(
    noise: &NoiseGrid,
    cfg: &GameConfig,
    rng: &mut R,
) -> Result<TileMap, WorldError> {
    let bands = Bands::from_config(cfg)?;
    let border = cfg.int("MAP_BORDER") as usize;
    let n = noise.size;
    let side = n + 2 * border;
    let reset_to_grass = cfg.flag("TERRAIN_RESET_TO_GRASS");
    let disable_stone = cfg.flag("TERRAIN_DISABLE_STONE");
    let mut material = vec![Material::Void; side * side];
    for r in 0..n {
        for c in 0..n {
            let mut m = bands.classify(noise.get(r, c));
            if disable_stone && m == Material::Stone {
                m = Material::Grass;
            }
            if reset_to_grass {
                m = Material::Grass;
            }
            material[(r + border) * side + c + border] = m;
        }
    }
    let mut map = TileMap::from_materials(
        side,
        border,
        0,
        material,
        ResourceRules::from_config(cfg),
    );
    let mut reserved: BTreeSet<Pos> = map
        .edge_ring()
        .into_iter()
        .chain(std::iter::once(map.center()))
        .collect();
    for p in &reserved {
        map.set_material(*p, Material::Grass);
    }
    for p in map.center_corridor() {
        map.set_material(p, Material::Grass);
        reserved.insert(p);
    }
    let lo = border as i32;
    let hi = (border + n) as i32;
    if cfg.flag("TERRAIN_SCATTER_EXTRA_RESOURCES") {
        for r in lo..hi {
            for c in lo..hi {
                let p = Pos::new(r, c);
                if map.material(p) != Material::Grass || reserved.contains(&p) {
                    continue;
                }
                let u = rng.random::<f64>();
                if u < SCATTER_FOLIAGE {
                    map.set_material(p, Material::Foliage);
                } else if u < SCATTER_FOLIAGE + SCATTER_WATER {
                    map.set_material(p, Material::Water);
                }
            }
        }
    }
    if cfg.enabled(Subsystem::Profession) {
        let kinds = [Material::Tree, Material::Ore, Material::Crystal, Material::Herb];
        for r in lo..hi {
            for c in lo..hi {
                let p = Pos::new(r, c);
                match map.material(p) {
                    Material::Grass if !reserved.contains(&p) => {
                        let u = rng.random::<f64>();
                        let k = (u / SCATTER_PROFESSION) as usize;
                        if k < kinds.len() {
                            map.set_material(p, kinds[k]);
                        }
                    }
                    Material::Water if map.adjacent_to(p, Material::Grass) => {
                        if rng.random::<f64>() < SCATTER_FISH {
                            map.set_material(p, Material::Fish);
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(map)
}

/// Noise plus materialization in one call, seeded from `seed`.
pub fn generate_map(seed: i64, cfg: &GameConfig) -> Result<TileMap, WorldError> {
    use rand::SeedableRng;
    let noise = generate_noise(seed, cfg)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(splitmix(seed as u64));
    let mut map = materialize(&noise, cfg, &mut rng)?;
    map.seed = seed;
    Ok(map)
}

/// Death fog schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FogClock {
    pub onset: Option<u32>,
    pub speed: f64,
    pub final_size: u32,
}

impl FogClock {
    /// Fog depth at Chebyshev distance `dist` from the center of a map with
    /// spawn-ring radius `radius`.
    ///
    /// The front advances `speed` tiles per tick from the ring but stops
    /// `final_size` tiles from the center.
    pub fn depth_at(&self, dist: i32, radius: i32, tick: u32) -> f64 {
        let Some(onset) = self.onset else { return 0.0 };
        // The final safe zone never fogs.
        if tick < onset || dist <= self.final_size as i32 {
            return 0.0;
        }
        let front = ((tick - onset) as f64 * self.speed).min((radius - self.final_size as i32).max(0) as f64);
        (front - (radius - dist) as f64).max(0.0)
    }
}

pub fn fog_depth(pos: Pos, tick: u32, clock: &FogClock, map: &TileMap) -> f64 {
    clock.depth_at(map.center_distance(pos), map.radius(), tick)
}

/// Per-tick fog damage for a given depth.
pub fn fog_damage(depth: f64) -> i32 {
    if depth <= 0.0 {
        0
    } else {
        (depth - 1e-9).ceil().max(1.0) as i32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Profile, Value};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent reference: the noise definition evaluated literally,
    /// one tile at a time, without shared precomputation.
    fn reference_noise(seed: i64, size: usize) -> Vec<f64> {
        fn mix(mut z: u64) -> u64 {
            z = z.wrapping_add(0x9E3779B97F4A7C15);
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^ (z >> 31)
        }
        fn corner(seed: u64, k: u64, x: i64, y: i64) -> f64 {
            let a = mix(seed ^ k.wrapping_mul(0xD6E8FEB86659FD93));
            let b = mix(a ^ (x as u64).wrapping_mul(0x9E3779B97F4A7C15));
            let c = mix(b ^ (y as u64).wrapping_mul(0xC2B2AE3D27D4EB4F));
            (c >> 11) as f64 / 9007199254740992.0
        }
        let n_oct = (size / 16).max(1);
        let mut raw = Vec::new();
        for r in 0..size {
            for c in 0..size {
                let half = (size as f64 - 1.0) / 2.0;
                let d = f64::max((r as f64 - half).abs(), (c as f64 - half).abs());
                let s = -2.0 + 2.0 * (d / half).min(1.0);
                let (mut num, mut den) = (0.0, 0.0);
                for k in 0..n_oct {
                    let t = if n_oct == 1 { 0.0 } else { k as f64 / (n_oct - 1) as f64 };
                    let tf = if n_oct == 1 { 0.5 } else { t };
                    let f = 2f64.powf(-6.0 + 3.0 * tf);
                    let (y, x) = (r as f64 * f, c as f64 * f);
                    let (fx, fy) = (x.floor(), y.floor());
                    let sx = (x - fx) * (x - fx) * (3.0 - 2.0 * (x - fx));
                    let sy = (y - fy) * (y - fy) * (3.0 - 2.0 * (y - fy));
                    let v00 = corner(seed as u64, k as u64, fx as i64, fy as i64);
                    let v10 = corner(seed as u64, k as u64, fx as i64 + 1, fy as i64);
                    let v01 = corner(seed as u64, k as u64, fx as i64, fy as i64 + 1);
                    let v11 = corner(seed as u64, k as u64, fx as i64 + 1, fy as i64 + 1);
                    let v = v00 * (1.0 - sx) * (1.0 - sy)
                        + v10 * sx * (1.0 - sy)
                        + v01 * (1.0 - sx) * sy
                        + v11 * sx * sy;
                    let w = 2f64.powf(s * t);
                    num += w * v;
                    den += w;
                }
                raw.push(num / den);
            }
        }
        let lo = raw.iter().cloned().fold(f64::MAX, f64::min);
        let hi = raw.iter().cloned().fold(f64::MIN, f64::max);
        raw.iter().map(|v| (v - lo) / (hi - lo)).collect()
    }

    #[test]
    fn noise_matches_reference() {
        let cfg = GameConfig::new(Profile::Mini);
        let grid = generate_noise(0, &cfg).unwrap();
        let reference = reference_noise(0, 128);
        assert_eq!(grid.values.len(), reference.len());
        let max_err = grid
            .values
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-9, "max abs diff {max_err}");
        let ref_mean = reference.iter().sum::<f64>() / reference.len() as f64;
        assert!((grid.mean() - ref_mean).abs() < 1e-9);
        assert!(grid.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn noise_is_deterministic_and_flip_negates() {
        let mut cfg = GameConfig::new(Profile::Mini);
        cfg.set("MAP_CENTER", Value::Int(48)).unwrap();
        let a = generate_noise(7, &cfg).unwrap();
        assert_eq!(a, generate_noise(7, &cfg).unwrap());
        let minus = generate_noise(-7, &cfg).unwrap();
        cfg.set("TERRAIN_FLIP_SEED", Value::Bool(true)).unwrap();
        assert_eq!(generate_noise(7, &cfg).unwrap(), minus);
        assert_ne!(a, minus);
    }

    #[test]
    fn terrain_disabled_is_an_error() {
        let mut cfg = GameConfig::new(Profile::Mini);
        cfg.set_subsystems([Subsystem::Combat].into_iter().collect());
        assert_eq!(generate_noise(0, &cfg), Err(WorldError::TerrainDisabled));
    }

    #[test]
    fn band_membership() {
        let cfg = GameConfig::new(Profile::Mini);
        let b = Bands::from_config(&cfg).unwrap();
        assert_eq!(b.classify(0.0), Material::Water);
        assert_eq!(b.classify(0.299), Material::Water);
        assert_eq!(b.classify(0.3), Material::Grass);
        assert_eq!(b.classify(0.8), Material::Foliage);
        assert_eq!(b.classify(1.0), Material::Stone);
        assert_eq!(b.classify(-0.1), Material::Void);
    }

    #[test]
    fn threshold_order_checked() {
        let mut cfg = GameConfig::new(Profile::Mini);
        cfg.set("TERRAIN_WATER", Value::Real(0.9)).unwrap();
        let noise = generate_noise(0, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            materialize(&noise, &cfg, &mut rng).unwrap_err(),
            WorldError::ThresholdOrderViolation
        );
    }

    #[test]
    fn histogram_matches_band_count() {
        let mut cfg = GameConfig::new(Profile::Mini);
        cfg.set("TERRAIN_SCATTER_EXTRA_RESOURCES", Value::Bool(false))
            .unwrap();
        let noise = generate_noise(0, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let map = materialize(&noise, &cfg, &mut rng).unwrap();

        // Exhaustive band count over the raw grid, with the ring and center
        // reassigned to grass.
        let border = 16usize;
        let ctr = 16 + 64;
        let radius = 63;
        let mut expect = [0usize; 10];
        let side = 128 + 32;
        expect[Material::Void as usize] = side * side - 128 * 128;
        for r in 0..128 {
            for c in 0..128 {
                let (rr, cc) = ((r + border) as i32, (c + border) as i32);
                let d = (rr - ctr).abs().max((cc - ctr).abs());
                let v = noise.get(r, c);
                let m = if d == radius || d == 0 {
                    Material::Grass
                } else if v < 0.3 {
                    Material::Water
                } else if v < 0.7 {
                    Material::Grass
                } else if v < 0.85 {
                    Material::Foliage
                } else {
                    Material::Stone
                };
                expect[m as usize] += 1;
            }
        }
        assert_eq!(map.histogram(), expect);
    }

    #[test]
    fn reset_to_grass_leaves_only_grass_or_scatter() {
        let mut cfg = GameConfig::new(Profile::Mini);
        cfg.set("TERRAIN_RESET_TO_GRASS", Value::Bool(true)).unwrap();
        let map = generate_map(3, &cfg).unwrap();
        for r in 16..144 {
            for c in 16..144 {
                let m = map.material(Pos::new(r, c));
                assert!(matches!(m, Material::Grass | Material::Foliage | Material::Water));
            }
        }
    }

    #[test]
    fn profession_tiles_only_when_enabled() {
        let mini = generate_map(5, &GameConfig::new(Profile::Mini)).unwrap();
        let h = mini.histogram();
        for m in [Material::Tree, Material::Ore, Material::Crystal, Material::Herb, Material::Fish] {
            assert_eq!(h[m as usize], 0);
        }
        let full = generate_map(5, &GameConfig::new(Profile::Full)).unwrap();
        let h = full.histogram();
        for m in [Material::Tree, Material::Ore, Material::Crystal, Material::Herb] {
            assert!(h[m as usize] > 0, "{m:?}");
        }
    }

    #[test]
    fn border_is_void_and_ring_walkable() {
        let map = generate_map(11, &GameConfig::new(Profile::Full)).unwrap();
        for i in 0..map.side() as i32 {
            for p in [Pos::new(0, i), Pos::new(i, 0), Pos::new(15, i), Pos::new(i, 159)] {
                assert_eq!(map.material(p), Material::Void);
                assert!(!map.passable(p));
            }
        }
        let ring = map.edge_ring();
        assert_eq!(ring.len(), 4 * 126);
        assert!(ring.iter().all(|p| map.passable(*p)));
        assert!(map.passable(map.center()));
        assert_eq!(map.center(), Pos::new(80, 80));
    }

    /// Plain flood fill over walkable tiles, used as the reachability oracle.
    fn reachable(map: &TileMap, from: Pos) -> BTreeSet<Pos> {
        let mut seen = BTreeSet::from([from]);
        let mut stack = vec![from];
        while let Some(p) = stack.pop() {
            for d in Dir::MOVES {
                let q = p.step(d);
                if map.contains(q) && map.passable(q) && seen.insert(q) {
                    stack.push(q);
                }
            }
        }
        seen
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn center_reaches_spawn_ring(seed in 0i64..100_000, size in prop::sample::select(vec![40i64, 60, 80])) {
            let mut cfg = GameConfig::new(Profile::Mini);
            cfg.set("MAP_CENTER", Value::Int(size)).unwrap();
            let map = generate_map(seed, &cfg).unwrap();
            let from_center = reachable(&map, map.center());
            prop_assert!(map.edge_ring().iter().all(|p| from_center.contains(p)));
        }
    }

    #[test]
    fn regeneration_extremes() {
        let mut cfg = GameConfig::new(Profile::Mini);
        cfg.set("RESOURCE_FOILAGE_RESPAWN", Value::Real(0.0)).unwrap();
        let mut map = TileMap::flat(8, 2, ResourceRules::from_config(&cfg));
        let p = Pos::new(4, 4);
        map.set_material(p, Material::Foliage);
        assert!(map.harvest(p));
        assert!(!map.harvest(p));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1_000_000 {
            map.tick_regeneration(&mut rng);
        }
        assert_eq!(map.harvests(p), 0);
        assert_eq!(map.material(p), Material::Foliage);

        cfg.set("RESOURCE_FOILAGE_RESPAWN", Value::Real(1.0)).unwrap();
        let mut map = TileMap::flat(8, 2, ResourceRules::from_config(&cfg));
        map.set_material(p, Material::Foliage);
        map.harvest(p);
        map.tick_regeneration(&mut rng);
        assert_eq!(map.harvests(p), 1);
        assert_eq!(map.depleted_count(), 0);
    }

    #[test]
    fn regeneration_rate_within_three_sigma() {
        let mut cfg = GameConfig::new(Profile::Mini);
        cfg.set("RESOURCE_FOILAGE_RESPAWN", Value::Real(0.1)).unwrap();
        let mut map = TileMap::flat(10, 2, ResourceRules::from_config(&cfg));
        let tiles: Vec<Pos> = (2..12).flat_map(|r| (2..12).map(move |c| Pos::new(r, c))).collect();
        for p in &tiles {
            map.set_material(*p, Material::Foliage);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mut trials, mut successes) = (0u64, 0u64);
        while trials < 100_000 {
            for p in &tiles {
                map.harvest(*p);
            }
            trials += map.depleted_count() as u64;
            map.tick_regeneration(&mut rng);
            successes += (tiles.len() - map.depleted_count()) as u64;
        }
        let n = trials as f64;
        let rate = successes as f64 / n;
        let sigma = (0.1 * 0.9 / n).sqrt();
        assert!((rate - 0.1).abs() < 3.0 * sigma, "rate {rate}");
    }

    #[test]
    fn fog_examples() {
        let clock = FogClock { onset: Some(10), speed: 1.0 / 7.0, final_size: 8 };
        let map = TileMap::flat(128, 16, ResourceRules::from_config(&GameConfig::new(Profile::Mini)));
        let edge = map.edge_ring()[0];
        assert_eq!(fog_depth(edge, 9, &clock, &map), 0.0);
        assert!((fog_depth(edge, 24, &clock, &map) - 2.0).abs() < 1e-12);
        for t in 0..5000 {
            assert_eq!(fog_depth(map.center(), t, &clock, &map), 0.0);
        }
        assert_eq!(fog_damage(0.0), 0);
        assert_eq!(fog_damage(2.3), 3);
        assert_eq!(fog_damage(2.0), 2);
        assert_eq!(fog_damage(0.1), 1);
    }

    #[test]
    fn center_progress_examples() {
        let map = TileMap::flat(128, 16, ResourceRules::from_config(&GameConfig::new(Profile::Mini)));
        assert_eq!(map.center_progress(map.center()), 1.0);
        assert_eq!(map.center_progress(map.edge_ring()[5]), 0.0);
        // radius 63 is odd; use an even-radius map for an exact midpoint
        let map = TileMap::flat(41, 16, ResourceRules::from_config(&GameConfig::new(Profile::Mini)));
        assert_eq!(map.radius(), 20);
        let half = Pos::new(map.center().r - 10, map.center().c + 3);
        assert_eq!(map.center_progress(half), 0.5);
    }

    #[test]
    fn binary_round_trip() {
        let cfg = GameConfig::new(Profile::Full);
        let map = generate_map(2, &cfg).unwrap();
        let back = TileMap::from_bytes(&map.to_bytes(), ResourceRules::from_config(&cfg)).unwrap();
        assert_eq!(back.materials(), map.materials());
        assert_eq!(back.seed(), 2);
        let mut bytes = map.to_bytes();
        bytes.truncate(100);
        assert!(TileMap::from_bytes(&bytes, ResourceRules::from_config(&cfg)).is_err());
        assert!(map.to_ascii().lines().count() == map.side());
        assert!(map.to_ppm().starts_with(b"P6\n160 160\n255\n"));
    }

    proptest! {
        #[test]
        fn fog_depth_is_monotone(dist in 0i32..80, radius in 1i32..70, onset in 0u32..300,
                                 inv in 1u32..20, final_size in 0u32..10, t in 0u32..2000) {
            let clock = FogClock { onset: Some(onset), speed: 1.0 / inv as f64, final_size };
            let a = clock.depth_at(dist, radius, t);
            let b = clock.depth_at(dist, radius, t + 1);
            prop_assert!(b >= a);
            prop_assert!(a >= 0.0);
            if t < onset { prop_assert_eq!(a, 0.0); }
            if dist <= final_size as i32 { prop_assert_eq!(a, 0.0); }
        }

        #[test]
        fn bands_partition_unit_interval(v in 0.0f64..=1.0) {
            let cfg = GameConfig::new(Profile::Mini);
            let b = Bands::from_config(&cfg).unwrap();
            let m = b.classify(v);
            let hits = [
                v < b.void,
                v >= b.void && v < b.water,
                v >= b.water && v < b.grass,
                v >= b.grass && v < b.foliage,
                v >= b.foliage,
            ];
            prop_assert_eq!(hits.iter().filter(|h| **h).count(), 1);
            prop_assert!(matches!(m, Material::Void | Material::Water | Material::Grass | Material::Foliage | Material::Stone));
        }

        #[test]
        fn regeneration_preserves_material(seed in 0u64..1000) {
            let cfg = GameConfig::new(Profile::Full);
            let mut map = TileMap::flat(6, 2, ResourceRules::from_config(&cfg));
            let kinds = [Material::Foliage, Material::Tree, Material::Ore, Material::Herb];
            for (i, m) in kinds.iter().enumerate() {
                map.set_material(Pos::new(3, 3 + i as i32), *m);
                map.harvest(Pos::new(3, 3 + i as i32));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                map.tick_regeneration(&mut rng);
                for (i, m) in kinds.iter().enumerate() {
                    let t = map.tile(Pos::new(3, 3 + i as i32));
                    prop_assert_eq!(t.material, *m);
                    prop_assert!(t.harvests_remaining <= t.capacity);
                }
            }
        }
    }
}
