//! Scripted baseline policies. Each reads only the flat observation (and
//! its masks) plus public episode facts, and writes a flat action.

use std::collections::VecDeque;

use rand::seq::IndexedRandom;
use rand_chacha::ChaCha8Rng;

use crate::minigame::MinigameKind;
use crate::obs::{ObservationLayout, ENTITY_FEATURES, ENTITY_ROWS, TILE_FEATURES, VISION_RADIUS};
use crate::world::{Dir, Material, Pos};

/// Public facts a policy may use besides its observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeInfo {
    pub kind: MinigameKind,
    pub center: Pos,
}

pub trait Policy: Send + Sync {
    fn name(&self) -> &'static str;
    /// Fills `out` with a flat action legal under the masks in `obs`.
    fn act(&self, obs: &[f32], layout: &ObservationLayout, info: &EpisodeInfo, rng: &mut ChaCha8Rng, out: &mut [i64]);
}

pub const POLICY_NAMES: [&str; 5] = ["noop", "random_valid", "forager", "brawler", "racer"];

pub fn by_name(name: &str) -> Option<Box<dyn Policy>> {
    Some(match name {
        "noop" => Box::new(Noop),
        "random_valid" | "random" => Box::new(RandomValid),
        "forager" => Box::new(Forager),
        "brawler" => Box::new(Brawler),
        "racer" => Box::new(Racer),
        _ => return None,
    })
}

pub struct Noop;
pub struct RandomValid;
pub struct Forager;
pub struct Brawler;
pub struct Racer;

impl Policy for Noop {
    fn name(&self) -> &'static str {
        "noop"
    }

    fn act(&self, _: &[f32], layout: &ObservationLayout, _: &EpisodeInfo, _: &mut ChaCha8Rng, out: &mut [i64]) {
        out.copy_from_slice(&layout.actions.noop());
    }
}

impl Policy for RandomValid {
    fn name(&self) -> &'static str {
        "random_valid"
    }

    fn act(&self, obs: &[f32], layout: &ObservationLayout, _: &EpisodeInfo, rng: &mut ChaCha8Rng, out: &mut [i64]) {
        let noop = layout.actions.noop();
        for (k, (name, _)) in layout.actions.dims.iter().enumerate() {
            let legal: Vec<usize> = layout
                .mask(obs, name)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v > 0.0)
                .map(|(i, _)| i)
                .collect();
            out[k] = legal.choose(rng).map_or(noop[k], |i| *i as i64);
        }
    }
}

const SIDE: usize = (2 * VISION_RADIUS + 1) as usize;
const STAY: i64 = 4;

/// Read-only helpers over one observation.
struct View<'a> {
    obs: &'a [f32],
    layout: &'a ObservationLayout,
}

impl<'a> View<'a> {
    fn tile(&self, i: usize, f: usize) -> f32 {
        self.obs[self.layout.component("tile").offset + i * TILE_FEATURES.len() + f]
    }

    fn entity(&self, j: usize, f: usize) -> f32 {
        self.obs[self.layout.component("entity").offset + j * ENTITY_FEATURES.len() + f]
    }

    fn filled(&self, j: usize) -> bool {
        self.entity(j, 0) != 0.0
    }

    fn me(&self) -> Option<usize> {
        (0..ENTITY_ROWS).take_while(|j| self.filled(*j)).find(|j| self.entity(*j, 3) > 0.0)
    }

    fn material(&self, i: usize) -> Material {
        Material::from_u8(self.tile(i, 2) as u8).unwrap_or(Material::Void)
    }

    fn cell_pos(&self, i: usize) -> Pos {
        Pos::new(self.tile(i, 0) as i32, self.tile(i, 1) as i32)
    }

    fn move_legal(&self, d: usize) -> bool {
        self.layout.mask(self.obs, "move")[d] > 0.0
    }

    /// First move of a shortest in-window walk from the center cell to
    /// every reachable cell, with its length.
    fn walks(&self) -> Vec<Option<(usize, u32)>> {
        let mut out = vec![None; SIDE * SIDE];
        let c = SIDE / 2;
        let start = c * SIDE + c;
        out[start] = Some((STAY as usize, 0));
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let (r, col) = (i / SIDE, i % SIDE);
            let (first, d) = out[i].expect("queued cells are reached");
            for dir in Dir::MOVES {
                let (dr, dc) = dir.delta();
                let (nr, nc) = (r as i32 + dr, col as i32 + dc);
                if nr < 0 || nc < 0 || nr >= SIDE as i32 || nc >= SIDE as i32 {
                    continue;
                }
                let j = nr as usize * SIDE + nc as usize;
                if out[j].is_some() || !self.material(j).passable() {
                    continue;
                }
                if i == start && !self.move_legal(dir.index()) {
                    continue;
                }
                out[j] = Some((if i == start { dir.index() } else { first }, d + 1));
                queue.push_back(j);
            }
        }
        out
    }

    /// Move toward the reachable cell with the lowest `(cost, walk length)`.
    fn head_for(&self, cost: impl Fn(usize) -> Option<i64>) -> Option<i64> {
        let walks = self.walks();
        walks
            .iter()
            .enumerate()
            .filter_map(|(i, w)| w.and_then(|(first, d)| Some((cost(i)?, d, i, first))))
            .min()
            .map(|(_, _, _, first)| first as i64)
    }
}

fn random_move(v: &View, rng: &mut ChaCha8Rng) -> i64 {
    let legal: Vec<i64> = (0..4).filter(|d| v.move_legal(*d)).map(|d| d as i64).collect();
    legal.choose(rng).copied().unwrap_or(STAY)
}

/// Step toward food or water, whichever is lower; wander when neither is
/// in sight.
fn forage(v: &View, rng: &mut ChaCha8Rng) -> i64 {
    let Some(me) = v.me() else { return STAY };
    let (food, water) = (v.entity(me, 10), v.entity(me, 11));
    let wants_food = food <= water;
    let is_food = |i: usize| v.material(i) == Material::Foliage && v.tile(i, 6) > 0.0;
    let near_water = |i: usize| {
        let (r, c) = ((i / SIDE) as i32, (i % SIDE) as i32);
        v.material(i).passable()
            && Dir::MOVES.iter().any(|d| {
                let (dr, dc) = d.delta();
                let (nr, nc) = (r + dr, c + dc);
                nr >= 0
                    && nc >= 0
                    && nr < SIDE as i32
                    && nc < SIDE as i32
                    && v.material(nr as usize * SIDE + nc as usize) == Material::Water
            })
    };
    let step = v.head_for(|i| {
        let hit = if wants_food { is_food(i) } else { near_water(i) };
        hit.then_some(0)
    });
    step.unwrap_or_else(|| random_move(v, rng))
}

/// Step toward `goal`, detouring around obstacles inside the window.
fn approach(v: &View, goal: Pos, rng: &mut ChaCha8Rng) -> i64 {
    let step = v.head_for(|i| Some(v.cell_pos(i).manhattan(goal) as i64));
    match step {
        Some(STAY) => {
            let here = v.cell_pos(SIDE * SIDE / 2);
            if here == goal {
                STAY
            } else {
                random_move(v, rng)
            }
        }
        Some(d) => d,
        None => random_move(v, rng),
    }
}

fn set(layout: &ObservationLayout, out: &mut [i64], dim: &str, value: i64) {
    if let Some(k) = layout.actions.index_of(dim) {
        out[k] = value;
    }
}

impl Policy for Forager {
    fn name(&self) -> &'static str {
        "forager"
    }

    fn act(&self, obs: &[f32], layout: &ObservationLayout, _: &EpisodeInfo, rng: &mut ChaCha8Rng, out: &mut [i64]) {
        out.copy_from_slice(&layout.actions.noop());
        let v = View { obs, layout };
        set(layout, out, "move", forage(&v, rng));
    }
}

impl Policy for Brawler {
    fn name(&self) -> &'static str {
        "brawler"
    }

    fn act(&self, obs: &[f32], layout: &ObservationLayout, _: &EpisodeInfo, rng: &mut ChaCha8Rng, out: &mut [i64]) {
        out.copy_from_slice(&layout.actions.noop());
        let v = View { obs, layout };
        let Some(me) = v.me() else { return };
        let targets = layout.mask(obs, "attack_target");
        let styles = layout.mask(obs, "attack_style");
        // Best allowed style by level; earlier style on ties.
        let style = (0..3)
            .filter(|s| styles[*s] > 0.0)
            .max_by(|a, b| v.entity(me, 12 + 2 * a).total_cmp(&v.entity(me, 12 + 2 * b)).then(b.cmp(a)));
        let foe = |j: usize| v.entity(j, 1) == 0.0 && v.entity(j, 3) == 0.0 && v.entity(j, 2) == 0.0;
        let rows = (0..ENTITY_ROWS).take_while(|j| v.filled(*j));
        let in_reach = rows.clone().filter(|j| targets[*j] > 0.0).min_by_key(|j| (!foe(*j), *j));
        if let (Some(j), Some(s)) = (in_reach, style) {
            set(layout, out, "attack_style", s as i64);
            set(layout, out, "attack_target", j as i64);
            return;
        }
        let chase = rows.filter(|j| foe(*j)).map(|j| Pos::new(v.entity(j, 6) as i32, v.entity(j, 7) as i32)).next();
        let mv = match chase {
            Some(p) => approach(&v, p, rng),
            None => forage(&v, rng),
        };
        set(layout, out, "move", mv);
    }
}

impl Policy for Racer {
    fn name(&self) -> &'static str {
        "racer"
    }

    fn act(&self, obs: &[f32], layout: &ObservationLayout, info: &EpisodeInfo, rng: &mut ChaCha8Rng, out: &mut [i64]) {
        out.copy_from_slice(&layout.actions.noop());
        let v = View { obs, layout };
        if v.me().is_none() {
            return;
        }
        set(layout, out, "move", approach(&v, info.center, rng));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{GameConfig, Profile};
    use crate::env::Env;
    use rand::SeedableRng;

    #[test]
    fn every_policy_respects_masks() {
        for profile in [Profile::Mini, Profile::Full] {
            let mut cfg = GameConfig::new(profile);
            for a in ["PLAYER_N=16", "HORIZON=24"] {
                cfg.apply_assignment(a).unwrap();
            }
            let mut env = Env::new(cfg).unwrap();
            let ep = env.reset(3, Some(MinigameKind::TeamBattle)).unwrap();
            let info = EpisodeInfo {
                kind: ep.setup.kind,
                center: ep.state.map.center(),
            };
            let layout = env.layout().clone();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for name in POLICY_NAMES {
                let p = by_name(name).unwrap();
                for i in 0..env.num_agents() {
                    let obs = env.episode().unwrap().frame.agent(&layout, i);
                    let mut out = vec![0; layout.actions.len()];
                    p.act(obs, &layout, &info, &mut rng, &mut out);
                    for (k, (dim, _)) in layout.actions.dims.iter().enumerate() {
                        let mask = layout.mask(obs, dim);
                        let noop = layout.actions.noop()[k];
                        assert!(out[k] == noop || mask[out[k] as usize] > 0.0, "{name} {dim} {}", out[k]);
                    }
                }
            }
        }
    }

    #[test]
    fn unknown_name_is_none() {
        assert!(by_name("oracle").is_none());
    }
}
