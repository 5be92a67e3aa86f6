//! Deterministic many-agent gridworld: terrain, entities and combat, items
//! and a market, tasks and minigames, flat observations, and an evaluation
//! arena with replays and ratings.

pub mod arena;
pub mod combat;
pub mod config;
pub mod economy;
pub mod env;
pub mod entity;
pub mod events;
pub mod items;
pub mod minigame;
pub mod npc;
pub mod obs;
pub mod sim;
pub mod state;
pub mod tasks;
pub mod world;
