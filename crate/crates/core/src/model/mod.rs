//! Core data model: exact probabilities, arenas, strategies, objectives,
//! plays, and the JSON game/strategy documents.

mod arena;
mod distribution;
mod io;
mod rational;
mod strategy;

pub use arena::{Arena, ArenaParts, Objective, Partition, Play, Player};
pub use distribution::Distribution;
pub use io::{
    game_to_value, parse_game, parse_strategy, serialize_game, serialize_strategy,
    strategy_to_value,
};
pub use rational::{format_rational, parse_rational, ratio, Rational};
pub use strategy::{validate_strategy, FiniteMemoryStrategy};
