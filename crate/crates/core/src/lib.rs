//! Qualitative solver for concurrent stochastic games in which both players
//! only partially observe the state.
//!
//! The library decides whether Eve has an almost-surely winning strategy for
//! a reachability or Büchi objective, synthesizes a finite-memory witness
//! when she does, and ships the exact and statistical evaluators used to
//! cross-check every verdict.
//!
//! Module map:
//! - [`model`]: arenas, distributions, strategies and the JSON file formats.
//! - [`knowledge`]: Eve's knowledge update and the knowledge arena.
//! - [`halfplayer`]: positive safety / co-Büchi for one-and-a-half player games.
//! - [`solver`]: candidate enumeration and the two decision procedures.
//! - [`eval`]: exact product chains, full-information best response, Monte Carlo.
//! - [`cli`]: the `stochgame` command line front end.

pub mod cli;
pub mod error;
pub mod eval;
pub mod halfplayer;
pub mod knowledge;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
