//! Seeded random arenas.

use rand::prelude::*;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ratio, Arena, ArenaParts, Distribution, Partition, Player};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenParams {
    pub state_count: usize,
    pub eve_action_count: usize,
    pub adam_action_count: usize,
    /// Probability that a `(state, eve, adam)` triple gets a drawn
    /// distribution instead of a self-loop.
    pub transition_density: f64,
    pub eve_blocks: usize,
    pub adam_blocks: usize,
    pub final_count: usize,
    pub seed: u64,
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let counts = [self.state_count, self.eve_action_count, self.adam_action_count, self.eve_blocks, self.adam_blocks];
        if counts.contains(&0) {
            return Err(Error::validation("counts must be at least 1"));
        }
        if !(self.transition_density > 0.0 && self.transition_density <= 1.0) {
            return Err(Error::validation("transition density must lie in (0, 1]"));
        }
        if self.eve_blocks > self.state_count || self.adam_blocks > self.state_count {
            return Err(Error::validation("more observation blocks than states"));
        }
        if self.final_count > self.state_count {
            return Err(Error::validation("more final states than states"));
        }
        Ok(())
    }
}

const DENOMINATOR: u64 = 8;

fn names(prefix: &str, count: usize) -> Vec<String> {
    (0..count).map(|i| format!("{prefix}{i}")).collect()
}

/// Random partition of `0..n` into exactly `k` non-empty blocks.
fn random_blocks(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Partition {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut blocks = vec![Vec::new(); k];
    for (i, &s) in order.iter().enumerate() {
        let b = if i < k { i } else { rng.random_range(0..k) };
        blocks[b].push(s);
    }
    for b in &mut blocks {
        b.sort_unstable();
    }
    blocks.sort();
    Partition::new(n, blocks).expect("blocks cover every state once")
}

/// Support of 1 to 3 states with weights `c_i / d`, `d ≤ 8`.
fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Distribution {
    let m = rng.random_range(1..=n.min(3));
    let support = sample(rng, n, m).into_vec();
    let d = rng.random_range(m as u64..=DENOMINATOR);
    let mut cuts: Vec<u64> = sample(rng, d as usize - 1, m - 1)
        .into_iter()
        .map(|c| c as u64 + 1)
        .collect();
    cuts.sort_unstable();
    cuts.push(d);
    let mut prev = 0;
    let weights = support
        .into_iter()
        .zip(cuts)
        .map(|(s, c)| {
            let w = ratio((c - prev) as i64, d as i64);
            prev = c;
            (s, w)
        })
        .collect();
    Distribution::from_weights(weights).expect("composition of d sums to d")
}

/// Deterministic in `params`. Panics on parameters rejected by
/// [`GenParams::validate`].
pub fn random_arena(params: &GenParams) -> Arena {
    params.validate().expect("valid generator parameters");
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.state_count;
    let mut final_states = vec![false; n];
    for s in sample(&mut rng, n, params.final_count) {
        final_states[s] = true;
    }
    let eve_obs = random_blocks(&mut rng, n, params.eve_blocks);
    let adam_obs = random_blocks(&mut rng, n, params.adam_blocks);
    let mut transitions = Vec::with_capacity(n * params.eve_action_count * params.adam_action_count);
    for s in 0..n {
        for _ in 0..params.eve_action_count * params.adam_action_count {
            let d = if rng.random_bool(params.transition_density) {
                random_distribution(&mut rng, n)
            } else {
                Distribution::point(s)
            };
            transitions.push(d);
        }
    }
    Arena::new(ArenaParts {
        states: names("s", n),
        init: 0,
        eve_actions: names("e", params.eve_action_count),
        adam_actions: names("x", params.adam_action_count),
        transitions,
        eve_obs,
        adam_obs,
        final_states,
    })
    .expect("generated arena is valid")
}

/// Turn-based deterministic arena with perfect information: at an Eve state
/// only Eve's action matters, at an Adam state only Adam's.
#[derive(Clone, Debug)]
pub struct TurnBased {
    pub arena: Arena,
    pub owner: Vec<Player>,
}

pub fn random_turn_based(state_count: usize, final_count: usize, seed: u64) -> TurnBased {
    assert!(state_count >= 1 && final_count <= state_count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = state_count;
    let owner: Vec<Player> = (0..n)
        .map(|_| if rng.random_bool(0.5) { Player::Eve } else { Player::Adam })
        .collect();
    let mut final_states = vec![false; n];
    for s in sample(&mut rng, n, final_count) {
        final_states[s] = true;
    }
    let mut transitions = Vec::with_capacity(n * 4);
    for who in &owner {
        let succ = [rng.random_range(0..n), rng.random_range(0..n)];
        for e in 0..2 {
            for a in 0..2 {
                let t = match who {
                    Player::Eve => succ[e],
                    Player::Adam => succ[a],
                };
                transitions.push(Distribution::point(t));
            }
        }
    }
    let arena = Arena::new(ArenaParts {
        states: names("s", n),
        init: 0,
        eve_actions: names("e", 2),
        adam_actions: names("x", 2),
        transitions,
        eve_obs: Partition::discrete(n),
        adam_obs: Partition::discrete(n),
        final_states,
    })
    .expect("generated arena is valid");
    TurnBased { arena, owner }
}
