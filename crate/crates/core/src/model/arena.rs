use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_traits::Zero;

use super::distribution::Distribution;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    Eve,
    Adam,
}

impl Player {
    pub fn as_str(self) -> &'static str {
        match self {
            Player::Eve => "eve",
            Player::Adam => "adam",
        }
    }

    pub fn opponent(self) -> Player {
        match self {
            Player::Eve => Player::Adam,
            Player::Adam => Player::Eve,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Player {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eve" => Ok(Player::Eve),
            "adam" => Ok(Player::Adam),
            other => Err(Error::Schema(format!("unknown owner {other:?}"))),
        }
    }
}

/// Winning condition for Eve, always read against [`Arena::is_final`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Objective {
    Reachability,
    Safety,
    Buchi,
    CoBuchi,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Reachability => "reach",
            Objective::Safety => "safety",
            Objective::Buchi => "buchi",
            Objective::CoBuchi => "cobuchi",
        }
    }

    pub fn dual(self) -> Objective {
        match self {
            Objective::Reachability => Objective::Safety,
            Objective::Safety => Objective::Reachability,
            Objective::Buchi => Objective::CoBuchi,
            Objective::CoBuchi => Objective::Buchi,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reach" | "reachability" => Ok(Objective::Reachability),
            "safety" => Ok(Objective::Safety),
            "buchi" => Ok(Objective::Buchi),
            "cobuchi" | "co-buchi" => Ok(Objective::CoBuchi),
            other => Err(Error::Schema(format!("unknown objective {other:?}"))),
        }
    }
}

/// Partition of `0..n` into non-empty blocks. Each element carries its block
/// index so observation lookup is a single array access.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl Partition {
    pub fn new(size: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut block_of = vec![usize::MAX; size];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::validation(format!("block {b} is empty")));
            }
            for &x in block {
                if x >= size {
                    return Err(Error::validation(format!("block {b} mentions unknown element {x}")));
                }
                if block_of[x] != usize::MAX {
                    return Err(Error::validation(format!("element {x} appears in two blocks")));
                }
                block_of[x] = b;
            }
        }
        if let Some(missing) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::validation(format!("element {missing} is not covered")));
        }
        let blocks = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        Ok(Partition { blocks, block_of })
    }

    /// Every element in its own block.
    pub fn discrete(size: usize) -> Self {
        Partition {
            blocks: (0..size).map(|i| vec![i]).collect(),
            block_of: (0..size).collect(),
        }
    }

    /// Groups elements by a key; blocks are ordered by first appearance.
    pub fn from_keys<K: Eq + std::hash::Hash>(keys: impl IntoIterator<Item = K>) -> Self {
        let mut index: HashMap<K, usize> = HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut block_of = Vec::new();
        for (i, key) in keys.into_iter().enumerate() {
            let next = blocks.len();
            let b = *index.entry(key).or_insert(next);
            if b == blocks.len() {
                blocks.push(Vec::new());
            }
            blocks[b].push(i);
            block_of.push(b);
        }
        Partition { blocks, block_of }
    }

    pub fn block_of(&self, x: usize) -> usize {
        self.block_of[x]
    }

    pub fn block(&self, b: usize) -> &[usize] {
        &self.blocks[b]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn is_discrete(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 1)
    }

    /// Splits every block into its non-final and final parts (in that order),
    /// dropping empty halves.
    pub fn refine_by(&self, flag: &[bool]) -> Partition {
        let mut blocks = Vec::new();
        for block in &self.blocks {
            for want in [false, true] {
                let part: Vec<usize> = block.iter().copied().filter(|&x| flag[x] == want).collect();
                if !part.is_empty() {
                    blocks.push(part);
                }
            }
        }
        let mut block_of = vec![0; self.block_of.len()];
        for (b, block) in blocks.iter().enumerate() {
            for &x in block {
                block_of[x] = b;
            }
        }
        Partition { blocks, block_of }
    }
}

/// Raw components for [`Arena::new`]. Transitions are indexed
/// `(state * eve_actions + eve) * adam_actions + adam`.
#[derive(Clone, Debug)]
pub struct ArenaParts {
    pub states: Vec<String>,
    pub init: usize,
    pub eve_actions: Vec<String>,
    pub adam_actions: Vec<String>,
    pub transitions: Vec<Distribution>,
    pub eve_obs: Partition,
    pub adam_obs: Partition,
    pub final_states: Vec<bool>,
}

/// A finite concurrent arena with imperfect information on both sides,
/// together with its initial state and final set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arena {
    states: Vec<String>,
    init: usize,
    eve_actions: Vec<String>,
    adam_actions: Vec<String>,
    transitions: Vec<Distribution>,
    eve_obs: Partition,
    adam_obs: Partition,
    final_states: Vec<bool>,
    state_index: HashMap<String, usize>,
}

impl Arena {
    pub fn new(parts: ArenaParts) -> Result<Self> {
        let n = parts.states.len();
        if n == 0 {
            return Err(Error::validation("arena has no states"));
        }
        if parts.eve_actions.is_empty() || parts.adam_actions.is_empty() {
            return Err(Error::validation("both players need at least one action"));
        }
        let state_index = unique_index(&parts.states, "state")?;
        unique_index(&parts.eve_actions, "eve action")?;
        unique_index(&parts.adam_actions, "adam action")?;
        if parts.init >= n {
            return Err(Error::validation("init is not a state"));
        }
        let expected = n * parts.eve_actions.len() * parts.adam_actions.len();
        if parts.transitions.len() != expected {
            return Err(Error::validation(format!(
                "δ not total: {} of {expected} triples defined",
                parts.transitions.len()
            )));
        }
        for (t, dist) in parts.transitions.iter().enumerate() {
            if dist.is_empty() || dist.support().any(|s| s >= n) {
                return Err(Error::validation(format!("transition {t} has an invalid target")));
            }
            if dist.entries().iter().any(|(_, w)| *w <= Zero::zero()) {
                return Err(Error::validation(format!("transition {t} has a non-positive weight")));
            }
            if dist.total() != num_traits::One::one() {
                return Err(Error::validation(format!("transition {t}: distribution sum ≠ 1")));
            }
        }
        if parts.eve_obs.block_of.len() != n || parts.adam_obs.block_of.len() != n {
            return Err(Error::validation("observation partition does not cover the states"));
        }
        if parts.final_states.len() != n {
            return Err(Error::validation("final flags do not match the state count"));
        }
        Ok(Arena {
            states: parts.states,
            init: parts.init,
            eve_actions: parts.eve_actions,
            adam_actions: parts.adam_actions,
            transitions: parts.transitions,
            eve_obs: parts.eve_obs,
            adam_obs: parts.adam_obs,
            final_states: parts.final_states,
            state_index,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.states[s]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_index.get(name).copied()
    }

    pub fn init(&self) -> usize {
        self.init
    }

    pub fn actions(&self, player: Player) -> &[String] {
        match player {
            Player::Eve => &self.eve_actions,
            Player::Adam => &self.adam_actions,
        }
    }

    pub fn num_actions(&self, player: Player) -> usize {
        self.actions(player).len()
    }

    pub fn action_index(&self, player: Player, name: &str) -> Option<usize> {
        self.actions(player).iter().position(|a| a == name)
    }

    pub fn obs(&self, player: Player) -> &Partition {
        match player {
            Player::Eve => &self.eve_obs,
            Player::Adam => &self.adam_obs,
        }
    }

    pub fn is_final(&self, s: usize) -> bool {
        self.final_states[s]
    }

    pub fn final_flags(&self) -> &[bool] {
        &self.final_states
    }

    pub fn transition(&self, s: usize, eve: usize, adam: usize) -> &Distribution {
        let ne = self.eve_actions.len();
        let na = self.adam_actions.len();
        &self.transitions[(s * ne + eve) * na + adam]
    }

    pub fn transitions(&self) -> &[Distribution] {
        &self.transitions
    }

    /// One round from `s` when Eve draws from `eve` and Adam from `adam`:
    /// `Σ eve(σE)·adam(σA)·δ(s,σE,σA)`.
    pub fn step_distribution(&self, s: usize, eve: &Distribution, adam: &Distribution) -> Distribution {
        let parts: Vec<_> = eve
            .entries()
            .iter()
            .flat_map(|(e, pe)| {
                adam.entries()
                    .iter()
                    .map(move |(a, pa)| (pe * pa, self.transition(s, *e, *a)))
            })
            .collect();
        Distribution::mix(parts)
    }

    /// Support of `δ(s,·,·)` over every action pair.
    pub fn successors(&self, s: usize) -> Vec<usize> {
        let ne = self.eve_actions.len();
        let na = self.adam_actions.len();
        let mut out: Vec<usize> = self.transitions[s * ne * na..(s + 1) * ne * na]
            .iter()
            .flat_map(|d| d.support())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Same arena with Adam's partition split by final membership.
    pub fn with_adam_obs_refined_by_final(&self) -> Arena {
        let mut out = self.clone();
        out.adam_obs = self.adam_obs.refine_by(&self.final_states);
        out
    }

    pub fn into_parts(self) -> ArenaParts {
        ArenaParts {
            states: self.states,
            init: self.init,
            eve_actions: self.eve_actions,
            adam_actions: self.adam_actions,
            transitions: self.transitions,
            eve_obs: self.eve_obs,
            adam_obs: self.adam_obs,
            final_states: self.final_states,
        }
    }
}

fn unique_index(names: &[String], what: &str) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        if index.insert(name.clone(), i).is_some() {
            return Err(Error::validation(format!("duplicate {what} {name:?}")));
        }
    }
    Ok(index)
}

/// A finite prefix of a play: a sequence of states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Play(pub Vec<usize>);

impl Play {
    /// Checks that every step has positive probability under some action pair.
    pub fn validate(&self, arena: &Arena) -> Result<()> {
        for (i, pair) in self.0.windows(2).enumerate() {
            if !arena.successors(pair[0]).contains(&pair[1]) {
                return Err(Error::validation(format!(
                    "step {i}: {} cannot move to {}",
                    arena.state_name(pair[0]),
                    arena.state_name(pair[1])
                )));
            }
        }
        Ok(())
    }
}
