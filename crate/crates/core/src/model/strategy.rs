use super::arena::{Arena, Player};
use super::distribution::Distribution;
use crate::error::{Error, Result};

/// Observation-based strategy implemented by a finite transducer.
///
/// `moves[m]` is the action distribution played in memory `m`;
/// `update[m][b]` is the memory reached after observing block `b` of the
/// owner's partition. The initial observation is not fed to `update`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteMemoryStrategy {
    pub owner: Player,
    pub memory: Vec<String>,
    pub init: usize,
    pub moves: Vec<Distribution>,
    pub update: Vec<Vec<usize>>,
}

impl FiniteMemoryStrategy {
    /// One memory state playing `dist` forever.
    pub fn constant(arena: &Arena, owner: Player, dist: Distribution) -> Self {
        FiniteMemoryStrategy {
            owner,
            memory: vec!["m0".to_string()],
            init: 0,
            moves: vec![dist],
            update: vec![vec![0; arena.obs(owner).len()]],
        }
    }

    /// Memoryless in the observation sense: memory tracks the last block.
    /// The first move is `by_block[arena.init()'s block]`.
    pub fn memoryless(arena: &Arena, owner: Player, by_block: Vec<Distribution>) -> Self {
        let blocks = arena.obs(owner).len();
        assert_eq!(by_block.len(), blocks);
        FiniteMemoryStrategy {
            owner,
            memory: (0..blocks).map(|b| format!("o{b}")).collect(),
            init: arena.obs(owner).block_of(arena.init()),
            moves: by_block,
            update: (0..blocks).map(|_| (0..blocks).collect()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.memory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memory.is_empty()
    }

    pub fn next(&self, memory: usize, block: usize) -> usize {
        self.update[memory][block]
    }
}

/// Checks that `strat` is a well-formed transducer for `owner` in `arena`.
pub fn validate_strategy(arena: &Arena, owner: Player, strat: &FiniteMemoryStrategy) -> Result<()> {
    if strat.owner != owner {
        return Err(Error::validation(format!(
            "strategy owner is {} but {} was expected",
            strat.owner, owner
        )));
    }
    let m = strat.memory.len();
    if m == 0 {
        return Err(Error::validation("strategy has no memory states"));
    }
    let mut names = std::collections::HashSet::new();
    for name in &strat.memory {
        if !names.insert(name) {
            return Err(Error::validation(format!("duplicate memory {name:?}")));
        }
    }
    if strat.init >= m {
        return Err(Error::validation("initial memory out of range"));
    }
    if strat.moves.len() != m {
        return Err(Error::validation("move is not total over memory"));
    }
    let actions = arena.num_actions(owner);
    for (mem, dist) in strat.moves.iter().enumerate() {
        if dist.is_empty() || dist.total() != num_traits::One::one() {
            return Err(Error::validation(format!("move[{}] is not a distribution", strat.memory[mem])));
        }
        if let Some(a) = dist.support().find(|&a| a >= actions) {
            return Err(Error::validation(format!(
                "move[{}] uses action index {a} outside {}'s alphabet",
                strat.memory[mem], owner
            )));
        }
    }
    let blocks = arena.obs(owner).len();
    if strat.update.len() != m {
        return Err(Error::validation("update is not total over memory"));
    }
    for (mem, row) in strat.update.iter().enumerate() {
        if row.len() != blocks {
            return Err(Error::validation(format!(
                "update[{}] covers {} of {blocks} observation blocks",
                strat.memory[mem],
                row.len()
            )));
        }
        if let Some(b) = row.iter().position(|&t| t >= m) {
            return Err(Error::validation(format!(
                "update[{}][{b}] targets unknown memory",
                strat.memory[mem]
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_game;

    fn g1() -> Arena {
        parse_game(include_str!("../../games/g1.json")).unwrap()
    }

    #[test]
    fn uniform_single_memory_is_valid() {
        let g = g1();
        let s = FiniteMemoryStrategy::constant(&g, Player::Eve, Distribution::uniform([0, 1]));
        validate_strategy(&g, Player::Eve, &s).unwrap();
    }

    #[test]
    fn missing_block_is_rejected() {
        let g = g1();
        let mut s = FiniteMemoryStrategy::constant(&g, Player::Eve, Distribution::point(0));
        s.update[0].pop();
        let err = validate_strategy(&g, Player::Eve, &s).unwrap_err();
        assert!(err.to_string().contains("observation blocks"), "{err}");
    }

    #[test]
    fn wrong_owner_or_alphabet_is_rejected() {
        let g = g1();
        let s = FiniteMemoryStrategy::constant(&g, Player::Adam, Distribution::point(1));
        assert!(validate_strategy(&g, Player::Eve, &s).is_err());
        let s = FiniteMemoryStrategy::constant(&g, Player::Eve, Distribution::point(2));
        assert!(validate_strategy(&g, Player::Eve, &s).is_err());
    }
}
