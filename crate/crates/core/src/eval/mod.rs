//! Exact and statistical evaluation of fixed strategy pairs, plus the
//! oracles used to cross-check the solver.

mod chain;
mod linear;
mod mdp;
pub mod montecarlo;

use std::collections::HashSet;

use num_traits::One;
use serde_json::{json, Value};

pub use chain::{buchi_probability, build_chain, reach_probability, ProductChain};
pub use montecarlo::{monte_carlo, Simulation};

use crate::error::Result;
use crate::knowledge::{build_knowledge_arena, lower_strategy};
use crate::model::{format_rational, Arena, Distribution, FiniteMemoryStrategy, Objective, Player, Rational};
use crate::solver;
use mdp::{max_reach, maximal_end_components, sure_avoid, Mdp};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Exact,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub probability: Rational,
    pub method: Method,
    pub samples: Option<u64>,
    pub half_width: Option<f64>,
}

impl EvalResult {
    pub fn exact(probability: Rational) -> Self {
        EvalResult {
            probability,
            method: Method::Exact,
            samples: None,
            half_width: None,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "probability": format_rational(&self.probability),
            "method": self.method.as_str(),
        });
        if let (Some(n), Some(hw)) = (self.samples, self.half_width) {
            let obj = v.as_object_mut().unwrap();
            obj.insert("samples".into(), json!(n));
            obj.insert("half_width".into(), json!(hw));
        }
        v
    }
}

/// Exact probability that the play satisfies `objective`.
pub fn exact_probability(
    arena: &Arena,
    eve: &FiniteMemoryStrategy,
    adam: &FiniteMemoryStrategy,
    objective: Objective,
) -> Rational {
    let chain = build_chain(arena, eve, adam);
    match objective {
        Objective::Reachability => reach_probability(&chain),
        Objective::Safety => Rational::one() - reach_probability(&chain),
        Objective::Buchi => buchi_probability(&chain),
        Objective::CoBuchi => Rational::one() - buchi_probability(&chain),
    }
}

pub fn evaluate(
    arena: &Arena,
    eve: &FiniteMemoryStrategy,
    adam: &FiniteMemoryStrategy,
    objective: Objective,
) -> EvalResult {
    EvalResult::exact(exact_probability(arena, eve, adam, objective))
}

/// Decision process over `(state, eve memory)` in which Adam sees
/// everything. Node 0 is initial.
fn fold_eve(arena: &Arena, eve: &FiniteMemoryStrategy) -> (Mdp, Vec<bool>) {
    let eve_obs = arena.obs(Player::Eve);
    let na = arena.num_actions(Player::Adam);
    let start = (arena.init(), eve.init);
    let mut nodes = vec![start];
    let mut index = std::collections::HashMap::from([(start, 0usize)]);
    let mut succ = Vec::new();
    let mut next = 0;
    while next < nodes.len() {
        let (s, m) = nodes[next];
        next += 1;
        let mut row = Vec::with_capacity(na);
        for a in 0..na {
            let step = arena.step_distribution(s, &eve.moves[m], &Distribution::point(a));
            let mut out: Vec<(usize, Rational)> = step
                .entries()
                .iter()
                .map(|(t, p)| {
                    let node = (*t, eve.next(m, eve_obs.block_of(*t)));
                    let id = *index.entry(node).or_insert_with(|| {
                        nodes.push(node);
                        nodes.len() - 1
                    });
                    (id, p.clone())
                })
                .collect();
            out.sort_by_key(|(id, _)| *id);
            row.push(out);
        }
        succ.push(row);
    }
    let finals = nodes.iter().map(|&(s, _)| arena.is_final(s)).collect();
    (Mdp { succ }, finals)
}

/// Least objective probability a fully informed Adam can force against
/// `eve`. A value of 1 certifies `eve` against every Adam strategy,
/// observation-based or not.
pub fn best_response_full_info(arena: &Arena, eve: &FiniteMemoryStrategy, objective: Objective) -> EvalResult {
    let (mdp, finals) = fold_eve(arena, eve);
    let n = mdp.len();
    let adam_best = match objective {
        // Adam stays outside F forever: reach the sure-avoid region
        // without touching F.
        Objective::Reachability => {
            let safe = sure_avoid(&mdp, &finals);
            let mut blocked = mdp.clone();
            for u in (0..n).filter(|&u| finals[u]) {
                blocked.succ[u] = vec![vec![(u, Rational::one())]];
            }
            max_reach(&blocked, &safe)
        }
        Objective::Safety => max_reach(&mdp, &finals),
        Objective::Buchi => {
            let outside: Vec<bool> = finals.iter().map(|&f| !f).collect();
            max_reach(&mdp, &union(n, maximal_end_components(&mdp, &outside)))
        }
        Objective::CoBuchi => {
            let accepting = maximal_end_components(&mdp, &vec![true; n])
                .into_iter()
                .filter(|c| c.iter().any(|&u| finals[u]))
                .collect();
            max_reach(&mdp, &union(n, accepting))
        }
    };
    EvalResult::exact(Rational::one() - &adam_best[0])
}

fn union(n: usize, sets: Vec<Vec<usize>>) -> Vec<bool> {
    let mut out = vec![false; n];
    for u in sets.into_iter().flatten() {
        out[u] = true;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleVerdict {
    Yes,
    No,
    Unknown,
}

impl OracleVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleVerdict::Yes => "yes",
            OracleVerdict::No => "no",
            OracleVerdict::Unknown => "unknown",
        }
    }
}

/// Every uniform Adam strategy with memory `1..=bound`, initial memory 0,
/// updates over the arena's Adam blocks.
pub fn adam_strategies(arena: &Arena, bound: usize) -> impl Iterator<Item = FiniteMemoryStrategy> + '_ {
    let na = arena.num_actions(Player::Adam);
    let blocks = arena.obs(Player::Adam).len();
    let subsets = (1u64 << na) - 1;
    (1..=bound).flat_map(move |m| {
        let move_digits = vec![subsets; m];
        let update_digits = vec![m as u64; m * blocks];
        odometer([move_digits, update_digits].concat()).map(move |digits| {
            let (mv, up) = digits.split_at(m);
            FiniteMemoryStrategy {
                owner: Player::Adam,
                memory: (0..m).map(|i| format!("m{i}")).collect(),
                init: 0,
                moves: mv.iter().map(|&d| Distribution::uniform_mask(d + 1)).collect(),
                update: up.chunks(blocks.max(1)).map(|r| r.iter().map(|&x| x as usize).collect()).collect(),
            }
        })
    })
}

fn odometer(radix: Vec<u64>) -> impl Iterator<Item = Vec<u64>> {
    let mut cur = Some(vec![0u64; radix.len()]);
    std::iter::from_fn(move || {
        let out = cur.clone()?;
        let mut next = out.clone();
        let mut i = radix.len();
        loop {
            if i == 0 {
                cur = None;
                break;
            }
            i -= 1;
            next[i] += 1;
            if next[i] < radix[i] {
                cur = Some(next);
                break;
            }
            next[i] = 0;
        }
        Some(out)
    })
}

/// Exhaustive oracle over the solver's candidate space. Yes when some
/// candidate survives a fully informed Adam; no when every candidate is
/// beaten by some small uniform Adam strategy; unknown otherwise.
pub fn brute_force_verdict(arena: &Arena, objective: Objective, bound: usize) -> Result<OracleVerdict> {
    let ka = build_knowledge_arena(arena, crate::knowledge::DEFAULT_MAX_KNOWLEDGE_STATES)?;
    let count = solver::candidate_count(&ka);
    let adam: Vec<FiniteMemoryStrategy> = adam_strategies(arena, bound).collect();
    let mut seen = HashSet::new();
    let mut refuted_all = true;
    for index in 0..count {
        let c = solver::candidate_at(&ka, index);
        if !seen.insert(solver::reachable_choices(&ka, &c.strategy)) {
            continue;
        }
        let eve = lower_strategy(arena, &c.strategy)?;
        if best_response_full_info(arena, &eve, objective).probability.is_one() {
            return Ok(OracleVerdict::Yes);
        }
        let refuted = adam
            .iter()
            .any(|a| exact_probability(arena, &eve, a, objective) < Rational::one());
        refuted_all &= refuted;
    }
    Ok(if refuted_all {
        OracleVerdict::No
    } else {
        OracleVerdict::Unknown
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_game, ratio};

    fn game(name: &str) -> Arena {
        let text = match name {
            "g1" => include_str!("../../games/g1.json"),
            "g1prime" => include_str!("../../games/g1prime.json"),
            "g2" => include_str!("../../games/g2.json"),
            "g4" => include_str!("../../games/g4.json"),
            _ => unreachable!(),
        };
        parse_game(text).unwrap()
    }

    #[test]
    fn g1_uniform_survives_full_information() {
        let g = game("g1");
        let eve = FiniteMemoryStrategy::constant(&g, Player::Eve, Distribution::uniform([0, 1]));
        assert_eq!(best_response_full_info(&g, &eve, Objective::Reachability).probability, ratio(1, 1));
        let g = game("g1prime");
        let eve = FiniteMemoryStrategy::constant(&g, Player::Eve, Distribution::uniform([0, 1]));
        assert_eq!(best_response_full_info(&g, &eve, Objective::Buchi).probability, ratio(1, 1));
        assert_eq!(best_response_full_info(&g, &eve, Objective::CoBuchi).probability, ratio(0, 1));
    }

    #[test]
    fn g1_pure_strategy_is_beaten() {
        let g = game("g1");
        let eve = FiniteMemoryStrategy::constant(&g, Player::Eve, Distribution::point(0));
        assert_eq!(best_response_full_info(&g, &eve, Objective::Reachability).probability, ratio(0, 1));
        assert_eq!(best_response_full_info(&g, &eve, Objective::Safety).probability, ratio(0, 1));
    }

    #[test]
    fn g2_adam_dodges() {
        let g = game("g2");
        let eve = FiniteMemoryStrategy::constant(&g, Player::Eve, Distribution::point(0));
        assert_eq!(best_response_full_info(&g, &eve, Objective::Reachability).probability, ratio(0, 1));
        assert_eq!(brute_force_verdict(&g, Objective::Reachability, 2).unwrap(), OracleVerdict::No);
    }

    #[test]
    fn g1_oracle_says_yes() {
        assert_eq!(brute_force_verdict(&game("g1"), Objective::Reachability, 1).unwrap(), OracleVerdict::Yes);
        assert_eq!(brute_force_verdict(&game("g1prime"), Objective::Buchi, 1).unwrap(), OracleVerdict::Yes);
    }

    #[test]
    fn initial_final_is_one() {
        let text = include_str!("../../games/g2.json").replace(r#""init": "s0""#, r#""init": "f""#);
        let g = parse_game(&text).unwrap();
        assert_eq!(g.state_name(g.init()), "f");
        let eve = FiniteMemoryStrategy::constant(&g, Player::Eve, Distribution::point(0));
        assert_eq!(best_response_full_info(&g, &eve, Objective::Reachability).probability, ratio(1, 1));
    }

    #[test]
    fn g4_cobuchi_is_one_buchi_zero() {
        let g = game("g4");
        let eve = FiniteMemoryStrategy::constant(&g, Player::Eve, Distribution::point(0));
        assert_eq!(best_response_full_info(&g, &eve, Objective::CoBuchi).probability, ratio(1, 1));
        assert_eq!(best_response_full_info(&g, &eve, Objective::Buchi).probability, ratio(0, 1));
    }

    #[test]
    fn adam_enumeration_sizes() {
        let g = game("g1");
        // 2 blocks: m=1 gives 3, m=2 gives 9 * 2^4
        assert_eq!(adam_strategies(&g, 1).count(), 3);
        assert_eq!(adam_strategies(&g, 2).count(), 3 + 144);
    }

    #[test]
    fn full_information_dominates_random_adam() {
        use rand::seq::IndexedRandom;
        use rand::SeedableRng;
        let g = game("g1");
        let eve = FiniteMemoryStrategy::constant(&g, Player::Eve, Distribution::uniform([0, 1]));
        assert!(best_response_full_info(&g, &eve, Objective::Reachability).probability.is_one());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let all: Vec<_> = adam_strategies(&g, 2).collect();
        for _ in 0..100 {
            let adam = all.choose(&mut rng).unwrap();
            assert!(exact_probability(&g, &eve, adam, Objective::Reachability).is_one());
        }
    }
}
