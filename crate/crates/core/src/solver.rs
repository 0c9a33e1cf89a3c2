//! Almost-sure reachability and Büchi for Eve.
//!
//! If Eve wins almost surely she wins with a strategy that plays, at each
//! knowledge, the uniform distribution over a fixed action set. The solver
//! enumerates those candidates in a canonical order and checks each one by
//! folding it into the knowledge arena: what remains is a game in which
//! Adam alone chooses, and Eve's candidate fails exactly when Adam wins
//! that game positively (safety for reachability, co-Büchi for Büchi).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use num_traits::One;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::halfplayer::{positive_cobuchi, positive_safety, OneHalfGame, PositiveWinReport};
use crate::knowledge::{build_knowledge_arena, lower_strategy, ActionSet, Knowledge, KnowledgeArena, KnowledgeOnlyStrategy, PostTable};
use crate::model::{Arena, Distribution, FiniteMemoryStrategy, Objective, Player, Rational};

pub const DEFAULT_MAX_CANDIDATES: u128 = 10_000_000;
pub const DEFAULT_MAX_BELIEFS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_candidates: u128,
    /// Caps belief graphs and the knowledge arena alike.
    pub max_beliefs: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_candidates: DEFAULT_MAX_CANDIDATES,
            max_beliefs: DEFAULT_MAX_BELIEFS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateStrategy {
    pub index: u128,
    pub strategy: KnowledgeOnlyStrategy,
}

fn radix(ka: &KnowledgeArena) -> u128 {
    (1u128 << ka.base().num_actions(Player::Eve)) - 1
}

/// `(2^k - 1)^n` for `k` Eve actions and `n` reachable knowledges,
/// saturating at `u128::MAX`.
pub fn candidate_count(ka: &KnowledgeArena) -> u128 {
    let n = ka.knowledges().len() as u32;
    radix(ka).checked_pow(n).unwrap_or(u128::MAX)
}

/// Digit of knowledge number `i` in candidate `index`; the first knowledge
/// is the most significant digit.
fn digit(ka: &KnowledgeArena, index: u128, i: usize) -> ActionSet {
    let base = radix(ka);
    let n = ka.knowledges().len();
    let shift = base.checked_pow((n - 1 - i) as u32).unwrap_or(u128::MAX);
    ActionSet(((index / shift) % base) as u64 + 1)
}

pub fn candidate_at(ka: &KnowledgeArena, index: u128) -> CandidateStrategy {
    let choice = ka
        .knowledges()
        .iter()
        .enumerate()
        .map(|(i, k)| (*k, digit(ka, index, i)))
        .collect();
    CandidateStrategy {
        index,
        strategy: KnowledgeOnlyStrategy { choice },
    }
}

/// Canonical index of a strategy defined on every knowledge of `ka`.
pub fn candidate_index(ka: &KnowledgeArena, strategy: &KnowledgeOnlyStrategy) -> u128 {
    let base = radix(ka);
    ka.knowledges().iter().fold(0u128, |acc, k| {
        let mask = strategy.get(*k).expect("strategy covers every knowledge").0 as u128;
        acc * base + (mask - 1)
    })
}

/// Every candidate in canonical order.
pub fn enumerate_candidates(
    ka: &KnowledgeArena,
    max_candidates: u128,
) -> Result<impl Iterator<Item = CandidateStrategy> + '_> {
    let total = candidate_count(ka);
    if total > max_candidates {
        return Err(Error::ResourceLimit {
            what: "candidates",
            limit: max_candidates,
            reached: total,
        });
    }
    Ok((0..total).map(move |i| candidate_at(ka, i)))
}

/// Choices of `lookup` on the knowledges reachable when Eve follows it,
/// sorted by knowledge. Two candidates with the same choices induce the
/// same plays.
fn reachable_with(
    ka: &KnowledgeArena,
    table: &PostTable,
    lookup: impl Fn(Knowledge) -> ActionSet,
) -> Vec<(Knowledge, ActionSet)> {
    let start = Knowledge::singleton(ka.base().init());
    let mut seen = BTreeMap::from([(start, lookup(start))]);
    let mut stack = vec![start];
    while let Some(k) = stack.pop() {
        let dom = seen[&k];
        for block in 0..table.blocks() {
            if let Some(next) = table.update(k, block, dom) {
                if let std::collections::btree_map::Entry::Vacant(slot) = seen.entry(next) {
                    slot.insert(lookup(next));
                    stack.push(next);
                }
            }
        }
    }
    seen.into_iter().collect()
}

pub fn reachable_choices(ka: &KnowledgeArena, strategy: &KnowledgeOnlyStrategy) -> Vec<(Knowledge, ActionSet)> {
    let table = PostTable::new(ka.base());
    reachable_with(ka, &table, |k| strategy.get(k).expect("candidate covers reachable knowledges"))
}

/// Knowledge arena with Eve's candidate folded in; Adam is the protagonist.
#[derive(Clone, Debug)]
pub struct AdversaryGame {
    pub game: OneHalfGame,
    /// Knowledge-arena state of each game state.
    pub ka_states: Vec<usize>,
}

/// Restricts `ka` to the states reachable under `strategy` and averages
/// Eve's uniform choice into the transitions.
pub fn fix_candidate(ka: &KnowledgeArena, strategy: &KnowledgeOnlyStrategy) -> AdversaryGame {
    let base = ka.base();
    let kar = ka.arena();
    let na = base.num_actions(Player::Adam);
    let mut ka_states = vec![0usize];
    let mut index = HashMap::from([(0usize, 0usize)]);
    let mut transitions: Vec<Vec<Distribution>> = Vec::new();
    let mut next = 0;
    while next < ka_states.len() {
        let q = ka_states[next];
        next += 1;
        let ks = ka.state(q);
        let dom = strategy.get(ks.know).expect("candidate covers reachable knowledges");
        let weight = Rational::new(1.into(), (dom.len() as i64).into());
        let mut row = Vec::with_capacity(na);
        for x in 0..na {
            let parts: Vec<&Distribution> = dom
                .actions()
                .map(|sigma| kar.transition(q, ka.eve_move_id(sigma, dom).expect("well-formed move"), x))
                .collect();
            let mixed = Distribution::mix(parts.into_iter().map(|d| (weight.clone(), d)));
            row.push(mixed.map(|t| {
                *index.entry(t).or_insert_with(|| {
                    ka_states.push(t);
                    ka_states.len() - 1
                })
            }));
        }
        transitions.push(row);
    }
    let adam_obs = base.obs(Player::Adam);
    let real: Vec<usize> = ka_states.iter().map(|&q| ka.state(q).real).collect();
    let game = OneHalfGame::new(
        ka_states.iter().map(|&q| kar.state_name(q).to_string()).collect(),
        base.actions(Player::Adam).to_vec(),
        Player::Adam,
        transitions,
        real.iter().map(|&s| adam_obs.block_of(s)).collect(),
        real.iter().map(|&s| base.is_final(s)).collect(),
        0,
    );
    AdversaryGame { game, ka_states }
}

#[derive(Clone, Debug)]
pub struct CandidateCheck {
    /// Adam cannot win positively, so the candidate wins almost surely.
    pub eve_wins: bool,
    pub adversary: AdversaryGame,
    pub adam: PositiveWinReport,
}

pub fn check_candidate(
    ka: &KnowledgeArena,
    strategy: &KnowledgeOnlyStrategy,
    objective: Objective,
    max_beliefs: usize,
) -> Result<CandidateCheck> {
    let adversary = fix_candidate(ka, strategy);
    let adam = match objective {
        Objective::Reachability => positive_safety(&adversary.game, max_beliefs)?,
        Objective::Buchi => positive_cobuchi(&adversary.game, max_beliefs)?,
        other => return Err(unsupported(other)),
    };
    Ok(CandidateCheck {
        eve_wins: !adam.init_winning(&adversary.game),
        adversary,
        adam,
    })
}

fn unsupported(objective: Objective) -> Error {
    Error::validation(format!(
        "objective {objective} is evaluation-only; decisions cover reach and buchi"
    ))
}

/// Re-expresses Adam's witness against the base arena whose Adam partition
/// is refined by final membership ([`Arena::with_adam_obs_refined_by_final`]).
/// Observations that never occur against this candidate leave memory
/// unchanged.
pub fn adam_witness_in_base(base: &Arena, adversary: &AdversaryGame, witness: &FiniteMemoryStrategy) -> FiniteMemoryStrategy {
    let refined = base.with_adam_obs_refined_by_final();
    let base_adam = base.obs(Player::Adam);
    let keys: HashMap<(usize, bool), usize> = adversary
        .game
        .refined_keys()
        .iter()
        .enumerate()
        .map(|(i, k)| (*k, i))
        .collect();
    let lookup: Vec<Option<usize>> = refined
        .obs(Player::Adam)
        .blocks()
        .iter()
        .map(|b| keys.get(&(base_adam.block_of(b[0]), base.is_final(b[0]))).copied())
        .collect();
    let update = witness
        .update
        .iter()
        .enumerate()
        .map(|(m, row)| lookup.iter().map(|o| o.map_or(m, |i| row[i])).collect())
        .collect();
    FiniteMemoryStrategy {
        update,
        ..witness.clone()
    }
}

/// Adam's positive witness against `strategy`, on the final-refined base
/// arena, or `None` when the candidate wins.
pub fn counter_strategy(
    ka: &KnowledgeArena,
    strategy: &KnowledgeOnlyStrategy,
    objective: Objective,
    max_beliefs: usize,
) -> Result<Option<FiniteMemoryStrategy>> {
    let check = check_candidate(ka, strategy, objective, max_beliefs)?;
    Ok(check
        .adam
        .witness
        .as_ref()
        .filter(|_| !check.eve_wins)
        .map(|w| adam_witness_in_base(ka.base(), &check.adversary, w)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub verdict: Verdict,
    pub objective: Objective,
    /// Lowered to the base arena; present iff the verdict is yes.
    pub witness: Option<FiniteMemoryStrategy>,
    pub witness_candidate: Option<CandidateStrategy>,
    /// Knowledges from which the witness candidate wins at every reachable
    /// knowledge state.
    pub winning_knowledges: Vec<Knowledge>,
    pub candidates_checked: u128,
    pub candidate_total: u128,
    pub elapsed: Duration,
}

/// A run stopped by a limit, with the progress made so far.
#[derive(Debug)]
pub struct SolveAbort {
    pub error: Error,
    pub candidates_checked: u128,
}

impl From<SolveAbort> for Error {
    fn from(abort: SolveAbort) -> Self {
        abort.error
    }
}

const BATCH: u128 = 512;

/// Decides almost-sure `objective` (reach or buchi) for Eve. Candidates are
/// checked in parallel batches; the least successful index wins, so the
/// result does not depend on scheduling.
pub fn solve(arena: &Arena, objective: Objective, limits: &Limits) -> std::result::Result<SolveReport, SolveAbort> {
    let start = Instant::now();
    let abort = |error, candidates_checked| SolveAbort { error, candidates_checked };
    if !matches!(objective, Objective::Reachability | Objective::Buchi) {
        return Err(abort(unsupported(objective), 0));
    }
    let ka = build_knowledge_arena(arena, limits.max_beliefs).map_err(|e| abort(e, 0))?;
    let total = candidate_count(&ka);
    if total > limits.max_candidates {
        return Err(abort(
            Error::ResourceLimit {
                what: "candidates",
                limit: limits.max_candidates,
                reached: total,
            },
            0,
        ));
    }
    let table = PostTable::new(arena);
    let kid: HashMap<Knowledge, usize> = ka.knowledges().iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let mut memo: HashMap<Vec<(Knowledge, ActionSet)>, bool> = HashMap::new();

    let mut lo = 0u128;
    while lo < total {
        let hi = (lo + BATCH).min(total);
        let keys: Vec<Vec<(Knowledge, ActionSet)>> = (lo..hi)
            .map(|i| reachable_with(&ka, &table, |k| digit(&ka, i, kid[&k])))
            .collect();
        let mut fresh: Vec<&Vec<(Knowledge, ActionSet)>> = Vec::new();
        let mut queued = std::collections::HashSet::new();
        for key in &keys {
            if !memo.contains_key(key) && queued.insert(key) {
                fresh.push(key);
            }
        }
        let results: Vec<Result<bool>> = fresh
            .par_iter()
            .map(|key| {
                let strategy = KnowledgeOnlyStrategy {
                    choice: key.iter().copied().collect(),
                };
                check_candidate(&ka, &strategy, objective, limits.max_beliefs).map(|c| c.eve_wins)
            })
            .collect();
        let mut errors = HashMap::new();
        for (key, result) in fresh.into_iter().zip(results) {
            match result {
                Ok(win) => {
                    memo.insert(key.clone(), win);
                }
                Err(e) => {
                    errors.insert(key, e);
                }
            }
        }
        for (offset, key) in keys.iter().enumerate() {
            let index = lo + offset as u128;
            if let Some(error) = errors.remove(key) {
                return Err(abort(error, index));
            }
            if memo[key] {
                return finish(arena, &ka, objective, limits, index, total, start).map_err(|e| abort(e, index + 1));
            }
        }
        lo = hi;
    }
    Ok(SolveReport {
        verdict: Verdict::No,
        objective,
        witness: None,
        witness_candidate: None,
        winning_knowledges: Vec::new(),
        candidates_checked: total,
        candidate_total: total,
        elapsed: start.elapsed(),
    })
}

fn finish(
    arena: &Arena,
    ka: &KnowledgeArena,
    objective: Objective,
    limits: &Limits,
    index: u128,
    total: u128,
    start: Instant,
) -> Result<SolveReport> {
    let candidate = candidate_at(ka, index);
    let check = check_candidate(ka, &candidate.strategy, objective, limits.max_beliefs)?;
    debug_assert!(check.eve_wins);
    let mut adam_wins: BTreeMap<Knowledge, bool> = BTreeMap::new();
    for (i, &q) in check.adversary.ka_states.iter().enumerate() {
        *adam_wins.entry(ka.state(q).know).or_insert(false) |= check.adam.winning_states[i];
    }
    let winning_knowledges = ka
        .knowledges()
        .iter()
        .copied()
        .filter(|k| adam_wins.get(k) == Some(&false))
        .collect();
    let witness = lower_strategy(arena, &candidate.strategy)?;
    Ok(SolveReport {
        verdict: Verdict::Yes,
        objective,
        witness: Some(witness),
        witness_candidate: Some(candidate),
        winning_knowledges,
        candidates_checked: index + 1,
        candidate_total: total,
        elapsed: start.elapsed(),
    })
}

pub fn decide_almost_sure_reach(arena: &Arena, limits: &Limits) -> Result<SolveReport> {
    Ok(solve(arena, Objective::Reachability, limits)?)
}

pub fn decide_almost_sure_buchi(arena: &Arena, limits: &Limits) -> Result<SolveReport> {
    Ok(solve(arena, Objective::Buchi, limits)?)
}

/// Plays, at each knowledge of `w`, uniformly over the actions whose every
/// successor knowledge stays in `w`; knowledges outside `w` get every
/// action.
pub fn random_safe_strategy(ka: &KnowledgeArena, w: &BTreeSet<Knowledge>) -> Result<CandidateStrategy> {
    let table = PostTable::new(ka.base());
    let ne = ka.base().num_actions(Player::Eve);
    let mut choice = BTreeMap::new();
    for &k in ka.knowledges() {
        if !w.contains(&k) {
            choice.insert(k, ActionSet::full(ne));
            continue;
        }
        let safe = (0..ne)
            .filter(|&a| {
                (0..table.blocks()).all(|b| {
                    table
                        .update(k, b, ActionSet::singleton(a))
                        .is_none_or(|next| w.contains(&next))
                })
            })
            .fold(0u64, |m, a| m | 1 << a);
        if safe == 0 {
            return Err(Error::NotClosed(format!(
                "no action keeps knowledge {} inside the set",
                k.display(ka.base())
            )));
        }
        choice.insert(k, ActionSet(safe));
    }
    let strategy = KnowledgeOnlyStrategy { choice };
    Ok(CandidateStrategy {
        index: candidate_index(ka, &strategy),
        strategy,
    })
}

/// Exact value of `eve` against every Adam witness is below one; used by
/// tests and the acceptance suite.
pub fn witness_beats(arena: &Arena, eve: &FiniteMemoryStrategy, adam: &FiniteMemoryStrategy, objective: Objective) -> bool {
    crate::eval::exact_probability(&arena.with_adam_obs_refined_by_final(), eve, adam, objective) < Rational::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::best_response_full_info;
    use crate::knowledge::DEFAULT_MAX_KNOWLEDGE_STATES;
    use crate::model::{parse_game, ratio};

    fn game(text: &str) -> Arena {
        parse_game(text).unwrap()
    }

    fn g1() -> Arena {
        game(include_str!("../games/g1.json"))
    }

    fn ka(arena: &Arena) -> KnowledgeArena {
        build_knowledge_arena(arena, DEFAULT_MAX_KNOWLEDGE_STATES).unwrap()
    }

    #[test]
    fn candidate_counts() {
        let g = g1();
        let k = ka(&g);
        assert_eq!(k.knowledges().len(), 2);
        assert_eq!(candidate_count(&k), 9);
        assert_eq!(enumerate_candidates(&k, 100).unwrap().count(), 9);
        assert!(matches!(enumerate_candidates(&k, 8), Err(Error::ResourceLimit { .. })));

        let g2 = game(include_str!("../games/g2.json"));
        let k2 = ka(&g2);
        assert_eq!(candidate_count(&k2), 1);
    }

    #[test]
    fn canonical_order_and_index_round_trip() {
        let g = g1();
        let k = ka(&g);
        let all: Vec<_> = enumerate_candidates(&k, 100).unwrap().collect();
        // knowledge {s} is the most significant digit
        let s = k.knowledges()[0];
        let firsts: Vec<u64> = all.iter().map(|c| c.strategy.get(s).unwrap().0).collect();
        assert_eq!(firsts, vec![1, 1, 1, 2, 2, 2, 3, 3, 3]);
        for c in &all {
            assert_eq!(candidate_index(&k, &c.strategy), c.index);
        }
    }

    #[test]
    fn g1_reach_yes_with_uniform_witness() {
        let g = g1();
        let report = decide_almost_sure_reach(&g, &Limits::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Yes);
        let c = report.witness_candidate.as_ref().unwrap();
        assert_eq!(c.index, 6);
        let s = Knowledge::singleton(0);
        assert_eq!(c.strategy.get(s), Some(ActionSet(0b11)));
        assert_eq!(report.candidates_checked, 7);
        let witness = report.witness.as_ref().unwrap();
        crate::model::validate_strategy(&g, Player::Eve, witness).unwrap();
        assert_eq!(
            best_response_full_info(&g, witness, Objective::Reachability).probability,
            ratio(1, 1)
        );
        assert_eq!(report.winning_knowledges.len(), 2);
    }

    #[test]
    fn g1_adversary_game_halves() {
        let g = g1();
        let k = ka(&g);
        let c = candidate_at(&k, 6);
        let ag = fix_candidate(&k, &c.strategy);
        for x in 0..2 {
            let d = ag.game.transition(0, x);
            assert_eq!(d.len(), 2);
            assert!(d.entries().iter().all(|(_, p)| *p == ratio(1, 2)));
        }
    }

    #[test]
    fn singleton_candidate_matches_knowledge_arena_slice() {
        let g = g1();
        let k = ka(&g);
        let c = candidate_at(&k, 0);
        let ag = fix_candidate(&k, &c.strategy);
        let mv = k.eve_move_id(0, ActionSet::singleton(0)).unwrap();
        for (i, &q) in ag.ka_states.iter().enumerate() {
            for x in 0..2 {
                let expect = k.arena().transition(q, mv, x).map(|t| ag.ka_states.iter().position(|&p| p == t).unwrap());
                assert_eq!(ag.game.transition(i, x), &expect);
            }
        }
    }

    #[test]
    fn g2_reach_no_with_counter_witness() {
        let g = game(include_str!("../games/g2.json"));
        let report = decide_almost_sure_reach(&g, &Limits::default()).unwrap();
        assert_eq!(report.verdict, Verdict::No);
        assert!(report.witness.is_none());
        assert_eq!(report.candidates_checked, 1);
        let k = ka(&g);
        let c = candidate_at(&k, 0);
        let adam = counter_strategy(&k, &c.strategy, Objective::Reachability, 1000).unwrap().unwrap();
        let eve = lower_strategy(&g, &c.strategy).unwrap();
        assert!(witness_beats(&g, &eve, &adam, Objective::Reachability));
        let report = decide_almost_sure_buchi(&g, &Limits::default()).unwrap();
        assert_eq!(report.verdict, Verdict::No);
    }

    #[test]
    fn g1_prime_buchi_yes() {
        let g = game(include_str!("../games/g1prime.json"));
        let report = decide_almost_sure_buchi(&g, &Limits::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Yes);
        let witness = report.witness.unwrap();
        assert_eq!(best_response_full_info(&g, &witness, Objective::Buchi).probability, ratio(1, 1));
    }

    #[test]
    fn initial_final_and_all_final() {
        let g = game(&include_str!("../games/g2.json").replace(r#""init": "s0""#, r#""init": "f""#));
        let report = decide_almost_sure_reach(&g, &Limits::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Yes);
        assert_eq!(report.candidates_checked, 1);

        let text = include_str!("../games/g1prime.json").replace(r#""final": ["f"]"#, r#""final": ["f", "s"]"#);
        let g = game(&text);
        assert!(g.is_final(0) && g.is_final(1));
        let report = decide_almost_sure_buchi(&g, &Limits::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Yes);
        assert_eq!(report.candidates_checked, 1);
    }

    #[test]
    fn safety_is_not_a_decision_endpoint() {
        let g = g1();
        assert!(matches!(solve(&g, Objective::Safety, &Limits::default()), Err(SolveAbort { error: Error::Validation(_), .. })));
    }

    #[test]
    fn candidate_cap_aborts_before_checking() {
        let g = g1();
        let limits = Limits {
            max_candidates: 1,
            ..Limits::default()
        };
        let abort = solve(&g, Objective::Reachability, &limits).unwrap_err();
        assert_eq!(abort.candidates_checked, 0);
        assert!(matches!(abort.error, Error::ResourceLimit { reached: 9, .. }));
    }

    #[test]
    fn random_safe_strategy_cases() {
        let g = g1();
        let k = ka(&g);
        let w: BTreeSet<Knowledge> = k.knowledges().iter().copied().collect();
        let c = random_safe_strategy(&k, &w).unwrap();
        assert_eq!(c.strategy.get(Knowledge::singleton(0)), Some(ActionSet(0b11)));
        assert_eq!(c.index, 8);

        // {s} alone is not closed: both actions can lead to {f}
        let w = BTreeSet::from([Knowledge::singleton(0)]);
        assert!(matches!(random_safe_strategy(&k, &w), Err(Error::NotClosed(_))));
    }
}
