//! Positive winning in one-and-a-half player games with imperfect
//! information: a single protagonist against chance.
//!
//! Both procedures work on the belief graph: nodes are sets of states the
//! protagonist considers possible, split by final membership so that
//! "visits a final state" is a property of the node, and edges are labelled
//! by `(action, refined observation)`. A state is positively winning when a
//! positive-probability path leads to a state whose singleton belief is
//! surely winning; for safety that path must avoid final states.

use std::collections::{BTreeMap, HashMap, VecDeque};

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::model::{Arena, ArenaParts, Distribution, FiniteMemoryStrategy, Partition, Player};

pub const DEFAULT_MAX_BELIEFS: usize = 1_000_000;

/// A game where the antagonist's moves are folded into the transitions.
#[derive(Clone, Debug)]
pub struct OneHalfGame {
    names: Vec<String>,
    actions: Vec<String>,
    protagonist: Player,
    transitions: Vec<Vec<Distribution>>,
    observation: Vec<usize>,
    final_states: Vec<bool>,
    init: usize,
    refined: Vec<usize>,
    refined_keys: Vec<(usize, bool)>,
    succ: Vec<Vec<Vec<usize>>>,
}

impl OneHalfGame {
    /// `transitions[state][action]`; `observation[state]` is the
    /// protagonist's observation class (any labelling).
    pub fn new(
        names: Vec<String>,
        actions: Vec<String>,
        protagonist: Player,
        transitions: Vec<Vec<Distribution>>,
        observation: Vec<usize>,
        final_states: Vec<bool>,
        init: usize,
    ) -> Self {
        let n = names.len();
        assert!(transitions.len() == n && observation.len() == n && final_states.len() == n);
        assert!(init < n && !actions.is_empty());
        let mut keys: Vec<(usize, bool)> = (0..n).map(|s| (observation[s], final_states[s])).collect();
        keys.sort_unstable();
        keys.dedup();
        let key_index: HashMap<(usize, bool), usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let refined = (0..n).map(|s| key_index[&(observation[s], final_states[s])]).collect();
        let succ = transitions
            .iter()
            .map(|row| row.iter().map(|d| d.support().collect()).collect())
            .collect();
        OneHalfGame {
            names,
            actions,
            protagonist,
            transitions,
            observation,
            final_states,
            init,
            refined,
            refined_keys: keys,
            succ,
        }
    }

    /// Reads a 1½-player game off an arena in which the opponent of
    /// `protagonist` has a single action.
    pub fn from_arena(arena: &Arena, protagonist: Player) -> Result<Self> {
        if arena.num_actions(protagonist.opponent()) != 1 {
            return Err(Error::validation(format!(
                "{} must have exactly one action",
                protagonist.opponent()
            )));
        }
        let transitions = (0..arena.num_states())
            .map(|s| {
                (0..arena.num_actions(protagonist))
                    .map(|a| match protagonist {
                        Player::Eve => arena.transition(s, a, 0).clone(),
                        Player::Adam => arena.transition(s, 0, a).clone(),
                    })
                    .collect()
            })
            .collect();
        let obs = arena.obs(protagonist);
        Ok(OneHalfGame::new(
            arena.state_names().to_vec(),
            arena.actions(protagonist).to_vec(),
            protagonist,
            transitions,
            (0..arena.num_states()).map(|s| obs.block_of(s)).collect(),
            arena.final_flags().to_vec(),
            arena.init(),
        ))
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn protagonist(&self) -> Player {
        self.protagonist
    }

    pub fn init(&self) -> usize {
        self.init
    }

    pub fn is_final(&self, s: usize) -> bool {
        self.final_states[s]
    }

    pub fn observation(&self, s: usize) -> usize {
        self.observation[s]
    }

    pub fn transition(&self, s: usize, a: usize) -> &Distribution {
        &self.transitions[s][a]
    }

    pub fn successors(&self, s: usize, a: usize) -> &[usize] {
        &self.succ[s][a]
    }

    /// Dense index of `(observation, is_final)` for state `s`.
    pub fn refined_obs(&self, s: usize) -> usize {
        self.refined[s]
    }

    /// `(observation, is_final)` for each refined observation index.
    pub fn refined_keys(&self) -> &[(usize, bool)] {
        &self.refined_keys
    }

    /// Arena form: the protagonist observes refined classes, the antagonist
    /// has one action named `"_"` and sees nothing.
    pub fn to_arena(&self) -> Arena {
        let n = self.num_states();
        let mut blocks = vec![Vec::new(); self.refined_keys.len()];
        for s in 0..n {
            blocks[self.refined[s]].push(s);
        }
        let refined = Partition::new(n, blocks).expect("refined classes partition the states");
        let blind = Partition::new(n, vec![(0..n).collect()]).expect("single block");
        let idle = vec!["_".to_string()];
        let mut transitions = Vec::with_capacity(n * self.num_actions());
        for row in &self.transitions {
            transitions.extend(row.iter().cloned());
        }
        let (eve_actions, adam_actions, eve_obs, adam_obs) = match self.protagonist {
            Player::Eve => (self.actions.clone(), idle, refined, blind),
            Player::Adam => (idle, self.actions.clone(), blind, refined),
        };
        Arena::new(ArenaParts {
            states: self.names.clone(),
            init: self.init,
            eve_actions,
            adam_actions,
            transitions,
            eve_obs,
            adam_obs,
            final_states: self.final_states.clone(),
        })
        .expect("one-and-a-half player game is a valid arena")
    }
}

/// Belief graph closed from every singleton belief.
#[derive(Clone, Debug)]
pub struct BeliefGraph {
    beliefs: Vec<FixedBitSet>,
    index: HashMap<FixedBitSet, usize>,
    /// `edges[node][action]`: `(refined observation, successor node)`,
    /// sorted by observation. At most one successor per observation.
    edges: Vec<Vec<Vec<(usize, usize)>>>,
    is_final: Vec<bool>,
}

impl BeliefGraph {
    pub fn build(g: &OneHalfGame, max_beliefs: usize) -> Result<Self> {
        let n = g.num_states();
        let mut graph = BeliefGraph {
            beliefs: Vec::new(),
            index: HashMap::new(),
            edges: Vec::new(),
            is_final: Vec::new(),
        };
        for s in 0..n {
            let mut b = FixedBitSet::with_capacity(n);
            b.insert(s);
            graph.intern(b, g, max_beliefs)?;
        }
        let mut next = 0;
        while next < graph.beliefs.len() {
            let belief = graph.beliefs[next].clone();
            let mut row = Vec::with_capacity(g.num_actions());
            for a in 0..g.num_actions() {
                let mut split: BTreeMap<usize, FixedBitSet> = BTreeMap::new();
                for q in belief.ones() {
                    for &t in g.successors(q, a) {
                        split
                            .entry(g.refined_obs(t))
                            .or_insert_with(|| FixedBitSet::with_capacity(n))
                            .insert(t);
                    }
                }
                let mut out = Vec::with_capacity(split.len());
                for (obs, b) in split {
                    out.push((obs, graph.intern(b, g, max_beliefs)?));
                }
                row.push(out);
            }
            graph.edges.push(row);
            next += 1;
        }
        Ok(graph)
    }

    fn intern(&mut self, b: FixedBitSet, g: &OneHalfGame, cap: usize) -> Result<usize> {
        if let Some(&id) = self.index.get(&b) {
            return Ok(id);
        }
        if self.beliefs.len() >= cap {
            return Err(Error::ResourceLimit {
                what: "beliefs",
                limit: cap as u128,
                reached: self.beliefs.len() as u128 + 1,
            });
        }
        let first = b.ones().next().expect("beliefs are non-empty");
        self.is_final.push(g.is_final(first));
        self.index.insert(b.clone(), self.beliefs.len());
        self.beliefs.push(b);
        Ok(self.beliefs.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn belief(&self, node: usize) -> &FixedBitSet {
        &self.beliefs[node]
    }

    pub fn node_of(&self, belief: &FixedBitSet) -> Option<usize> {
        self.index.get(belief).copied()
    }

    /// Node of the singleton `{s}`; singletons are always materialized.
    pub fn singleton(&self, s: usize) -> usize {
        s
    }

    pub fn edges(&self, node: usize, action: usize) -> &[(usize, usize)] {
        &self.edges[node][action]
    }

    pub fn is_final(&self, node: usize) -> bool {
        self.is_final[node]
    }

    pub fn num_actions(&self) -> usize {
        self.edges.first().map_or(0, Vec::len)
    }
}

/// Surely winning belief nodes with a memoryless belief strategy.
#[derive(Clone, Debug)]
pub struct SureWinning {
    pub winning: Vec<bool>,
    pub action: Vec<Option<usize>>,
    /// Rounds of the outer fixpoint that changed the candidate set.
    pub rounds: usize,
}

fn all_in(edges: &[(usize, usize)], set: &[bool]) -> bool {
    edges.iter().all(|&(_, t)| set[t])
}

/// Greatest fixpoint: non-final beliefs with an action whose successors all
/// stay in the set.
pub fn solve_sure_safety(graph: &BeliefGraph) -> SureWinning {
    let n = graph.len();
    let mut win: Vec<bool> = (0..n).map(|b| !graph.is_final(b)).collect();
    let mut rounds = 0;
    loop {
        let mut changed = false;
        for b in 0..n {
            if win[b] && !(0..graph.num_actions()).any(|a| all_in(graph.edges(b, a), &win)) {
                win[b] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        rounds += 1;
    }
    let action = (0..n)
        .map(|b| {
            if win[b] {
                (0..graph.num_actions()).find(|&a| all_in(graph.edges(b, a), &win))
            } else {
                None
            }
        })
        .collect();
    SureWinning { winning: win, action, rounds }
}

/// Co-Büchi: `μX. νY. (¬F ∧ CPre(Y)) ∨ CPre(X)`. The strategy attracts to
/// the previous layer when it can and otherwise plays a move that stays in
/// the current layer through non-final beliefs.
pub fn solve_sure_cobuchi(graph: &BeliefGraph) -> SureWinning {
    let n = graph.len();
    let actions = graph.num_actions();
    let cpre = |b: usize, set: &[bool]| (0..actions).any(|a| all_in(graph.edges(b, a), set));
    let mut layers: Vec<Vec<bool>> = vec![vec![false; n]];
    loop {
        let prev = layers.last().unwrap().clone();
        let mut y = vec![true; n];
        loop {
            let next: Vec<bool> = (0..n)
                .map(|b| y[b] && ((!graph.is_final(b) && cpre(b, &y)) || cpre(b, &prev)))
                .collect();
            if next == y {
                break;
            }
            y = next;
        }
        if y == prev {
            break;
        }
        layers.push(y);
    }
    let win = layers.last().unwrap().clone();
    let mut action = vec![None; n];
    for b in (0..n).filter(|&b| win[b]) {
        let rank = (1..layers.len()).find(|&i| layers[i][b]).expect("winning node has a rank");
        let lower = &layers[rank - 1];
        let current = &layers[rank];
        action[b] = (0..actions)
            .find(|&a| all_in(graph.edges(b, a), lower))
            .or_else(|| {
                debug_assert!(!graph.is_final(b));
                (0..actions).find(|&a| all_in(graph.edges(b, a), current))
            });
        debug_assert!(action[b].is_some());
    }
    SureWinning {
        winning: win,
        action,
        rounds: layers.len() - 1,
    }
}

/// Outcome of a positive-winning analysis.
#[derive(Clone, Debug)]
pub struct PositiveWinReport {
    pub winning_states: Vec<bool>,
    pub sure_beliefs: Vec<FixedBitSet>,
    /// Present iff the initial state is winning. Its update function reads
    /// the refined observation indices of the game ([`OneHalfGame::refined_obs`]).
    pub witness: Option<FiniteMemoryStrategy>,
    pub iterations: usize,
    pub beliefs: usize,
    /// Witness path (states, actions) leading to a surely winning singleton.
    pub witness_path: Option<(Vec<usize>, Vec<usize>)>,
}

impl PositiveWinReport {
    pub fn init_winning(&self, g: &OneHalfGame) -> bool {
        self.winning_states[g.init()]
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PathKind {
    AvoidFinal,
    Any,
}

pub fn sure_safety_beliefs(g: &OneHalfGame, max_beliefs: usize) -> Result<Vec<FixedBitSet>> {
    let graph = BeliefGraph::build(g, max_beliefs)?;
    let sure = solve_sure_safety(&graph);
    Ok(collect_winning(&graph, &sure))
}

pub fn sure_cobuchi_beliefs(g: &OneHalfGame, max_beliefs: usize) -> Result<Vec<FixedBitSet>> {
    let graph = BeliefGraph::build(g, max_beliefs)?;
    let sure = solve_sure_cobuchi(&graph);
    Ok(collect_winning(&graph, &sure))
}

fn collect_winning(graph: &BeliefGraph, sure: &SureWinning) -> Vec<FixedBitSet> {
    (0..graph.len())
        .filter(|&b| sure.winning[b])
        .map(|b| graph.belief(b).clone())
        .collect()
}

/// Positive safety: avoid final states forever with positive probability.
pub fn positive_safety(g: &OneHalfGame, max_beliefs: usize) -> Result<PositiveWinReport> {
    let graph = BeliefGraph::build(g, max_beliefs)?;
    let sure = solve_sure_safety(&graph);
    Ok(positive(g, &graph, &sure, PathKind::AvoidFinal))
}

/// Positive co-Büchi: visit final states finitely often with positive
/// probability. The connecting path may cross final states.
pub fn positive_cobuchi(g: &OneHalfGame, max_beliefs: usize) -> Result<PositiveWinReport> {
    let graph = BeliefGraph::build(g, max_beliefs)?;
    let sure = solve_sure_cobuchi(&graph);
    Ok(positive(g, &graph, &sure, PathKind::Any))
}

fn positive(g: &OneHalfGame, graph: &BeliefGraph, sure: &SureWinning, kind: PathKind) -> PositiveWinReport {
    let n = g.num_states();
    let allowed = |s: usize| kind == PathKind::Any || !g.is_final(s);
    let target = |s: usize| sure.winning[graph.singleton(s)];

    // backward closure over allowed edges
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for a in 0..g.num_actions() {
            for &t in g.successors(s, a) {
                preds[t].push(s);
            }
        }
    }
    let mut winning = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| target(s)).collect();
    for &s in &queue {
        winning[s] = true;
    }
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if !winning[s] && allowed(s) {
                winning[s] = true;
                queue.push_back(s);
            }
        }
    }

    let path = if winning[g.init()] {
        shortest_path(g, g.init(), &allowed, &target)
    } else {
        None
    };
    debug_assert_eq!(path.is_some(), winning[g.init()]);
    let witness = path.as_ref().map(|(states, actions)| build_witness(g, graph, sure, states, actions));

    PositiveWinReport {
        winning_states: winning,
        sure_beliefs: collect_winning(graph, sure),
        witness,
        iterations: sure.rounds,
        beliefs: graph.len(),
        witness_path: path,
    }
}

/// Breadth-first search in canonical (action, state) order; the first
/// target dequeued ends a shortest path.
fn shortest_path(
    g: &OneHalfGame,
    from: usize,
    allowed: &dyn Fn(usize) -> bool,
    target: &dyn Fn(usize) -> bool,
) -> Option<(Vec<usize>, Vec<usize>)> {
    if !allowed(from) {
        return None;
    }
    let n = g.num_states();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(s) = queue.pop_front() {
        if target(s) {
            let mut states = vec![s];
            let mut actions = Vec::new();
            let mut cur = s;
            while let Some((prev, a)) = parent[cur] {
                states.push(prev);
                actions.push(a);
                cur = prev;
            }
            states.reverse();
            actions.reverse();
            return Some((states, actions));
        }
        for a in 0..g.num_actions() {
            for &t in g.successors(s, a) {
                if !seen[t] && allowed(t) {
                    seen[t] = true;
                    parent[t] = Some((s, a));
                    queue.push_back(t);
                }
            }
        }
    }
    None
}

/// Plays the path actions blindly, then follows the belief strategy from
/// the singleton at the end of the path.
fn build_witness(
    g: &OneHalfGame,
    graph: &BeliefGraph,
    sure: &SureWinning,
    states: &[usize],
    actions: &[usize],
) -> FiniteMemoryStrategy {
    let obs_count = g.refined_keys().len();
    let path_len = actions.len();
    let root = graph.singleton(*states.last().unwrap());

    let mut belief_mem: HashMap<usize, usize> = HashMap::new();
    let mut order = vec![root];
    belief_mem.insert(root, path_len);
    let mut i = 0;
    while i < order.len() {
        let b = order[i];
        i += 1;
        let a = sure.action[b].expect("surely winning belief has an action");
        for &(_, t) in graph.edges(b, a) {
            if let std::collections::hash_map::Entry::Vacant(slot) = belief_mem.entry(t) {
                slot.insert(path_len + order.len());
                order.push(t);
            }
        }
    }

    let mut memory = Vec::with_capacity(path_len + order.len());
    let mut moves = Vec::with_capacity(memory.capacity());
    let mut update = Vec::with_capacity(memory.capacity());
    for (i, &a) in actions.iter().enumerate() {
        memory.push(format!("path{i}"));
        moves.push(Distribution::point(a));
        let next = if i + 1 < path_len { i + 1 } else { path_len };
        update.push(vec![next; obs_count]);
    }
    for &b in &order {
        let names: Vec<&str> = graph.belief(b).ones().map(|s| g.names()[s].as_str()).collect();
        memory.push(format!("belief{{{}}}", names.join(",")));
        let a = sure.action[b].unwrap();
        moves.push(Distribution::point(a));
        let here = belief_mem[&b];
        let mut row = vec![here; obs_count];
        for &(obs, t) in graph.edges(b, a) {
            row[obs] = belief_mem[&t];
        }
        update.push(row);
    }
    FiniteMemoryStrategy {
        owner: g.protagonist(),
        memory,
        init: 0,
        moves,
        update,
    }
}
