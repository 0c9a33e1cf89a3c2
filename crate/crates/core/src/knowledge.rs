//! Eve's knowledge: the set of states she considers possible given her
//! observations and the supports of the distributions she has played.
//!
//! [`build_knowledge_arena`] materializes the enriched arena over triples
//! `(real state, knowledge, last support)` reachable from
//! `(init, {init}, ∅)`. Strategies translate in both directions:
//! [`lift_strategy`] turns a base strategy into one emitting well-formed
//! distributions on the enriched arena, and [`lower_strategy`] implements a
//! knowledge-only strategy by tracking knowledge in memory.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{Arena, ArenaParts, Distribution, FiniteMemoryStrategy, Partition, Player};

/// Default cap on materialized knowledge states.
pub const DEFAULT_MAX_KNOWLEDGE_STATES: usize = 1_000_000;

/// Non-empty set of base states, as a bitmask over state indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Knowledge(pub u64);

impl Knowledge {
    pub fn singleton(s: usize) -> Self {
        Knowledge(1 << s)
    }

    pub fn contains(self, s: usize) -> bool {
        self.0 >> s & 1 == 1
    }

    pub fn states(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.0 >> i & 1 == 1)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: Knowledge) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn display(self, arena: &Arena) -> String {
        let names: Vec<&str> = self.states().map(|s| arena.state_name(s)).collect();
        format!("{{{}}}", names.join(","))
    }
}

/// Set of Eve actions as a bitmask. The empty set only appears as the
/// sentinel support of the initial knowledge state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionSet(pub u64);

impl ActionSet {
    pub const EMPTY: ActionSet = ActionSet(0);

    pub fn singleton(a: usize) -> Self {
        ActionSet(1 << a)
    }

    pub fn full(count: usize) -> Self {
        ActionSet(if count >= 64 { u64::MAX } else { (1u64 << count) - 1 })
    }

    pub fn contains(self, a: usize) -> bool {
        self.0 >> a & 1 == 1
    }

    pub fn actions(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.0 >> i & 1 == 1)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn uniform(self) -> Distribution {
        Distribution::uniform_mask(self.0)
    }

    pub fn display(self, arena: &Arena) -> String {
        let names: Vec<&str> = self
            .actions()
            .map(|a| arena.actions(Player::Eve)[a].as_str())
            .collect();
        format!("{{{}}}", names.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KnowledgeState {
    pub real: usize,
    pub know: Knowledge,
    pub dom: ActionSet,
}

impl KnowledgeState {
    pub fn name(&self, arena: &Arena) -> String {
        format!(
            "{}|{}|{}",
            arena.state_name(self.real),
            self.know.display(arena),
            self.dom.display(arena)
        )
    }
}

/// `update(K, o, D) = {t ∈ o | ∃ r ∈ K, σ ∈ D, σA : δ(r,σ,σA)(t) > 0}`.
pub fn knowledge_update(arena: &Arena, k: Knowledge, obs: usize, dom: ActionSet) -> Result<Knowledge> {
    assert!(!dom.is_empty(), "knowledge update needs a non-empty domain");
    let block = arena.obs(Player::Eve).block(obs);
    let mut out = 0u64;
    for r in k.states() {
        for sigma in dom.actions() {
            for x in 0..arena.num_actions(Player::Adam) {
                for t in arena.transition(r, sigma, x).support() {
                    if block.contains(&t) {
                        out |= 1 << t;
                    }
                }
            }
        }
    }
    if out == 0 {
        Err(Error::InconsistentObservation { block: obs })
    } else {
        Ok(Knowledge(out))
    }
}

/// Precomputed one-step images used by the knowledge closure.
#[derive(Clone, Debug)]
pub(crate) struct PostTable {
    eve_actions: usize,
    post: Vec<u64>,
    block_mask: Vec<u64>,
}

impl PostTable {
    pub(crate) fn new(arena: &Arena) -> Self {
        let ne = arena.num_actions(Player::Eve);
        let mut post = vec![0u64; arena.num_states() * ne];
        for s in 0..arena.num_states() {
            for e in 0..ne {
                for x in 0..arena.num_actions(Player::Adam) {
                    for t in arena.transition(s, e, x).support() {
                        post[s * ne + e] |= 1 << t;
                    }
                }
            }
        }
        let block_mask = arena
            .obs(Player::Eve)
            .blocks()
            .iter()
            .map(|b| b.iter().fold(0u64, |m, &s| m | 1 << s))
            .collect();
        PostTable {
            eve_actions: ne,
            post,
            block_mask,
        }
    }

    pub(crate) fn image(&self, k: Knowledge, dom: ActionSet) -> u64 {
        let mut out = 0;
        for r in k.states() {
            for e in dom.actions() {
                out |= self.post[r * self.eve_actions + e];
            }
        }
        out
    }

    pub(crate) fn update(&self, k: Knowledge, block: usize, dom: ActionSet) -> Option<Knowledge> {
        let out = self.image(k, dom) & self.block_mask[block];
        (out != 0).then_some(Knowledge(out))
    }

    pub(crate) fn blocks(&self) -> usize {
        self.block_mask.len()
    }
}

/// Enriched arena over reachable knowledge states, with back-maps to the
/// base arena.
#[derive(Clone, Debug)]
pub struct KnowledgeArena {
    base: Arena,
    arena: Arena,
    states: Vec<KnowledgeState>,
    state_index: HashMap<KnowledgeState, usize>,
    knowledges: Vec<Knowledge>,
    knowledge_index: HashMap<Knowledge, usize>,
    eve_moves: Vec<(usize, ActionSet)>,
    eve_move_index: HashMap<(usize, ActionSet), usize>,
    adam_block_base: Vec<usize>,
    edges: usize,
}

/// Reachability census of a knowledge arena.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Census {
    pub knowledge_states: usize,
    pub knowledges: usize,
    pub edges: usize,
}

impl fmt::Display for Census {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "census: knowledge_states={} knowledges={} edges={}",
            self.knowledge_states, self.knowledges, self.edges
        )
    }
}

impl KnowledgeArena {
    pub fn base(&self) -> &Arena {
        &self.base
    }

    /// The enriched arena, usable anywhere a plain [`Arena`] is.
    pub fn arena(&self) -> &Arena {
        &self.arena
    }

    pub fn states(&self) -> &[KnowledgeState] {
        &self.states
    }

    pub fn state(&self, q: usize) -> KnowledgeState {
        self.states[q]
    }

    pub fn state_id(&self, ks: &KnowledgeState) -> Option<usize> {
        self.state_index.get(ks).copied()
    }

    /// Reachable knowledges in construction order.
    pub fn knowledges(&self) -> &[Knowledge] {
        &self.knowledges
    }

    pub fn knowledge_id(&self, k: Knowledge) -> Option<usize> {
        self.knowledge_index.get(&k).copied()
    }

    /// Eve's enriched actions `(σ, D)` with `σ ∈ D`, in alphabet order.
    pub fn eve_moves(&self) -> &[(usize, ActionSet)] {
        &self.eve_moves
    }

    pub fn eve_move_id(&self, action: usize, dom: ActionSet) -> Option<usize> {
        self.eve_move_index.get(&(action, dom)).copied()
    }

    /// Base Adam block for each Adam block of the enriched arena.
    pub fn adam_block_base(&self) -> &[usize] {
        &self.adam_block_base
    }

    pub fn census(&self) -> Census {
        Census {
            knowledge_states: self.states.len(),
            knowledges: self.knowledges.len(),
            edges: self.edges,
        }
    }
}

/// Breadth-first closure from `(init, {init}, ∅)` under every well-formed
/// Eve action and every Adam action.
pub fn build_knowledge_arena(base: &Arena, max_states: usize) -> Result<KnowledgeArena> {
    let n = base.num_states();
    let ne = base.num_actions(Player::Eve);
    let na = base.num_actions(Player::Adam);
    if n > 64 || ne > 63 {
        return Err(Error::ResourceLimit {
            what: "knowledge bitmask width",
            limit: 64,
            reached: n.max(ne) as u128,
        });
    }
    let table = PostTable::new(base);

    let mut eve_moves = Vec::new();
    for dom in 1..(1u64 << ne) {
        for a in ActionSet(dom).actions() {
            eve_moves.push((a, ActionSet(dom)));
        }
    }
    let eve_move_index: HashMap<_, _> = eve_moves.iter().enumerate().map(|(i, m)| (*m, i)).collect();

    let init = KnowledgeState {
        real: base.init(),
        know: Knowledge::singleton(base.init()),
        dom: ActionSet::EMPTY,
    };
    let mut states = vec![init];
    let mut state_index = HashMap::from([(init, 0usize)]);
    let mut knowledges = vec![init.know];
    let mut knowledge_index = HashMap::from([(init.know, 0usize)]);
    let mut transitions = Vec::new();
    let mut edges = 0usize;
    let eve_obs = base.obs(Player::Eve);

    let mut next = 0;
    while next < states.len() {
        let q = states[next];
        next += 1;
        let mut targets = HashSet::new();
        for &(sigma, dom) in &eve_moves {
            for x in 0..na {
                let mut weights = Vec::new();
                for (t, p) in base.transition(q.real, sigma, x).entries() {
                    let know = table
                        .update(q.know, eve_obs.block_of(*t), dom)
                        .expect("successor lies in its own knowledge");
                    let succ = KnowledgeState { real: *t, know, dom };
                    let id = match state_index.get(&succ) {
                        Some(&id) => id,
                        None => {
                            if states.len() >= max_states {
                                return Err(Error::ResourceLimit {
                                    what: "knowledge states",
                                    limit: max_states as u128,
                                    reached: states.len() as u128 + 1,
                                });
                            }
                            states.push(succ);
                            state_index.insert(succ, states.len() - 1);
                            if let Entry::Vacant(slot) = knowledge_index.entry(know) {
                                slot.insert(knowledges.len());
                                knowledges.push(know);
                            }
                            states.len() - 1
                        }
                    };
                    targets.insert(id);
                    weights.push((id, p.clone()));
                }
                transitions.push(Distribution::from_weights(weights).expect("δ image is a distribution"));
            }
        }
        edges += targets.len();
    }

    let names: Vec<String> = states.iter().map(|ks| ks.name(base)).collect();
    let eve_action_names = eve_moves
        .iter()
        .map(|(a, dom)| format!("{}|{}", base.actions(Player::Eve)[*a], dom.display(base)))
        .collect();
    let eve_partition = Partition::from_keys(states.iter().map(|ks| (ks.know, ks.dom)));
    let base_adam = base.obs(Player::Adam);
    let mut adam_blocks = vec![Vec::new(); base_adam.len()];
    for (i, ks) in states.iter().enumerate() {
        adam_blocks[base_adam.block_of(ks.real)].push(i);
    }
    let adam_block_base: Vec<usize> = (0..adam_blocks.len())
        .filter(|&b| !adam_blocks[b].is_empty())
        .collect();
    let adam_blocks: Vec<Vec<usize>> = adam_blocks.into_iter().filter(|b| !b.is_empty()).collect();
    let adam_partition = Partition::new(states.len(), adam_blocks)?;
    let final_states = states.iter().map(|ks| base.is_final(ks.real)).collect();

    let arena = Arena::new(ArenaParts {
        states: names,
        init: 0,
        eve_actions: eve_action_names,
        adam_actions: base.actions(Player::Adam).to_vec(),
        transitions,
        eve_obs: eve_partition,
        adam_obs: adam_partition,
        final_states,
    })?;

    Ok(KnowledgeArena {
        base: base.clone(),
        arena,
        states,
        state_index,
        knowledges,
        knowledge_index,
        eve_moves,
        eve_move_index,
        adam_block_base,
        edges,
    })
}

/// Turns an Eve strategy on the base arena into one on the knowledge arena:
/// every move `d` becomes the well-formed `d^K` tagged with `supp(d)`, and
/// memory updates read the base block implied by the observed knowledge.
pub fn lift_strategy(ka: &KnowledgeArena, phi: &FiniteMemoryStrategy) -> FiniteMemoryStrategy {
    assert_eq!(phi.owner, Player::Eve);
    let moves = phi
        .moves
        .iter()
        .map(|d| {
            let dom = ActionSet(d.support_mask());
            d.map(|a| ka.eve_move_id(a, dom).expect("every support is a domain"))
        })
        .collect();
    let base_eve = ka.base.obs(Player::Eve);
    let block_base: Vec<usize> = ka
        .arena
        .obs(Player::Eve)
        .blocks()
        .iter()
        .map(|b| {
            let ks = ka.states[b[0]];
            base_eve.block_of(ks.real)
        })
        .collect();
    let update = phi
        .update
        .iter()
        .map(|row| block_base.iter().map(|&b| row[b]).collect())
        .collect();
    FiniteMemoryStrategy {
        owner: Player::Eve,
        memory: phi.memory.clone(),
        init: phi.init,
        moves,
        update,
    }
}

/// Adam observes the same thing in both arenas; only block indices change.
pub fn lift_adam_strategy(ka: &KnowledgeArena, phi: &FiniteMemoryStrategy) -> FiniteMemoryStrategy {
    assert_eq!(phi.owner, Player::Adam);
    let update = phi
        .update
        .iter()
        .map(|row| ka.adam_block_base.iter().map(|&b| row[b]).collect())
        .collect();
    FiniteMemoryStrategy {
        update,
        ..phi.clone()
    }
}

/// Strategy that depends on Eve's current knowledge only, playing the
/// uniform distribution over the chosen action set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnowledgeOnlyStrategy {
    pub choice: BTreeMap<Knowledge, ActionSet>,
}

impl KnowledgeOnlyStrategy {
    pub fn get(&self, k: Knowledge) -> Option<ActionSet> {
        self.choice.get(&k).copied()
    }
}

/// Implements `phi` on the base arena. Memory is the set of reachable
/// `(knowledge, last support)` pairs starting from `({init}, ∅)`; updates
/// apply [`knowledge_update`]. An observation that cannot follow the
/// current knowledge never occurs in a real play and leaves memory unchanged.
pub fn lower_strategy(arena: &Arena, phi: &KnowledgeOnlyStrategy) -> Result<FiniteMemoryStrategy> {
    let table = PostTable::new(arena);
    let start = (Knowledge::singleton(arena.init()), ActionSet::EMPTY);
    let mut memory = vec![start];
    let mut index = HashMap::from([(start, 0usize)]);
    let mut moves = Vec::new();
    let mut update = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(m) = queue.pop_front() {
        let (k, _) = memory[m];
        let dom = phi.get(k).filter(|d| !d.is_empty()).ok_or_else(|| {
            Error::validation(format!("knowledge-only strategy undefined at {}", k.display(arena)))
        })?;
        moves.push((m, dom.uniform()));
        let mut row = Vec::with_capacity(table.blocks());
        for block in 0..table.blocks() {
            let target = match table.update(k, block, dom) {
                None => m,
                Some(k2) => {
                    let key = (k2, dom);
                    *index.entry(key).or_insert_with(|| {
                        memory.push(key);
                        queue.push_back(memory.len() - 1);
                        memory.len() - 1
                    })
                }
            };
            row.push(target);
        }
        update.push((m, row));
    }
    moves.sort_by_key(|(m, _)| *m);
    update.sort_by_key(|(m, _)| *m);
    Ok(FiniteMemoryStrategy {
        owner: Player::Eve,
        memory: memory
            .iter()
            .map(|(k, d)| format!("{}|{}", k.display(arena), d.display(arena)))
            .collect(),
        init: 0,
        moves: moves.into_iter().map(|(_, d)| d).collect(),
        update: update.into_iter().map(|(_, r)| r).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_game, validate_strategy};
    use proptest::prelude::*;

    fn game(text: &str) -> Arena {
        parse_game(text).unwrap()
    }

    fn g3() -> Arena {
        game(include_str!("../games/g3.json"))
    }

    fn g1() -> Arena {
        game(include_str!("../games/g1.json"))
    }

    #[test]
    fn absorbing_update_is_identity() {
        let g = game(include_str!("../games/g2.json"));
        let d = g.state_index("d").unwrap();
        let block = g.obs(Player::Eve).block_of(d);
        let k = knowledge_update(&g, Knowledge::singleton(d), block, ActionSet::singleton(0)).unwrap();
        assert_eq!(k, Knowledge::singleton(d));
    }

    #[test]
    fn blind_branch_merges_q_and_r() {
        let g = g3();
        let (p, q, r) = (0, 1, 2);
        let qr = g.obs(Player::Eve).block_of(q);
        let k = knowledge_update(&g, Knowledge::singleton(p), qr, ActionSet::singleton(0)).unwrap();
        assert_eq!(k, Knowledge(1 << q | 1 << r));
        let pb = g.obs(Player::Eve).block_of(p);
        assert!(matches!(
            knowledge_update(&g, Knowledge::singleton(p), pb, ActionSet::singleton(0)),
            Err(Error::InconsistentObservation { .. })
        ));
    }

    #[test]
    fn knowledge_arena_of_g3_holds_qr() {
        let ka = build_knowledge_arena(&g3(), DEFAULT_MAX_KNOWLEDGE_STATES).unwrap();
        assert!(ka.knowledges().contains(&Knowledge(0b110)));
        assert_eq!(ka.knowledges().len(), 2);
        let names = ka.arena().state_names();
        assert!(names.contains(&"q|{q,r}|{a}".to_string()), "{names:?}");
    }

    #[test]
    fn perfect_information_gives_singletons() {
        let ka = build_knowledge_arena(&g1(), DEFAULT_MAX_KNOWLEDGE_STATES).unwrap();
        assert!(ka.knowledges().iter().all(|k| k.len() == 1));
        assert_eq!(ka.knowledges().len(), 2);
    }

    #[test]
    fn one_state_arena() {
        let text = r#"{"states":["s0"],"init":"s0","final":[],"eve_actions":["a","b"],
            "adam_actions":["x"],"eve_obs":[["s0"]],"adam_obs":[["s0"]],
            "transitions":[{"from":"s0","eve":"a","adam":"x","to":{"s0":1}},
                           {"from":"s0","eve":"b","adam":"x","to":{"s0":1}}]}"#;
        let ka = build_knowledge_arena(&game(text), 100).unwrap();
        let mut doms: Vec<u64> = ka.states().iter().map(|ks| ks.dom.0).collect();
        doms.sort_unstable();
        assert_eq!(doms, vec![0, 1, 2, 3]);
        assert!(ka.states().iter().all(|ks| ks.real == 0 && ks.know == Knowledge(1)));
        assert_eq!(ka.census().knowledges, 1);
    }

    #[test]
    fn cap_is_enforced() {
        let err = build_knowledge_arena(&g1(), 2).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { .. }));
    }

    #[test]
    fn support_projection_matches_base() {
        let base = g3();
        let ka = build_knowledge_arena(&base, 1000).unwrap();
        for (q, ks) in ka.states().iter().enumerate() {
            for (m, &(sigma, _)) in ka.eve_moves().iter().enumerate() {
                for x in 0..base.num_actions(Player::Adam) {
                    let projected: Vec<usize> = ka
                        .arena()
                        .transition(q, m, x)
                        .support()
                        .map(|t| ka.state(t).real)
                        .collect();
                    let direct: Vec<usize> = base.transition(ks.real, sigma, x).support().collect();
                    assert_eq!(projected, direct);
                }
            }
        }
    }

    #[test]
    fn lifting_uniform_strategy_in_g1() {
        let base = g1();
        let ka = build_knowledge_arena(&base, 1000).unwrap();
        let phi = FiniteMemoryStrategy::constant(&base, Player::Eve, Distribution::uniform([0, 1]));
        let lifted = lift_strategy(&ka, &phi);
        validate_strategy(ka.arena(), Player::Eve, &lifted).unwrap();
        let both = ActionSet(0b11);
        let expected = Distribution::uniform([
            ka.eve_move_id(0, both).unwrap(),
            ka.eve_move_id(1, both).unwrap(),
        ]);
        assert_eq!(lifted.moves[0], expected);

        let det = FiniteMemoryStrategy::constant(&base, Player::Eve, Distribution::point(1));
        let lifted = lift_strategy(&ka, &det);
        assert_eq!(lifted.moves[0], Distribution::point(ka.eve_move_id(1, ActionSet(0b10)).unwrap()));
    }

    #[test]
    fn lifting_preserves_memory_structure() {
        let base = g1();
        let ka = build_knowledge_arena(&base, 1000).unwrap();
        let phi = FiniteMemoryStrategy {
            owner: Player::Eve,
            memory: vec!["m0".into(), "m1".into()],
            init: 0,
            moves: vec![Distribution::point(0), Distribution::point(1)],
            update: vec![vec![1, 1], vec![0, 0]],
        };
        let lifted = lift_strategy(&ka, &phi);
        assert_eq!(lifted.memory, phi.memory);
        validate_strategy(ka.arena(), Player::Eve, &lifted).unwrap();
    }

    #[test]
    fn lowering_constant_choice_on_singletons() {
        let base = g1();
        let choice = BTreeMap::from([(Knowledge(0b01), ActionSet(1)), (Knowledge(0b10), ActionSet(1))]);
        let lowered = lower_strategy(&base, &KnowledgeOnlyStrategy { choice }).unwrap();
        validate_strategy(&base, Player::Eve, &lowered).unwrap();
        assert!(lowered.moves.iter().all(|d| *d == Distribution::point(0)));
    }

    #[test]
    fn lowering_g1_uniform() {
        let base = g1();
        let choice = BTreeMap::from([(Knowledge(0b01), ActionSet(3)), (Knowledge(0b10), ActionSet(3))]);
        let lowered = lower_strategy(&base, &KnowledgeOnlyStrategy { choice }).unwrap();
        validate_strategy(&base, Player::Eve, &lowered).unwrap();
        assert_eq!(lowered.memory, vec!["{s}|{}", "{s}|{a,b}", "{f}|{a,b}"]);
        assert!(lowered.moves.iter().all(|d| *d == Distribution::uniform([0, 1])));
        let missing = KnowledgeOnlyStrategy {
            choice: BTreeMap::from([(Knowledge(0b01), ActionSet(3))]),
        };
        assert!(lower_strategy(&base, &missing).is_err());
    }

    proptest! {
        #[test]
        fn update_is_monotone(seed in 0u64..400, small in 1u64..16, extra in 0u64..16, dom in 1u64..4) {
            let arena = crate::cli::gen::random_arena(&crate::cli::gen::GenParams {
                state_count: 4,
                eve_action_count: 2,
                adam_action_count: 2,
                transition_density: 0.7,
                eve_blocks: 2,
                adam_blocks: 2,
                final_count: 1,
                seed,
            });
            let k = Knowledge(small);
            let k2 = Knowledge(small | extra);
            for block in 0..arena.obs(Player::Eve).len() {
                let a = knowledge_update(&arena, k, block, ActionSet(dom)).map(|k| k.0).unwrap_or(0);
                let b = knowledge_update(&arena, k2, block, ActionSet(dom)).map(|k| k.0).unwrap_or(0);
                prop_assert_eq!(a & !b, 0);
                if a != 0 {
                    let blk = arena.obs(Player::Eve).block(block);
                    prop_assert!(Knowledge(a).states().all(|s| blk.contains(&s)));
                }
            }
        }
    }
}
