use std::collections::HashMap;

use num_traits::One;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::linear::reach_values;
use crate::model::{Arena, FiniteMemoryStrategy, Player, Rational};

/// Markov chain induced by two finite-memory strategies, restricted to the
/// part reachable from the initial node. Node 0 is initial.
#[derive(Clone, Debug)]
pub struct ProductChain {
    /// `(state, eve memory, adam memory)`.
    pub nodes: Vec<(usize, usize, usize)>,
    /// Outgoing edges sorted by target.
    pub edges: Vec<Vec<(usize, Rational)>>,
    pub final_nodes: Vec<bool>,
}

pub fn build_chain(arena: &Arena, eve: &FiniteMemoryStrategy, adam: &FiniteMemoryStrategy) -> ProductChain {
    let eve_obs = arena.obs(Player::Eve);
    let adam_obs = arena.obs(Player::Adam);
    let start = (arena.init(), eve.init, adam.init);
    let mut nodes = vec![start];
    let mut index = HashMap::from([(start, 0usize)]);
    let mut edges = Vec::new();
    let mut next = 0;
    while next < nodes.len() {
        let (s, me, ma) = nodes[next];
        next += 1;
        let step = arena.step_distribution(s, &eve.moves[me], &adam.moves[ma]);
        let mut row = Vec::with_capacity(step.len());
        for (t, p) in step.entries() {
            let node = (*t, eve.next(me, eve_obs.block_of(*t)), adam.next(ma, adam_obs.block_of(*t)));
            let id = *index.entry(node).or_insert_with(|| {
                nodes.push(node);
                nodes.len() - 1
            });
            row.push((id, p.clone()));
        }
        row.sort_by_key(|(id, _)| *id);
        edges.push(row);
    }
    let final_nodes = nodes.iter().map(|&(s, _, _)| arena.is_final(s)).collect();
    ProductChain {
        nodes,
        edges,
        final_nodes,
    }
}

impl ProductChain {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Bottom strongly connected components.
    pub fn bottom_components(&self) -> Vec<Vec<usize>> {
        bottom_sccs(&self.edges)
    }
}

pub(crate) fn bottom_sccs(edges: &[Vec<(usize, Rational)>]) -> Vec<Vec<usize>> {
    let mut graph = DiGraph::<(), ()>::with_capacity(edges.len(), 0);
    let ids: Vec<_> = (0..edges.len()).map(|_| graph.add_node(())).collect();
    for (u, row) in edges.iter().enumerate() {
        for (v, _) in row {
            graph.add_edge(ids[u], ids[*v], ());
        }
    }
    let mut comp = vec![usize::MAX; edges.len()];
    let sccs = tarjan_scc(&graph);
    for (c, scc) in sccs.iter().enumerate() {
        for n in scc {
            comp[n.index()] = c;
        }
    }
    sccs.into_iter()
        .enumerate()
        .filter(|(c, scc)| {
            scc.iter()
                .all(|n| edges[n.index()].iter().all(|(v, _)| comp[*v] == *c))
        })
        .map(|(_, scc)| {
            let mut nodes: Vec<usize> = scc.into_iter().map(|n| n.index()).collect();
            nodes.sort_unstable();
            nodes
        })
        .collect()
}

/// Probability of reaching a final node from the initial node.
pub fn reach_probability(chain: &ProductChain) -> Rational {
    if chain.final_nodes[0] {
        return Rational::one();
    }
    reach_values(&chain.edges, &chain.final_nodes).swap_remove(0)
}

/// Probability of visiting final nodes infinitely often: the probability of
/// reaching a bottom component that contains a final node.
pub fn buchi_probability(chain: &ProductChain) -> Rational {
    let mut target = vec![false; chain.len()];
    for scc in chain.bottom_components() {
        if scc.iter().any(|&u| chain.final_nodes[u]) {
            for u in scc {
                target[u] = true;
            }
        }
    }
    reach_values(&chain.edges, &target).swap_remove(0)
}
