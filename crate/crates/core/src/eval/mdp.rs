//! Exact analysis of finite Markov decision processes where a single
//! controller (a fully informed Adam) picks every action.

use std::collections::VecDeque;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::linear::reach_values;
use crate::model::Rational;

/// `succ[node][action]` is a distribution over nodes.
#[derive(Clone, Debug)]
pub(crate) struct Mdp {
    pub succ: Vec<Vec<Vec<(usize, Rational)>>>,
}

impl Mdp {
    pub fn len(&self) -> usize {
        self.succ.len()
    }

    fn actions(&self, u: usize) -> usize {
        self.succ[u].len()
    }

    fn q_value(&self, u: usize, a: usize, values: &[Rational]) -> Rational {
        self.succ[u][a].iter().map(|(v, p)| p * &values[*v]).sum()
    }
}

/// Maximal probability of reaching `target`, by policy iteration with exact
/// evaluation. Policy values never exceed the optimum, and the optimum is
/// the least fixpoint of the Bellman operator, so a policy admitting no
/// strict improvement is optimal.
pub(crate) fn max_reach(mdp: &Mdp, target: &[bool]) -> Vec<Rational> {
    let n = mdp.len();
    // start from a policy that makes progress towards the target
    let mut policy = vec![0usize; n];
    let mut dist = vec![usize::MAX; n];
    let mut preds: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for u in 0..n {
        for a in 0..mdp.actions(u) {
            for (v, _) in &mdp.succ[u][a] {
                preds[*v].push((u, a));
            }
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&u| target[u]).collect();
    for &u in &queue {
        dist[u] = 0;
    }
    while let Some(v) = queue.pop_front() {
        for &(u, a) in &preds[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                policy[u] = a;
                queue.push_back(u);
            }
        }
    }

    loop {
        let chain: Vec<Vec<(usize, Rational)>> = (0..n).map(|u| mdp.succ[u][policy[u]].clone()).collect();
        let values = reach_values(&chain, target);
        let mut improved = false;
        for u in (0..n).filter(|&u| !target[u]) {
            let mut best = mdp.q_value(u, policy[u], &values);
            for a in 0..mdp.actions(u) {
                let q = mdp.q_value(u, a, &values);
                if q > best {
                    best = q;
                    policy[u] = a;
                    improved = true;
                }
            }
        }
        if !improved {
            return values;
        }
    }
}

/// Maximal end components of the sub-process on `allowed` nodes, using only
/// actions whose successors all stay inside.
pub(crate) fn maximal_end_components(mdp: &Mdp, allowed: &[bool]) -> Vec<Vec<usize>> {
    let n = mdp.len();
    let mut alive = allowed.to_vec();
    let mut acts: Vec<Vec<usize>> = (0..n)
        .map(|u| if alive[u] { (0..mdp.actions(u)).collect() } else { Vec::new() })
        .collect();
    loop {
        let mut graph = DiGraph::<(), ()>::new();
        let ids: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
        for u in (0..n).filter(|&u| alive[u]) {
            for &a in &acts[u] {
                for (v, _) in &mdp.succ[u][a] {
                    if alive[*v] {
                        graph.add_edge(ids[u], ids[*v], ());
                    }
                }
            }
        }
        let mut comp = vec![usize::MAX; n];
        let sccs = tarjan_scc(&graph);
        for (c, scc) in sccs.iter().enumerate() {
            for x in scc {
                comp[x.index()] = c;
            }
        }
        let mut changed = false;
        for u in 0..n {
            if !alive[u] {
                continue;
            }
            let before = acts[u].len();
            acts[u].retain(|&a| mdp.succ[u][a].iter().all(|(v, _)| alive[*v] && comp[*v] == comp[u]));
            if acts[u].len() != before {
                changed = true;
            }
            if acts[u].is_empty() {
                alive[u] = false;
                changed = true;
            }
        }
        if !changed {
            let mut out: Vec<Vec<usize>> = Vec::new();
            for scc in sccs {
                let mut nodes: Vec<usize> = scc.into_iter().map(|x| x.index()).filter(|&u| alive[u]).collect();
                if !nodes.is_empty() {
                    nodes.sort_unstable();
                    out.push(nodes);
                }
            }
            out.sort();
            return out;
        }
    }
}

/// Greatest set of non-`avoid` nodes where some action keeps every successor
/// inside the set.
pub(crate) fn sure_avoid(mdp: &Mdp, avoid: &[bool]) -> Vec<bool> {
    let n = mdp.len();
    let mut inside: Vec<bool> = avoid.iter().map(|&f| !f).collect();
    loop {
        let mut changed = false;
        for u in 0..n {
            if inside[u]
                && !(0..mdp.actions(u)).any(|a| mdp.succ[u][a].iter().all(|(v, _)| inside[*v]))
            {
                inside[u] = false;
                changed = true;
            }
        }
        if !changed {
            return inside;
        }
    }
}
