//! Exact reachability values of a finite Markov chain.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_traits::{One, Zero};

use crate::model::Rational;

/// Probability of eventually reaching `target` from every node of the chain
/// whose rows are `succ` (each row sums to 1).
///
/// Nodes that cannot reach the target get 0, nodes that cannot avoid it get
/// 1, and the remaining system is solved by sparse Gaussian elimination. On
/// those nodes `I - P` is a non-singular M-matrix, so diagonal pivots never
/// vanish.
pub(crate) fn reach_values(succ: &[Vec<(usize, Rational)>], target: &[bool]) -> Vec<Rational> {
    let n = succ.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, row) in succ.iter().enumerate() {
        for (v, _) in row {
            preds[*v].push(u);
        }
    }

    let mut reaches = target.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&u| target[u]).collect();
    while let Some(v) = queue.pop_front() {
        for &u in &preds[v] {
            if !reaches[u] {
                reaches[u] = true;
                queue.push_back(u);
            }
        }
    }

    // nodes that can reach a zero node without touching the target
    let mut leaks: Vec<bool> = reaches.iter().map(|&r| !r).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&u| leaks[u]).collect();
    while let Some(v) = queue.pop_front() {
        for &u in &preds[v] {
            if !leaks[u] && !target[u] {
                leaks[u] = true;
                queue.push_back(u);
            }
        }
    }

    let mut values = vec![Rational::zero(); n];
    let mut unknown = Vec::new();
    for u in 0..n {
        if target[u] || (reaches[u] && !leaks[u]) {
            values[u] = Rational::one();
        } else if reaches[u] {
            unknown.push(u);
        }
    }
    if unknown.is_empty() {
        return values;
    }

    let mut col = vec![usize::MAX; n];
    for (i, &u) in unknown.iter().enumerate() {
        col[u] = i;
    }
    let m = unknown.len();
    let mut rows: Vec<BTreeMap<usize, Rational>> = Vec::with_capacity(m);
    let mut rhs: Vec<Rational> = Vec::with_capacity(m);
    for &u in &unknown {
        let mut row = BTreeMap::new();
        row.insert(col[u], Rational::one());
        let mut b = Rational::zero();
        for (v, p) in &succ[u] {
            if col[*v] != usize::MAX {
                let e = row.entry(col[*v]).or_insert_with(Rational::zero);
                *e -= p;
            } else if values[*v].is_one() {
                b += p;
            }
        }
        row.retain(|_, x| !x.is_zero());
        rows.push(row);
        rhs.push(b);
    }

    let mut holders: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    for (r, row) in rows.iter().enumerate() {
        for &c in row.keys() {
            holders[c].insert(r);
        }
    }
    for k in 0..m {
        let pivot_row = std::mem::take(&mut rows[k]);
        let pivot = pivot_row.get(&k).cloned().expect("diagonal pivot is non-zero");
        let below: Vec<usize> = holders[k].range(k + 1..).copied().collect();
        for r in below {
            let Some(factor) = rows[r].get(&k).map(|x| x / &pivot) else {
                continue;
            };
            for (&c, x) in &pivot_row {
                let e = rows[r].entry(c).or_insert_with(Rational::zero);
                *e -= &factor * x;
                if e.is_zero() {
                    rows[r].remove(&c);
                } else {
                    holders[c].insert(r);
                }
            }
            let delta = &factor * &rhs[k];
            rhs[r] -= delta;
        }
        rows[k] = pivot_row;
    }
    let mut x = vec![Rational::zero(); m];
    for k in (0..m).rev() {
        let mut acc = rhs[k].clone();
        for (&c, a) in rows[k].range(k + 1..) {
            acc -= a * &x[c];
        }
        x[k] = acc / &rows[k][&k];
    }
    for (i, &u) in unknown.iter().enumerate() {
        values[u] = std::mem::take(&mut x[i]);
    }
    values
}
