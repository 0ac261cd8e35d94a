//! Permutation operators.

use crate::rng::RngStream;

/// Order crossover with inclusive cut points `a <= b`: the child keeps
/// `p1[a..=b]` in place and fills the other slots left to right with the
/// remaining genes in `p2` order.
pub fn order_crossover(p1: &[usize], p2: &[usize], a: usize, b: usize) -> Vec<usize> {
    let n = p1.len();
    debug_assert!(a <= b && b < n && p2.len() == n);
    let mut used = vec![false; n];
    let mut child = vec![usize::MAX; n];
    for i in a..=b {
        child[i] = p1[i];
        used[p1[i]] = true;
    }
    let mut fill = p2.iter().copied().filter(|g| !used[*g]);
    for (i, slot) in child.iter_mut().enumerate() {
        if i < a || i > b {
            *slot = fill.next().expect("p2 is a permutation");
        }
    }
    child
}

/// OX with two uniformly drawn cut points.
pub fn random_order_crossover(p1: &[usize], p2: &[usize], rng: &mut RngStream) -> Vec<usize> {
    let n = p1.len();
    let (x, y) = (rng.index(n), rng.index(n));
    order_crossover(p1, p2, x.min(y), x.max(y))
}

pub fn swap_mutation(t: &mut [usize], rng: &mut RngStream) {
    let n = t.len();
    if n >= 2 {
        let i = rng.index(n);
        let j = rng.index(n);
        t.swap(i, j);
    }
}

/// Swaps that turn `from` into `to`, applied left to right.
pub fn swap_sequence(to: &[usize], from: &[usize]) -> Vec<(usize, usize)> {
    let n = from.len();
    let mut cur = from.to_vec();
    let mut pos = vec![0; n];
    for (i, &c) in cur.iter().enumerate() {
        pos[c] = i;
    }
    let mut swaps = Vec::new();
    for i in 0..n {
        if cur[i] != to[i] {
            let j = pos[to[i]];
            swaps.push((i, j));
            pos[cur[i]] = j;
            pos[cur[j]] = i;
            cur.swap(i, j);
        }
    }
    swaps
}

pub fn apply_swaps(t: &mut [usize], swaps: &[(usize, usize)]) {
    for &(i, j) in swaps {
        t.swap(i, j);
    }
}

/// Shared undirected edges divided by `n`.
pub fn edge_similarity(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let (succ, pred) = neighbours(a);
    shared_edges(&succ, &pred, b) as f64 / n as f64
}

pub(crate) fn neighbours(t: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let n = t.len();
    let mut succ = vec![0; n];
    let mut pred = vec![0; n];
    for i in 0..n {
        let (u, v) = (t[i], t[(i + 1) % n]);
        succ[u] = v;
        pred[v] = u;
    }
    (succ, pred)
}

pub(crate) fn shared_edges(succ: &[usize], pred: &[usize], b: &[usize]) -> usize {
    let n = b.len();
    if n == 2 {
        // the single edge appears twice in a closed 2-tour
        return 2;
    }
    (0..n)
        .filter(|&i| {
            let (u, v) = (b[i], b[(i + 1) % n]);
            succ[u] == v || pred[u] == v
        })
        .count()
}
