use crate::error::{Error, Result};
use crate::ptrnet::{solve as ptr_solve, DecodeMode, PtrNetModel};
use crate::rng::RngStream;
use crate::tsp::{order_length, City, DistanceMode};

/// Largest input [`held_karp`] accepts.
pub const HELD_KARP_MAX: usize = 13;

/// Solves one (normalized) cluster, returning a permutation of `0..n`.
pub trait SubSolver: Sync {
    fn name(&self) -> String;
    fn solve(&self, coords: &[City], rng: &mut RngStream) -> Result<Vec<usize>>;
}

/// Exact dynamic program over subsets, rooted at city 0.
pub fn held_karp(coords: &[City]) -> Result<Vec<usize>> {
    let n = coords.len();
    if n > HELD_KARP_MAX {
        return Err(Error::Argument(format!(
            "held_karp supports at most {HELD_KARP_MAX} cities, got {n}"
        )));
    }
    if n <= 3 {
        return Ok((0..n).collect());
    }
    let d = |a: usize, b: usize| coords[a].dist(&coords[b]);
    // subsets of cities 1..n, bit (j-1) for city j
    let m = n - 1;
    let full = 1usize << m;
    let mut cost = vec![f64::INFINITY; full * m];
    let mut parent = vec![usize::MAX; full * m];
    for j in 0..m {
        cost[(1 << j) * m + j] = d(0, j + 1);
    }
    for mask in 1..full {
        for last in 0..m {
            if mask & (1 << last) == 0 {
                continue;
            }
            let here = cost[mask * m + last];
            if !here.is_finite() {
                continue;
            }
            for next in 0..m {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let nm = mask | (1 << next);
                let c = here + d(last + 1, next + 1);
                if c < cost[nm * m + next] {
                    cost[nm * m + next] = c;
                    parent[nm * m + next] = last;
                }
            }
        }
    }
    let all = full - 1;
    let mut best = (f64::INFINITY, 0);
    for last in 0..m {
        let c = cost[all * m + last] + d(last + 1, 0);
        if c < best.0 {
            best = (c, last);
        }
    }
    let mut order = Vec::with_capacity(n);
    let (mut mask, mut last) = (all, best.1);
    while last != usize::MAX {
        order.push(last + 1);
        let p = parent[mask * m + last];
        mask &= !(1 << last);
        last = p;
    }
    order.push(0);
    order.reverse();
    // both directions tie; pick the one with the smaller second city
    if order[1] > order[n - 1] {
        order[1..].reverse();
    }
    Ok(order)
}

/// Greedy tour from city 0; ties go to the lower index.
pub fn nearest_neighbor(coords: &[City]) -> Vec<usize> {
    let n = coords.len();
    if n == 0 {
        return Vec::new();
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = 0;
    visited[0] = true;
    order.push(0);
    for _ in 1..n {
        let mut best = (f64::INFINITY, usize::MAX);
        for (j, c) in coords.iter().enumerate() {
            if !visited[j] {
                let dj = coords[cur].dist(c);
                if dj < best.0 {
                    best = (dj, j);
                }
            }
        }
        cur = best.1;
        visited[cur] = true;
        order.push(cur);
    }
    order
}

/// First-improvement 2-opt until no improving segment reversal remains.
pub fn two_opt(coords: &[City], start: &[usize]) -> Vec<usize> {
    let mut t = start.to_vec();
    let n = t.len();
    if n < 4 {
        return t;
    }
    let d = |a: usize, b: usize| coords[a].dist(&coords[b]);
    loop {
        let mut improved = false;
        for i in 0..n - 2 {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b, c, e) = (t[i], t[i + 1], t[j], t[(j + 1) % n]);
                let delta = d(a, c) + d(b, e) - d(a, b) - d(c, e);
                if delta < -1e-12 {
                    t[i + 1..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            return t;
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HeldKarp;

impl SubSolver for HeldKarp {
    fn name(&self) -> String {
        "held-karp".into()
    }

    fn solve(&self, coords: &[City], _rng: &mut RngStream) -> Result<Vec<usize>> {
        held_karp(coords)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NearestNeighbor;

impl SubSolver for NearestNeighbor {
    fn name(&self) -> String {
        "nearest-neighbor".into()
    }

    fn solve(&self, coords: &[City], _rng: &mut RngStream) -> Result<Vec<usize>> {
        Ok(nearest_neighbor(coords))
    }
}

/// Nearest neighbour followed by 2-opt.
#[derive(Debug, Clone, Copy, Default)]
pub struct TwoOpt;

impl SubSolver for TwoOpt {
    fn name(&self) -> String {
        "two-opt".into()
    }

    fn solve(&self, coords: &[City], _rng: &mut RngStream) -> Result<Vec<usize>> {
        Ok(two_opt(coords, &nearest_neighbor(coords)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtrDecoding {
    Greedy,
    /// Shortest of `m` sampled tours.
    SampleBest(usize),
}

/// Trained pointer network as a sub-solver.
#[derive(Debug, Clone)]
pub struct PtrNetSolver {
    pub model: PtrNetModel,
    pub decoding: PtrDecoding,
    /// Free-form identifier of the weights (e.g. checkpoint path).
    pub checkpoint_id: String,
}

impl PtrNetSolver {
    pub fn new(model: PtrNetModel, checkpoint_id: impl Into<String>) -> Self {
        Self {
            model,
            decoding: PtrDecoding::Greedy,
            checkpoint_id: checkpoint_id.into(),
        }
    }
}

impl SubSolver for PtrNetSolver {
    fn name(&self) -> String {
        format!("ptrnet[{}]", self.checkpoint_id)
    }

    fn solve(&self, coords: &[City], rng: &mut RngStream) -> Result<Vec<usize>> {
        match self.decoding {
            PtrDecoding::Greedy => Ok(ptr_solve(&self.model, coords, DecodeMode::Greedy, rng)?
                .permutation
                .into_order()),
            PtrDecoding::SampleBest(m) => {
                let enc = crate::ptrnet::encode(&self.model, coords)?;
                let mut best: Option<(f64, Vec<usize>)> = None;
                for _ in 0..m.max(1) {
                    let r = crate::ptrnet::decode(&self.model, &enc, DecodeMode::Sample, rng)?;
                    let order = r.permutation.into_order();
                    let len = order_length(coords, &order, DistanceMode::EuclideanExact);
                    if best.as_ref().is_none_or(|(b, _)| len < *b) {
                        best = Some((len, order));
                    }
                }
                Ok(best.expect("m >= 1").1)
            }
        }
    }
}
