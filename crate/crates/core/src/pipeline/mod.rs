//! Stage one: normalize each cluster, solve it, splice the sub-tours.

mod solvers;

pub use solvers::{
    held_karp, nearest_neighbor, two_opt, HeldKarp, NearestNeighbor, PtrDecoding, PtrNetSolver, SubSolver, TwoOpt,
    HELD_KARP_MAX,
};

use std::time::Instant;

use crate::decompose::{variant_knn, Decomposition};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::RngStream;
use crate::tsp::{order_length, validate_permutation, write_tour, City, DistanceMode, Tour, TspInstance};

/// Maps normalized coordinates back: `orig = norm / scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub offset: City,
    /// Zero for the degenerate (single location) case.
    pub scale: f64,
}

pub fn normalize_subcomponent(coords: &[City]) -> (Vec<City>, Transform) {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in coords {
        x0 = x0.min(c.x);
        y0 = y0.min(c.y);
        x1 = x1.max(c.x);
        y1 = y1.max(c.y);
    }
    let span = (x1 - x0).max(y1 - y0);
    if coords.is_empty() || span <= 0.0 {
        let offset = coords.first().copied().unwrap_or(City::new(0.0, 0.0));
        return (vec![City::new(0.5, 0.5); coords.len()], Transform { offset, scale: 0.0 });
    }
    let s = 1.0 / span;
    let out = coords
        .iter()
        .map(|c| City::new(((c.x - x0) * s).clamp(0.0, 1.0), ((c.y - y0) * s).clamp(0.0, 1.0)))
        .collect();
    (out, Transform { offset: City::new(x0, y0), scale: s })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StageOneOptions {
    /// Run 2-opt over each solved sub-tour.
    pub polish: bool,
}

/// Solves every cluster; results are in cluster order with global city indices.
pub fn solve_subcomponents(
    instance: &TspInstance,
    decomposition: &Decomposition,
    solver: &dyn SubSolver,
    rng: &RngStream,
) -> Result<Vec<Vec<usize>>> {
    solve_subcomponents_with(instance, decomposition, solver, rng, StageOneOptions::default())
}

pub fn solve_subcomponents_with(
    instance: &TspInstance,
    decomposition: &Decomposition,
    solver: &dyn SubSolver,
    rng: &RngStream,
    options: StageOneOptions,
) -> Result<Vec<Vec<usize>>> {
    decomposition.check_partition(instance.len())?;
    let clusters = decomposition.clusters();
    let results = par::map_indices(clusters.len(), |ci| {
        solve_cluster(instance, &clusters[ci], solver, rng.derive(ci as u64), options)
            .map_err(|e| Error::Solver { cluster: ci, source: Box::new(e) })
    });
    results.into_iter().collect()
}

fn solve_cluster(
    instance: &TspInstance,
    cluster: &[usize],
    solver: &dyn SubSolver,
    mut rng: RngStream,
    options: StageOneOptions,
) -> Result<Vec<usize>> {
    if cluster.len() <= 2 {
        let mut c = cluster.to_vec();
        c.sort_unstable();
        return Ok(c);
    }
    let raw: Vec<City> = cluster.iter().map(|&i| instance.cities()[i]).collect();
    let (coords, _) = normalize_subcomponent(&raw);
    let mut local = solver.solve(&coords, &mut rng)?;
    validate_permutation(&local, cluster.len())?;
    if options.polish {
        local = two_opt(&coords, &local);
    }
    Ok(local.into_iter().map(|l| cluster[l]).collect())
}

/// Stage-one output: the spliced tour plus bookkeeping.
#[derive(Debug, Clone)]
pub struct EliteTour {
    pub tour: Tour,
    /// Closed length of each sub-tour, in original coordinates.
    pub per_cluster_lengths: Vec<f64>,
    pub provenance: String,
}

impl EliteTour {
    pub fn length(&self, instance: &TspInstance) -> f64 {
        order_length(instance.cities(), self.tour.order(), DistanceMode::EuclideanExact)
    }

    /// "position,city_index" rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("position,city_index\n");
        for (p, c) in self.tour.order().iter().enumerate() {
            s.push_str(&format!("{p},{c}\n"));
        }
        s
    }

    pub fn to_tour_file(&self, instance: &TspInstance) -> String {
        write_tour(instance.name(), self.tour.order(), self.length(instance))
    }
}

/// Concatenates sub-tours as open paths in cluster order.
pub fn combine(
    instance: &TspInstance,
    sub_permutations: &[Vec<usize>],
    decomposition: &Decomposition,
    provenance: impl Into<String>,
) -> Result<EliteTour> {
    let clusters = decomposition.clusters();
    if sub_permutations.len() != clusters.len() {
        return Err(Error::Argument(format!(
            "coverage mismatch: {} sub-tours for {} clusters",
            sub_permutations.len(),
            clusters.len()
        )));
    }
    for (ci, (sub, cl)) in sub_permutations.iter().zip(clusters).enumerate() {
        let mut a = sub.clone();
        let mut b = cl.clone();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(Error::Argument(format!("coverage mismatch in cluster {ci}")));
        }
    }
    let order: Vec<usize> = sub_permutations.iter().flatten().copied().collect();
    let per_cluster_lengths = sub_permutations
        .iter()
        .map(|s| order_length(instance.cities(), s, DistanceMode::EuclideanExact))
        .collect();
    Ok(EliteTour {
        tour: Tour::evaluated(instance, order, DistanceMode::EuclideanExact)?,
        per_cluster_lengths,
        provenance: provenance.into(),
    })
}

/// Decompose, solve and combine in one call.
#[derive(Debug, Clone)]
pub struct StageOne {
    pub decomposition: Decomposition,
    pub elite: EliteTour,
    pub wall_ms: f64,
}

pub fn run_stage_one(
    instance: &TspInstance,
    k: usize,
    solver: &dyn SubSolver,
    rng: &RngStream,
    options: StageOneOptions,
) -> Result<StageOne> {
    let t0 = Instant::now();
    let decomposition = variant_knn(instance, k)?;
    let subs = solve_subcomponents_with(instance, &decomposition, solver, rng, options)?;
    let elite = combine(instance, &subs, &decomposition, solver.name())?;
    Ok(StageOne {
        decomposition,
        elite,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(test)]
mod tests;
