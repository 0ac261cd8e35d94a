//! Greedy nearest-neighbour clustering in index order.
//!
//! Cities are visited in ascending index order. An unassigned city opens a
//! new cluster and pulls in its `k - 1` nearest unassigned cities (exact
//! Euclidean distance, ties to the lower index). There is no refinement
//! pass, so each cluster costs one scan over the remaining cities.

use crate::error::{Error, Result};
use crate::tsp::TspInstance;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    clusters: Vec<Vec<usize>>,
    k: usize,
}

impl Decomposition {
    /// Wraps explicit clusters after checking they partition `0..n` with
    /// no cluster larger than `k`.
    pub fn from_clusters(clusters: Vec<Vec<usize>>, k: usize, n: usize) -> Result<Self> {
        let d = Self { clusters, k };
        d.check_partition(n)?;
        Ok(d)
    }

    /// Clusters in creation order. The first entry of each is its seed city.
    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn check_partition(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for cluster in &self.clusters {
            if cluster.is_empty() || cluster.len() > self.k {
                return Err(Error::Argument(format!(
                    "cluster size {} outside 1..={}",
                    cluster.len(),
                    self.k
                )));
            }
            for &c in cluster {
                if c >= n {
                    return Err(Error::InvalidTour {
                        index: c,
                        reason: "cluster member out of range",
                    });
                }
                if std::mem::replace(&mut seen[c], true) {
                    return Err(Error::InvalidTour {
                        index: c,
                        reason: "city in two clusters",
                    });
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidTour {
                index: missing,
                reason: "city in no cluster",
            });
        }
        Ok(())
    }

    /// `cluster_id,city_index` rows (0-based), in creation order.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("cluster_id,city_index\n");
        for (id, cluster) in self.clusters.iter().enumerate() {
            for c in cluster {
                let _ = writeln!(s, "{id},{c}");
            }
        }
        s
    }
}

/// Work counters from one decomposition pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecomposeStats {
    pub distance_evaluations: usize,
}

pub fn variant_knn(instance: &TspInstance, k: usize) -> Result<Decomposition> {
    variant_knn_with_stats(instance, k).map(|(d, _)| d)
}

pub fn variant_knn_with_stats(
    instance: &TspInstance,
    k: usize,
) -> Result<(Decomposition, DecomposeStats)> {
    let n = instance.len();
    if k < 2 || k > n {
        return Err(Error::Argument(format!(
            "cluster size k must be in 2..={n}, got {k}"
        )));
    }
    let cities = instance.cities();
    let mut assigned = vec![false; n];
    // Unassigned cities in ascending index order; compacted after each cluster.
    let mut pool: Vec<usize> = (0..n).collect();
    let mut clusters = Vec::with_capacity(n.div_ceil(k));
    let mut stats = DecomposeStats::default();
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n);

    for seed in 0..n {
        if assigned[seed] {
            continue;
        }
        assigned[seed] = true;
        candidates.clear();
        for &c in &pool {
            if !assigned[c] {
                candidates.push((cities[seed].dist(&cities[c]), c));
            }
        }
        stats.distance_evaluations += candidates.len();
        let take = (k - 1).min(candidates.len());
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if take > 0 && take < candidates.len() {
            candidates.select_nth_unstable_by(take - 1, by_distance);
        }
        let nearest = &mut candidates[..take];
        nearest.sort_unstable_by(by_distance);

        let mut cluster = Vec::with_capacity(take + 1);
        cluster.push(seed);
        for &(_, c) in nearest.iter() {
            assigned[c] = true;
            cluster.push(c);
        }
        clusters.push(cluster);
        pool.retain(|&c| !assigned[c]);
    }

    let d = Decomposition { clusters, k };
    d.check_partition(n)?;
    Ok((d, stats))
}
