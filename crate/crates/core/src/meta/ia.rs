use std::time::Instant;

use super::ops::{neighbours, shared_edges};
use super::{evaluate, table, Algorithm, BestEver, EvoConfig, TrialReport};
use crate::error::Result;
use crate::par;
use crate::rng::RngStream;
use crate::tsp::TspInstance;

const IMMIGRANT_FRACTION: f64 = 0.05;

/// Fraction of the population (self included) whose edge similarity to each
/// antibody exceeds `threshold`.
pub fn concentrations(pop: &[Vec<usize>], threshold: f64) -> Vec<f64> {
    let p = pop.len();
    let n = pop[0].len();
    let adj: Vec<_> = par::map_slice(pop, |t| neighbours(t));
    par::map_indices(p, |i| {
        let (succ, pred) = &adj[i];
        let close = pop
            .iter()
            .filter(|b| shared_edges(succ, pred, b) as f64 / n as f64 > threshold)
            .count();
        close as f64 / p as f64
    })
}

/// `alpha * normalized affinity + (1 - alpha) * (1 - concentration)`, affinity = 1/length.
pub fn selection_scores(lengths: &[f64], conc: &[f64], alpha: f64) -> Vec<f64> {
    let aff: Vec<f64> = lengths.iter().map(|l| 1.0 / l).collect();
    let lo = aff.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = aff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    aff.iter()
        .zip(conc)
        .map(|(a, c)| {
            let na = if hi > lo { (a - lo) / (hi - lo) } else { 1.0 };
            alpha * na + (1.0 - alpha) * (1.0 - c)
        })
        .collect()
}

fn mutate_clone(t: &mut [usize], rate: f64, rng: &mut RngStream) {
    let n = t.len();
    let mut swapped = false;
    for i in 0..n {
        if rng.bernoulli(rate) {
            let j = rng.index(n);
            t.swap(i, j);
            swapped = true;
        }
    }
    if !swapped && n >= 2 {
        let i = rng.index(n);
        let j = (i + 1 + rng.index(n - 1)) % n;
        t.swap(i, j);
    }
}

/// Clonal selection. The top half by score survives, clones are allotted by
/// rank and mutated, and the rest of the slots go to random immigrants.
pub fn ia_run(instance: &TspInstance, config: &EvoConfig, rng: &mut RngStream) -> Result<TrialReport> {
    config.validate()?;
    let start = Instant::now();
    let n = instance.len();
    let table = table(instance);
    let p = config.population_size;
    let ia = config.ia;

    let keep = (p / 2).max(1);
    let immigrants = ((p as f64 * IMMIGRANT_FRACTION).ceil() as usize).min(p - keep);
    let n_clones = p - keep - immigrants;
    // rank weights keep..1, largest remainders to the top ranks
    let wsum = (keep * (keep + 1) / 2) as f64;
    let mut alloc: Vec<usize> = (0..keep)
        .map(|r| ((n_clones as f64) * (keep - r) as f64 / wsum).floor() as usize)
        .collect();
    let mut left = n_clones - alloc.iter().sum::<usize>();
    for a in alloc.iter_mut() {
        if left == 0 {
            break;
        }
        *a += 1;
        left -= 1;
    }

    let mut pop: Vec<Vec<usize>> = (0..p).map(|_| rng.permutation(n)).collect();
    let mut fit = evaluate(&table, &pop);
    let mut best = BestEver::new(&pop, &fit, config.max_iterations);

    for _ in 0..config.max_iterations {
        let conc = concentrations(&pop, ia.affinity_threshold);
        let score = selection_scores(&fit, &conc, ia.concentration_weight);
        let mut rank: Vec<usize> = (0..p).collect();
        rank.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(fit[a].total_cmp(&fit[b])).then(a.cmp(&b)));

        let mut next: Vec<Vec<usize>> = rank[..keep].iter().map(|&i| pop[i].clone()).collect();
        for (r, &count) in alloc.iter().enumerate() {
            for _ in 0..count {
                let mut c = pop[rank[r]].clone();
                mutate_clone(&mut c, ia.mutation, rng);
                next.push(c);
            }
        }
        while next.len() < p {
            next.push(rng.permutation(n));
        }
        pop = next;
        fit = evaluate(&table, &pop);
        best.observe(&pop, &fit);
    }

    best.finish(Algorithm::Ia, rng.seed(), &fit, start)
}
