use std::time::Instant;

use super::ops::{apply_swaps, swap_sequence};
use super::{argmin, evaluate, table, Algorithm, BestEver, EvoConfig, TrialReport};
use crate::error::Result;
use crate::rng::RngStream;
use crate::tsp::TspInstance;

/// Swap-sequence PSO. Velocity is a list of transpositions.
pub fn pso_run(instance: &TspInstance, config: &EvoConfig, rng: &mut RngStream) -> Result<TrialReport> {
    config.validate()?;
    let start = Instant::now();
    let n = instance.len();
    let table = table(instance);
    let p = config.population_size;
    let par = config.pso;

    let mut pos: Vec<Vec<usize>> = (0..p).map(|_| rng.permutation(n)).collect();
    let mut vel: Vec<Vec<(usize, usize)>> = vec![Vec::new(); p];
    let mut fit = evaluate(&table, &pos);
    let mut pbest = pos.clone();
    let mut pbest_fit = fit.clone();
    let mut best = BestEver::new(&pos, &fit, config.max_iterations);
    let mut gbest = pos[argmin(&fit)].clone();

    for _ in 0..config.max_iterations {
        for i in 0..p {
            let mut v: Vec<(usize, usize)> = vel[i].iter().copied().filter(|_| rng.bernoulli(par.w)).collect();
            for s in swap_sequence(&pbest[i], &pos[i]) {
                if rng.bernoulli(par.c1) {
                    v.push(s);
                }
            }
            for s in swap_sequence(&gbest, &pos[i]) {
                if rng.bernoulli(par.c2) {
                    v.push(s);
                }
            }
            apply_swaps(&mut pos[i], &v);
            vel[i] = v;
        }
        fit = evaluate(&table, &pos);
        for i in 0..p {
            if fit[i] < pbest_fit[i] {
                pbest_fit[i] = fit[i];
                pbest[i] = pos[i].clone();
            }
        }
        best.observe(&pos, &fit);
        gbest.clone_from(&best.order);
    }

    best.finish(Algorithm::Pso, rng.seed(), &fit, start)
}
