use std::time::Instant;

use super::ops::{random_order_crossover, swap_mutation};
use super::{argmin, evaluate, table, Algorithm, BestEver, EvoConfig, TrialReport};
use crate::error::{Error, Result};
use crate::pipeline::EliteTour;
use crate::rng::RngStream;
use crate::tsp::TspInstance;

const TOURNAMENT: usize = 3;

fn tournament(fit: &[f64], rng: &mut RngStream) -> usize {
    let mut best = rng.index(fit.len());
    for _ in 1..TOURNAMENT {
        let c = rng.index(fit.len());
        if fit[c] < fit[best] {
            best = c;
        }
    }
    best
}

/// Generational GA with 1-elitism. An elite, if given, replaces individual 0.
pub fn ga_run(
    instance: &TspInstance,
    config: &EvoConfig,
    elite: Option<&EliteTour>,
    rng: &mut RngStream,
) -> Result<TrialReport> {
    config.validate()?;
    let start = Instant::now();
    let n = instance.len();
    let table = table(instance);
    let p = config.population_size;

    let mut pop: Vec<Vec<usize>> = (0..p).map(|_| rng.permutation(n)).collect();
    if let Some(e) = elite {
        if e.tour.len() != n {
            return Err(Error::Argument(format!("elite covers {} cities, instance has {n}", e.tour.len())));
        }
        pop[0] = e.tour.order().to_vec();
    }
    let mut fit = evaluate(&table, &pop);
    let mut best = BestEver::new(&pop, &fit, config.max_iterations);

    for _ in 0..config.max_iterations {
        let mut next = Vec::with_capacity(p);
        next.push(pop[argmin(&fit)].clone());
        while next.len() < p {
            let a = tournament(&fit, rng);
            let b = tournament(&fit, rng);
            let mut child = if rng.bernoulli(config.ga_crossover_rate) {
                random_order_crossover(&pop[a], &pop[b], rng)
            } else {
                pop[a].clone()
            };
            if rng.bernoulli(config.ga_mutation_rate) {
                swap_mutation(&mut child, rng);
            }
            next.push(child);
        }
        pop = next;
        fit = evaluate(&table, &pop);
        best.observe(&pop, &fit);
    }

    let algorithm = if elite.is_some() { Algorithm::CcpnrlGa } else { Algorithm::Ga };
    best.finish(algorithm, rng.seed(), &fit, start)
}
