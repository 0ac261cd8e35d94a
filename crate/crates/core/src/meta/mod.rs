//! Population-based tour optimizers: GA (optionally seeded with an elite),
//! discrete PSO and an immune (clonal selection) algorithm.

mod ga;
mod ia;
pub mod ops;
mod pso;

pub use ga::ga_run;
pub use ia::{concentrations, ia_run, selection_scores};
pub use pso::pso_run;

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::par;
use crate::tsp::{DistanceMode, DistanceTable, Tour, TspInstance};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoParams {
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IaParams {
    /// Per-position swap probability for clones.
    pub mutation: f64,
    /// Similarity above which two antibodies count as concentrated.
    pub affinity_threshold: f64,
    /// Weight of affinity against (1 - concentration).
    pub concentration_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvoConfig {
    pub population_size: usize,
    pub max_iterations: usize,
    pub ga_mutation_rate: f64,
    pub ga_crossover_rate: f64,
    pub pso: PsoParams,
    pub ia: IaParams,
    pub seed: u64,
}

impl Default for EvoConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            max_iterations: 500,
            ga_mutation_rate: 0.01,
            ga_crossover_rate: 0.9,
            pso: PsoParams { w: 0.8, c1: 0.1, c2: 0.1 },
            ia: IaParams {
                mutation: 0.01,
                affinity_threshold: 0.7,
                concentration_weight: 0.95,
            },
            seed: 1,
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Argument(format!(
                "population size must be at least 2, got {}",
                self.population_size
            )));
        }
        let rates = [
            ("ga_mutation_rate", self.ga_mutation_rate),
            ("ga_crossover_rate", self.ga_crossover_rate),
            ("pso.w", self.pso.w),
            ("pso.c1", self.pso.c1),
            ("pso.c2", self.pso.c2),
            ("ia.mutation", self.ia.mutation),
            ("ia.affinity_threshold", self.ia.affinity_threshold),
            ("ia.concentration_weight", self.ia.concentration_weight),
        ];
        for (name, v) in rates {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Argument(format!("{name} must be in [0,1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    Ga,
    Pso,
    Ia,
    /// GA whose initial population carries the stage-one elite.
    CcpnrlGa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Ga, Algorithm::Pso, Algorithm::Ia, Algorithm::CcpnrlGa];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ga => "ga",
            Algorithm::Pso => "pso",
            Algorithm::Ia => "ia",
            Algorithm::CcpnrlGa => "ccpnrl-ga",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown algorithm {s:?} (expected ga, pso, ia, ccpnrl-ga)")))
    }
}

/// Outcome of one optimizer run.
#[derive(Debug, Clone)]
pub struct TrialReport {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Best-ever length after initialization and after each iteration (M+1 values).
    pub curve: Vec<f64>,
    pub best: Tour,
    pub best_length: f64,
    pub final_mean_population: f64,
    pub wall_ms: f64,
    /// Decompose/solve/combine time, for seeded runs.
    pub stage_one_ms: Option<f64>,
}

impl TrialReport {
    /// "iteration,best_length" rows. Contains no timing, so reruns are byte-identical.
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("iteration,best_length\n");
        for (i, v) in self.curve.iter().enumerate() {
            let _ = writeln!(s, "{i},{v}");
        }
        s
    }

    pub const SUMMARY_HEADER: &'static str = "seed,final_best,final_mean_population,wall_ms";

    pub fn summary_row(&self) -> String {
        format!(
            "{},{},{},{:.3}",
            self.seed, self.best_length, self.final_mean_population, self.wall_ms
        )
    }
}

/// Lengths of every individual, in population order.
pub(crate) fn evaluate(table: &DistanceTable<'_>, pop: &[Vec<usize>]) -> Vec<f64> {
    par::map_slice(pop, |t| table.length(t))
}

pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Best-ever tracker shared by all optimizers.
pub(crate) struct BestEver {
    pub order: Vec<usize>,
    pub length: f64,
    pub curve: Vec<f64>,
}

impl BestEver {
    pub fn new(pop: &[Vec<usize>], fit: &[f64], iterations: usize) -> Self {
        let b = argmin(fit);
        let mut curve = Vec::with_capacity(iterations + 1);
        curve.push(fit[b]);
        Self {
            order: pop[b].clone(),
            length: fit[b],
            curve,
        }
    }

    pub fn observe(&mut self, pop: &[Vec<usize>], fit: &[f64]) {
        let b = argmin(fit);
        if fit[b] < self.length {
            self.length = fit[b];
            self.order = pop[b].clone();
        }
        self.curve.push(self.length);
    }

    pub fn finish(
        self,
        algorithm: Algorithm,
        seed: u64,
        final_fit: &[f64],
        start: std::time::Instant,
    ) -> Result<TrialReport> {
        Ok(TrialReport {
            algorithm,
            seed,
            curve: self.curve,
            best: Tour::new(self.order)?,
            best_length: self.length,
            final_mean_population: mean(final_fit),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            stage_one_ms: None,
        })
    }
}

pub(crate) fn table(instance: &TspInstance) -> DistanceTable<'_> {
    DistanceTable::new(instance, DistanceMode::EuclideanExact)
}
