//! Benchmark harness: instances x algorithms x trials with derived seeds,
//! aggregated into `summary.csv` plus one curve file per trial.
//!
//! Layout under the output directory:
//!
//! ```text
//! summary.csv                        instance,algorithm,trials,completed,mean,optimal,sd,mean_wall_ms,mean_stage_one_ms
//! trials/<instance>__<alg>.csv       seed,final_best,final_mean_population,wall_ms  (one row per trial)
//! curves/<instance>/<alg>/trial_NNN.csv   iteration,best_length
//! failures.csv                       only when some trial failed
//! manifest.json                      config, seeds, version
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::meta::{ga_run, ia_run, pso_run, Algorithm, EvoConfig, TrialReport};
use crate::par;
use crate::pipeline::{run_stage_one, StageOneOptions, SubSolver};
use crate::rng::{trial_seed, RngStream};
use crate::tsp::{generate_uniform_instance, parse_tsplib, TspInstance};
use serde::Serialize;

/// Key for the stage-one stream inside a trial.
const STAGE_ONE_KEY: u64 = 0x5354_4147_4531;

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InstanceSpec {
    File(PathBuf),
    Uniform { n: usize, seed: u64 },
}

impl FromStr for InstanceSpec {
    type Err = Error;

    /// `uniform:N:SEED` or a TSPLIB path.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("uniform:") {
            let bad = || Error::Argument(format!("expected uniform:N:SEED, got {s:?}"));
            let (n, seed) = rest.split_once(':').ok_or_else(bad)?;
            return Ok(InstanceSpec::Uniform {
                n: n.parse().map_err(|_| bad())?,
                seed: seed.parse().map_err(|_| bad())?,
            });
        }
        Ok(InstanceSpec::File(PathBuf::from(s)))
    }
}

impl InstanceSpec {
    pub fn load(&self) -> Result<TspInstance> {
        match self {
            InstanceSpec::File(p) => parse_tsplib(&std::fs::read(p)?),
            InstanceSpec::Uniform { n, seed } => generate_uniform_instance(*n, &mut RngStream::new(*seed)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchConfig {
    pub instances: Vec<InstanceSpec>,
    pub algorithms: Vec<Algorithm>,
    pub trials: usize,
    pub evo: EvoConfig,
    pub k: usize,
    pub polish: bool,
    /// Recorded in the manifest; the caller loads it into a solver.
    pub checkpoint: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub master_seed: u64,
    pub workers: Option<usize>,
}

impl BenchConfig {
    /// P=100, M=500, 30 trials, k=20.
    pub fn protocol(instances: Vec<InstanceSpec>, out_dir: PathBuf) -> Self {
        Self {
            instances,
            algorithms: Algorithm::ALL.to_vec(),
            trials: 30,
            evo: EvoConfig::default(),
            k: 20,
            polish: false,
            checkpoint: None,
            out_dir,
            master_seed: 1,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Argument("trials must be at least 1".into()));
        }
        if self.instances.is_empty() || self.algorithms.is_empty() {
            return Err(Error::Argument("need at least one instance and one algorithm".into()));
        }
        for spec in &self.instances {
            if let InstanceSpec::File(p) = spec {
                if !p.is_file() {
                    return Err(Error::Argument(format!("instance file {} not found", p.display())));
                }
            }
        }
        if let Some(c) = &self.checkpoint {
            if !c.is_file() {
                return Err(Error::Argument(format!("checkpoint {} not found", c.display())));
            }
        }
        self.evo.validate()
    }
}

/// Stage-one settings for seeded GA runs.
#[derive(Clone, Copy)]
pub struct StageOneSpec<'a> {
    pub solver: &'a dyn SubSolver,
    pub k: usize,
    pub options: StageOneOptions,
}

/// One optimizer run from a trial seed. Seeded GA runs stage one on a
/// stream derived from the same seed.
pub fn run_trial(
    instance: &TspInstance,
    algorithm: Algorithm,
    evo: &EvoConfig,
    stage_one: Option<StageOneSpec<'_>>,
    seed: u64,
) -> Result<TrialReport> {
    let mut rng = RngStream::new(seed);
    match algorithm {
        Algorithm::Ga => ga_run(instance, evo, None, &mut rng),
        Algorithm::Pso => pso_run(instance, evo, &mut rng),
        Algorithm::Ia => ia_run(instance, evo, &mut rng),
        Algorithm::CcpnrlGa => {
            let spec = stage_one.ok_or_else(|| Error::Argument("ccpnrl-ga needs a sub-solver".into()))?;
            let st = run_stage_one(instance, spec.k, spec.solver, &rng.derive(STAGE_ONE_KEY), spec.options)?;
            let mut r = ga_run(instance, evo, Some(&st.elite), &mut rng)?;
            r.stage_one_ms = Some(st.wall_ms);
            Ok(r)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub instance: String,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub completed: usize,
    pub mean: f64,
    pub optimal: f64,
    /// Sample standard deviation (n - 1); zero for one trial.
    pub sd: f64,
    pub mean_wall_ms: f64,
    pub mean_stage_one_ms: Option<f64>,
}

impl BenchSummary {
    pub const CSV_HEADER: &'static str =
        "instance,algorithm,trials,completed,mean,optimal,sd,mean_wall_ms,mean_stage_one_ms";

    pub fn from_values(
        instance: &str,
        algorithm: Algorithm,
        trials: usize,
        finals: &[f64],
        walls: &[f64],
        stage: &[f64],
    ) -> Self {
        let k = finals.len();
        let mean = if k == 0 { f64::NAN } else { finals.iter().sum::<f64>() / k as f64 };
        let optimal = finals.iter().copied().fold(f64::INFINITY, f64::min);
        let sd = if k < 2 {
            0.0
        } else {
            (finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
        };
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        Self {
            instance: instance.to_string(),
            algorithm,
            trials,
            completed: k,
            mean,
            optimal: if k == 0 { f64::NAN } else { optimal },
            sd,
            mean_wall_ms: avg(walls),
            mean_stage_one_ms: (!stage.is_empty()).then(|| avg(stage)),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.3},{}",
            self.instance,
            self.algorithm,
            self.trials,
            self.completed,
            self.mean,
            self.optimal,
            self.sd,
            self.mean_wall_ms,
            self.mean_stage_one_ms.map(|v| format!("{v:.3}")).unwrap_or_default()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub instance: String,
    pub algorithm: Algorithm,
    pub trial: usize,
    pub error: String,
}

#[derive(Debug)]
pub struct BenchOutcome {
    pub summaries: Vec<BenchSummary>,
    pub failures: Vec<TrialFailure>,
    /// Reports keyed by (instance, algorithm), in trial order.
    pub reports: BTreeMap<(String, Algorithm), Vec<TrialReport>>,
}

impl BenchOutcome {
    pub fn all_completed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Keeps file names portable.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

pub fn trials_file(out: &Path, instance: &str, alg: Algorithm) -> PathBuf {
    out.join("trials").join(format!("{}__{}.csv", file_stem(instance), alg))
}

pub fn curve_file(out: &Path, instance: &str, alg: Algorithm, trial: usize) -> PathBuf {
    out.join("curves")
        .join(file_stem(instance))
        .join(alg.name())
        .join(format!("trial_{trial:03}.csv"))
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    parallel: bool,
    config: &'a BenchConfig,
    subsolver: Option<String>,
    seeds: BTreeMap<String, Vec<u64>>,
}

/// Runs every cell and writes all outputs. Failing trials are recorded
/// and the run continues.
pub fn run_bench(config: &BenchConfig, solver: Option<&dyn SubSolver>) -> Result<BenchOutcome> {
    config.validate()?;
    if config.algorithms.contains(&Algorithm::CcpnrlGa) && solver.is_none() {
        return Err(Error::Argument("ccpnrl-ga needs a sub-solver".into()));
    }
    let instances = config.instances.iter().map(InstanceSpec::load).collect::<Result<Vec<_>>>()?;

    let mut jobs = Vec::new();
    for (ii, inst) in instances.iter().enumerate() {
        for &alg in &config.algorithms {
            for t in 0..config.trials {
                jobs.push((ii, alg, t, trial_seed(config.master_seed, inst.name(), alg.name(), t)));
            }
        }
    }
    let stage = solver.map(|s| StageOneSpec {
        solver: s,
        k: config.k,
        options: StageOneOptions { polish: config.polish },
    });
    let results = par::with_workers(config.workers, || {
        par::map_slice(&jobs, |&(ii, alg, _, seed)| run_trial(&instances[ii], alg, &config.evo, stage, seed))
    });

    let out = &config.out_dir;
    let mut reports: BTreeMap<(String, Algorithm), Vec<TrialReport>> = BTreeMap::new();
    let mut failures = Vec::new();
    let mut seeds: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for (&(ii, alg, t, seed), res) in jobs.iter().zip(results) {
        let name = instances[ii].name().to_string();
        seeds.entry(format!("{name}/{alg}")).or_default().push(seed);
        match res {
            Ok(r) => {
                write_atomic(&curve_file(out, &name, alg, t), r.curve_csv().as_bytes())?;
                reports.entry((name, alg)).or_default().push(r);
            }
            Err(e) => failures.push(TrialFailure {
                instance: name,
                algorithm: alg,
                trial: t,
                error: e.to_string(),
            }),
        }
    }

    let mut summaries = Vec::new();
    let mut summary_csv = format!("{}\n", BenchSummary::CSV_HEADER);
    for inst in &instances {
        for &alg in &config.algorithms {
            let rs = reports.get(&(inst.name().to_string(), alg)).map(Vec::as_slice).unwrap_or(&[]);
            let mut trials_csv = format!("{}\n", TrialReport::SUMMARY_HEADER);
            for r in rs {
                let _ = writeln!(trials_csv, "{}", r.summary_row());
            }
            write_atomic(&trials_file(out, inst.name(), alg), trials_csv.as_bytes())?;
            let finals: Vec<f64> = rs.iter().map(|r| r.best_length).collect();
            let walls: Vec<f64> = rs.iter().map(|r| r.wall_ms).collect();
            let stage_ms: Vec<f64> = rs.iter().filter_map(|r| r.stage_one_ms).collect();
            let s = BenchSummary::from_values(inst.name(), alg, config.trials, &finals, &walls, &stage_ms);
            let _ = writeln!(summary_csv, "{}", s.csv_row());
            summaries.push(s);
        }
    }
    write_atomic(&out.join("summary.csv"), summary_csv.as_bytes())?;
    if !failures.is_empty() {
        let mut f = String::from("instance,algorithm,trial,error\n");
        for x in &failures {
            let _ = writeln!(f, "{},{},{},{:?}", x.instance, x.algorithm, x.trial, x.error);
        }
        write_atomic(&out.join("failures.csv"), f.as_bytes())?;
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        parallel: par::is_parallel(),
        config,
        subsolver: solver.map(|s| s.name()),
        seeds,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Argument(e.to_string()))?;
    write_atomic(&out.join("manifest.json"), json.as_bytes())?;

    Ok(BenchOutcome {
        summaries,
        failures,
        reports,
    })
}

/// Recomputes every summary row from the per-trial files. Returns the list
/// of mismatches (empty when consistent).
pub fn cross_check(out: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(out.join("summary.csv"))?;
    let mut problems = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Parse {
                line: ln + 1,
                message: "expected 9 summary fields".into(),
            });
        }
        let alg: Algorithm = f[1].parse()?;
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: ln + 1,
                message: format!("bad number {s:?}"),
            })
        };
        let trials_text = std::fs::read_to_string(trials_file(out, f[0], alg))?;
        let mut finals = Vec::new();
        for (tl, row) in trials_text.lines().enumerate().skip(1) {
            let v = row.split(',').nth(1).ok_or(Error::Parse {
                line: tl + 1,
                message: "missing final_best".into(),
            })?;
            finals.push(num(v)?);
        }
        let s = BenchSummary::from_values(f[0], alg, 0, &finals, &[], &[]);
        let same = |a: f64, b: f64| (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-9 * a.abs().max(1.0);
        let (mean, optimal, sd, completed) = (num(f[4])?, num(f[5])?, num(f[6])?, num(f[3])?);
        if !same(mean, s.mean) || !same(optimal, s.optimal) || !same(sd, s.sd) || completed as usize != finals.len() {
            problems.push(format!("{}/{}: summary does not match trial file", f[0], alg));
        }
        for t in 0..finals.len() {
            let p = curve_file(out, f[0], alg, t);
            if !p.is_file() {
                problems.push(format!("missing {}", p.display()));
            }
        }
    }
    Ok(problems)
}
