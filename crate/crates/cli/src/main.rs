use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tspcc::bench::{cross_check, run_bench, run_trial, write_atomic, BenchConfig, InstanceSpec, StageOneSpec};
use tspcc::meta::{Algorithm, EvoConfig};
use tspcc::pipeline::{HeldKarp, NearestNeighbor, PtrDecoding, PtrNetSolver, StageOneOptions, SubSolver, TwoOpt};
use tspcc::rng::trial_seed;
use tspcc::train::{load_checkpoint, save_checkpoint, train_with, TrainConfig};
use tspcc::tsp::{generate_uniform_instance, parse_sidecar, write_tour, write_tsplib};
use tspcc::{RngStream, TspInstance};

#[derive(Parser)]
#[command(name = "tspcc", version, about = "Decompose, solve and evolve large TSP instances")]
struct Cli {
    /// Directory for relative output paths.
    #[arg(long, global = true, env = "TSPCC_OUT_DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a pointer network and write a checkpoint plus train_log.csv.
    Train(TrainArgs),
    /// Solve one instance.
    Solve(SolveArgs),
    /// Run instances x algorithms x trials and write summary.csv.
    Bench(BenchArgs),
    /// Recompute summary.csv from the per-trial files.
    Check,
    /// Write a uniform random instance in TSPLIB format.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Full,
    Desk,
    Reduced,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    cities: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Normalize advantages across the batch.
    #[arg(long)]
    normalize_advantage: bool,
    #[arg(long, default_value = "model.ckpt")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SubSolverKind {
    Ptrnet,
    HeldKarp,
    Nn,
    TwoOpt,
}

#[derive(Args, Clone)]
struct EvoArgs {
    /// Population size.
    #[arg(long, default_value_t = 100)]
    pop: usize,
    /// Iterations.
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, value_enum, default_value = "ptrnet")]
    subsolver: SubSolverKind,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Best of this many sampled sub-tours instead of greedy decoding.
    #[arg(long)]
    samples: Option<usize>,
    /// 2-opt each sub-tour after solving.
    #[arg(long)]
    polish: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value = "ccpnrl-ga")]
    alg: Algorithm,
    /// TSPLIB file or uniform:N:SEED.
    #[arg(long)]
    inst: InstanceSpec,
    /// Sidecar with "name value" optimum lines.
    #[arg(long)]
    opt: Option<PathBuf>,
    #[command(flatten)]
    evo: EvoArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, required = true, num_args = 1..)]
    inst: Vec<InstanceSpec>,
    /// Defaults to all algorithms.
    #[arg(long, num_args = 1..)]
    alg: Vec<Algorithm>,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    evo: EvoArgs,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn resolve(out_dir: &Option<PathBuf>, p: &Path) -> PathBuf {
    match out_dir {
        Some(d) if p.is_relative() => d.join(p),
        _ => p.to_path_buf(),
    }
}

fn evo_config(a: &EvoArgs) -> EvoConfig {
    EvoConfig {
        population_size: a.pop,
        max_iterations: a.iters,
        seed: a.seed,
        ..EvoConfig::default()
    }
}

fn make_solver(a: &EvoArgs) -> Result<Box<dyn SubSolver>> {
    Ok(match a.subsolver {
        SubSolverKind::HeldKarp => Box::new(HeldKarp),
        SubSolverKind::Nn => Box::new(NearestNeighbor),
        SubSolverKind::TwoOpt => Box::new(TwoOpt),
        SubSolverKind::Ptrnet => {
            let path = a.ckpt.as_ref().context("--ckpt is required with --subsolver ptrnet")?;
            let ck = load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
            let mut s = PtrNetSolver::new(ck.actor, path.display().to_string());
            if let Some(m) = a.samples {
                s.decoding = PtrDecoding::SampleBest(m);
            }
            Box::new(s)
        }
    })
}

fn cmd_train(a: TrainArgs, out_dir: &Option<PathBuf>) -> Result<()> {
    let mut cfg = match a.preset {
        Preset::Full => TrainConfig::full(),
        Preset::Desk => TrainConfig::desk(),
        Preset::Reduced => TrainConfig::reduced(),
    };
    if let Some(v) = a.steps {
        cfg.max_steps = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = a.hidden {
        cfg.model.hidden = v;
        cfg.model.embed = v;
    }
    if let Some(v) = a.cities {
        cfg.n_cities = v;
    }
    if let Some(v) = a.eval_every {
        cfg.eval_every = v;
    }
    if let Some(v) = a.lr {
        cfg.adam_actor.lr0 = v;
        cfg.adam_critic.lr0 = v;
    }
    cfg.normalize_advantage = a.normalize_advantage;

    let out = resolve(out_dir, &a.out);
    let (actor, critic, log) = train_with(&cfg, |r| {
        eprintln!(
            "step {:>6}  sample {:.4}  greedy {:.4}  critic {:.4}",
            r.step, r.sample_mean, r.greedy_mean, r.critic_loss
        )
    })?;
    save_checkpoint(&out, &actor, &critic, &cfg, cfg.max_steps)?;
    let log_path = out.parent().unwrap_or(Path::new("")).join("train_log.csv");
    write_atomic(&log_path, log.to_csv().as_bytes())?;
    println!("checkpoint {}", out.display());
    println!("log {}", log_path.display());
    Ok(())
}

fn load_instance(spec: &InstanceSpec, opt: &Option<PathBuf>) -> Result<TspInstance> {
    let mut inst = spec.load().with_context(|| format!("loading {spec:?}"))?;
    if let Some(p) = opt {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let known = parse_sidecar(&text)?.into_iter().find(|(n, _)| n == inst.name()).map(|(_, v)| v);
        inst = inst.with_known_optimum(known);
    }
    Ok(inst)
}

fn cmd_solve(a: SolveArgs, out_dir: &Option<PathBuf>) -> Result<()> {
    let inst = load_instance(&a.inst, &a.opt)?;
    let evo = evo_config(&a.evo);
    let solver = match a.alg {
        Algorithm::CcpnrlGa => Some(make_solver(&a.evo)?),
        _ => None,
    };
    let stage = solver.as_deref().map(|s| StageOneSpec {
        solver: s,
        k: a.evo.k,
        options: StageOneOptions { polish: a.evo.polish },
    });
    let seed = trial_seed(a.evo.seed, inst.name(), a.alg.name(), 0);
    let r = run_trial(&inst, a.alg, &evo, stage, seed)?;

    let stem = format!("{}.{}", tspcc::bench::file_stem(inst.name()), a.alg);
    let tour_path = resolve(out_dir, Path::new(&format!("{stem}.tour")));
    let curve_path = resolve(out_dir, Path::new(&format!("{stem}.curve.csv")));
    write_atomic(&tour_path, write_tour(inst.name(), r.best.order(), r.best_length).as_bytes())?;
    write_atomic(&curve_path, r.curve_csv().as_bytes())?;

    println!("instance {} ({} cities)", inst.name(), inst.len());
    println!("algorithm {}", a.alg);
    if let Some(ms) = r.stage_one_ms {
        println!("elite {}  stage one {ms:.1} ms", r.curve[0]);
    }
    println!("initial best {}", r.curve[0]);
    println!("final {}", r.best_length);
    if let Some(opt) = inst.known_optimum() {
        println!("ratio to optimum {:.4}", r.best_length / opt);
    }
    println!("wall {:.1} ms", r.wall_ms);
    println!("tour {}", tour_path.display());
    println!("curve {}", curve_path.display());
    Ok(())
}

fn cmd_bench(a: BenchArgs, out_dir: &Option<PathBuf>) -> Result<bool> {
    let algorithms = if a.alg.is_empty() { Algorithm::ALL.to_vec() } else { a.alg.clone() };
    let solver = if algorithms.contains(&Algorithm::CcpnrlGa) {
        Some(make_solver(&a.evo)?)
    } else {
        None
    };
    let cfg = BenchConfig {
        instances: a.inst,
        algorithms,
        trials: a.trials,
        evo: evo_config(&a.evo),
        k: a.evo.k,
        polish: a.evo.polish,
        checkpoint: a.evo.ckpt.clone(),
        out_dir: out_dir.clone().unwrap_or_else(|| PathBuf::from("bench_out")),
        master_seed: a.evo.seed,
        workers: a.workers,
    };
    let outcome = run_bench(&cfg, solver.as_deref())?;
    println!("{}", tspcc::bench::BenchSummary::CSV_HEADER);
    for s in &outcome.summaries {
        println!("{}", s.csv_row());
    }
    for f in &outcome.failures {
        eprintln!("failed {}/{} trial {}: {}", f.instance, f.algorithm, f.trial, f.error);
    }
    println!("written to {}", cfg.out_dir.display());
    Ok(outcome.all_completed())
}

fn cmd_check(out_dir: &Option<PathBuf>) -> Result<bool> {
    let dir = out_dir.clone().unwrap_or_else(|| PathBuf::from("bench_out"));
    let problems = cross_check(&dir)?;
    for p in &problems {
        eprintln!("{p}");
    }
    if problems.is_empty() {
        println!("ok");
    }
    Ok(problems.is_empty())
}

fn cmd_generate(a: GenerateArgs, out_dir: &Option<PathBuf>) -> Result<()> {
    if a.n < 2 {
        bail!("--n must be at least 2");
    }
    let inst = generate_uniform_instance(a.n, &mut RngStream::new(a.seed))?;
    let out = resolve(out_dir, &a.out);
    write_atomic(&out, write_tsplib(&inst).as_bytes())?;
    println!("{}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Train(a) => cmd_train(a, &cli.out_dir).map(|_| true),
        Cmd::Solve(a) => cmd_solve(a, &cli.out_dir).map(|_| true),
        Cmd::Bench(a) => cmd_bench(a, &cli.out_dir),
        Cmd::Check => cmd_check(&cli.out_dir),
        Cmd::Generate(a) => cmd_generate(a, &cli.out_dir).map(|_| true),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
