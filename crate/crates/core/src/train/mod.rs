//! Actor-critic REINFORCE on random uniform instances.
//!
//! Each step samples one tour per instance, uses the critic's prediction
//! `b(s)` as a constant baseline, and descends
//! `(1/B) sum_i (L_i - b_i) log p(sigma_i)` for the actor and
//! `(1/B) sum_i (b_i - L_i)^2` for the critic.
//!
//! Per-instance work fans out over the batch; gradients are summed inside
//! fixed-size chunks and the chunk sums are reduced in chunk order, so the
//! result does not depend on thread count or on the `parallel` feature.

mod checkpoint;

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};

use crate::error::{Error, Result};
use crate::nn::{adam_step, clip_global_norm, AdamConfig, GradSlots, ParamSet};
use crate::par;
use crate::ptrnet::{
    critic_backward, critic_forward, critic_forward_traced, encode, log_prob_backward, rollout, CriticGrads,
    CriticModel, ModelConfig, Policy, PtrNetGrads, PtrNetModel,
};
use crate::rng::RngStream;
use crate::tsp::{generate_uniform_instance, order_length, City, DistanceMode};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Instances per gradient-reduction chunk.
const CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub batch_size: usize,
    pub n_cities: usize,
    pub max_steps: usize,
    pub adam_actor: AdamConfig,
    pub adam_critic: AdamConfig,
    /// Global L2 clip applied separately to actor and critic gradients.
    pub grad_clip: Option<f64>,
    pub normalize_advantage: bool,
    pub eval_every: usize,
    pub eval_set_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl TrainConfig {
    /// B=64, H=E=128, n=20, 20000 steps, lr 1e-3 decayed by 0.96 every 5000.
    pub fn full() -> Self {
        Self {
            model: ModelConfig::default(),
            batch_size: 64,
            n_cities: 20,
            max_steps: 20_000,
            adam_actor: AdamConfig::default(),
            adam_critic: AdamConfig::default(),
            grad_clip: Some(2.0),
            normalize_advantage: false,
            eval_every: 100,
            eval_set_size: 256,
            seed: 1,
        }
    }

    /// Full network and batch, 5000 steps.
    pub fn desk() -> Self {
        Self {
            max_steps: 5000,
            ..Self::full()
        }
    }

    /// H=E=64, 2000 steps.
    pub fn reduced() -> Self {
        Self {
            model: ModelConfig::small(64),
            max_steps: 2000,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be >= 1".into()));
        }
        if self.n_cities < 2 {
            return Err(Error::Argument("n_cities must be >= 2".into()));
        }
        if self.model.embed == 0 || self.model.hidden == 0 {
            return Err(Error::Argument("model widths must be positive".into()));
        }
        if self.eval_every == 0 || self.eval_set_size == 0 {
            return Err(Error::Argument("eval_every and eval_set_size must be positive".into()));
        }
        self.adam_actor.validate()?;
        self.adam_critic.validate()
    }
}

/// Batch statistics from one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub mean_length: f64,
    pub mean_baseline: f64,
    pub critic_loss: f64,
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: usize,
    pub sample_mean: f64,
    pub greedy_mean: f64,
    pub critic_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EvalRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,sample_mean,greedy_mean,critic_loss\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{:?},{:?},{:?}", r.step, r.sample_mean, r.greedy_mean, r.critic_loss);
        }
        s
    }
}

/// One sampled rollout with everything needed for the gradients.
struct Sampled {
    coords: Vec<City>,
    enc: crate::ptrnet::Encoded,
    trace: crate::ptrnet::DecodeTrace,
    length: f64,
    baseline: f64,
    critic_trace: crate::ptrnet::CriticTrace,
}

fn sample_batch(
    actor: &PtrNetModel,
    critic: &CriticModel,
    batch: &[Vec<City>],
    rng: &RngStream,
) -> Result<Vec<Sampled>> {
    par::map_indices(batch.len(), |i| -> Result<Sampled> {
        let coords = batch[i].clone();
        let enc = encode(actor, &coords)?;
        let mut r = rng.derive(i as u64);
        let trace = rollout(actor, &enc, Policy::Sample(&mut r))?;
        let length = order_length(&coords, &trace.chosen, DistanceMode::EuclideanExact);
        let (baseline, critic_trace) = critic_forward_traced(critic, &coords)?;
        Ok(Sampled {
            coords,
            enc,
            trace,
            length,
            baseline,
            critic_trace,
        })
    })
    .into_iter()
    .collect()
}

fn advantages(samples: &[Sampled], normalize: bool) -> Vec<f64> {
    let mut adv: Vec<f64> = samples.iter().map(|s| s.length - s.baseline).collect();
    if normalize && adv.len() > 1 {
        let mean = adv.iter().sum::<f64>() / adv.len() as f64;
        let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / adv.len() as f64;
        let sd = var.sqrt().max(1e-8);
        adv.iter_mut().for_each(|a| *a = (*a - mean) / sd);
    }
    adv
}

/// Sums per-item gradients over fixed chunks, then reduces chunks in order.
fn chunked_sum<G, F>(count: usize, zero: impl Fn() -> G + Sync + Send, add_item: F) -> G
where
    G: GradSlots + Send,
    F: Fn(usize, &mut G) + Sync + Send,
{
    let chunks = count.div_ceil(CHUNK);
    let partial = par::map_indices(chunks, |c| {
        let mut g = zero();
        for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
            add_item(i, &mut g);
        }
        g
    });
    let mut total = zero();
    for g in &partial {
        total.add_assign(g);
    }
    total
}

/// Gradients of the actor surrogate and critic loss for one batch without
/// applying them. Sampling for instance `i` uses `rng.derive(i)`.
pub fn reinforce_gradients(
    actor: &PtrNetModel,
    critic: &CriticModel,
    batch: &[Vec<City>],
    rng: &RngStream,
    normalize_advantage: bool,
) -> Result<(PtrNetGrads, CriticGrads, StepStats)> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let samples = sample_batch(actor, critic, batch, rng)?;
    let b = samples.len() as f64;
    let adv = advantages(&samples, normalize_advantage);
    let actor_grad = chunked_sum(
        samples.len(),
        || actor.zero_grad_like(),
        |i, g| {
            let s = &samples[i];
            log_prob_backward(actor, &s.coords, &s.enc, &s.trace, adv[i] / b, g);
        },
    );
    let critic_grad = chunked_sum(
        samples.len(),
        || critic.zero_grad_like(),
        |i, g| {
            let s = &samples[i];
            critic_backward(critic, &s.coords, &s.critic_trace, 2.0 * (s.baseline - s.length) / b, g);
        },
    );
    let stats = StepStats {
        mean_length: samples.iter().map(|s| s.length).sum::<f64>() / b,
        mean_baseline: samples.iter().map(|s| s.baseline).sum::<f64>() / b,
        critic_loss: samples.iter().map(|s| (s.baseline - s.length).powi(2)).sum::<f64>() / b,
        actor_grad_norm: actor_grad.squared_norm().sqrt(),
        critic_grad_norm: critic_grad.squared_norm().sqrt(),
    };
    if !stats.critic_loss.is_finite() || !stats.mean_length.is_finite() {
        return Err(Error::NonFinite("batch loss".into()));
    }
    Ok((actor_grad, critic_grad, stats))
}

fn param_norms<M: ParamSet>(m: &M) -> String {
    m.params()
        .iter()
        .map(|p| format!("{}={:.3e}", p.name, p.values.iter().map(|v| v * v).sum::<f64>().sqrt()))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Loads `grad` into `model`, clips, and takes one Adam step at `step`.
pub fn apply_gradients<M: ParamSet>(
    model: &mut M,
    grad: &M::Grad,
    adam: &AdamConfig,
    clip: Option<f64>,
    step: usize,
) -> Result<()> {
    model.zero_grads();
    model.accumulate(grad);
    if let Some(max) = clip {
        clip_global_norm(&mut model.params_mut(), max);
    }
    for p in model.params_mut() {
        adam_step(p, adam, step)?;
    }
    Ok(())
}

/// One full actor-critic update.
pub fn reinforce_step(
    actor: &mut PtrNetModel,
    critic: &mut CriticModel,
    batch: &[Vec<City>],
    rng: &RngStream,
    config: &TrainConfig,
    step: usize,
) -> Result<StepStats> {
    let (ga, gc, stats) =
        reinforce_gradients(actor, critic, batch, rng, config.normalize_advantage).map_err(|e| Error::Training {
            step,
            detail: format!("{e}; actor norms: {}; critic norms: {}", param_norms(actor), param_norms(critic)),
        })?;
    let wrap = |e: Error, actor: &PtrNetModel, critic: &CriticModel| Error::Training {
        step,
        detail: format!("{e}; actor norms: {}; critic norms: {}", param_norms(actor), param_norms(critic)),
    };
    if let Err(e) = apply_gradients(actor, &ga, &config.adam_actor, config.grad_clip, step) {
        return Err(wrap(e, actor, critic));
    }
    if let Err(e) = apply_gradients(critic, &gc, &config.adam_critic, config.grad_clip, step) {
        return Err(wrap(e, actor, critic));
    }
    Ok(stats)
}

/// Mean squared error of the critic against fixed targets.
pub fn critic_loss(critic: &CriticModel, batch: &[Vec<City>], targets: &[f64]) -> Result<f64> {
    let preds = par::map_slice(batch, |c| critic_forward(critic, c));
    let mut total = 0.0;
    for (p, t) in preds.into_iter().zip(targets) {
        total += (p? - t).powi(2);
    }
    Ok(total / batch.len() as f64)
}

/// Critic-only regression step towards fixed targets; returns the loss
/// before the update.
pub fn critic_step(
    critic: &mut CriticModel,
    batch: &[Vec<City>],
    targets: &[f64],
    adam: &AdamConfig,
    clip: Option<f64>,
    step: usize,
) -> Result<f64> {
    let b = batch.len() as f64;
    let traced: Vec<_> = par::map_slice(batch, |c| critic_forward_traced(critic, c))
        .into_iter()
        .collect::<Result<_>>()?;
    let loss = traced.iter().zip(targets).map(|((p, _), t)| (p - t).powi(2)).sum::<f64>() / b;
    let grad = chunked_sum(
        batch.len(),
        || critic.zero_grad_like(),
        |i, g| {
            let (p, trace) = &traced[i];
            critic_backward(critic, &batch[i], trace, 2.0 * (p - targets[i]) / b, g);
        },
    );
    apply_gradients(critic, &grad, adam, clip, step)?;
    Ok(loss)
}

fn random_batch(n: usize, count: usize, rng: &RngStream) -> Vec<Vec<City>> {
    (0..count)
        .map(|i| {
            let mut r = rng.derive(i as u64);
            generate_uniform_instance(n, &mut r)
                .map(|inst| inst.cities().to_vec())
                .expect("n >= 2 validated")
        })
        .collect()
}

/// Held-out evaluation: mean sampled and greedy tour length and the
/// critic's MSE against the sampled lengths.
pub fn evaluate(
    actor: &PtrNetModel,
    critic: &CriticModel,
    eval_set: &[Vec<City>],
    rng: &RngStream,
    step: usize,
) -> Result<EvalRecord> {
    let rows = par::map_indices(eval_set.len(), |i| -> Result<(f64, f64, f64)> {
        let coords = &eval_set[i];
        let enc = encode(actor, coords)?;
        let mut r = rng.derive(i as u64);
        let sampled = rollout(actor, &enc, Policy::Sample(&mut r))?;
        let greedy = rollout(actor, &enc, Policy::Greedy)?;
        let ls = order_length(coords, &sampled.chosen, DistanceMode::EuclideanExact);
        let lg = order_length(coords, &greedy.chosen, DistanceMode::EuclideanExact);
        let b = critic_forward(critic, coords)?;
        Ok((ls, lg, (b - ls).powi(2)))
    });
    let n = eval_set.len() as f64;
    let (mut s, mut g, mut c) = (0.0, 0.0, 0.0);
    for row in rows {
        let (a, b, d) = row?;
        s += a;
        g += b;
        c += d;
    }
    Ok(EvalRecord {
        step,
        sample_mean: s / n,
        greedy_mean: g / n,
        critic_loss: c / n,
    })
}

/// Fixed held-out set for a config's seed.
pub fn eval_set(config: &TrainConfig) -> Vec<Vec<City>> {
    random_batch(config.n_cities, config.eval_set_size, &RngStream::new(config.seed).derive(2))
}

pub fn train(config: &TrainConfig) -> Result<(PtrNetModel, CriticModel, TrainLog)> {
    train_with(config, |_| {})
}

/// [`train`] with a callback invoked after each evaluation.
pub fn train_with(
    config: &TrainConfig,
    mut on_eval: impl FnMut(&EvalRecord),
) -> Result<(PtrNetModel, CriticModel, TrainLog)> {
    config.validate()?;
    let master = RngStream::new(config.seed);
    let mut actor = PtrNetModel::new(config.model, &mut master.derive(0));
    let mut critic = CriticModel::new(config.model, &mut master.derive(1));
    let mut log = TrainLog::default();
    if config.max_steps == 0 {
        return Ok((actor, critic, log));
    }
    let held_out = eval_set(config);
    let eval_rng = master.derive(4);
    let data_rng = master.derive(3);

    let mut record = |actor: &PtrNetModel, critic: &CriticModel, step: usize, log: &mut TrainLog| -> Result<()> {
        let r = evaluate(actor, critic, &held_out, &eval_rng, step)?;
        on_eval(&r);
        log.records.push(r);
        Ok(())
    };
    record(&actor, &critic, 0, &mut log)?;
    for step in 0..config.max_steps {
        let step_rng = data_rng.derive(step as u64);
        let batch = random_batch(config.n_cities, config.batch_size, &step_rng.derive(0));
        reinforce_step(&mut actor, &mut critic, &batch, &step_rng.derive(1), config, step)?;
        let done = step + 1;
        if done % config.eval_every == 0 || done == config.max_steps {
            record(&actor, &critic, done, &mut log)?;
        }
    }
    Ok((actor, critic, log))
}

#[cfg(test)]
mod tests;
