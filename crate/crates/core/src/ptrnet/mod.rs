//! Pointer-network actor and critic.
//!
//! Actor: coordinates are embedded, run through an LSTM encoder, and an
//! LSTM decoder then points at one unvisited city per step through additive
//! attention over the encoder states. The decoder's first input is a learned
//! start token; every later input is the embedding of the city just chosen.
//!
//! Critic: its own embedding and LSTM encoder, `P` attention glimpses over
//! the encoder states starting from the final hidden state, and a
//! `H -> H -> 1` ReLU head predicting the tour length.

mod critic;

pub use critic::{critic_backward, critic_forward, critic_forward_traced, CriticGrads, CriticModel, CriticTrace};

use crate::error::{Error, Result};
use crate::nn::{
    softmax, Attention, AttentionGrad, GradSlots, Linear, LinearGrad, LstmCache, LstmCell, LstmGrad, LstmState,
    Param, ParamSet, ScoreCache,
};
use crate::rng::RngStream;
use crate::tsp::{City, Tour};
use serde::{Deserialize, Serialize};

/// Network sizes and inference options shared by actor and critic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Embedding width `E` (decoder input size).
    pub embed: usize,
    /// LSTM hidden width `H`.
    pub hidden: usize,
    /// Critic glimpse rounds `P`.
    pub process_rounds: usize,
    /// When set, pointer logits become `C * tanh(u)`.
    pub logit_clip: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed: 128,
            hidden: 128,
            process_rounds: 3,
            logit_clip: None,
        }
    }
}

impl ModelConfig {
    pub fn small(width: usize) -> Self {
        Self {
            embed: width,
            hidden: width,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecodeMode {
    Greedy,
    Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub permutation: Tour,
    /// Sum of the log-probabilities of the chosen cities.
    pub log_prob: f64,
    pub mode: DecodeMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtrNetModel {
    pub config: ModelConfig,
    pub embed: Linear,
    pub encoder: LstmCell,
    pub decoder: LstmCell,
    pub pointer: Attention,
    pub start: Param,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtrNetGrads {
    pub embed: LinearGrad,
    pub encoder: LstmGrad,
    pub decoder: LstmGrad,
    pub pointer: AttentionGrad,
    pub start: Vec<f64>,
}

impl PtrNetModel {
    pub fn new(config: ModelConfig, rng: &mut RngStream) -> Self {
        let (e, h) = (config.embed, config.hidden);
        Self {
            config,
            embed: Linear::new("actor.embed", 2, e, rng),
            encoder: LstmCell::new("actor.encoder", e, h, rng),
            decoder: LstmCell::new("actor.decoder", e, h, rng),
            pointer: Attention::new("actor.pointer", h, rng),
            start: Param::uniform("actor.start", e, 1, 1.0 / (e as f64).sqrt(), rng),
        }
    }
}

impl ParamSet for PtrNetModel {
    type Grad = PtrNetGrads;

    fn params(&self) -> Vec<&Param> {
        let mut v = self.embed.params();
        v.extend(self.encoder.params());
        v.extend(self.decoder.params());
        v.extend(self.pointer.params());
        v.push(&self.start);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.embed.params_mut();
        v.extend(self.encoder.params_mut());
        v.extend(self.decoder.params_mut());
        v.extend(self.pointer.params_mut());
        v.push(&mut self.start);
        v
    }

    fn zero_grad_like(&self) -> PtrNetGrads {
        PtrNetGrads {
            embed: self.embed.zero_grad_like(),
            encoder: self.encoder.zero_grad_like(),
            decoder: self.decoder.zero_grad_like(),
            pointer: self.pointer.zero_grad_like(),
            start: vec![0.0; self.start.len()],
        }
    }
}

impl GradSlots for PtrNetGrads {
    fn slots(&self) -> Vec<&[f64]> {
        let mut v = self.embed.slots();
        v.extend(self.encoder.slots());
        v.extend(self.decoder.slots());
        v.extend(self.pointer.slots());
        v.push(&self.start);
        v
    }

    fn slots_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.embed.slots_mut();
        v.extend(self.encoder.slots_mut());
        v.extend(self.decoder.slots_mut());
        v.extend(self.pointer.slots_mut());
        v.push(&mut self.start);
        v
    }
}

/// Encoder pass over one sequence.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub embedded: Vec<Vec<f64>>,
    /// Hidden state after each input.
    pub states: Vec<Vec<f64>>,
    pub final_state: LstmState,
    caches: Vec<LstmCache>,
}

pub(crate) fn check_coords(coords: &[City]) -> Result<()> {
    if coords.is_empty() {
        return Err(Error::Argument("cannot encode an empty sequence".into()));
    }
    if let Some(i) = coords.iter().position(|c| !c.x.is_finite() || !c.y.is_finite()) {
        return Err(Error::NonFinite(format!("input coordinate {i}")));
    }
    Ok(())
}

pub(crate) fn encode_with(embed: &Linear, encoder: &LstmCell, coords: &[City]) -> Result<Encoded> {
    check_coords(coords)?;
    let mut state = LstmState::zeros(encoder.hidden());
    let mut embedded = Vec::with_capacity(coords.len());
    let mut states = Vec::with_capacity(coords.len());
    let mut caches = Vec::with_capacity(coords.len());
    for c in coords {
        let mut e = vec![0.0; embed.output_dim()];
        embed.forward_into(&[c.x, c.y], &mut e);
        let (next, cache) = encoder.step_unchecked(&e, &state);
        states.push(next.h.clone());
        caches.push(cache);
        embedded.push(e);
        state = next;
    }
    Ok(Encoded {
        embedded,
        states,
        final_state: state,
        caches,
    })
}

/// Backpropagates gradients w.r.t. encoder states, final state and the
/// embeddings themselves into the embedding and encoder parameters.
#[allow(clippy::too_many_arguments)]
pub(crate) fn encode_backward(
    embed: &Linear,
    encoder: &LstmCell,
    coords: &[City],
    enc: &Encoded,
    d_states: &[Vec<f64>],
    d_final: (Vec<f64>, Vec<f64>),
    mut d_embedded: Vec<Vec<f64>>,
    g_embed: &mut LinearGrad,
    g_encoder: &mut LstmGrad,
) {
    let (mut dh_next, mut dc_next) = d_final;
    for t in (0..coords.len()).rev() {
        let dh: Vec<f64> = d_states[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
        let (dx, dh_prev, dc_prev) = encoder.backward(&enc.caches[t], &dh, &dc_next, g_encoder);
        for (a, b) in d_embedded[t].iter_mut().zip(&dx) {
            *a += b;
        }
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    for (c, de) in coords.iter().zip(&d_embedded) {
        embed.backward(&[c.x, c.y], de, g_embed, None);
    }
}

pub fn encode(model: &PtrNetModel, coords: &[City]) -> Result<Encoded> {
    encode_with(&model.embed, &model.encoder, coords)
}

/// How the next city is chosen during a rollout.
pub enum Policy<'a> {
    Greedy,
    Sample(&'a mut RngStream),
    /// Replays a given permutation (used to score or differentiate a tour).
    Forced(&'a [usize]),
}

/// Decoder-side record of a rollout, sufficient for backpropagation.
#[derive(Debug, Clone)]
pub struct DecodeTrace {
    pub chosen: Vec<usize>,
    pub log_prob: f64,
    /// Masked distribution at each step.
    pub probs: Vec<Vec<f64>>,
    projected: Vec<Vec<f64>>,
    lstm: Vec<LstmCache>,
    scores: Vec<ScoreCache>,
    raw_logits: Vec<Vec<f64>>,
}

fn argmax_lowest(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn sample_index(p: &[f64], mask: &[bool], rng: &mut RngStream) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, (&pi, &m)) in p.iter().zip(mask).enumerate() {
        if m {
            continue;
        }
        acc += pi;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

pub fn rollout(model: &PtrNetModel, enc: &Encoded, mut policy: Policy<'_>) -> Result<DecodeTrace> {
    let n = enc.states.len();
    if let Policy::Forced(order) = &policy {
        crate::tsp::validate_permutation(order, n)?;
    }
    let projected = model.pointer.project(&enc.states);
    let mut state = enc.final_state.clone();
    let mut mask = vec![false; n];
    let mut trace = DecodeTrace {
        chosen: Vec::with_capacity(n),
        log_prob: 0.0,
        probs: Vec::with_capacity(n),
        projected: Vec::new(),
        lstm: Vec::with_capacity(n),
        scores: Vec::with_capacity(n),
        raw_logits: Vec::with_capacity(n),
    };
    let mut input: &[f64] = &model.start.values;
    for step in 0..n {
        let (next, cache) = model.decoder.step_unchecked(input, &state);
        let (raw, score_cache) = model.pointer.scores(&projected, &next.h);
        let logits: Vec<f64> = match model.config.logit_clip {
            Some(c) => raw.iter().map(|u| c * u.tanh()).collect(),
            None => raw.clone(),
        };
        let p = softmax(&logits, &mask)?;
        let j = match &mut policy {
            Policy::Greedy => argmax_lowest(&p),
            Policy::Sample(rng) => sample_index(&p, &mask, rng),
            Policy::Forced(order) => order[step],
        };
        trace.log_prob += p[j].ln();
        mask[j] = true;
        trace.chosen.push(j);
        trace.probs.push(p);
        trace.lstm.push(cache);
        trace.scores.push(score_cache);
        trace.raw_logits.push(raw);
        state = next;
        input = &enc.embedded[j];
    }
    trace.projected = projected;
    Ok(trace)
}

pub fn decode(model: &PtrNetModel, enc: &Encoded, mode: DecodeMode, rng: &mut RngStream) -> Result<DecodeResult> {
    let policy = match mode {
        DecodeMode::Greedy => Policy::Greedy,
        DecodeMode::Sample => Policy::Sample(rng),
    };
    let trace = rollout(model, enc, policy)?;
    Ok(DecodeResult {
        permutation: Tour::new(trace.chosen)?,
        log_prob: trace.log_prob,
        mode,
    })
}

/// Encodes and decodes in one call.
pub fn solve(model: &PtrNetModel, coords: &[City], mode: DecodeMode, rng: &mut RngStream) -> Result<DecodeResult> {
    let enc = encode(model, coords)?;
    decode(model, &enc, mode, rng)
}

/// Accumulates `coeff * d log p(trajectory) / d theta` into `grad`.
pub fn log_prob_backward(
    model: &PtrNetModel,
    coords: &[City],
    enc: &Encoded,
    trace: &DecodeTrace,
    coeff: f64,
    grad: &mut PtrNetGrads,
) {
    let n = coords.len();
    let h = model.config.hidden;
    let e = model.config.embed;
    let mut d_projected = vec![vec![0.0; h]; n];
    let mut d_embedded = vec![vec![0.0; e]; n];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];

    for t in (0..n).rev() {
        let p = &trace.probs[t];
        let j = trace.chosen[t];
        let mut du: Vec<f64> = p.iter().map(|&pi| -coeff * pi).collect();
        du[j] += coeff;
        if let Some(c) = model.config.logit_clip {
            for (d, u) in du.iter_mut().zip(&trace.raw_logits[t]) {
                let th = u.tanh();
                *d *= c * (1.0 - th * th);
            }
        }
        let dq = model
            .pointer
            .backward_scores(&trace.scores[t], &du, &mut d_projected, &mut grad.pointer);
        let dh: Vec<f64> = dq.iter().zip(&dh_next).map(|(a, b)| a + b).collect();
        let (dx, dh_prev, dc_prev) = model.decoder.backward(&trace.lstm[t], &dh, &dc_next, &mut grad.decoder);
        let target = if t == 0 {
            &mut grad.start
        } else {
            &mut d_embedded[trace.chosen[t - 1]]
        };
        for (a, b) in target.iter_mut().zip(&dx) {
            *a += b;
        }
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    let d_states = model
        .pointer
        .backward_project(&enc.states, &d_projected, &mut grad.pointer);
    encode_backward(
        &model.embed,
        &model.encoder,
        coords,
        enc,
        &d_states,
        (dh_next, dc_next),
        d_embedded,
        &mut grad.embed,
        &mut grad.encoder,
    );
}
