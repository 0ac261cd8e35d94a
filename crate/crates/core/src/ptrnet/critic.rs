use super::{encode_backward, encode_with, Encoded, ModelConfig};
use crate::error::{Error, Result};
use crate::nn::{
    dot, softmax, softmax_backward, Attention, AttentionGrad, GradSlots, Linear, LinearGrad, LstmCell, LstmGrad,
    Param, ParamSet, ScoreCache,
};
use crate::rng::RngStream;
use crate::tsp::City;

#[derive(Debug, Clone, PartialEq)]
pub struct CriticModel {
    pub config: ModelConfig,
    pub embed: Linear,
    pub encoder: LstmCell,
    pub process: Attention,
    pub hidden_layer: Linear,
    pub output: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticGrads {
    pub embed: LinearGrad,
    pub encoder: LstmGrad,
    pub process: AttentionGrad,
    pub hidden_layer: LinearGrad,
    pub output: LinearGrad,
}

impl CriticModel {
    pub fn new(config: ModelConfig, rng: &mut RngStream) -> Self {
        let (e, h) = (config.embed, config.hidden);
        Self {
            config,
            embed: Linear::new("critic.embed", 2, e, rng),
            encoder: LstmCell::new("critic.encoder", e, h, rng),
            process: Attention::new("critic.process", h, rng),
            hidden_layer: Linear::new("critic.hidden", h, h, rng),
            output: Linear::new("critic.output", h, 1, rng),
        }
    }
}

impl ParamSet for CriticModel {
    type Grad = CriticGrads;

    fn params(&self) -> Vec<&Param> {
        let mut v = self.embed.params();
        v.extend(self.encoder.params());
        v.extend(self.process.params());
        v.extend(self.hidden_layer.params());
        v.extend(self.output.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.embed.params_mut();
        v.extend(self.encoder.params_mut());
        v.extend(self.process.params_mut());
        v.extend(self.hidden_layer.params_mut());
        v.extend(self.output.params_mut());
        v
    }

    fn zero_grad_like(&self) -> CriticGrads {
        CriticGrads {
            embed: self.embed.zero_grad_like(),
            encoder: self.encoder.zero_grad_like(),
            process: self.process.zero_grad_like(),
            hidden_layer: self.hidden_layer.zero_grad_like(),
            output: self.output.zero_grad_like(),
        }
    }
}

impl GradSlots for CriticGrads {
    fn slots(&self) -> Vec<&[f64]> {
        let mut v = self.embed.slots();
        v.extend(self.encoder.slots());
        v.extend(self.process.slots());
        v.extend(self.hidden_layer.slots());
        v.extend(self.output.slots());
        v
    }

    fn slots_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.embed.slots_mut();
        v.extend(self.encoder.slots_mut());
        v.extend(self.process.slots_mut());
        v.extend(self.hidden_layer.slots_mut());
        v.extend(self.output.slots_mut());
        v
    }
}

struct Glimpse {
    cache: ScoreCache,
    weights: Vec<f64>,
}

pub struct CriticTrace {
    enc: Encoded,
    projected: Vec<Vec<f64>>,
    glimpses: Vec<Glimpse>,
    query: Vec<f64>,
    hidden_act: Vec<f64>,
}

pub fn critic_forward(model: &CriticModel, coords: &[City]) -> Result<f64> {
    critic_forward_traced(model, coords).map(|(v, _)| v)
}

pub fn critic_forward_traced(model: &CriticModel, coords: &[City]) -> Result<(f64, CriticTrace)> {
    let enc = encode_with(&model.embed, &model.encoder, coords)?;
    let projected = model.process.project(&enc.states);
    let h = model.config.hidden;
    let mut query = enc.final_state.h.clone();
    let mut glimpses = Vec::with_capacity(model.config.process_rounds);
    let no_mask = vec![false; coords.len()];
    for _ in 0..model.config.process_rounds {
        let (u, cache) = model.process.scores(&projected, &query);
        let weights = softmax(&u, &no_mask)?;
        let mut next = vec![0.0; h];
        for (w, r) in weights.iter().zip(&projected) {
            crate::nn::axpy(*w, r, &mut next);
        }
        glimpses.push(Glimpse { cache, weights });
        query = next;
    }
    let mut hidden_act = vec![0.0; h];
    model.hidden_layer.forward_into(&query, &mut hidden_act);
    hidden_act.iter_mut().for_each(|x| *x = x.max(0.0));
    let mut out = [0.0];
    model.output.forward_into(&hidden_act, &mut out);
    if !out[0].is_finite() {
        return Err(Error::NonFinite("critic output".into()));
    }
    Ok((
        out[0],
        CriticTrace {
            enc,
            projected,
            glimpses,
            query,
            hidden_act,
        },
    ))
}

/// Accumulates `d_out * d critic(coords) / d theta` into `grad`.
pub fn critic_backward(model: &CriticModel, coords: &[City], trace: &CriticTrace, d_out: f64, grad: &mut CriticGrads) {
    let h = model.config.hidden;
    let n = coords.len();
    let mut d_hidden = vec![0.0; h];
    model
        .output
        .backward(&trace.hidden_act, &[d_out], &mut grad.output, Some(&mut d_hidden));
    for (d, a) in d_hidden.iter_mut().zip(&trace.hidden_act) {
        if *a <= 0.0 {
            *d = 0.0;
        }
    }
    let mut dq = vec![0.0; h];
    model
        .hidden_layer
        .backward(&trace.query, &d_hidden, &mut grad.hidden_layer, Some(&mut dq));

    let mut d_projected = vec![vec![0.0; h]; n];
    for g in trace.glimpses.iter().rev() {
        let d_weights: Vec<f64> = trace.projected.iter().map(|r| dot(r, &dq)).collect();
        for (w, dp) in g.weights.iter().zip(d_projected.iter_mut()) {
            crate::nn::axpy(*w, &dq, dp);
        }
        let du = softmax_backward(&g.weights, &d_weights);
        dq = model
            .process
            .backward_scores(&g.cache, &du, &mut d_projected, &mut grad.process);
    }
    let d_states = model
        .process
        .backward_project(&trace.enc.states, &d_projected, &mut grad.process);
    let d_embedded = vec![vec![0.0; model.config.embed]; n];
    encode_backward(
        &model.embed,
        &model.encoder,
        coords,
        &trace.enc,
        &d_states,
        (dq, vec![0.0; h]),
        d_embedded,
        &mut grad.embed,
        &mut grad.encoder,
    );
}
