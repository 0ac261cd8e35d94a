use super::{matvec_t_acc, outer_acc, sigmoid, GradSlots, Param, ParamSet};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// LSTM cell. Gate blocks are stacked in the order input, forget, cell,
/// output; each weight matrix is `4H x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_ih: Param,
    pub w_hh: Param,
    pub bias: Param,
    hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrad {
    pub w_ih: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct LstmCache {
    input: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// activated gates `[i | f | g | o]`
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCell {
    /// Uniform init with bound `1/sqrt(H)`; forget-gate bias starts at 1.
    pub fn new(name: &str, input: usize, hidden: usize, rng: &mut RngStream) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let w_ih = Param::uniform(format!("{name}.w_ih"), 4 * hidden, input, bound, rng);
        let w_hh = Param::uniform(format!("{name}.w_hh"), 4 * hidden, hidden, bound, rng);
        let mut bias = Param::uniform(format!("{name}.bias"), 4 * hidden, 1, bound, rng);
        bias.values[hidden..2 * hidden].iter_mut().for_each(|b| *b = 1.0);
        Self {
            w_ih,
            w_hh,
            bias,
            hidden,
        }
    }

    pub fn from_params(w_ih: Param, w_hh: Param, bias: Param) -> Result<Self> {
        let hidden = w_hh.cols;
        let shape_err = |p: &Param, expected: Vec<usize>| Error::Shape {
            context: p.name.clone(),
            expected,
            actual: p.shape().to_vec(),
        };
        if w_hh.rows != 4 * hidden {
            return Err(shape_err(&w_hh, vec![4 * hidden, hidden]));
        }
        if w_ih.rows != 4 * hidden {
            return Err(shape_err(&w_ih, vec![4 * hidden, w_ih.cols]));
        }
        if bias.len() != 4 * hidden {
            return Err(shape_err(&bias, vec![4 * hidden, 1]));
        }
        Ok(Self {
            w_ih,
            w_hh,
            bias,
            hidden,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.cols
    }

    /// One checked step.
    pub fn step(&self, input: &[f64], state: &LstmState) -> Result<(LstmState, LstmCache)> {
        if input.len() != self.input_dim() || state.h.len() != self.hidden || state.c.len() != self.hidden {
            return Err(Error::Shape {
                context: format!("lstm step {}", self.w_ih.name),
                expected: vec![self.input_dim(), self.hidden, self.hidden],
                actual: vec![input.len(), state.h.len(), state.c.len()],
            });
        }
        Ok(self.step_unchecked(input, state))
    }

    pub fn step_unchecked(&self, input: &[f64], state: &LstmState) -> (LstmState, LstmCache) {
        let h = self.hidden;
        let ni = self.input_dim();
        let mut z = self.bias.values.clone();
        for (r, zr) in z.iter_mut().enumerate() {
            let a: f64 = self.w_ih.values[r * ni..(r + 1) * ni]
                .iter()
                .zip(input)
                .map(|(w, x)| w * x)
                .sum();
            let b: f64 = self.w_hh.values[r * h..(r + 1) * h]
                .iter()
                .zip(&state.h)
                .map(|(w, x)| w * x)
                .sum();
            *zr += a + b;
        }
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = if (2 * h..3 * h).contains(&k) { zk.tanh() } else { sigmoid(*zk) };
        }
        let mut c = vec![0.0; h];
        let mut hn = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        for j in 0..h {
            let (i, f, g, o) = (z[j], z[h + j], z[2 * h + j], z[3 * h + j]);
            c[j] = f * state.c[j] + i * g;
            tanh_c[j] = c[j].tanh();
            hn[j] = o * tanh_c[j];
        }
        let cache = LstmCache {
            input: input.to_vec(),
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            gates: z,
            tanh_c,
        };
        (LstmState { h: hn, c }, cache)
    }

    /// Backward through one step given gradients w.r.t. the new `h` and `c`.
    /// Returns `(d_input, d_h_prev, d_c_prev)`.
    pub fn backward(
        &self,
        cache: &LstmCache,
        dh: &[f64],
        dc: &[f64],
        grad: &mut LstmGrad,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden;
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for j in 0..h {
            let (i, f, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let tc = cache.tanh_c[j];
            let d_o = dh[j] * tc;
            let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
            let d_i = dct * gg;
            let d_g = dct * i;
            let d_f = dct * cache.c_prev[j];
            dc_prev[j] = dct * f;
            dz[j] = d_i * i * (1.0 - i);
            dz[h + j] = d_f * f * (1.0 - f);
            dz[2 * h + j] = d_g * (1.0 - gg * gg);
            dz[3 * h + j] = d_o * o * (1.0 - o);
        }
        outer_acc(&mut grad.w_ih, self.input_dim(), &dz, &cache.input);
        outer_acc(&mut grad.w_hh, h, &dz, &cache.h_prev);
        for (b, d) in grad.bias.iter_mut().zip(&dz) {
            *b += d;
        }
        let mut dx = vec![0.0; self.input_dim()];
        matvec_t_acc(&self.w_ih.values, 4 * h, self.input_dim(), &dz, &mut dx);
        let mut dh_prev = vec![0.0; h];
        matvec_t_acc(&self.w_hh.values, 4 * h, h, &dz, &mut dh_prev);
        (dx, dh_prev, dc_prev)
    }
}

impl ParamSet for LstmCell {
    type Grad = LstmGrad;

    fn params(&self) -> Vec<&Param> {
        vec![&self.w_ih, &self.w_hh, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.bias]
    }

    fn zero_grad_like(&self) -> LstmGrad {
        LstmGrad {
            w_ih: vec![0.0; self.w_ih.len()],
            w_hh: vec![0.0; self.w_hh.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }
}

impl GradSlots for LstmGrad {
    fn slots(&self) -> Vec<&[f64]> {
        vec![&self.w_ih, &self.w_hh, &self.bias]
    }

    fn slots_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.bias]
    }
}
