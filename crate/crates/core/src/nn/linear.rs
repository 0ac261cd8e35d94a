use super::{matvec, matvec_t_acc, outer_acc, GradSlots, Param, ParamSet};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Affine map `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Param,
    pub b: Param,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Linear {
    pub fn new(name: &str, input: usize, output: usize, rng: &mut RngStream) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Self {
            w: Param::uniform(format!("{name}.w"), output, input, bound, rng),
            b: Param::uniform(format!("{name}.b"), output, 1, bound, rng),
        }
    }

    pub fn from_params(w: Param, b: Param) -> Result<Self> {
        if b.len() != w.rows {
            return Err(Error::Shape {
                context: format!("bias {}", b.name),
                expected: vec![w.rows],
                actual: vec![b.len()],
            });
        }
        Ok(Self { w, b })
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape {
                context: format!("input to {}", self.w.name),
                expected: vec![self.w.rows, self.w.cols],
                actual: vec![input.len()],
            });
        }
        let mut out = vec![0.0; self.output_dim()];
        self.forward_into(input, &mut out);
        Ok(out)
    }

    /// Unchecked forward into a preallocated buffer.
    #[inline]
    pub fn forward_into(&self, input: &[f64], out: &mut [f64]) {
        matvec(&self.w.values, self.w.rows, self.w.cols, input, out);
        for (o, b) in out.iter_mut().zip(&self.b.values) {
            *o += b;
        }
    }

    /// Accumulates parameter gradients for `dy` and adds the input
    /// gradient into `dx`.
    pub fn backward(&self, input: &[f64], dy: &[f64], grad: &mut LinearGrad, dx: Option<&mut [f64]>) {
        outer_acc(&mut grad.w, self.w.cols, dy, input);
        for (g, d) in grad.b.iter_mut().zip(dy) {
            *g += d;
        }
        if let Some(dx) = dx {
            matvec_t_acc(&self.w.values, self.w.rows, self.w.cols, dy, dx);
        }
    }
}

impl ParamSet for Linear {
    type Grad = LinearGrad;

    fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }

    fn zero_grad_like(&self) -> LinearGrad {
        LinearGrad {
            w: vec![0.0; self.w.len()],
            b: vec![0.0; self.b.len()],
        }
    }
}

impl GradSlots for LinearGrad {
    fn slots(&self) -> Vec<&[f64]> {
        vec![&self.w, &self.b]
    }

    fn slots_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w, &mut self.b]
    }
}
