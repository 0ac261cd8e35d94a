use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A named dense parameter block with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
}

impl Param {
    pub fn from_values(name: impl Into<String>, rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols, "parameter value count");
        let n = values.len();
        Self {
            name: name.into(),
            rows,
            cols,
            values,
            grad: vec![0.0; n],
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
        }
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self::from_values(name, rows, cols, vec![0.0; rows * cols])
    }

    /// Entries uniform in `[-bound, bound]`.
    pub fn uniform(name: impl Into<String>, rows: usize, cols: usize, bound: f64, rng: &mut RngStream) -> Self {
        let values = (0..rows * cols)
            .map(|_| (2.0 * rng.uniform() - 1.0) * bound)
            .collect();
        Self::from_values(name, rows, cols, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("parameter {}", self.name)))
        }
    }
}

/// Ordered access to a model's parameters. The order is fixed and shared
/// with the matching gradient type and the checkpoint format.
pub trait ParamSet {
    type Grad: GradSlots;

    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;
    /// A zeroed gradient accumulator shaped like this model.
    fn zero_grad_like(&self) -> Self::Grad;

    fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Adds `grad` into each parameter's `grad` field.
    fn accumulate(&mut self, grad: &Self::Grad) {
        for (p, g) in self.params_mut().into_iter().zip(grad.slots()) {
            for (a, b) in p.grad.iter_mut().zip(g) {
                *a += b;
            }
        }
    }

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

/// Gradient accumulator with one slot per parameter, in `ParamSet` order.
pub trait GradSlots {
    fn slots(&self) -> Vec<&[f64]>;
    fn slots_mut(&mut self) -> Vec<&mut [f64]>;

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.slots_mut().into_iter().zip(other.slots()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for s in self.slots_mut() {
            s.iter_mut().for_each(|x| *x *= factor);
        }
    }

    fn squared_norm(&self) -> f64 {
        self.slots().iter().flat_map(|s| s.iter()).map(|x| x * x).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.slots().concat()
    }
}
