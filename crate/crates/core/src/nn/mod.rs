//! Dense layers with hand-written backward passes, plus Adam.
//!
//! Weights are row-major `rows x cols` and map a `cols`-vector to a
//! `rows`-vector. Gradients are accumulated into separate gradient structs
//! so that several rollouts can be differentiated concurrently against one
//! read-only parameter set and reduced afterwards.

mod adam;
mod attention;
mod linear;
mod lstm;
mod param;

pub use adam::{adam_step, clip_global_norm, AdamConfig};
pub use attention::{Attention, AttentionGrad, ScoreCache};
pub use linear::{Linear, LinearGrad};
pub use lstm::{LstmCache, LstmCell, LstmGrad, LstmState};
pub use param::{GradSlots, Param, ParamSet};

use crate::error::{Error, Result};

/// `out = W x` for a row-major `rows x cols` matrix.
#[inline]
pub(crate) fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        *o = dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `dx += W^T dy`.
#[inline]
pub(crate) fn matvec_t_acc(w: &[f64], rows: usize, cols: usize, dy: &[f64], dx: &mut [f64]) {
    for r in 0..rows {
        let g = dy[r];
        if g != 0.0 {
            axpy(g, &w[r * cols..(r + 1) * cols], dx);
        }
    }
}

/// `dW += dy x^T`.
#[inline]
pub(crate) fn outer_acc(dw: &mut [f64], cols: usize, dy: &[f64], x: &[f64]) {
    for (r, &g) in dy.iter().enumerate() {
        if g != 0.0 {
            axpy(g, x, &mut dw[r * cols..(r + 1) * cols]);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Softmax over the entries with `mask[i] == false`; masked entries get
/// probability exactly zero. Uses max-subtraction.
pub fn softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(Error::Shape {
            context: "softmax mask".into(),
            expected: vec![logits.len()],
            actual: vec![mask.len()],
        });
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| !m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::NoFeasibleCity);
    }
    if !max.is_finite() {
        return Err(Error::NonFinite("softmax logits".into()));
    }
    let mut p: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { 0.0 } else { (l - max).exp() })
        .collect();
    let z: f64 = p.iter().sum();
    for v in &mut p {
        *v /= z;
    }
    Ok(p)
}

/// Gradient of `sum_i dp_i p_i` w.r.t. the logits, given softmax output `p`.
pub fn softmax_backward(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let s = dot(p, dp);
    p.iter().zip(dp).map(|(&pi, &di)| pi * (di - s)).collect()
}
