use super::{dot, matvec, matvec_t_acc, outer_acc, GradSlots, Param, ParamSet};
use crate::rng::RngStream;

/// Additive attention scoring `u_i = v . tanh(W_ref r_i + W_q q)`.
///
/// References are projected once per input sequence with
/// [`Attention::project`]; each query then costs one `H x H` product plus
/// `n` tanh rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub w_ref: Param,
    pub w_q: Param,
    pub v: Param,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrad {
    pub w_ref: Vec<f64>,
    pub w_q: Vec<f64>,
    pub v: Vec<f64>,
}

/// Per-query forward state kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ScoreCache {
    query: Vec<f64>,
    /// `tanh(W_ref r_i + W_q q)`, one row of length H per reference.
    act: Vec<Vec<f64>>,
}

impl Attention {
    pub fn new(name: &str, hidden: usize, rng: &mut RngStream) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        Self {
            w_ref: Param::uniform(format!("{name}.w_ref"), hidden, hidden, bound, rng),
            w_q: Param::uniform(format!("{name}.w_q"), hidden, hidden, bound, rng),
            v: Param::uniform(format!("{name}.v"), hidden, 1, bound, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_q.rows
    }

    /// `W_ref r_i` for every reference.
    pub fn project(&self, refs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let h = self.hidden();
        refs.iter()
            .map(|r| {
                let mut out = vec![0.0; h];
                matvec(&self.w_ref.values, h, self.w_ref.cols, r, &mut out);
                out
            })
            .collect()
    }

    /// Scores every projected reference against `query`.
    pub fn scores(&self, projected: &[Vec<f64>], query: &[f64]) -> (Vec<f64>, ScoreCache) {
        let h = self.hidden();
        let mut qp = vec![0.0; h];
        matvec(&self.w_q.values, h, h, query, &mut qp);
        let mut act = Vec::with_capacity(projected.len());
        let mut u = Vec::with_capacity(projected.len());
        for r in projected {
            let a: Vec<f64> = r.iter().zip(&qp).map(|(x, y)| (x + y).tanh()).collect();
            u.push(dot(&self.v.values, &a));
            act.push(a);
        }
        (
            u,
            ScoreCache {
                query: query.to_vec(),
                act,
            },
        )
    }

    /// Backward through [`Attention::scores`]. Adds into `d_projected` and
    /// returns the query gradient. Zero entries of `du` are skipped.
    pub fn backward_scores(
        &self,
        cache: &ScoreCache,
        du: &[f64],
        d_projected: &mut [Vec<f64>],
        grad: &mut AttentionGrad,
    ) -> Vec<f64> {
        let h = self.hidden();
        let mut dqp = vec![0.0; h];
        for (i, &d) in du.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let a = &cache.act[i];
            let dp = &mut d_projected[i];
            for j in 0..h {
                grad.v[j] += d * a[j];
                let dpre = d * self.v.values[j] * (1.0 - a[j] * a[j]);
                dp[j] += dpre;
                dqp[j] += dpre;
            }
        }
        outer_acc(&mut grad.w_q, h, &dqp, &cache.query);
        let mut dq = vec![0.0; h];
        matvec_t_acc(&self.w_q.values, h, h, &dqp, &mut dq);
        dq
    }

    /// Backward through [`Attention::project`]; returns reference gradients.
    pub fn backward_project(
        &self,
        refs: &[Vec<f64>],
        d_projected: &[Vec<f64>],
        grad: &mut AttentionGrad,
    ) -> Vec<Vec<f64>> {
        let h = self.hidden();
        let cols = self.w_ref.cols;
        refs.iter()
            .zip(d_projected)
            .map(|(r, dp)| {
                outer_acc(&mut grad.w_ref, cols, dp, r);
                let mut dr = vec![0.0; cols];
                matvec_t_acc(&self.w_ref.values, h, cols, dp, &mut dr);
                dr
            })
            .collect()
    }
}

impl ParamSet for Attention {
    type Grad = AttentionGrad;

    fn params(&self) -> Vec<&Param> {
        vec![&self.w_ref, &self.w_q, &self.v]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w_ref, &mut self.w_q, &mut self.v]
    }

    fn zero_grad_like(&self) -> AttentionGrad {
        AttentionGrad {
            w_ref: vec![0.0; self.w_ref.len()],
            w_q: vec![0.0; self.w_q.len()],
            v: vec![0.0; self.v.len()],
        }
    }
}

impl GradSlots for AttentionGrad {
    fn slots(&self) -> Vec<&[f64]> {
        vec![&self.w_ref, &self.w_q, &self.v]
    }

    fn slots_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w_ref, &mut self.w_q, &mut self.v]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(31);
        let mut att = Attention::new("a", 5, &mut rng);
        let refs: Vec<Vec<f64>> = (0..4).map(|_| (0..5).map(|_| rng.uniform() - 0.5).collect()).collect();
        let q: Vec<f64> = (0..5).map(|_| rng.uniform() - 0.5).collect();
        let probe: Vec<f64> = (0..4).map(|_| rng.uniform() - 0.5).collect();
        let loss = |a: &Attention, refs: &[Vec<f64>], q: &[f64]| {
            let p = a.project(refs);
            dot(&a.scores(&p, q).0, &probe)
        };
        let projected = att.project(&refs);
        let (_, cache) = att.scores(&projected, &q);
        let mut grad = att.zero_grad_like();
        let mut dp = vec![vec![0.0; 5]; 4];
        let dq = att.backward_scores(&cache, &probe, &mut dp, &mut grad);
        let dr = att.backward_project(&refs, &dp, &mut grad);

        let h = 1e-5;
        let check = |fd: f64, an: f64| {
            assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-6), "fd {fd} an {an}");
        };
        let analytic = grad.flatten();
        let mut k = 0;
        for pi in 0..3 {
            for j in 0..att.params()[pi].len() {
                let orig = att.params()[pi].values[j];
                att.params_mut()[pi].values[j] = orig + h;
                let up = loss(&att, &refs, &q);
                att.params_mut()[pi].values[j] = orig - h;
                let down = loss(&att, &refs, &q);
                att.params_mut()[pi].values[j] = orig;
                check((up - down) / (2.0 * h), analytic[k]);
                k += 1;
            }
        }
        for j in 0..5 {
            let (mut a, mut b) = (q.clone(), q.clone());
            a[j] += h;
            b[j] -= h;
            check((loss(&att, &refs, &a) - loss(&att, &refs, &b)) / (2.0 * h), dq[j]);
            for i in 0..4 {
                let (mut a, mut b) = (refs.clone(), refs.clone());
                a[i][j] += h;
                b[i][j] -= h;
                check((loss(&att, &a, &q) - loss(&att, &b, &q)) / (2.0 * h), dr[i][j]);
            }
        }
    }
}
