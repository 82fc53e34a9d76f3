//! Small fully connected networks with tanh hidden units and a scalar output,
//! optionally with a direct linear path from input to output, trained by
//! mini-batch Adam.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    /// Output is a logit; targets are 0 or 1.
    LogLoss,
    SquaredError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 3000,
            batch_size: 64,
            learning_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    n_in: usize,
    n_out: usize,
    /// Row-major `n_out × n_in`.
    w: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    /// Input-to-output weights; empty when the network has no linear path.
    #[serde(default)]
    skip: Vec<f64>,
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    /// `sizes` lists layer widths from input to output; the last must be 1.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && *sizes.last().unwrap() == 1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let limit = (6.0 / (n_in + n_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
                Dense {
                    n_in,
                    n_out,
                    w: (0..n_in * n_out).map(|_| dist.sample(rng)).collect(),
                    b: vec![0.0; n_out],
                }
            })
            .collect();
        Self {
            layers,
            skip: Vec::new(),
        }
    }

    /// Like [`Mlp::new`], plus a linear path from input to output, so far from
    /// the data the output follows a linear trend instead of saturating.
    pub fn with_skip<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::new(sizes, rng);
        net.skip = vec![0.0; sizes[0]];
        net
    }

    fn skip_term(&self, x: &[f64]) -> f64 {
        self.skip.iter().zip(x).map(|(w, v)| w * v).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let mut next = l.b.clone();
            for (o, out) in next.iter_mut().enumerate() {
                let row = &l.w[o * l.n_in..(o + 1) * l.n_in];
                *out += row.iter().zip(&cur).map(|(w, v)| w * v).sum::<f64>();
                if li != last {
                    *out = out.tanh();
                }
            }
            cur = next;
        }
        cur[0] + self.skip_term(x)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum::<usize>() + self.skip.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend_from_slice(&l.w);
            p.extend_from_slice(&l.b);
        }
        p.extend_from_slice(&self.skip);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&p[at..at + nw]);
            at += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&p[at..at + nb]);
            at += nb;
        }
        self.skip.copy_from_slice(&p[at..]);
    }

    fn sample_loss(loss: Loss, out: f64, y: f64) -> (f64, f64) {
        match loss {
            Loss::LogLoss => (log1p_exp(out) - y * out, sigmoid(out) - y),
            Loss::SquaredError => (0.5 * (out - y).powi(2), out - y),
        }
    }

    /// Mean loss over the rows in `batch` and its gradient in [`Mlp::params`] order.
    pub fn loss_and_gradient(
        &self,
        xs: &[Vec<f64>],
        ys: &[f64],
        batch: &[usize],
        loss: Loss,
    ) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.param_count()];
        let mut total = 0.0;
        let n_layers = self.layers.len();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        for &i in batch {
            acts.clear();
            acts.push(xs[i].clone());
            for (li, l) in self.layers.iter().enumerate() {
                let input = &acts[li];
                let mut next = l.b.clone();
                for (o, out) in next.iter_mut().enumerate() {
                    let row = &l.w[o * l.n_in..(o + 1) * l.n_in];
                    *out += row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>();
                    if li + 1 != n_layers {
                        *out = out.tanh();
                    }
                }
                acts.push(next);
            }
            let (l, d_out) = Self::sample_loss(loss, acts[n_layers][0] + self.skip_term(&xs[i]), ys[i]);
            total += l;

            let mut offset = grad.len() - self.skip.len();
            for (g, v) in grad[offset..].iter_mut().zip(&xs[i]) {
                *g += d_out * v;
            }
            // Backward pass; `delta` is dLoss/d(pre-activation) of the current layer.
            let mut delta = vec![d_out];
            for li in (0..n_layers).rev() {
                let layer = &self.layers[li];
                offset -= layer.w.len() + layer.b.len();
                let input = &acts[li];
                let (gw, gb) =
                    grad[offset..offset + layer.w.len() + layer.b.len()].split_at_mut(layer.w.len());
                for o in 0..layer.n_out {
                    gb[o] += delta[o];
                    let row = &mut gw[o * layer.n_in..(o + 1) * layer.n_in];
                    for (g, v) in row.iter_mut().zip(input) {
                        *g += delta[o] * v;
                    }
                }
                if li > 0 {
                    let mut prev = vec![0.0; layer.n_in];
                    for o in 0..layer.n_out {
                        let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                        for (p, w) in prev.iter_mut().zip(row) {
                            *p += delta[o] * w;
                        }
                    }
                    for (p, a) in prev.iter_mut().zip(input) {
                        *p *= 1.0 - a * a;
                    }
                    delta = prev;
                }
            }
        }
        let scale = 1.0 / batch.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        (total * scale, grad)
    }

    /// Mini-batch Adam on `loss`.
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        xs: &[Vec<f64>],
        ys: &[f64],
        loss: Loss,
        cfg: TrainConfig,
        rng: &mut R,
    ) {
        if xs.is_empty() {
            return;
        }
        let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
        let mut params = self.params();
        let mut m = vec![0.0; params.len()];
        let mut v = vec![0.0; params.len()];
        let batch_size = cfg.batch_size.clamp(1, xs.len());
        let mut batch = vec![0usize; batch_size];
        for step in 1..=cfg.steps {
            for b in batch.iter_mut() {
                *b = rng.random_range(0..xs.len());
            }
            let (_, g) = self.loss_and_gradient(xs, ys, &batch, loss);
            let c1 = 1.0 - f64::powi(beta1, step as i32);
            let c2 = 1.0 - f64::powi(beta2, step as i32);
            for j in 0..params.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                params[j] -= cfg.learning_rate * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
            }
            self.set_params(&params);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn toy(rng: &mut crate::rng::SimRng) -> (Vec<Vec<f64>>, Vec<f64>) {
        let xs: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys = xs
            .iter()
            .map(|x| (x[0] - x[1] * x[2] > 0.0) as u8 as f64)
            .collect();
        (xs, ys)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = seeded(3);
        let (xs, ys) = toy(&mut rng);
        let batch: Vec<usize> = (0..xs.len()).collect();
        for (loss, skip) in [
            (Loss::LogLoss, false),
            (Loss::SquaredError, false),
            (Loss::LogLoss, true),
            (Loss::SquaredError, true),
        ] {
            for _ in 0..10 {
                let mut net = if skip {
                    Mlp::with_skip(&[3, 6, 5, 1], &mut rng)
                } else {
                    Mlp::new(&[3, 6, 5, 1], &mut rng)
                };
                // Random perturbation of the parameters.
                let p: Vec<f64> = net
                    .params()
                    .iter()
                    .map(|w| w + rng.random_range(-0.3..0.3))
                    .collect();
                net.set_params(&p);
                let (_, g) = net.loss_and_gradient(&xs, &ys, &batch, loss);
                let h = 1e-5;
                for j in 0..p.len() {
                    let mut plus = p.clone();
                    plus[j] += h;
                    let mut minus = p.clone();
                    minus[j] -= h;
                    let mut a = net.clone();
                    a.set_params(&plus);
                    let mut b = net.clone();
                    b.set_params(&minus);
                    let fd = (a.loss_and_gradient(&xs, &ys, &batch, loss).0
                        - b.loss_and_gradient(&xs, &ys, &batch, loss).0)
                        / (2.0 * h);
                    let denom = fd.abs().max(g[j].abs()).max(1e-6);
                    assert!((fd - g[j]).abs() / denom < 1e-4, "param {j}: fd {fd} vs {}", g[j]);
                }
            }
        }
    }

    #[test]
    fn training_reduces_squared_error() {
        let mut rng = seeded(4);
        let xs: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 200.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x[0]).sin()).collect();
        let mut net = Mlp::new(&[1, 16, 16, 1], &mut rng);
        let all: Vec<usize> = (0..200).collect();
        let before = net.loss_and_gradient(&xs, &ys, &all, Loss::SquaredError).0;
        net.train(&xs, &ys, Loss::SquaredError, TrainConfig::default(), &mut rng);
        let after = net.loss_and_gradient(&xs, &ys, &all, Loss::SquaredError).0;
        assert!(after < 0.05 * before, "{before} -> {after}");
    }

    #[test]
    fn linear_path_keeps_trend_beyond_the_data() {
        let mut rng = seeded(6);
        let xs: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 50.0 - 1.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -2.0 * x[0]).collect();
        let mut net = Mlp::with_skip(&[1, 8, 8, 1], &mut rng);
        assert_eq!(
            net.param_count(),
            Mlp::new(&[1, 8, 8, 1], &mut rng).param_count() + 1
        );
        net.train(&xs, &ys, Loss::SquaredError, TrainConfig::default(), &mut rng);
        let far = [5.0, 10.0, 20.0].map(|x| net.forward(&[x]));
        assert!(far[0] > far[1] && far[1] > far[2], "{far:?}");
        assert!(far[0] < net.forward(&[1.0]));
    }
}
