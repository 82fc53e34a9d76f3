//! Gaussian-process regression with a Matérn-5/2 kernel and fixed hyperparameters.
//!
//! The mean function is a least-squares linear fit on the standardised inputs; the
//! GP models the residuals. Away from the data, predictions fall back to the linear
//! trend rather than to a constant.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::encoding::Standardizer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    /// Length-scale on standardised inputs.
    pub length_scale: f64,
    /// Observation noise variance relative to the standardised residual variance.
    pub noise: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            length_scale: 0.3,
            noise: 1e-4,
        }
    }
}

pub fn matern52(r: f64, length_scale: f64) -> f64 {
    let s = 5f64.sqrt() * r / length_scale;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianProcess {
    cfg: GpConfig,
    scaler: Standardizer,
    inputs: Vec<Vec<f64>>,
    /// Intercept followed by one coefficient per input.
    trend: Vec<f64>,
    alpha: Vec<f64>,
    residual_scale: f64,
}

fn least_squares(x: &[Vec<f64>], y: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let d = x[0].len() + 1;
    let design = DMatrix::from_fn(n, d, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let mut gram = design.transpose() * &design;
    for j in 1..d {
        gram[(j, j)] += ridge;
    }
    let rhs = design.transpose() * DVector::from_column_slice(y);
    gram.cholesky()
        .map(|c| c.solve(&rhs).iter().copied().collect())
        .ok_or_else(|| Error::Numerical("singular normal equations in trend fit".into()))
}

impl GaussianProcess {
    pub fn fit(x: &[Vec<f64>], y: &[f64], cfg: GpConfig) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::InsufficientData {
                model: "gaussian process",
                reason: format!("{} inputs for {} targets", x.len(), y.len()),
            });
        }
        let scaler = Standardizer::fit(x);
        let inputs: Vec<Vec<f64>> = x.iter().map(|r| scaler.transform(r)).collect();
        let trend = least_squares(&inputs, y, 1e-6)?;
        let residuals: Vec<f64> = inputs
            .iter()
            .zip(y)
            .map(|(xi, yi)| yi - Self::trend_at(&trend, xi))
            .collect();
        let n = residuals.len() as f64;
        let sd = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
        let residual_scale = if sd > 1e-12 { sd } else { 1.0 };

        let n = inputs.len();
        let k = DMatrix::from_fn(n, n, |i, j| {
            matern52(dist(&inputs[i], &inputs[j]), cfg.length_scale)
        });
        let mut jitter = cfg.noise;
        let chol = loop {
            let mut kj = k.clone();
            for i in 0..n {
                kj[(i, i)] += jitter;
            }
            if let Some(c) = kj.cholesky() {
                break c;
            }
            jitter *= 10.0;
            if jitter > 1.0 {
                return Err(Error::Numerical("kernel matrix is not positive definite".into()));
            }
        };
        let target = DVector::from_iterator(n, residuals.iter().map(|r| r / residual_scale));
        let alpha = chol.solve(&target).iter().copied().collect();
        Ok(Self {
            cfg,
            scaler,
            inputs,
            trend,
            alpha,
            residual_scale,
        })
    }

    fn trend_at(trend: &[f64], x: &[f64]) -> f64 {
        trend[0] + trend[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let z = self.scaler.transform(x);
        let kernel: f64 = self
            .inputs
            .iter()
            .zip(&self.alpha)
            .map(|(xi, a)| a * matern52(dist(xi, &z), self.cfg.length_scale))
            .sum();
        Self::trend_at(&self.trend, &z) + self.residual_scale * kernel
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
