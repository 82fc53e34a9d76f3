//! Conversion model: probability that a customer accepts our offer given market
//! variables and our action.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoding::Standardizer;
use super::mlp::{sigmoid, Loss, Mlp, TrainConfig};
use crate::error::{Error, Result};
use crate::market::MarketVariables;

/// Anything that can say how likely a customer is to accept action `a`.
pub trait Acceptance: Sync {
    fn accept_prob(&self, m: &MarketVariables, a: f64) -> f64;

    /// Acceptance as a function of the action alone for fixed market variables.
    /// Implementations may precompute per-market work here.
    fn at_market(&self, m: MarketVariables) -> Box<dyn Fn(f64) -> f64 + Send + Sync + '_> {
        Box::new(move |a| self.accept_prob(&m, a))
    }
}

impl<A: Acceptance + ?Sized> Acceptance for &A {
    fn accept_prob(&self, m: &MarketVariables, a: f64) -> f64 {
        (**self).accept_prob(m, a)
    }

    fn at_market(&self, m: MarketVariables) -> Box<dyn Fn(f64) -> f64 + Send + Sync + '_> {
        (**self).at_market(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConversionConfig {
    pub hidden: [usize; 2],
    pub train: TrainConfig,
    /// Action grid for the monotone correction.
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
}

impl Default for ConversionConfig {
    fn default() -> Self {
        Self {
            hidden: [16, 16],
            train: TrainConfig {
                steps: 3000,
                batch_size: 64,
                learning_rate: 0.01,
            },
            grid_lo: 0.9,
            grid_hi: 2.2,
            grid_points: 131,
        }
    }
}

/// One observation: market variables, the action we took, whether it converted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConversionRow {
    pub market: MarketVariables,
    pub action: f64,
    pub accepted: bool,
}

pub const MIN_CONVERSION_ROWS: usize = 50;

/// Network over `(m1, m3, m5, a)` and the gaps `a − m1, a − m3, a − m5`, with a
/// linear path and a logistic output, made non-increasing in the action by isotonic regression on
/// an action grid for each market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionModel {
    scaler: Standardizer,
    net: Mlp,
    grid: Vec<f64>,
}

/// Pool-adjacent-violators fit of a non-increasing sequence (equal weights).
pub fn isotonic_decreasing(values: &[f64]) -> Vec<f64> {
    // Blocks of (mean, weight).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (m2, w2) = blocks[blocks.len() - 1];
            let (m1, w1) = blocks[blocks.len() - 2];
            if m1 >= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = ((m1 * w1 as f64 + m2 * w2 as f64) / w as f64, w);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, w)| std::iter::repeat_n(m, w))
        .collect()
}

/// Piecewise-linear interpolation of `values` on `grid`, constant beyond the ends.
fn interpolate(grid: &[f64], values: &[f64], a: f64) -> f64 {
    if a <= grid[0] {
        return values[0];
    }
    let last = grid.len() - 1;
    if a >= grid[last] {
        return values[last];
    }
    let step = (grid[last] - grid[0]) / last as f64;
    let i = (((a - grid[0]) / step) as usize).min(last - 1);
    let w = (a - grid[i]) / (grid[i + 1] - grid[i]);
    values[i] * (1.0 - w) + values[i + 1] * w
}

const FEATURES: usize = 7;

fn features(m: &MarketVariables, a: f64) -> Vec<f64> {
    vec![m.m1, m.m3, m.m5, a, a - m.m1, a - m.m3, a - m.m5]
}

impl ConversionModel {
    pub fn fit<R: Rng + ?Sized>(rows: &[ConversionRow], cfg: &ConversionConfig, rng: &mut R) -> Result<Self> {
        if rows.len() < MIN_CONVERSION_ROWS {
            return Err(Error::InsufficientData {
                model: "conversion model",
                reason: format!("{} rows, need {MIN_CONVERSION_ROWS}", rows.len()),
            });
        }
        let raw: Vec<Vec<f64>> = rows.iter().map(|r| features(&r.market, r.action)).collect();
        let scaler = Standardizer::fit(&raw);
        let xs: Vec<Vec<f64>> = raw.iter().map(|r| scaler.transform(r)).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.accepted as u8 as f64).collect();
        let mut net = Mlp::with_skip(&[FEATURES, cfg.hidden[0], cfg.hidden[1], 1], rng);
        net.train(&xs, &ys, Loss::LogLoss, cfg.train, rng);
        let n = cfg.grid_points.max(2);
        let grid = (0..n)
            .map(|i| cfg.grid_lo + (cfg.grid_hi - cfg.grid_lo) * i as f64 / (n - 1) as f64)
            .collect();
        Ok(Self { scaler, net, grid })
    }

    /// Network output before the monotone correction.
    pub fn raw_prob(&self, m: &MarketVariables, a: f64) -> f64 {
        let x = self.scaler.transform(&features(m, a));
        sigmoid(self.net.forward(&x))
    }

    /// Corrected acceptance probabilities on the action grid.
    pub fn curve(&self, m: &MarketVariables) -> Vec<f64> {
        let raw: Vec<f64> = self.grid.iter().map(|&a| self.raw_prob(m, a)).collect();
        isotonic_decreasing(&raw)
    }

    pub fn predict(&self, m: &MarketVariables, a: f64) -> f64 {
        interpolate(&self.grid, &self.curve(m), a)
    }
}

impl Acceptance for ConversionModel {
    fn accept_prob(&self, m: &MarketVariables, a: f64) -> f64 {
        self.predict(m, a)
    }

    fn at_market(&self, m: MarketVariables) -> Box<dyn Fn(f64) -> f64 + Send + Sync + '_> {
        let values = self.curve(&m);
        Box::new(move |a| interpolate(&self.grid, &values, a))
    }
}
