//! Amortised action models: a GP fitted to optimiser outputs so quoting never
//! solves the optimisation online.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conversion::Acceptance;
use super::gp::{GaussianProcess, GpConfig};
use super::optimize::{optimize_action, ACTION_MAX, ACTION_MIN};
use crate::error::{Error, Result};
use crate::market::MarketVariables;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionConfig {
    pub samples: usize,
    pub gp: GpConfig,
    pub k_location: f64,
    pub k_scale: f64,
}

impl Default for ActionConfig {
    fn default() -> Self {
        Self {
            samples: 500,
            gp: GpConfig::default(),
            k_location: 1.0,
            k_scale: 0.1,
        }
    }
}

/// Maps market variables (and, for the portfolio-aware variant, a k-value) to an
/// action in `[1, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionModel {
    gp: GaussianProcess,
    uses_k: bool,
}

/// Training triple for the action model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSample {
    pub market: MarketVariables,
    pub k: f64,
    pub action: f64,
}

/// Inverse-CDF draw from a Laplace distribution.
pub fn sample_laplace<R: Rng + ?Sized>(location: f64, scale: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn pick_markets<R: Rng + ?Sized>(
    markets: &[MarketVariables],
    n: usize,
    rng: &mut R,
) -> Result<Vec<MarketVariables>> {
    if markets.is_empty() {
        return Err(Error::InsufficientData {
            model: "action model",
            reason: "no market samples".into(),
        });
    }
    Ok(if markets.len() >= n {
        sample_indices(rng, markets.len(), n)
            .into_iter()
            .map(|i| markets[i])
            .collect()
    } else {
        (0..n)
            .map(|_| markets[rng.random_range(0..markets.len())])
            .collect()
    })
}

impl ActionModel {
    pub fn uses_k(&self) -> bool {
        self.uses_k
    }

    fn inputs(&self, m: &MarketVariables, k: f64) -> Vec<f64> {
        if self.uses_k {
            vec![m.m1, m.m3, m.m5, k]
        } else {
            vec![m.m1, m.m3, m.m5]
        }
    }

    /// Fits on precomputed samples.
    pub fn fit_samples(samples: &[ActionSample], uses_k: bool, gp: GpConfig) -> Result<Self> {
        let xs: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| {
                let mut x = vec![s.market.m1, s.market.m3, s.market.m5];
                if uses_k {
                    x.push(s.k);
                }
                x
            })
            .collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.action).collect();
        Ok(Self {
            gp: GaussianProcess::fit(&xs, &ys, gp)?,
            uses_k,
        })
    }

    /// Unclamped regression output.
    pub fn raw(&self, m: &MarketVariables, k: f64) -> f64 {
        self.gp.predict(&self.inputs(m, k))
    }

    /// Action for market `m`; `k` is ignored by the plain model.
    pub fn predict(&self, m: &MarketVariables, k: f64) -> f64 {
        self.raw(m, k).clamp(ACTION_MIN, ACTION_MAX)
    }
}

/// Samples with `k = 1` (profit-maximising), targets from the optimiser.
pub fn plain_action_samples<P: Acceptance + ?Sized, R: Rng + ?Sized>(
    p: &P,
    markets: &[MarketVariables],
    n: usize,
    rng: &mut R,
) -> Result<Vec<ActionSample>> {
    Ok(pick_markets(markets, n, rng)?
        .into_iter()
        .map(|m| ActionSample {
            market: m,
            k: 1.0,
            action: optimize_action(p, &m, 1.0),
        })
        .collect())
}

/// Samples with `k ~ Laplace(location, scale)` drawn independently per market.
pub fn k_action_samples<P: Acceptance + ?Sized, R: Rng + ?Sized>(
    p: &P,
    markets: &[MarketVariables],
    cfg: &ActionConfig,
    rng: &mut R,
) -> Result<Vec<ActionSample>> {
    let picked = pick_markets(markets, cfg.samples, rng)?;
    Ok(picked
        .into_iter()
        .map(|m| {
            let k = sample_laplace(cfg.k_location, cfg.k_scale, rng);
            ActionSample {
                market: m,
                k,
                action: optimize_action(p, &m, k),
            }
        })
        .collect())
}

pub fn fit_action_model_plain<P: Acceptance + ?Sized, R: Rng + ?Sized>(
    p: &P,
    markets: &[MarketVariables],
    cfg: &ActionConfig,
    rng: &mut R,
) -> Result<ActionModel> {
    let samples = plain_action_samples(p, markets, cfg.samples, rng)?;
    ActionModel::fit_samples(&samples, false, cfg.gp)
}

pub fn fit_action_model_k<P: Acceptance + ?Sized, R: Rng + ?Sized>(
    p: &P,
    markets: &[MarketVariables],
    cfg: &ActionConfig,
    rng: &mut R,
) -> Result<ActionModel> {
    let samples = k_action_samples(p, markets, cfg, rng)?;
    ActionModel::fit_samples(&samples, true, cfg.gp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    /// Acceptance falls off logistically once our price passes the cheapest rival.
    struct Logistic;
    impl Acceptance for Logistic {
        fn accept_prob(&self, m: &MarketVariables, a: f64) -> f64 {
            1.0 / (1.0 + (12.0 * (a - m.m1 - 0.1)).exp())
        }
    }

    struct Flat;
    impl Acceptance for Flat {
        fn accept_prob(&self, _: &MarketVariables, _: f64) -> f64 {
            0.3
        }
    }

    fn markets(n: usize, seed: u64) -> Vec<MarketVariables> {
        let mut rng = seeded(seed);
        (0..n)
            .map(|_| {
                let base = rng.random_range(1.05..1.35);
                MarketVariables::sorted([
                    base,
                    base + rng.random_range(0.0..0.08),
                    base + rng.random_range(0.05..0.15),
                ])
            })
            .collect()
    }

    #[test]
    fn plain_model_reproduces_training_targets() {
        let mut rng = seeded(1);
        let samples = plain_action_samples(&Logistic, &markets(800, 1), 500, &mut rng).unwrap();
        let model = ActionModel::fit_samples(&samples, false, GpConfig::default()).unwrap();
        for s in &samples {
            assert!((model.predict(&s.market, 1.0) - s.action).abs() < 0.02);
        }
    }

    #[test]
    fn outputs_are_clamped() {
        let mut rng = seeded(2);
        let model =
            fit_action_model_k(&Logistic, &markets(600, 2), &ActionConfig::default(), &mut rng).unwrap();
        for _ in 0..1000 {
            let m = MarketVariables::sorted([
                rng.random_range(-3.0..5.0),
                rng.random_range(-3.0..5.0),
                rng.random_range(-3.0..5.0),
            ]);
            let a = model.predict(&m, rng.random_range(-2.0..4.0));
            assert!((ACTION_MIN..=ACTION_MAX).contains(&a));
        }
    }

    #[test]
    fn flat_acceptance_gives_top_action_everywhere() {
        let mut rng = seeded(3);
        let model =
            fit_action_model_plain(&Flat, &markets(300, 3), &ActionConfig::default(), &mut rng).unwrap();
        for m in markets(50, 4) {
            assert!((model.predict(&m, 1.0) - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn laplace_draws_are_symmetric_about_one() {
        let mut rng = seeded(4);
        let n = 10_000;
        let below = (0..n)
            .filter(|_| sample_laplace(1.0, 0.1, &mut rng) < 1.0)
            .count() as f64;
        let se = (0.25 * n as f64).sqrt();
        assert!((below - 0.5 * n as f64).abs() < 3.0 * se);
    }

    #[test]
    fn k_model_is_monotone_in_k_and_fits_targets() {
        let mut rng = seeded(5);
        let samples =
            k_action_samples(&Logistic, &markets(800, 5), &ActionConfig::default(), &mut rng).unwrap();
        let model = ActionModel::fit_samples(&samples, true, GpConfig::default()).unwrap();
        for s in &samples {
            assert!((model.predict(&s.market, s.k) - s.action).abs() < 0.02);
        }
        let ks: Vec<f64> = (0..=6).map(|i| 0.7 + 0.1 * i as f64).collect();
        for m in markets(20, 6) {
            // The optimiser itself is monotone in k under a monotone acceptance stub.
            let exact: Vec<f64> = ks.iter().map(|&k| optimize_action(&Logistic, &m, k)).collect();
            assert!(exact.windows(2).all(|w| w[1] >= w[0] - 1e-9));
            let fitted: Vec<f64> = ks.iter().map(|&k| model.predict(&m, k)).collect();
            assert!(
                fitted.windows(2).all(|w| w[1] >= w[0] - 0.02),
                "fitted not monotone: {fitted:?}"
            );
        }
    }
}
