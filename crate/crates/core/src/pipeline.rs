//! The standard pricing pipeline: customer → market variables → action → offer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{CustomerFeatures, MarketVariables};
use crate::models::{
    fit_action_model_k, fit_action_model_plain, ActionConfig, ActionModel, ConversionConfig, ConversionModel,
    ConversionRow, ForestConfig, MarketModel,
};

pub use crate::market::InteractionRecord;

/// Multipliers applied to explored quotes, drawn uniformly.
pub const EXPLORATION_FACTORS: [f64; 6] = [0.93, 0.95, 0.97, 1.03, 1.05, 1.07];
/// Bounds on any realised action after exploration or modulation.
pub const STORED_ACTION_MIN: f64 = 0.9;
pub const STORED_ACTION_MAX: f64 = 2.2;
pub const RANDOM_ACTION_MAX: f64 = 1.2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub forest: ForestConfig,
    pub conversion: ConversionConfig,
    pub action: ActionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModels {
    pub market: MarketModel,
    pub conversion: ConversionModel,
    pub action: ActionModel,
}

/// Records from the last `window` epochs present in `history`.
pub fn training_window(history: &[InteractionRecord], window: usize) -> Vec<&InteractionRecord> {
    let Some(last) = history.iter().map(|r| r.epoch).max() else {
        return Vec::new();
    };
    let first = last.saturating_sub(window.max(1) as u32 - 1);
    history.iter().filter(|r| r.epoch >= first).collect()
}

pub fn train_pipeline<R: Rng>(
    history: &[InteractionRecord],
    window: usize,
    cfg: &ModelConfig,
    rng: &mut R,
) -> Result<PipelineModels> {
    let rows = training_window(history, window);
    if rows.is_empty() {
        return Err(Error::InsufficientData {
            model: "pipeline",
            reason: "empty history".into(),
        });
    }
    let market_rows: Vec<(CustomerFeatures, MarketVariables)> =
        rows.iter().map(|r| (r.customer.clone(), r.market)).collect();
    let market = MarketModel::fit(&market_rows, cfg.forest, rng)?;
    let conversion_rows: Vec<ConversionRow> = rows
        .iter()
        .map(|r| ConversionRow {
            market: r.market,
            action: r.action,
            accepted: r.accepted,
        })
        .collect();
    let conversion = ConversionModel::fit(&conversion_rows, &cfg.conversion, rng)?;
    let markets: Vec<MarketVariables> = rows.iter().map(|r| r.market).collect();
    let action = fit_action_model_plain(&conversion, &markets, &cfg.action, rng)?;
    Ok(PipelineModels {
        market,
        conversion,
        action,
    })
}

impl PipelineModels {
    /// Same market and conversion models with a policy that also takes a k-value.
    pub fn with_k_policy<R: Rng>(
        &self,
        history: &[InteractionRecord],
        window: usize,
        cfg: &ActionConfig,
        rng: &mut R,
    ) -> Result<PipelineModels> {
        let markets: Vec<MarketVariables> = training_window(history, window)
            .iter()
            .map(|r| r.market)
            .collect();
        Ok(PipelineModels {
            market: self.market.clone(),
            conversion: self.conversion.clone(),
            action: fit_action_model_k(&self.conversion, &markets, cfg, rng)?,
        })
    }

    /// Policy action before any exploration or modulation.
    pub fn base_action(&self, c: &CustomerFeatures) -> f64 {
        self.action.predict(&self.market.predict(c), 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote {
    pub action: f64,
    pub price: f64,
    /// Factor applied by exploration, if this quote was explored.
    pub explored: Option<f64>,
}

/// Applies exploration to `base` with probability `rate` (only when `explore`).
pub fn explore_action<R: Rng + ?Sized>(
    base: f64,
    explore: bool,
    rate: f64,
    rng: &mut R,
) -> (f64, Option<f64>) {
    if explore && rng.random::<f64>() < rate {
        let factor = EXPLORATION_FACTORS[rng.random_range(0..EXPLORATION_FACTORS.len())];
        (
            (base * factor).clamp(STORED_ACTION_MIN, STORED_ACTION_MAX),
            Some(factor),
        )
    } else {
        (base, None)
    }
}

pub fn quote_price<R: Rng + ?Sized>(
    models: &PipelineModels,
    c: &CustomerFeatures,
    cost: f64,
    explore: bool,
    rate: f64,
    rng: &mut R,
) -> Quote {
    let (action, explored) = explore_action(models.base_action(c), explore, rate, rng);
    Quote {
        action,
        price: cost * action,
        explored,
    }
}

/// First-epoch policy before any model exists.
pub fn random_policy_quote<R: Rng + ?Sized>(cost: f64, rng: &mut R) -> Quote {
    let action = rng.random_range(1.0..=RANDOM_ACTION_MAX);
    Quote {
        action,
        price: cost * action,
        explored: None,
    }
}
