//! Agent-based insurance market seen through a price comparison site.
//!
//! Each step a customer arrives, every rival quotes, we quote, and the customer
//! picks one offer or walks away. Rivals adapt only between epochs.

pub mod choice;
pub mod competitor;
pub mod customer;
pub mod epoch;

use serde::{Deserialize, Serialize};

pub use choice::{market_variables, ChoiceModel, ChoiceOutcome, MarketVariables};
pub use competitor::{
    adapt_competitors, competitor_offers, initial_competitors, CompetitorConfig, CompetitorState,
    EpochSummary, InsurerId, Offer, OUR_ID,
};
pub use customer::{
    sample_customer, true_cost, CostConfig, Customer, CustomerConfig, CustomerFeatures, CustomerGenerator,
};
pub use epoch::{
    run_epoch, write_records, EpochOutcome, EpochSpec, EpochStreams, InteractionRecord, QuoteContext,
    QuotePolicy, StepOutcome, RECORD_COLUMNS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarketConfig {
    pub customers: CustomerConfig,
    pub cost: CostConfig,
    pub competitors: CompetitorConfig,
    /// Price-to-cost ratio at which walking away is as attractive as buying.
    pub walk_away: f64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            customers: CustomerConfig::default(),
            cost: CostConfig::default(),
            competitors: CompetitorConfig::default(),
            walk_away: 1.3,
        }
    }
}
