use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::choice::{market_variables, ChoiceModel, MarketVariables};
use super::competitor::{competitor_offers, CompetitorState, EpochSummary, Offer, OUR_ID};
use super::customer::{CustomerFeatures, CustomerGenerator};
use super::MarketConfig;
use crate::portfolio::{membership, FrequencyVector, IndicatorSet};
use crate::rng::{self, SimRng, Stream};

/// One logged interaction: what the customer looked like, what we bid, what the
/// rivals bid and whether the customer bought from us.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub epoch: u32,
    pub t: u32,
    pub customer: CustomerFeatures,
    pub cost: f64,
    pub action: f64,
    pub price: f64,
    pub competitor_offers: Vec<Offer>,
    pub market: MarketVariables,
    pub accepted: bool,
}

pub const RECORD_COLUMNS: [&str; 17] = [
    "epoch",
    "t",
    "customer_id",
    "age",
    "region",
    "occupation",
    "vehicle_value",
    "years_licensed",
    "income",
    "risk_score",
    "cost",
    "our_action",
    "our_price",
    "m1",
    "m3",
    "m5",
    "accepted",
];

impl InteractionRecord {
    pub fn csv_row(&self) -> Vec<String> {
        let c = &self.customer;
        vec![
            self.epoch.to_string(),
            self.t.to_string(),
            c.customer_id.to_string(),
            c.age.to_string(),
            c.region.to_string(),
            c.occupation.to_string(),
            c.vehicle_value.to_string(),
            c.years_licensed.to_string(),
            c.income.to_string(),
            c.risk_score.to_string(),
            self.cost.to_string(),
            self.action.to_string(),
            self.price.to_string(),
            self.market.m1.to_string(),
            self.market.m3.to_string(),
            self.market.m5.to_string(),
            (self.accepted as u8).to_string(),
        ]
    }
}

/// Writes records as CSV with the [`RECORD_COLUMNS`] header.
pub fn write_records<W: std::io::Write>(records: &[InteractionRecord], out: W) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

/// What a pricing policy sees when quoting.
#[derive(Debug)]
pub struct QuoteContext<'a> {
    pub customer: &'a CustomerFeatures,
    pub cost: f64,
    /// 1-based step within the epoch.
    pub t: usize,
    pub horizon: usize,
    pub portfolio: &'a FrequencyVector,
    pub membership: &'a [bool],
}

/// Our insurer's pricing rule. Returns the price multiplier applied to cost.
pub trait QuotePolicy {
    fn quote(&mut self, ctx: &QuoteContext<'_>, rng: &mut SimRng) -> f64;
}

impl<F> QuotePolicy for F
where
    F: FnMut(&QuoteContext<'_>, &mut SimRng) -> f64,
{
    fn quote(&mut self, ctx: &QuoteContext<'_>, rng: &mut SimRng) -> f64 {
        self(ctx, rng)
    }
}

/// Independent random streams for one epoch.
pub struct EpochStreams {
    pub customers: SimRng,
    pub offers: SimRng,
    pub choices: SimRng,
    pub policy: SimRng,
    pub lapse: SimRng,
}

impl EpochStreams {
    pub fn new(trial_seed: u64, epoch: u64) -> Self {
        Self {
            customers: rng::stream(trial_seed, epoch, Stream::Customers),
            offers: rng::stream(trial_seed, epoch, Stream::CompetitorOffers),
            choices: rng::stream(trial_seed, epoch, Stream::Choices),
            policy: rng::stream(trial_seed, epoch, Stream::Policy),
            lapse: rng::stream(trial_seed, epoch, Stream::Lapse),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    pub profit: f64,
    /// Our portfolio after this step.
    pub portfolio: FrequencyVector,
}

#[derive(Debug, Clone)]
pub struct EpochOutcome {
    pub records: Vec<InteractionRecord>,
    pub frequency: FrequencyVector,
    pub profit: f64,
    pub summary: EpochSummary,
    pub steps: Vec<StepOutcome>,
}

#[derive(Debug, Clone, Copy)]
pub struct EpochSpec<'a> {
    pub epoch: u32,
    pub horizon: usize,
    pub indicator_sets: &'a [IndicatorSet],
    /// Per-step probability that each portfolio customer leaves.
    pub lapse_q: f64,
}

/// Runs `horizon` sequential customer arrivals starting from an empty portfolio.
pub fn run_epoch(
    market: &MarketConfig,
    spec: EpochSpec<'_>,
    policy: &mut dyn QuotePolicy,
    competitors: &[CompetitorState],
    streams: &mut EpochStreams,
) -> EpochOutcome {
    assert!(spec.horizon >= 1, "an epoch needs at least one step");
    let mut generator = CustomerGenerator::new(market.customers.clone(), spec.epoch as u64 * 10_000_000);
    let choice = ChoiceModel {
        walk_away: market.walk_away,
    };
    let mut portfolio = FrequencyVector::zeros(spec.indicator_sets.len());
    let mut summary = EpochSummary::new(competitors.len() + 1);
    let mut records = Vec::with_capacity(spec.horizon);
    let mut steps = Vec::with_capacity(spec.horizon);
    let mut profit = 0.0;

    for t in 1..=spec.horizon {
        let customer = generator.sample(&mut streams.customers);
        let cost = market.cost_of(&customer.features);
        let others = competitor_offers(cost, competitors, &mut streams.offers);
        let market_vars = market_variables(&others, cost).expect("at least one rival and positive cost");
        let member = membership(spec.indicator_sets, &customer.features);

        let action = policy.quote(
            &QuoteContext {
                customer: &customer.features,
                cost,
                t,
                horizon: spec.horizon,
                portfolio: &portfolio,
                membership: &member,
            },
            &mut streams.policy,
        );
        let ours = Offer {
            insurer_id: OUR_ID,
            price: cost * action,
        };
        let outcome = choice.choose(
            &ours,
            &others,
            cost,
            customer.price_sensitivity(),
            &mut streams.choices,
        );
        let accepted = outcome.chosen_insurer == Some(OUR_ID);
        if let Some(id) = outcome.chosen_insurer {
            summary.record_sale(id);
        }
        let step_profit = if accepted { cost * (action - 1.0) } else { 0.0 };
        profit += step_profit;
        if accepted {
            portfolio.add_customer(&member);
        }
        if spec.lapse_q > 0.0 {
            thin(&mut portfolio, spec.lapse_q, &mut streams.lapse);
        }

        records.push(InteractionRecord {
            epoch: spec.epoch,
            t: t as u32,
            customer: customer.features,
            cost,
            action,
            price: ours.price,
            competitor_offers: others,
            market: market_vars,
            accepted,
        });
        steps.push(StepOutcome {
            accepted,
            profit: step_profit,
            portfolio: portfolio.clone(),
        });
    }

    EpochOutcome {
        records,
        frequency: portfolio,
        profit,
        summary,
        steps,
    }
}

/// Each counted customer independently stays with probability `1 − q`.
pub fn thin<R: Rng + ?Sized>(f: &mut FrequencyVector, q: f64, rng: &mut R) {
    for c in f.counts.iter_mut() {
        if *c > 0 {
            *c = Binomial::new(*c as u64, 1.0 - q)
                .expect("valid binomial")
                .sample(rng) as u32;
        }
    }
}
