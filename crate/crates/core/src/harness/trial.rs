//! One paired trial: shared burn-in, then test epochs per method.

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use crate::baseline::{
    grid_search_params, historic_frequency, modulate, modulation_factor, BaselineParams, GridSearchSetup,
    HistoricRates,
};
use crate::error::Result;
use crate::market::{
    adapt_competitors, initial_competitors, run_epoch, CompetitorState, CustomerFeatures, CustomerGenerator,
    EpochOutcome, EpochSpec, EpochStreams, InteractionRecord, QuoteContext, QuotePolicy,
};
use crate::pipeline::{quote_price, random_policy_quote, train_pipeline, training_window, PipelineModels};
use crate::portfolio::{
    generate_indicator_sets, generate_target, loss, FrequencyVector, IndicatorSet, TargetPortfolio,
};
use crate::replay::CustomerReplayBuffer;
use crate::rl::sampler::SamplerConfig;
use crate::rl::value_fn::PursuitValue;
use crate::rl::{
    train_value_function, CustomerDraws, LapseModel, RlPolicy, TrainingProblem, ValueTrainingConfig,
    DEFAULT_N_MC, K_CLAMP,
};
use crate::rng::{self, SimRng, Stream};

/// Customers drawn to place the indicator-set boundaries.
const REFERENCE_CUSTOMERS: usize = 2000;
/// Customer ids in the reference sample never collide with market arrivals.
const REFERENCE_FIRST_ID: u64 = u64::MAX / 2;

/// Everything both methods of a paired trial share.
#[derive(Debug, Clone)]
pub struct BurnIn {
    pub trial: usize,
    pub trial_seed: u64,
    pub indicator_sets: Vec<IndicatorSet>,
    /// Interactions from every burn-in epoch, in order.
    pub records: Vec<InteractionRecord>,
    /// End-of-epoch portfolio of each burn-in epoch.
    pub frequencies: Vec<FrequencyVector>,
    /// Rival states entering the first test epoch.
    pub competitors: Vec<CompetitorState>,
    /// Models trained after the last burn-in epoch, frozen for testing.
    pub models: PipelineModels,
    pub rates: HistoricRates,
    pub target: TargetPortfolio,
    pub buffer: CustomerReplayBuffer,
    pub baseline_params: BaselineParams,
}

pub fn run_burn_in(cfg: &ExperimentConfig, trial: usize) -> Result<BurnIn> {
    cfg.validate()?;
    let ts = rng::trial_seed(cfg.seed, trial as u64);
    let window = cfg.training_window_epochs;

    let mut set_rng = rng::stream(ts, 0, Stream::Target);
    let mut generator = CustomerGenerator::new(cfg.market.customers.clone(), REFERENCE_FIRST_ID);
    let reference: Vec<CustomerFeatures> = (0..REFERENCE_CUSTOMERS)
        .map(|_| generator.sample(&mut set_rng).features)
        .collect();
    let sets = generate_indicator_sets(&reference, cfg.indicator_sets, &mut set_rng);

    let mut competitors = initial_competitors(
        cfg.competitors,
        &cfg.market.competitors,
        &mut rng::stream(ts, 0, Stream::Competitors),
    );
    let mut records: Vec<InteractionRecord> = Vec::new();
    let mut frequencies = Vec::new();
    let mut models: Option<PipelineModels> = None;

    for epoch in 1..=cfg.burnin_epochs as u32 {
        let spec = EpochSpec {
            epoch,
            horizon: cfg.horizon,
            indicator_sets: &sets,
            lapse_q: cfg.lapse_q,
        };
        let mut streams = EpochStreams::new(ts, epoch as u64);
        let out = match &models {
            None => {
                let mut policy =
                    |ctx: &QuoteContext<'_>, r: &mut SimRng| random_policy_quote(ctx.cost, r).action;
                run_epoch(&cfg.market, spec, &mut policy, &competitors, &mut streams)
            }
            Some(m) => {
                let rate = cfg.exploration_rate;
                let mut policy = |ctx: &QuoteContext<'_>, r: &mut SimRng| {
                    quote_price(m, ctx.customer, ctx.cost, true, rate, r).action
                };
                run_epoch(&cfg.market, spec, &mut policy, &competitors, &mut streams)
            }
        };
        competitors = adapt_competitors(
            &competitors,
            &out.summary,
            cfg.market.competitors.adaptation_noise,
            &mut rng::stream(ts, epoch as u64, Stream::Adaptation),
        );
        records.extend(out.records);
        frequencies.push(out.frequency);
        models = Some(train_pipeline(
            &records,
            window,
            &cfg.models,
            &mut rng::stream(ts, epoch as u64, Stream::ModelFit),
        )?);
    }
    let models = models.expect("at least one burn-in epoch");
    let last = cfg.burnin_epochs as u64;

    let rates = historic_frequency(&frequencies)?;
    let target = generate_target(&rates.f_bar, &mut rng::stream(ts, last, Stream::Target));
    let buffer = CustomerReplayBuffer::from_records(training_window(&records, window), &sets)?;

    let base_actions: Vec<f64> = buffer
        .entries()
        .iter()
        .map(|e| models.base_action(&e.features))
        .collect();
    let setup = GridSearchSetup {
        buffer: &buffer,
        base_actions: &base_actions,
        acceptance: &models.conversion,
        rates: &rates,
        target: &target,
        lambda: cfg.lambda,
        horizon: cfg.horizon,
    };
    let baseline_params = grid_search_params(
        &BaselineParams::grid(),
        cfg.grid_budget,
        &setup,
        &mut rng::stream(ts, last, Stream::GridSearch),
    )?;

    Ok(BurnIn {
        trial,
        trial_seed: ts,
        indicator_sets: sets,
        records,
        frequencies,
        competitors,
        models,
        rates,
        target,
        buffer,
        baseline_params,
    })
}

/// A method ready to quote in test epochs.
#[derive(Debug, Clone)]
pub enum PreparedMethod {
    Pipeline,
    Baseline(BaselineParams),
    Rl {
        models: PipelineModels,
        value: PursuitValue,
    },
}

impl PreparedMethod {
    pub fn method(&self) -> Method {
        match self {
            PreparedMethod::Pipeline => Method::Pipeline,
            PreparedMethod::Baseline(_) => Method::Baseline,
            PreparedMethod::Rl { .. } => Method::Rl,
        }
    }
}

pub fn value_training_config(cfg: &ExperimentConfig) -> ValueTrainingConfig {
    ValueTrainingConfig {
        draws: CustomerDraws::Sample(cfg.draws),
        j: cfg.j,
        j_plus: cfg.j_plus,
        k_clamp: K_CLAMP,
        u_ridge: cfg.u_ridge,
        lapse: LapseModel { q: cfg.lapse_q },
        n_mc: DEFAULT_N_MC,
        parallel: false,
    }
}

pub fn prepare_method(cfg: &ExperimentConfig, burn: &BurnIn, method: Method) -> Result<PreparedMethod> {
    Ok(match method {
        Method::Pipeline => PreparedMethod::Pipeline,
        Method::Baseline => PreparedMethod::Baseline(burn.baseline_params),
        Method::Rl => {
            let ts = burn.trial_seed;
            let next = cfg.burnin_epochs as u64 + 1;
            let models = burn.models.with_k_policy(
                &burn.records,
                cfg.training_window_epochs,
                &cfg.models.action,
                &mut rng::stream(ts, next, Stream::ModelFit),
            )?;
            let problem = TrainingProblem {
                policy: &models.action,
                acceptance: &models.conversion,
                buffer: &burn.buffer,
                target: &burn.target,
                lambda: cfg.lambda,
                horizon: cfg.horizon,
            };
            let sampler = SamplerConfig::new(&burn.rates, &burn.target, cfg.horizon, cfg.sigma);
            let (value, _) = train_value_function(
                &problem,
                &sampler,
                &value_training_config(cfg),
                &cfg.value_net,
                &mut rng::stream(ts, next, Stream::ValueTraining),
            )?;
            PreparedMethod::Rl { models, value }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPoint {
    pub t: usize,
    pub action: f64,
    pub accepted: bool,
    pub step_profit: f64,
    /// Cumulative profit up to and including this step.
    pub profit: f64,
    /// `λ · L(f_t, f*)` for the portfolio after this step.
    pub loss: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSeries {
    pub epoch: u32,
    pub steps: Vec<StepPoint>,
    pub final_frequency: Vec<u32>,
}

impl EpochSeries {
    pub fn last(&self) -> &StepPoint {
        self.steps.last().expect("epochs have at least one step")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub epochs: Vec<EpochSeries>,
}

impl TrialResult {
    fn mean_of(&self, f: impl Fn(&StepPoint) -> f64) -> f64 {
        self.epochs.iter().map(|e| f(e.last())).sum::<f64>() / self.epochs.len() as f64
    }

    /// Final profit averaged over test epochs.
    pub fn final_profit(&self) -> f64 {
        self.mean_of(|s| s.profit)
    }

    pub fn final_loss(&self) -> f64 {
        self.mean_of(|s| s.loss)
    }

    pub fn final_reward(&self) -> f64 {
        self.final_profit() - self.final_loss()
    }
}

fn series(outcome: &EpochOutcome, target: &TargetPortfolio, lambda: f64, epoch: u32) -> EpochSeries {
    let mut profit = 0.0;
    let steps = outcome
        .steps
        .iter()
        .zip(&outcome.records)
        .enumerate()
        .map(|(i, (s, r))| {
            profit += s.profit;
            let l = lambda * loss(&s.portfolio, target);
            StepPoint {
                t: i + 1,
                action: r.action,
                accepted: s.accepted,
                step_profit: s.profit,
                profit,
                loss: l,
                reward: profit - l,
            }
        })
        .collect();
    EpochSeries {
        epoch,
        steps,
        final_frequency: outcome.frequency.counts.clone(),
    }
}

struct MethodPolicy<'a> {
    prepared: &'a PreparedMethod,
    burn: &'a BurnIn,
    lapse: LapseModel,
}

impl QuotePolicy for MethodPolicy<'_> {
    fn quote(&mut self, ctx: &QuoteContext<'_>, rng: &mut SimRng) -> f64 {
        let models = &self.burn.models;
        match self.prepared {
            PreparedMethod::Pipeline => models.base_action(ctx.customer),
            PreparedMethod::Baseline(p) => {
                let factor = modulation_factor(ctx.membership, &self.burn.rates, &self.burn.target, *p);
                modulate(models.base_action(ctx.customer), factor)
            }
            PreparedMethod::Rl { models, value } => {
                let policy = RlPolicy {
                    models,
                    value,
                    lapse: self.lapse,
                    n_mc: DEFAULT_N_MC,
                };
                policy
                    .quote(ctx.portfolio, ctx.membership, ctx.t, ctx.customer, ctx.cost, rng)
                    .action
            }
        }
    }
}

/// Test epochs with frozen models; rivals keep adapting between epochs.
pub fn run_test_epochs(cfg: &ExperimentConfig, burn: &BurnIn, prepared: &PreparedMethod) -> TrialResult {
    let ts = burn.trial_seed;
    let mut competitors = burn.competitors.clone();
    let mut policy = MethodPolicy {
        prepared,
        burn,
        lapse: LapseModel { q: cfg.lapse_q },
    };
    let first = cfg.burnin_epochs as u32 + 1;
    let epochs = (first..first + cfg.test_epochs as u32)
        .map(|epoch| {
            let spec = EpochSpec {
                epoch,
                horizon: cfg.horizon,
                indicator_sets: &burn.indicator_sets,
                lapse_q: cfg.lapse_q,
            };
            let mut streams = EpochStreams::new(ts, epoch as u64);
            let out = run_epoch(&cfg.market, spec, &mut policy, &competitors, &mut streams);
            competitors = adapt_competitors(
                &competitors,
                &out.summary,
                cfg.market.competitors.adaptation_noise,
                &mut rng::stream(ts, epoch as u64, Stream::Adaptation),
            );
            series(&out, &burn.target, cfg.lambda, epoch)
        })
        .collect();
    TrialResult {
        trial: burn.trial,
        seed: ts,
        method: prepared.method(),
        epochs,
    }
}

pub fn run_trial(cfg: &ExperimentConfig, trial: usize, method: Method) -> Result<TrialResult> {
    let burn = run_burn_in(cfg, trial)?;
    let prepared = prepare_method(cfg, &burn, method)?;
    Ok(run_test_epochs(cfg, &burn, &prepared))
}

/// Per-trial record of everything that defines the experiment for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialManifest {
    pub trial: usize,
    pub master_seed: u64,
    pub trial_seed: u64,
    pub method: Method,
    pub target: Vec<u32>,
    pub historic_frequency: Vec<f64>,
    pub indicator_sets: Vec<IndicatorSet>,
    pub baseline_params: BaselineParams,
    pub config: ExperimentConfig,
}

impl TrialManifest {
    pub fn new(cfg: &ExperimentConfig, burn: &BurnIn, method: Method) -> Self {
        Self {
            trial: burn.trial,
            master_seed: cfg.seed,
            trial_seed: burn.trial_seed,
            method,
            target: burn.target.target.clone(),
            historic_frequency: burn.rates.f_bar.clone(),
            indicator_sets: burn.indicator_sets.clone(),
            baseline_params: burn.baseline_params,
            config: cfg.clone(),
        }
    }
}
