//! Portfolio pursuit by backward value-function training.
//!
//! A next-step value model `U` is swept backwards from the terminal loss; its
//! increments give each customer a k-value, the break-even multiplier that folds
//! portfolio value into a per-quote margin. A network `V(f, t)` fitted to the
//! recentred estimates supplies k-values at quoting time.

pub mod leaving;
pub mod quote;
pub mod sampler;
pub mod training;
pub mod value;
pub mod value_fn;

pub use leaving::{
    expected_value_after_lapse, k_value_leaving, value_recursion_leaving, LapseModel, DEFAULT_N_MC,
};
pub use quote::{action_for_k, quote_price_rl, RlPolicy, RlQuote, K_CLAMP};
pub use sampler::{
    composition, high_coverage_mean, sample_high_coverage, sample_portfolios, sample_previously_on_policy,
    sample_target_on_policy, ExhaustiveSampler, PortfolioSampler, SamplerConfig,
};
pub use training::{
    backward_pass, train_value_function, value_estimates, CustomerDraws, KPolicy, TrainingProblem,
    ValueEstimateDataset, ValueRow, ValueTrainingConfig,
};
pub use value::{
    k_value, k_value_inference, LinearFitter, LinearValue, NextStep, NextStepFitter, PortfolioValue,
    TabularFitter, TabularValue, TerminalValue, TimeValue,
};
pub use value_fn::{
    fit_mlp_value, fit_tabular_value, MlpValue, PursuitValue, TabularValueFn, ValueFn, ValueNetConfig,
};
