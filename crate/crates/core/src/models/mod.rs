//! From-scratch regressors behind the pricing pipeline: a random forest for market
//! imputation, a small network for conversion, and a Gaussian process for the
//! amortised action model.

pub mod action;
pub mod blob;
pub mod conversion;
pub mod encoding;
pub mod forest;
pub mod gp;
pub mod market_model;
pub mod mlp;
pub mod optimize;

pub use action::{
    fit_action_model_k, fit_action_model_plain, sample_laplace, ActionConfig, ActionModel, ActionSample,
};
pub use blob::ZooModel;
pub use conversion::{Acceptance, ConversionConfig, ConversionModel, ConversionRow};
pub use encoding::{CustomerEncoder, Dataset, Standardizer};
pub use forest::{ForestConfig, RandomForest};
pub use gp::{GaussianProcess, GpConfig};
pub use market_model::MarketModel;
pub use mlp::{Loss, Mlp, TrainConfig};
pub use optimize::{maximize_on_interval, optimize_action, ACTION_MAX, ACTION_MIN};
