//! Experiment configuration and the shipped profiles.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::DEFAULT_EVAL_BUDGET;
use crate::error::{Error, Result};
use crate::market::MarketConfig;
use crate::pipeline::ModelConfig;
use crate::rl::value_fn::ValueNetConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pipeline,
    Baseline,
    Rl,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Pipeline, Method::Baseline, Method::Rl];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pipeline => "pipeline",
            Method::Baseline => "baseline",
            Method::Rl => "rl",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown method {s:?} (expected pipeline, baseline or rl)"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Small enough to run on a laptop in minutes.
    Desk,
    Paper,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => Err(Error::Config(format!(
                "unknown profile {s:?} (expected desk or paper)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Steps per epoch.
    #[serde(rename = "t")]
    pub horizon: usize,
    pub burnin_epochs: usize,
    pub test_epochs: usize,
    pub trials: usize,
    pub lambda: f64,
    /// Number of indicator sets.
    #[serde(rename = "i")]
    pub indicator_sets: usize,
    pub competitors: usize,
    pub exploration_rate: f64,
    pub training_window_epochs: usize,
    pub sigma: f64,
    /// Customer draws per step of value training.
    #[serde(rename = "n")]
    pub draws: usize,
    pub j: usize,
    pub j_plus: usize,
    /// Relative ridge of the linear next-step model in value training.
    pub u_ridge: f64,
    pub seed: u64,
    pub lapse_q: f64,
    pub methods: Vec<Method>,
    /// Offline epochs per candidate in the baseline grid search.
    pub grid_budget: usize,
    pub market: MarketConfig,
    pub models: ModelConfig,
    pub value_net: ValueNetConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            horizon: 1000,
            burnin_epochs: 6,
            test_epochs: 8,
            trials: 24,
            lambda: 2000.0,
            indicator_sets: 5,
            competitors: 5,
            exploration_rate: 0.12,
            training_window_epochs: 4,
            sigma: 0.9,
            draws: 500,
            j: 24,
            j_plus: 120,
            u_ridge: 0.1,
            seed: 20240601,
            lapse_q: 0.0,
            methods: Method::ALL.to_vec(),
            grid_budget: DEFAULT_EVAL_BUDGET,
            market: MarketConfig::default(),
            models: ModelConfig::default(),
            value_net: ValueNetConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn profile(p: Profile) -> Self {
        match p {
            Profile::Paper => Self::default(),
            Profile::Desk => Self {
                horizon: 200,
                competitors: 3,
                trials: 8,
                lambda: 400.0,
                draws: 200,
                j_plus: 60,
                ..Self::default()
            },
        }
    }

    /// Parses TOML; keys missing from the file keep the `base` values.
    pub fn from_toml(text: &str, base: &ExperimentConfig) -> Result<Self> {
        let overrides: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut merged = toml::Table::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, overrides);
        let cfg: ExperimentConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, base: &ExperimentConfig) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t", self.horizon),
            ("burnin_epochs", self.burnin_epochs),
            ("test_epochs", self.test_epochs),
            ("trials", self.trials),
            ("i", self.indicator_sets),
            ("competitors", self.competitors),
            ("training_window_epochs", self.training_window_epochs),
            ("n", self.draws),
            ("j", self.j),
            ("grid_budget", self.grid_budget),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.indicator_sets > crate::portfolio::Feature::ALL.len() {
            return Err(Error::Config(format!(
                "i must be at most {}",
                crate::portfolio::Feature::ALL.len()
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config("lambda must be finite and non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.exploration_rate) {
            return Err(Error::Config("exploration_rate must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(Error::Config("sigma must lie in [0, 1]".into()));
        }
        if !(self.u_ridge >= 0.0 && self.u_ridge.is_finite()) {
            return Err(Error::Config("u_ridge must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.lapse_q) {
            return Err(Error::Config("lapse_q must lie in [0, 1)".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        Ok(())
    }

    /// Configured methods in canonical order without duplicates.
    pub fn method_list(&self) -> Vec<Method> {
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        m
    }
}

fn merge(base: &mut toml::Table, overrides: toml::Table) {
    for (k, v) in overrides {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles() {
        let d = ExperimentConfig::profile(Profile::Desk);
        assert_eq!(
            (d.horizon, d.competitors, d.trials, d.lambda, d.draws, d.j_plus),
            (200, 3, 8, 400.0, 200, 60)
        );
        let p = ExperimentConfig::profile(Profile::Paper);
        assert_eq!(
            (p.horizon, p.burnin_epochs, p.test_epochs, p.trials, p.lambda),
            (1000, 6, 8, 24, 2000.0)
        );
        assert_eq!(
            (p.j, p.j_plus, p.draws, p.sigma, p.exploration_rate),
            (24, 120, 500, 0.9, 0.12)
        );
        assert!(d.validate().is_ok() && p.validate().is_ok());
    }

    #[test]
    fn toml_round_trip_and_partial_overrides() {
        let base = ExperimentConfig::profile(Profile::Desk);
        let back =
            ExperimentConfig::from_toml(&base.to_toml().unwrap(), &ExperimentConfig::default()).unwrap();
        assert_eq!(back, base);
        let cfg = ExperimentConfig::from_toml(
            "t = 50\nlambda = 0.0\nmethods = [\"rl\", \"pipeline\"]\n[market]\nwalk_away = 1.25\n",
            &base,
        )
        .unwrap();
        assert_eq!(cfg.horizon, 50);
        assert_eq!(cfg.lambda, 0.0);
        assert_eq!(cfg.method_list(), vec![Method::Pipeline, Method::Rl]);
        assert_eq!(cfg.market.walk_away, 1.25);
        assert_eq!(cfg.market.cost, base.market.cost);
        assert_eq!(cfg.j_plus, 60);
    }

    #[test]
    fn bad_configs_are_config_errors() {
        let base = ExperimentConfig::default();
        for text in [
            "t = 0",
            "methods = []",
            "sigma = 2.0",
            "unknown_key = 1",
            "t = \"x\"",
            "lapse_q = 1.0",
        ] {
            let err = ExperimentConfig::from_toml(text, &base).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err}");
        }
    }

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("ppo".parse::<Method>().is_err());
    }
}
