//! Customer generation and the true expected cost of cover.
//!
//! Customers are drawn from a hierarchical model: region, then occupation given
//! region, then age, driving history, vehicle and income. Risk is a logistic
//! score over age, years licensed and vehicle value, and cost follows from risk.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::MarketConfig;

pub const REGIONS: usize = 8;
pub const OCCUPATIONS: usize = 6;
pub const MIN_AGE: f64 = 18.0;
pub const MAX_AGE: f64 = 90.0;
/// Youngest age at which a licence can be held.
pub const LICENCE_AGE: f64 = 17.0;

/// Everything an insurer sees about a customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerFeatures {
    pub customer_id: u64,
    pub age: f64,
    pub region: u8,
    pub occupation: u8,
    pub vehicle_value: f64,
    pub years_licensed: f64,
    pub income: f64,
    pub risk_score: f64,
}

/// A generated customer. Price sensitivity drives the purchase decision and is
/// never handed to insurers or written into interaction records.
#[derive(Debug, Clone, PartialEq)]
pub struct Customer {
    pub features: CustomerFeatures,
    price_sensitivity: f64,
}

impl Customer {
    pub fn new(features: CustomerFeatures, price_sensitivity: f64) -> Self {
        Self {
            features,
            price_sensitivity,
        }
    }

    pub fn price_sensitivity(&self) -> f64 {
        self.price_sensitivity
    }
}

/// Generator parameters. The defaults are the shipped environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CustomerConfig {
    pub region_weights: [f64; REGIONS],
    pub region_income: [f64; REGIONS],
    pub occupation_weights: [f64; OCCUPATIONS],
    pub occupation_income_mult: [f64; OCCUPATIONS],
    pub age_mean: f64,
    pub age_sd: f64,
    pub vehicle_median: f64,
    pub vehicle_log_sd: f64,
    pub income_log_sd: f64,
    pub risk_intercept: f64,
    pub risk_age_coef: f64,
    pub risk_licence_coef: f64,
    pub risk_vehicle_coef: f64,
    pub sensitivity_base: f64,
    pub sensitivity_income_elasticity: f64,
    pub sensitivity_log_sd: f64,
}

impl Default for CustomerConfig {
    fn default() -> Self {
        Self {
            region_weights: [0.20, 0.16, 0.14, 0.12, 0.11, 0.10, 0.09, 0.08],
            region_income: [
                38_000.0, 31_000.0, 27_000.0, 29_500.0, 24_000.0, 33_000.0, 26_000.0, 22_500.0,
            ],
            occupation_weights: [0.30, 0.22, 0.18, 0.12, 0.10, 0.08],
            occupation_income_mult: [1.0, 0.8, 1.35, 0.65, 1.7, 1.1],
            age_mean: 44.0,
            age_sd: 16.0,
            vehicle_median: 12_000.0,
            vehicle_log_sd: 0.5,
            income_log_sd: 0.3,
            risk_intercept: 0.2,
            risk_age_coef: -0.03,
            risk_licence_coef: -0.05,
            risk_vehicle_coef: 0.5,
            sensitivity_base: 10.0,
            sensitivity_income_elasticity: -0.3,
            sensitivity_log_sd: 0.25,
        }
    }
}

impl CustomerConfig {
    /// Occupation weights conditional on region.
    pub fn occupation_weights_given(&self, region: u8) -> [f64; OCCUPATIONS] {
        let mut w = self.occupation_weights;
        for (j, wj) in w.iter_mut().enumerate() {
            let tilt = (1.7 * (region as f64 + 1.0) * (j as f64 + 1.0)).sin();
            *wj *= (0.4 * tilt).exp();
        }
        w
    }

    /// Risk score for the given age, licence history and vehicle value.
    pub fn risk_score(&self, age: f64, years_licensed: f64, vehicle_value: f64) -> f64 {
        let score = self.risk_intercept
            + self.risk_age_coef * (age - 40.0)
            + self.risk_licence_coef * years_licensed
            + self.risk_vehicle_coef * (vehicle_value / self.vehicle_median).ln();
        1.0 / (1.0 + (-score).exp())
    }
}

fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Draws customers with unique, increasing ids.
#[derive(Debug, Clone)]
pub struct CustomerGenerator {
    config: CustomerConfig,
    next_id: u64,
}

impl CustomerGenerator {
    pub fn new(config: CustomerConfig, first_id: u64) -> Self {
        Self {
            config,
            next_id: first_id,
        }
    }

    pub fn config(&self) -> &CustomerConfig {
        &self.config
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Customer {
        let cfg = &self.config;
        let region = categorical(&cfg.region_weights, rng) as u8;
        let occupation = categorical(&cfg.occupation_weights_given(region), rng) as u8;

        let age_dist = Normal::new(cfg.age_mean, cfg.age_sd).expect("age sd is positive");
        let age = loop {
            let a: f64 = age_dist.sample(rng);
            if (MIN_AGE..=MAX_AGE).contains(&a) {
                break a;
            }
        };
        let years_licensed = (age - LICENCE_AGE) * rng.random::<f64>().sqrt();

        let z_vehicle: f64 = StandardNormal.sample(rng);
        let vehicle_value = cfg.vehicle_median * (cfg.vehicle_log_sd * z_vehicle).exp();

        let z_income: f64 = StandardNormal.sample(rng);
        let income = cfg.region_income[region as usize]
            * cfg.occupation_income_mult[occupation as usize]
            * (1.0 + 0.01 * (age - MIN_AGE))
            * (cfg.income_log_sd * z_income).exp();

        let risk_score = cfg.risk_score(age, years_licensed, vehicle_value);

        let z_sens: f64 = StandardNormal.sample(rng);
        let price_sensitivity = cfg.sensitivity_base
            * (income / 30_000.0).powf(cfg.sensitivity_income_elasticity)
            * (cfg.sensitivity_log_sd * z_sens).exp();

        let features = CustomerFeatures {
            customer_id: self.next_id,
            age,
            region,
            occupation,
            vehicle_value,
            years_licensed,
            income,
            risk_score,
        };
        self.next_id += 1;
        Customer::new(features, price_sensitivity)
    }
}

/// Parameters of the cost formula
/// `C(s) = base · (0.5 + risk) · (vehicle_value / vehicle_ref)^0.3`, clamped to `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostConfig {
    pub base: f64,
    pub vehicle_ref: f64,
    pub vehicle_exponent: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            base: 100.0,
            vehicle_ref: 12_000.0,
            vehicle_exponent: 0.3,
            min: 20.0,
            max: 600.0,
        }
    }
}

/// Expected cost of serving the customer.
pub fn true_cost(features: &CustomerFeatures, cfg: &CostConfig) -> f64 {
    let raw = cfg.base
        * (0.5 + features.risk_score)
        * (features.vehicle_value / cfg.vehicle_ref).powf(cfg.vehicle_exponent);
    raw.clamp(cfg.min, cfg.max)
}

/// Convenience wrapper drawing from the generator in `market`.
pub fn sample_customer<R: Rng + ?Sized>(gen: &mut CustomerGenerator, rng: &mut R) -> Customer {
    gen.sample(rng)
}

impl MarketConfig {
    pub fn cost_of(&self, features: &CustomerFeatures) -> f64 {
        true_cost(features, &self.cost)
    }
}
