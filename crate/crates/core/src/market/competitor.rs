//! Rival insurers: cost-plus quoting with noise, and between-epoch imitation of the
//! most successful rival.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub type InsurerId = u32;

/// Our insurer. Rivals are numbered from 1.
pub const OUR_ID: InsurerId = 0;

pub const MARKUP_MIN: f64 = 1.02;
pub const MARKUP_MAX: f64 = 1.4;
/// Floor on any rival price, as a multiple of cost.
pub const PRICE_FLOOR: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Offer {
    pub insurer_id: InsurerId,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitorState {
    pub insurer_id: InsurerId,
    pub base_markup: f64,
    pub noise_scale: f64,
    pub adaptation_rate: f64,
}

/// Sales per insurer over one epoch, indexed by insurer id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochSummary {
    pub sales: Vec<u64>,
}

impl EpochSummary {
    pub fn new(insurers: usize) -> Self {
        Self {
            sales: vec![0; insurers],
        }
    }

    pub fn record_sale(&mut self, id: InsurerId) {
        let id = id as usize;
        if id >= self.sales.len() {
            self.sales.resize(id + 1, 0);
        }
        self.sales[id] += 1;
    }

    pub fn sales_of(&self, id: InsurerId) -> u64 {
        self.sales.get(id as usize).copied().unwrap_or(0)
    }
}

/// Rival population parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompetitorConfig {
    pub markup_low: f64,
    pub markup_high: f64,
    pub noise_scale: f64,
    pub adaptation_rate: f64,
    pub adaptation_noise: f64,
}

impl Default for CompetitorConfig {
    fn default() -> Self {
        Self {
            markup_low: 1.08,
            markup_high: 1.35,
            noise_scale: 0.05,
            adaptation_rate: 0.1,
            adaptation_noise: 0.005,
        }
    }
}

/// Initial rival states with markups spread uniformly over the configured range.
pub fn initial_competitors<R: Rng + ?Sized>(
    count: usize,
    cfg: &CompetitorConfig,
    rng: &mut R,
) -> Vec<CompetitorState> {
    (0..count)
        .map(|i| CompetitorState {
            insurer_id: i as InsurerId + 1,
            base_markup: rng
                .random_range(cfg.markup_low..=cfg.markup_high)
                .clamp(MARKUP_MIN, MARKUP_MAX),
            noise_scale: cfg.noise_scale,
            adaptation_rate: cfg.adaptation_rate,
        })
        .collect()
}

/// One offer per rival: `cost · (markup + z · noise_scale)`, floored at `0.8 · cost`.
pub fn competitor_offers<R: Rng + ?Sized>(cost: f64, states: &[CompetitorState], rng: &mut R) -> Vec<Offer> {
    states
        .iter()
        .map(|s| {
            let z: f64 = StandardNormal.sample(rng);
            let multiplier = (s.base_markup + z * s.noise_scale).max(PRICE_FLOOR);
            Offer {
                insurer_id: s.insurer_id,
                price: cost * multiplier,
            }
        })
        .collect()
}

/// Moves every rival's markup toward the markup of the rival with the most sales
/// last epoch (lowest id on ties), then perturbs it by `noise_sd` and clamps to
/// the allowed band.
pub fn adapt_competitors<R: Rng + ?Sized>(
    states: &[CompetitorState],
    summary: &EpochSummary,
    noise_sd: f64,
    rng: &mut R,
) -> Vec<CompetitorState> {
    let winner = states
        .iter()
        .fold(None::<&CompetitorState>, |best, s| match best {
            Some(b) if summary.sales_of(b.insurer_id) >= summary.sales_of(s.insurer_id) => Some(b),
            _ => Some(s),
        })
        .filter(|w| summary.sales_of(w.insurer_id) > 0)
        .map(|w| w.base_markup);

    states
        .iter()
        .map(|s| {
            let mut markup = s.base_markup;
            if let Some(target) = winner {
                markup += s.adaptation_rate * (target - markup);
            }
            if noise_sd > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                markup += noise_sd * z;
            }
            CompetitorState {
                base_markup: markup.clamp(MARKUP_MIN, MARKUP_MAX),
                ..s.clone()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn states(markups: &[f64], rate: f64, noise: f64) -> Vec<CompetitorState> {
        markups
            .iter()
            .enumerate()
            .map(|(i, &m)| CompetitorState {
                insurer_id: i as u32 + 1,
                base_markup: m,
                noise_scale: noise,
                adaptation_rate: rate,
            })
            .collect()
    }

    fn summary(sales: &[u64]) -> EpochSummary {
        let mut s = vec![0];
        s.extend_from_slice(sales);
        EpochSummary { sales: s }
    }

    #[test]
    fn one_offer_per_rival() {
        let mut rng = seeded(0);
        let offers = competitor_offers(100.0, &states(&[1.1, 1.2, 1.3, 1.2, 1.1], 0.1, 0.05), &mut rng);
        assert_eq!(offers.len(), 5);
        assert!(offers.iter().all(|o| o.price >= 80.0));
    }

    #[test]
    fn noiseless_offer_is_exact_markup() {
        let mut rng = seeded(0);
        let offers = competitor_offers(250.0, &states(&[1.17], 0.1, 0.0), &mut rng);
        assert_eq!(offers[0].price, 250.0 * 1.17);
    }

    #[test]
    fn mean_offer_matches_markup() {
        let mut rng = seeded(9);
        let st = states(&[1.2], 0.0, 0.05);
        let n = 10_000;
        let prices: Vec<f64> = (0..n)
            .map(|_| competitor_offers(100.0, &st, &mut rng)[0].price)
            .collect();
        let mean = prices.iter().sum::<f64>() / n as f64;
        // Floor at 0.8 is 8 sd away, so the mean is cost·markup.
        let se = 100.0 * 0.05 / (n as f64).sqrt();
        assert!((mean - 120.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn zero_rate_no_noise_is_identity() {
        let st = states(&[1.1, 1.25, 1.3], 0.0, 0.05);
        let mut rng = seeded(1);
        let next = adapt_competitors(&st, &summary(&[5, 9, 2]), 0.0, &mut rng);
        assert_eq!(next, st);
    }

    #[test]
    fn full_rate_converges_to_winner() {
        let st = states(&[1.1, 1.25, 1.3], 1.0, 0.05);
        let mut rng = seeded(1);
        let next = adapt_competitors(&st, &summary(&[5, 9, 2]), 0.0, &mut rng);
        assert!(next.iter().all(|s| s.base_markup == 1.25));
    }

    #[test]
    fn spread_is_non_increasing_without_noise() {
        let mut st = states(&[1.05, 1.2, 1.38, 1.3, 1.12], 0.0, 0.05);
        for (i, s) in st.iter_mut().enumerate() {
            s.adaptation_rate = 0.1 + 0.15 * i as f64;
        }
        let spread = |s: &[CompetitorState]| {
            let hi = s.iter().map(|c| c.base_markup).fold(f64::MIN, f64::max);
            let lo = s.iter().map(|c| c.base_markup).fold(f64::MAX, f64::min);
            hi - lo
        };
        let mut rng = seeded(3);
        let mut prev = spread(&st);
        for epoch in 0..10 {
            // Rotate the winner so convergence is not trivial.
            let mut sales = vec![1u64; 5];
            sales[epoch % 5] = 10;
            st = adapt_competitors(&st, &summary(&sales), 0.0, &mut rng);
            let now = spread(&st);
            assert!(now <= prev + 1e-15, "epoch {epoch}: {now} > {prev}");
            prev = now;
        }
    }

    #[test]
    fn band_is_preserved_under_noise() {
        let st = states(&[1.021, 1.399], 0.5, 0.05);
        let mut rng = seeded(4);
        let mut cur = st;
        for _ in 0..200 {
            cur = adapt_competitors(&cur, &summary(&[3, 1]), 0.2, &mut rng);
            assert!(cur
                .iter()
                .all(|s| (MARKUP_MIN..=MARKUP_MAX).contains(&s.base_markup)));
        }
    }
}
