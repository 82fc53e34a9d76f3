//! Market variables and the customer's purchase decision.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::competitor::{InsurerId, Offer};
use crate::error::{Error, Result};

/// Mean of the 1, 3 and 5 cheapest rival prices, each divided by the expected cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketVariables {
    pub m1: f64,
    pub m3: f64,
    pub m5: f64,
}

impl MarketVariables {
    pub fn as_array(&self) -> [f64; 3] {
        [self.m1, self.m3, self.m5]
    }

    /// Builds from three values, sorting them so that `m1 ≤ m3 ≤ m5`.
    pub fn sorted(mut v: [f64; 3]) -> Self {
        v.sort_by(f64::total_cmp);
        Self {
            m1: v[0],
            m3: v[1],
            m5: v[2],
        }
    }
}

/// Computes market variables from rival offers.
///
/// With fewer than five offers the deeper averages run over all available offers,
/// so three rivals give `m5 = m3`.
pub fn market_variables(offers: &[Offer], cost: f64) -> Result<MarketVariables> {
    if offers.is_empty() {
        return Err(Error::InvalidArgument(
            "market variables need at least one offer".into(),
        ));
    }
    if !(cost > 0.0 && cost.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "cost must be positive, got {cost}"
        )));
    }
    let mut prices: Vec<f64> = offers.iter().map(|o| o.price).collect();
    prices.sort_by(f64::total_cmp);
    let top = |k: usize| {
        let k = k.min(prices.len());
        prices[..k].iter().sum::<f64>() / k as f64 / cost
    };
    Ok(MarketVariables {
        m1: top(1),
        m3: top(3),
        m5: top(5),
    })
}

/// Outcome of one purchase decision; `None` means the customer walked away.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceOutcome {
    pub chosen_insurer: Option<InsurerId>,
}

/// Multinomial logit over offers plus walking away.
///
/// Offer utility is `-sensitivity · price / cost`; walking away has utility
/// `-sensitivity · walk_away`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChoiceModel {
    pub walk_away: f64,
}

impl ChoiceModel {
    /// Selection probabilities: one per offer in order, then walk-away last.
    pub fn probabilities(&self, offers: &[Offer], cost: f64, sensitivity: f64) -> Vec<f64> {
        let mut utils: Vec<f64> = offers.iter().map(|o| -sensitivity * o.price / cost).collect();
        utils.push(-sensitivity * self.walk_away);
        let top = utils.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = utils.iter().map(|u| (u - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }

    /// Draws a choice among `our_offer` and `others`.
    pub fn choose<R: Rng + ?Sized>(
        &self,
        our_offer: &Offer,
        others: &[Offer],
        cost: f64,
        sensitivity: f64,
        rng: &mut R,
    ) -> ChoiceOutcome {
        let mut all = Vec::with_capacity(others.len() + 1);
        all.push(*our_offer);
        all.extend_from_slice(others);
        let probs = self.probabilities(&all, cost, sensitivity);
        let mut u: f64 = rng.random();
        for (offer, p) in all.iter().zip(&probs) {
            if u < *p {
                return ChoiceOutcome {
                    chosen_insurer: Some(offer.insurer_id),
                };
            }
            u -= p;
        }
        ChoiceOutcome { chosen_insurer: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn offers(prices: &[f64]) -> Vec<Offer> {
        prices
            .iter()
            .enumerate()
            .map(|(i, &p)| Offer {
                insurer_id: i as u32 + 1,
                price: p,
            })
            .collect()
    }

    #[test]
    fn market_variables_arithmetic() {
        let m = market_variables(&offers(&[140.0, 100.0, 120.0, 130.0, 110.0]), 100.0).unwrap();
        assert!((m.m1 - 1.0).abs() < 1e-12);
        assert!((m.m3 - 1.1).abs() < 1e-12);
        assert!((m.m5 - 1.2).abs() < 1e-12);
    }

    #[test]
    fn equal_prices_give_equal_variables() {
        let m = market_variables(&offers(&[123.0; 6]), 100.0).unwrap();
        assert_eq!(m.m1, 1.23);
        assert_eq!(m.m3, 1.23);
        assert_eq!(m.m5, 1.23);
    }

    #[test]
    fn short_market_uses_all_offers() {
        let m = market_variables(&offers(&[100.0, 110.0, 120.0]), 100.0).unwrap();
        assert!((m.m3 - 1.1).abs() < 1e-12);
        assert_eq!(m.m3, m.m5);
    }

    #[test]
    fn invalid_inputs_error() {
        assert!(market_variables(&[], 100.0).is_err());
        assert!(market_variables(&offers(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn infinite_price_is_never_chosen() {
        let model = ChoiceModel { walk_away: 1.3 };
        let mut all = offers(&[f64::INFINITY, 110.0, 120.0]);
        all[0].insurer_id = 0;
        let p = model.probabilities(&all, 100.0, 10.0);
        assert_eq!(p[0], 0.0);
    }

    #[test]
    fn lone_offer_at_reference_accepts_half_the_time() {
        let model = ChoiceModel { walk_away: 1.3 };
        let ours = Offer {
            insurer_id: 0,
            price: 130.0,
        };
        let mut rng = seeded(11);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| model.choose(&ours, &[], 100.0, 8.0, &mut rng).chosen_insurer == Some(0))
            .count();
        let rate = hits as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((rate - 0.5).abs() < 3.0 * se, "rate {rate}");
    }

    #[test]
    fn identical_offers_split_evenly() {
        let model = ChoiceModel { walk_away: 1.3 };
        let ours = Offer {
            insurer_id: 0,
            price: 115.0,
        };
        let others = offers(&[115.0]);
        let mut rng = seeded(12);
        let n = 10_000;
        let (mut a, mut b) = (0usize, 0usize);
        for _ in 0..n {
            match model.choose(&ours, &others, 100.0, 10.0, &mut rng).chosen_insurer {
                Some(0) => a += 1,
                Some(1) => b += 1,
                _ => {}
            }
        }
        let total = (a + b) as f64;
        let frac = a as f64 / total;
        let se = (0.25 / total).sqrt();
        assert!((frac - 0.5).abs() < 3.0 * se, "frac {frac}");
    }
}
