//! Customers seen in unmodulated epochs, replayed as a model of future arrivals.

use rand::Rng;

use crate::error::{Error, Result};
use crate::market::{CustomerFeatures, InteractionRecord, MarketVariables};
use crate::portfolio::{membership, IndicatorSet};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayEntry {
    pub features: CustomerFeatures,
    pub market: MarketVariables,
    pub cost: f64,
    /// Indicator-set membership of `features`.
    pub membership: Vec<bool>,
}

/// Uniform-with-replacement sampler over past customers.
#[derive(Debug, Clone, Default)]
pub struct CustomerReplayBuffer {
    entries: Vec<ReplayEntry>,
}

impl CustomerReplayBuffer {
    pub fn new(entries: Vec<ReplayEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InsufficientData {
                model: "replay buffer",
                reason: "no customers".into(),
            });
        }
        Ok(Self { entries })
    }

    pub fn from_records<'a>(
        records: impl IntoIterator<Item = &'a InteractionRecord>,
        sets: &[IndicatorSet],
    ) -> Result<Self> {
        Self::new(
            records
                .into_iter()
                .map(|r| ReplayEntry {
                    membership: membership(sets, &r.customer),
                    features: r.customer.clone(),
                    market: r.market,
                    cost: r.cost,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[ReplayEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.entries.len())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &ReplayEntry {
        &self.entries[self.sample_index(rng)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn entry(cost: f64) -> ReplayEntry {
        ReplayEntry {
            features: CustomerFeatures {
                customer_id: 0,
                age: 30.0,
                region: 0,
                occupation: 0,
                vehicle_value: 10_000.0,
                years_licensed: 5.0,
                income: 30_000.0,
                risk_score: 0.5,
            },
            market: MarketVariables {
                m1: 1.1,
                m3: 1.2,
                m5: 1.3,
            },
            cost,
            membership: vec![],
        }
    }

    #[test]
    fn empty_buffer_is_rejected() {
        assert!(CustomerReplayBuffer::new(vec![]).is_err());
    }

    #[test]
    fn sampling_is_uniform() {
        let buf = CustomerReplayBuffer::new((0..4).map(|i| entry(i as f64)).collect()).unwrap();
        let mut rng = seeded(0);
        let mut counts = [0usize; 4];
        let n = 40_000;
        for _ in 0..n {
            counts[buf.sample_index(&mut rng)] += 1;
        }
        let se = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 3.0 * se);
        }
    }
}
