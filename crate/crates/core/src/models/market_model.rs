use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoding::{CustomerEncoder, Dataset};
use super::forest::{ForestConfig, RandomForest};
use crate::error::{Error, Result};
use crate::market::{CustomerFeatures, MarketVariables};

pub const MIN_MARKET_ROWS: usize = 50;

/// Imputes market variables from customer features. Predictions are sorted so
/// `m1 ≤ m3 ≤ m5` always holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    encoder: CustomerEncoder,
    forest: RandomForest,
}

impl MarketModel {
    pub fn fit<R: Rng>(
        rows: &[(CustomerFeatures, MarketVariables)],
        cfg: ForestConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if rows.len() < MIN_MARKET_ROWS {
            return Err(Error::InsufficientData {
                model: "market model",
                reason: format!("{} rows, need {MIN_MARKET_ROWS}", rows.len()),
            });
        }
        let encoder = CustomerEncoder::fit(rows.iter().map(|r| &r.0));
        let data = Dataset::new(
            rows.iter().map(|r| encoder.encode(&r.0)).collect(),
            rows.iter().map(|r| r.1.as_array().to_vec()).collect(),
        )?;
        let forest = RandomForest::fit(&data, cfg, rng)?;
        Ok(Self { encoder, forest })
    }

    pub fn predict(&self, c: &CustomerFeatures) -> MarketVariables {
        let p = self.forest.predict(&self.encoder.encode(c));
        MarketVariables::sorted([p[0], p[1], p[2]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{CustomerConfig, CustomerGenerator};
    use crate::rng::seeded;

    fn rows(n: usize, f: impl Fn(&CustomerFeatures) -> [f64; 3]) -> Vec<(CustomerFeatures, MarketVariables)> {
        let mut gen = CustomerGenerator::new(CustomerConfig::default(), 0);
        let mut rng = seeded(0);
        (0..n)
            .map(|_| {
                let c = gen.sample(&mut rng).features;
                let v = f(&c);
                (
                    c,
                    MarketVariables {
                        m1: v[0],
                        m3: v[1],
                        m5: v[2],
                    },
                )
            })
            .collect()
    }

    #[test]
    fn constant_market_is_reproduced() {
        let data = rows(120, |_| [1.1, 1.2, 1.3]);
        let model = MarketModel::fit(&data, ForestConfig::default(), &mut seeded(1)).unwrap();
        for (c, _) in &data {
            let m = model.predict(c);
            assert!((m.m1 - 1.1).abs() < 1e-9 && (m.m3 - 1.2).abs() < 1e-9 && (m.m5 - 1.3).abs() < 1e-9);
        }
    }

    #[test]
    fn predictions_are_sorted() {
        // Targets deliberately out of order for some customers.
        let data = rows(300, |c| {
            let x = c.age / 90.0;
            [1.0 + x, 1.5 - x, 1.2]
        });
        let model = MarketModel::fit(&data, ForestConfig::default(), &mut seeded(2)).unwrap();
        for (c, _) in &data {
            let m = model.predict(c);
            assert!(m.m1 <= m.m3 && m.m3 <= m.m5);
        }
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let data = rows(49, |_| [1.0, 1.0, 1.0]);
        let err = MarketModel::fit(&data, ForestConfig::default(), &mut seeded(1)).unwrap_err();
        assert!(err.to_string().contains("market model"));
    }
}
