//! Self-describing text serialisation for fitted models.
//!
//! ```text
//! PZOO1
//! <kind>
//! <json body>
//! ```

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const MAGIC: &str = "PZOO1";

pub trait ZooModel: Serialize + DeserializeOwned {
    const KIND: &'static str;

    fn to_blob(&self) -> Result<String> {
        Ok(format!(
            "{MAGIC}\n{}\n{}\n",
            Self::KIND,
            serde_json::to_string(self)?
        ))
    }

    fn from_blob(blob: &str) -> Result<Self> {
        let mut parts = blob.splitn(3, '\n');
        match parts.next() {
            Some(MAGIC) => {}
            other => return Err(Error::Blob(format!("bad magic header {other:?}"))),
        }
        let kind = parts.next().unwrap_or_default();
        if kind != Self::KIND {
            return Err(Error::Blob(format!("expected {}, found {kind}", Self::KIND)));
        }
        Ok(serde_json::from_str(parts.next().unwrap_or_default().trim_end())?)
    }
}

impl ZooModel for super::MarketModel {
    const KIND: &'static str = "market_model";
}

impl ZooModel for super::ConversionModel {
    const KIND: &'static str = "conversion_model";
}

impl ZooModel for super::ActionModel {
    const KIND: &'static str = "action_model";
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::MarketVariables;
    use crate::models::{ActionModel, ActionSample, GpConfig};

    fn model() -> ActionModel {
        let samples: Vec<ActionSample> = (0..30)
            .map(|i| {
                let x = 1.0 + i as f64 / 60.0;
                ActionSample {
                    market: MarketVariables {
                        m1: x,
                        m3: x + 0.1,
                        m5: x + 0.2,
                    },
                    k: 1.0,
                    action: 1.0 + 0.3 * x.sin(),
                }
            })
            .collect();
        ActionModel::fit_samples(&samples, false, GpConfig::default()).unwrap()
    }

    #[test]
    fn round_trip_preserves_predictions_exactly() {
        let m = model();
        let blob = m.to_blob().unwrap();
        assert!(blob.starts_with("PZOO1\naction_model\n"));
        let back = ActionModel::from_blob(&blob).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn wrong_header_or_kind_is_rejected() {
        let blob = model().to_blob().unwrap();
        assert!(ActionModel::from_blob(&blob.replacen("PZOO1", "PZOO0", 1)).is_err());
        assert!(crate::models::MarketModel::from_blob(&blob).is_err());
    }
}
