use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::customer::{CustomerFeatures, OCCUPATIONS, REGIONS};

/// Column-wise affine standardisation using training-set moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    pub fn transform_into(&self, x: &[f64], out: &mut [f64]) {
        for (((o, x), m), s) in out.iter_mut().zip(x).zip(&self.mean).zip(&self.scale) {
            *o = (x - m) / s;
        }
    }
}

/// Rows of real features with real-vector targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        let d = Self { inputs, targets };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn target_dim(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.targets.len() {
            return Err(Error::InvalidArgument(format!(
                "{} input rows but {} target rows",
                self.inputs.len(),
                self.targets.len()
            )));
        }
        let (di, dt) = (self.input_dim(), self.target_dim());
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            if x.len() != di || y.len() != dt {
                return Err(Error::InvalidArgument("ragged dataset rows".into()));
            }
            if x.iter().chain(y).any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite value in dataset".into()));
            }
        }
        Ok(())
    }
}

/// Encodes the insurer-visible customer features: standardised numerics followed by
/// one-hot region and occupation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerEncoder {
    numeric: Standardizer,
}

pub const ENCODED_DIM: usize = 5 + REGIONS + OCCUPATIONS;

fn numeric(c: &CustomerFeatures) -> Vec<f64> {
    vec![c.age, c.vehicle_value, c.years_licensed, c.income, c.risk_score]
}

impl CustomerEncoder {
    pub fn fit<'a>(customers: impl IntoIterator<Item = &'a CustomerFeatures>) -> Self {
        let rows: Vec<Vec<f64>> = customers.into_iter().map(numeric).collect();
        Self {
            numeric: Standardizer::fit(&rows),
        }
    }

    pub fn encode(&self, c: &CustomerFeatures) -> Vec<f64> {
        let mut out = vec![0.0; ENCODED_DIM];
        self.numeric.transform_into(&numeric(c), &mut out[..5]);
        out[5 + c.region as usize] = 1.0;
        out[5 + REGIONS + c.occupation as usize] = 1.0;
        out
    }
}
