//! Inference-time portfolio value functions `V(f, t)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::training::ValueEstimateDataset;
use super::value::{PortfolioValue, TerminalValue, TimeValue};
use crate::error::{Error, Result};
use crate::models::{Loss, Mlp, TrainConfig, ZooModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValueNetConfig {
    pub hidden: [usize; 2],
    pub train: TrainConfig,
}

impl Default for ValueNetConfig {
    fn default() -> Self {
        Self {
            hidden: [32, 32],
            train: TrainConfig {
                steps: 6000,
                batch_size: 128,
                learning_rate: 0.003,
            },
        }
    }
}

/// Network over `(f / T, t / T)` predicting the recentred value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpValue {
    net: Mlp,
    horizon: usize,
    y_mean: f64,
    y_scale: f64,
}

impl MlpValue {
    fn inputs(horizon: usize, f: &[u32], t: usize) -> Vec<f64> {
        let h = horizon as f64;
        f.iter()
            .map(|&c| c as f64 / h)
            .chain(std::iter::once(t as f64 / h))
            .collect()
    }
}

impl TimeValue for MlpValue {
    fn value_at(&self, f: &[u32], t: usize) -> f64 {
        self.y_mean + self.y_scale * self.net.forward(&Self::inputs(self.horizon, f, t))
    }
}

pub fn fit_mlp_value<R: Rng + ?Sized>(
    data: &ValueEstimateDataset,
    horizon: usize,
    cfg: &ValueNetConfig,
    rng: &mut R,
) -> Result<MlpValue> {
    if data.rows.is_empty() {
        return Err(Error::InsufficientData {
            model: "value function",
            reason: "no value estimates".into(),
        });
    }
    let xs: Vec<Vec<f64>> = data
        .rows
        .iter()
        .map(|r| MlpValue::inputs(horizon, &r.f, r.t))
        .collect();
    let ys: Vec<f64> = data.rows.iter().map(|r| r.v_centred).collect();
    let n = ys.len() as f64;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sd = (ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut net = Mlp::new(&[data.dims + 1, cfg.hidden[0], cfg.hidden[1], 1], rng);
    // Constant targets: the network is kept but contributes nothing.
    let y_scale = if sd > 1e-12 { sd } else { 0.0 };
    if y_scale > 0.0 {
        let zs: Vec<f64> = ys.iter().map(|y| (y - y_mean) / y_scale).collect();
        net.train(&xs, &zs, Loss::SquaredError, cfg.train, rng);
    }
    Ok(MlpValue {
        net,
        horizon,
        y_mean,
        y_scale,
    })
}

/// Exact lookup keyed on `(t, f)`; duplicates are averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularValueFn {
    entries: Vec<((usize, Vec<u32>), f64)>,
}

impl TabularValueFn {
    pub fn get(&self, f: &[u32], t: usize) -> Option<f64> {
        self.entries
            .binary_search_by(|((kt, kf), _)| (*kt, kf.as_slice()).cmp(&(t, f)))
            .ok()
            .map(|i| self.entries[i].1)
    }
}

impl TimeValue for TabularValueFn {
    fn value_at(&self, f: &[u32], t: usize) -> f64 {
        self.get(f, t)
            .unwrap_or_else(|| panic!("no value for portfolio {f:?} at step {t}"))
    }
}

pub fn fit_tabular_value(data: &ValueEstimateDataset) -> TabularValueFn {
    let mut acc: std::collections::BTreeMap<(usize, Vec<u32>), (f64, usize)> = Default::default();
    for r in &data.rows {
        let e = acc.entry((r.t, r.f.clone())).or_insert((0.0, 0));
        e.0 += r.v_centred;
        e.1 += 1;
    }
    TabularValueFn {
        entries: acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ValueFn {
    Mlp(MlpValue),
    Tabular(TabularValueFn),
}

impl TimeValue for ValueFn {
    fn value_at(&self, f: &[u32], t: usize) -> f64 {
        match self {
            ValueFn::Mlp(v) => v.value_at(f, t),
            ValueFn::Tabular(v) => v.value_at(f, t),
        }
    }
}

impl ZooModel for ValueFn {
    const KIND: &'static str = "value_fn";
}

/// The fitted value for steps `1..=T`, and the exact terminal value at `T + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PursuitValue {
    pub fitted: ValueFn,
    pub terminal: TerminalValue,
    pub horizon: usize,
}

impl TimeValue for PursuitValue {
    fn value_at(&self, f: &[u32], t: usize) -> f64 {
        if t > self.horizon {
            self.terminal.value(f)
        } else {
            self.fitted.value_at(f, t)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::TargetPortfolio;
    use crate::rl::training::ValueRow;
    use crate::rng::seeded;
    use rand::Rng;

    fn dataset(f: impl Fn(&[u32], usize) -> f64) -> ValueEstimateDataset {
        let mut rows = vec![];
        let mut rng = seeded(0);
        for t in 1..=20 {
            for _ in 0..30 {
                let fv: Vec<u32> = (0..2).map(|_| rng.random_range(0..=t as u32)).collect();
                let v = f(&fv, t);
                rows.push(ValueRow {
                    t,
                    f: fv,
                    v_raw: v,
                    v_centred: v,
                });
            }
        }
        ValueEstimateDataset { dims: 2, rows }
    }

    #[test]
    fn zero_targets_give_zero_values() {
        let d = dataset(|_, _| 0.0);
        let v = fit_mlp_value(&d, 20, &ValueNetConfig::default(), &mut seeded(1)).unwrap();
        for r in &d.rows {
            assert!(v.value_at(&r.f, r.t).abs() < 1e-9);
        }
    }

    #[test]
    fn network_learns_a_time_varying_slope() {
        let d = dataset(|f, t| (3.0 - 0.1 * t as f64) * f[0] as f64 - f[1] as f64);
        let cfg = ValueNetConfig {
            train: TrainConfig {
                steps: 3000,
                ..ValueNetConfig::default().train
            },
            ..ValueNetConfig::default()
        };
        let v = fit_mlp_value(&d, 20, &cfg, &mut seeded(2)).unwrap();
        let sse: f64 = d
            .rows
            .iter()
            .map(|r| (v.value_at(&r.f, r.t) - r.v_centred).powi(2))
            .sum();
        let sst: f64 = {
            let m = d.rows.iter().map(|r| r.v_centred).sum::<f64>() / d.rows.len() as f64;
            d.rows.iter().map(|r| (r.v_centred - m).powi(2)).sum()
        };
        assert!(1.0 - sse / sst > 0.98, "R² {}", 1.0 - sse / sst);
    }

    #[test]
    fn tabular_lookup_and_terminal_override() {
        let d = dataset(|f, t| f[0] as f64 + 100.0 * t as f64);
        let tab = fit_tabular_value(&d);
        let r = &d.rows[17];
        assert_eq!(tab.value_at(&r.f, r.t), r.v_centred);
        let pv = PursuitValue {
            fitted: ValueFn::Tabular(tab),
            terminal: TerminalValue {
                target: TargetPortfolio::new(vec![2, 2]),
                lambda: 10.0,
            },
            horizon: 20,
        };
        assert_eq!(pv.value_at(&[1, 2], 21), -10.0 * 0.25);
    }

    #[test]
    fn blob_round_trip() {
        let d = dataset(|f, _| f[0] as f64);
        let cfg = ValueNetConfig {
            train: TrainConfig {
                steps: 50,
                ..ValueNetConfig::default().train
            },
            ..ValueNetConfig::default()
        };
        let v = ValueFn::Mlp(fit_mlp_value(&d, 20, &cfg, &mut seeded(3)).unwrap());
        let back = ValueFn::from_blob(&v.to_blob().unwrap()).unwrap();
        assert_eq!(back, v);
    }
}
