//! Portfolio value functions and the k-values derived from them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::portfolio::{loss_counts, FrequencyVector, TargetPortfolio};

/// Value of a portfolio at one fixed time step.
pub trait PortfolioValue: Sync {
    fn value(&self, f: &[u32]) -> f64;
}

/// Value of a portfolio at any time step.
pub trait TimeValue: Sync {
    fn value_at(&self, f: &[u32], t: usize) -> f64;
}

impl<F: Fn(&[u32]) -> f64 + Sync> PortfolioValue for F {
    fn value(&self, f: &[u32]) -> f64 {
        self(f)
    }
}

impl<F: Fn(&[u32], usize) -> f64 + Sync> TimeValue for F {
    fn value_at(&self, f: &[u32], t: usize) -> f64 {
        self(f, t)
    }
}

/// `k = 1 − (U(f + m) − U(f)) / C`.
pub fn k_value<U: PortfolioValue + ?Sized>(
    u: &U,
    f: &FrequencyVector,
    membership: &[bool],
    cost: f64,
) -> f64 {
    let with = f.with_customer(membership);
    1.0 - (u.value(&with.counts) - u.value(&f.counts)) / cost
}

/// k-value at step `t`, read off the value function at `t + 1`.
pub fn k_value_inference<V: TimeValue + ?Sized>(
    v: &V,
    f: &FrequencyVector,
    membership: &[bool],
    cost: f64,
    t: usize,
) -> f64 {
    let with = f.with_customer(membership);
    1.0 - (v.value_at(&with.counts, t + 1) - v.value_at(&f.counts, t + 1)) / cost
}

/// `−λ · L(f, f*)`, the value of ending the epoch with `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalValue {
    pub target: TargetPortfolio,
    pub lambda: f64,
}

impl PortfolioValue for TerminalValue {
    fn value(&self, f: &[u32]) -> f64 {
        -self.lambda * loss_counts(f, &self.target.target)
    }
}

/// Linear next-step model `w · f + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearValue {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl PortfolioValue for LinearValue {
    fn value(&self, f: &[u32]) -> f64 {
        self.bias
            + self
                .weights
                .iter()
                .zip(f)
                .map(|(w, &x)| w * x as f64)
                .sum::<f64>()
    }
}

/// Exact lookup table; used on instances small enough to enumerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularValue {
    /// Sorted by portfolio.
    entries: Vec<(Vec<u32>, f64)>,
}

impl TabularValue {
    pub fn get(&self, f: &[u32]) -> Option<f64> {
        self.entries
            .binary_search_by(|(k, _)| k.as_slice().cmp(f))
            .ok()
            .map(|i| self.entries[i].1)
    }
}

impl PortfolioValue for TabularValue {
    fn value(&self, f: &[u32]) -> f64 {
        self.get(f)
            .unwrap_or_else(|| panic!("portfolio {f:?} missing from value table"))
    }
}

/// Fits a next-step model to `(portfolio, value)` pairs.
pub trait NextStepFitter: Sync {
    type Model: PortfolioValue;
    fn fit(&self, fs: &[FrequencyVector], vs: &[f64]) -> Result<Self::Model>;

    /// Fit regularised towards `prior`, the model of the following step.
    fn fit_near(
        &self,
        fs: &[FrequencyVector],
        vs: &[f64],
        prior: Option<&Self::Model>,
    ) -> Result<Self::Model> {
        let _ = prior;
        self.fit(fs, vs)
    }
}

/// Least squares on centred inputs. The intercept is unpenalised; the weights
/// carry a ridge of `ridge` times the mean diagonal of the centred Gram matrix,
/// so the penalty does not depend on the scale of the counts. `fit_near`
/// shrinks towards the prior's weights instead of zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFitter {
    pub ridge: f64,
}

impl Default for LinearFitter {
    fn default() -> Self {
        Self { ridge: 1e-6 }
    }
}

impl NextStepFitter for LinearFitter {
    type Model = LinearValue;

    fn fit(&self, fs: &[FrequencyVector], vs: &[f64]) -> Result<LinearValue> {
        self.fit_near(fs, vs, None)
    }

    fn fit_near(
        &self,
        fs: &[FrequencyVector],
        vs: &[f64],
        prior: Option<&LinearValue>,
    ) -> Result<LinearValue> {
        if fs.is_empty() || fs.len() != vs.len() {
            return Err(Error::InvalidArgument(
                "linear fit needs matching, nonempty data".into(),
            ));
        }
        let n = fs.len();
        let d = fs[0].len();
        let mu: Vec<f64> = (0..d)
            .map(|c| fs.iter().map(|f| f.counts[c] as f64).sum::<f64>() / n as f64)
            .collect();
        let y_mean = vs.iter().sum::<f64>() / n as f64;
        let x = DMatrix::from_fn(n, d, |r, c| fs[r].counts[c] as f64 - mu[c]);
        let y = DVector::from_iterator(n, vs.iter().map(|v| v - y_mean));
        let mut gram = x.transpose() * &x;
        let scale = gram.trace() / d.max(1) as f64;
        let w0 = match prior {
            Some(p) if p.weights.len() == d => DVector::from_column_slice(&p.weights),
            _ => DVector::zeros(d),
        };
        if scale <= 0.0 {
            let bias = y_mean - w0.iter().zip(&mu).map(|(w, m)| w * m).sum::<f64>();
            return Ok(LinearValue {
                weights: w0.iter().copied().collect(),
                bias,
            });
        }
        let penalty = self.ridge * scale;
        for i in 0..d {
            gram[(i, i)] += penalty;
        }
        let rhs = x.transpose() * y + w0 * penalty;
        let w = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => gram
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::Numerical(format!("linear value fit: {e}")))?,
        };
        if w.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numerical(
                "linear value fit produced non-finite weights".into(),
            ));
        }
        let bias = y_mean - w.iter().zip(&mu).map(|(w, m)| w * m).sum::<f64>();
        Ok(LinearValue {
            weights: w.iter().copied().collect(),
            bias,
        })
    }
}

/// Exact table; duplicate portfolios are averaged.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TabularFitter;

impl NextStepFitter for TabularFitter {
    type Model = TabularValue;

    fn fit(&self, fs: &[FrequencyVector], vs: &[f64]) -> Result<TabularValue> {
        let mut acc: std::collections::BTreeMap<Vec<u32>, (f64, usize)> = Default::default();
        for (f, &v) in fs.iter().zip(vs) {
            let e = acc.entry(f.counts.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
        Ok(TabularValue {
            entries: acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
        })
    }
}

/// The current `U`: the terminal loss before the first backward step, a fitted
/// model afterwards.
#[derive(Debug, Clone, PartialEq)]
pub enum NextStep<M> {
    Terminal(TerminalValue),
    Fitted(M),
}

impl<M: PortfolioValue> PortfolioValue for NextStep<M> {
    fn value(&self, f: &[u32]) -> f64 {
        match self {
            NextStep::Terminal(v) => v.value(f),
            NextStep::Fitted(m) => m.value(f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn fv(c: &[u32]) -> FrequencyVector {
        FrequencyVector::from_counts(c.to_vec())
    }

    #[test]
    fn k_value_examples() {
        let constant = |_: &[u32]| 7.0;
        assert_eq!(k_value(&constant, &fv(&[1, 2]), &[true, false], 50.0), 1.0);

        let gain_equals_cost = |f: &[u32]| 40.0 * f[0] as f64;
        assert_eq!(
            k_value(&gain_equals_cost, &fv(&[3, 0]), &[true, false], 40.0),
            0.0
        );

        let lin = LinearValue {
            weights: vec![12.0, -3.0],
            bias: 5.0,
        };
        let k = k_value(&lin, &fv(&[4, 9]), &[true, false], 80.0);
        assert!((k - (1.0 - 12.0 / 80.0)).abs() < 1e-15);
    }

    struct TwoState;
    impl TimeValue for TwoState {
        fn value_at(&self, f: &[u32], t: usize) -> f64 {
            assert_eq!(t, 3);
            if f == [1] {
                30.0
            } else {
                10.0
            }
        }
    }

    #[test]
    fn inference_k_examples() {
        // Hand value: 1 − (30 − 10) / 40 = 0.5.
        assert_eq!(k_value_inference(&TwoState, &fv(&[0]), &[true], 40.0, 2), 0.5);
        assert_eq!(k_value_inference(&TwoState, &fv(&[0]), &[false], 40.0, 2), 1.0);
    }

    #[test]
    fn terminal_value_is_scaled_loss() {
        let u = TerminalValue {
            target: TargetPortfolio::new(vec![10, 4]),
            lambda: 400.0,
        };
        assert_eq!(u.value(&[10, 4]), 0.0);
        assert_eq!(u.value(&[5, 4]), -400.0 * 0.25);
        assert_eq!(u.value(&[0, 0]), -400.0);
    }

    #[test]
    fn linear_fit_recovers_exact_plane() {
        let mut rng = seeded(0);
        let fs: Vec<FrequencyVector> = (0..24)
            .map(|_| {
                fv(&[
                    rng.random_range(0..50),
                    rng.random_range(0..50),
                    rng.random_range(0..50),
                ])
            })
            .collect();
        let truth = LinearValue {
            weights: vec![2.5, -1.0, 0.25],
            bias: -30.0,
        };
        let vs: Vec<f64> = fs.iter().map(|f| truth.value(&f.counts)).collect();
        let exact = LinearFitter { ridge: 0.0 }.fit(&fs, &vs).unwrap();
        for (a, b) in exact.weights.iter().zip(&truth.weights) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((exact.bias - truth.bias).abs() < 1e-7);
        let fit = LinearFitter::default().fit(&fs, &vs).unwrap();
        for (a, b) in fit.weights.iter().zip(&truth.weights) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn linear_fit_survives_collinear_inputs() {
        let fs: Vec<FrequencyVector> = (0..10).map(|i| fv(&[i, 2 * i, 0])).collect();
        let vs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let fit = LinearFitter::default().fit(&fs, &vs).unwrap();
        for (f, v) in fs.iter().zip(&vs) {
            assert!((fit.value(&f.counts) - v).abs() < 1e-4);
        }
    }

    #[test]
    fn linear_fit_of_constant_portfolios_is_flat() {
        let fit = LinearFitter::default()
            .fit(&[fv(&[3, 4]), fv(&[3, 4])], &[1.0, 5.0])
            .unwrap();
        assert_eq!(fit.weights, vec![0.0, 0.0]);
        assert_eq!(fit.bias, 3.0);
    }

    #[test]
    fn stronger_ridge_shrinks_weights() {
        let fs: Vec<FrequencyVector> = (0..12).map(|i| fv(&[i, (i * 7) % 5])).collect();
        let vs: Vec<f64> = fs
            .iter()
            .map(|f| 3.0 * f.counts[0] as f64 - f.counts[1] as f64)
            .collect();
        let norm = |r: f64| {
            let w = LinearFitter { ridge: r }.fit(&fs, &vs).unwrap().weights;
            w.iter().map(|x| x * x).sum::<f64>()
        };
        assert!(norm(1.0) < norm(0.1) && norm(0.1) < norm(1e-6));
    }

    #[test]
    fn fit_near_prior_keeps_prior_weights_on_shifted_data() {
        let mut rng = seeded(5);
        let fs: Vec<FrequencyVector> = (0..24)
            .map(|_| fv(&[rng.random_range(0..40), rng.random_range(0..40)]))
            .collect();
        let prior = LinearValue {
            weights: vec![1.5, -0.5],
            bias: 2.0,
        };
        let vs: Vec<f64> = fs.iter().map(|f| prior.value(&f.counts) + 7.0).collect();
        let fit = LinearFitter { ridge: 10.0 }
            .fit_near(&fs, &vs, Some(&prior))
            .unwrap();
        for (a, b) in fit.weights.iter().zip(&prior.weights) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((fit.bias - 9.0).abs() < 1e-9);
        let shrunk = LinearFitter { ridge: 10.0 }.fit(&fs, &vs).unwrap();
        assert!(shrunk.weights[0].abs() < 1.5 * 0.5);
    }

    #[test]
    fn tabular_fit_averages_duplicates() {
        let t = TabularFitter
            .fit(&[fv(&[1]), fv(&[1]), fv(&[2])], &[1.0, 3.0, 5.0])
            .unwrap();
        assert_eq!(t.value(&[1]), 2.0);
        assert_eq!(t.value(&[2]), 5.0);
        assert_eq!(t.get(&[3]), None);
    }

    proptest! {
        #[test]
        fn k_is_invariant_to_shifting_values(
            w in proptest::collection::vec(-50.0f64..50.0, 3),
            f in proptest::collection::vec(0u32..100, 3),
            m in proptest::collection::vec(any::<bool>(), 3),
            shift in -1e6f64..1e6,
            cost in 10.0f64..500.0,
        ) {
            let base = LinearValue { weights: w.clone(), bias: 0.0 };
            let shifted = LinearValue { weights: w, bias: shift };
            let f = FrequencyVector::from_counts(f);
            let a = k_value(&base, &f, &m, cost);
            let b = k_value(&shifted, &f, &m, cost);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + shift.abs() / cost));
        }
    }
}
