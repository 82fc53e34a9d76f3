//! Quoting with a trained value function.

use rand::Rng;

use super::leaving::{k_value_leaving, LapseModel};
use super::value::{k_value_inference, PortfolioValue, TimeValue};
use crate::market::CustomerFeatures;
use crate::pipeline::PipelineModels;
use crate::portfolio::FrequencyVector;

/// Range of k-values the policy is queried on.
pub const K_CLAMP: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlQuote {
    pub action: f64,
    pub price: f64,
    /// Unclamped k-value.
    pub k: f64,
}

/// Market model, then `π(M(s), k)` with `k` clamped to [`K_CLAMP`].
pub fn action_for_k(models: &PipelineModels, c: &CustomerFeatures, k: f64) -> f64 {
    let m = models.market.predict(c);
    models.action.predict(&m, k.clamp(K_CLAMP.0, K_CLAMP.1))
}

pub fn quote_price_rl<V: TimeValue + ?Sized>(
    models: &PipelineModels,
    value: &V,
    f: &FrequencyVector,
    membership: &[bool],
    t: usize,
    c: &CustomerFeatures,
    cost: f64,
) -> RlQuote {
    let k = k_value_inference(value, f, membership, cost, t);
    let action = action_for_k(models, c, k);
    RlQuote {
        action,
        price: cost * action,
        k,
    }
}

/// `V(·, t)` as a single-step value.
struct AtStep<'a, V: ?Sized> {
    v: &'a V,
    t: usize,
}

impl<V: TimeValue + ?Sized> PortfolioValue for AtStep<'_, V> {
    fn value(&self, f: &[u32]) -> f64 {
        self.v.value_at(f, self.t)
    }
}

/// The quoting rule used in test epochs.
pub struct RlPolicy<'a, V: ?Sized> {
    pub models: &'a PipelineModels,
    pub value: &'a V,
    pub lapse: LapseModel,
    pub n_mc: usize,
}

impl<V: TimeValue + ?Sized> RlPolicy<'_, V> {
    pub fn quote<R: Rng + ?Sized>(
        &self,
        f: &FrequencyVector,
        membership: &[bool],
        t: usize,
        c: &CustomerFeatures,
        cost: f64,
        rng: &mut R,
    ) -> RlQuote {
        if self.lapse.is_none() {
            return quote_price_rl(self.models, self.value, f, membership, t, c, cost);
        }
        let next = AtStep {
            v: self.value,
            t: t + 1,
        };
        let k = k_value_leaving(&next, f, membership, cost, self.lapse, self.n_mc, rng);
        let action = action_for_k(self.models, c, k);
        RlQuote {
            action,
            price: cost * action,
            k,
        }
    }
}
