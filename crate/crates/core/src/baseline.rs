//! Industry-style portfolio pursuit: scale each quote by a bounded factor per
//! indicator set, driven by how historic volumes compare with the target.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Acceptance;
use crate::pipeline::{STORED_ACTION_MAX, STORED_ACTION_MIN};
use crate::portfolio::{loss_counts, FrequencyVector, TargetPortfolio};
use crate::replay::CustomerReplayBuffer;

pub const N_GRID: [f64; 3] = [0.5, 1.0, 2.0];
pub const BETA_GRID: [f64; 4] = [0.02, 0.05, 0.1, 0.25];
pub const DEFAULT_EVAL_BUDGET: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub n: f64,
    pub beta: f64,
}

impl BaselineParams {
    pub fn grid() -> Vec<BaselineParams> {
        N_GRID
            .iter()
            .flat_map(|&n| BETA_GRID.iter().map(move |&beta| BaselineParams { n, beta }))
            .collect()
    }
}

/// Mean per-set counts over unmodulated epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoricRates {
    pub f_bar: Vec<f64>,
}

pub fn historic_frequency(history: &[FrequencyVector]) -> Result<HistoricRates> {
    let first = history.first().ok_or_else(|| Error::InsufficientData {
        model: "historic frequency",
        reason: "no unmodulated epochs".into(),
    })?;
    let mut f_bar = vec![0.0; first.len()];
    for f in history {
        if f.len() != f_bar.len() {
            return Err(Error::InvalidArgument(
                "frequency vectors differ in length".into(),
            ));
        }
        for (acc, &c) in f_bar.iter_mut().zip(&f.counts) {
            *acc += c as f64;
        }
    }
    let n = history.len() as f64;
    f_bar.iter_mut().for_each(|x| *x /= n);
    Ok(HistoricRates { f_bar })
}

fn g_raw(z: f64, p: BaselineParams) -> f64 {
    if z.is_infinite() {
        return 1.0 + p.beta;
    }
    let zn = z.powf(p.n);
    if zn.is_infinite() {
        return 1.0 + p.beta;
    }
    1.0 + p.beta * (zn - 1.0) / (zn + 1.0)
}

/// `g(z) = 1 + β (zⁿ − 1) / (zⁿ + 1)`, increasing in `z` with range `(1 − β, 1 + β)`.
pub fn g(z: f64, p: BaselineParams) -> Result<f64> {
    if z.is_nan() || z <= 0.0 {
        return Err(Error::InvalidArgument(format!("g needs z > 0, got {z}")));
    }
    Ok(g_raw(z, p))
}

/// Product of `g(f̄_i / f*_i)` over the sets the customer belongs to. A set never
/// seen historically (`f̄_i = 0`) contributes the lower bound `1 − β`.
pub fn modulation_factor(
    membership: &[bool],
    rates: &HistoricRates,
    target: &TargetPortfolio,
    p: BaselineParams,
) -> f64 {
    membership
        .iter()
        .zip(rates.f_bar.iter().zip(&target.target))
        .filter(|(m, _)| **m)
        .map(|(_, (&f_bar, &f_star))| g_raw(f_bar / f_star as f64, p))
        .product()
}

/// Baseline action: pipeline action scaled by the modulation factor.
pub fn modulate(base_action: f64, factor: f64) -> f64 {
    (base_action * factor).clamp(STORED_ACTION_MIN, STORED_ACTION_MAX)
}

/// Everything an offline rollout of the baseline needs.
pub struct GridSearchSetup<'a, P: Acceptance + ?Sized> {
    pub buffer: &'a CustomerReplayBuffer,
    /// Pipeline action for each buffer entry, aligned with `buffer.entries()`.
    pub base_actions: &'a [f64],
    pub acceptance: &'a P,
    pub rates: &'a HistoricRates,
    pub target: &'a TargetPortfolio,
    pub lambda: f64,
    pub horizon: usize,
}

/// Mean of `profit − λ·loss` for each candidate over `budget` simulated epochs.
/// Customers are replayed from the buffer with acceptance drawn from the
/// conversion model; all candidates share the same arrivals and uniforms, and
/// profit is accumulated in expectation.
pub fn evaluate_candidates<P: Acceptance + ?Sized, R: Rng + ?Sized>(
    candidates: &[BaselineParams],
    budget: usize,
    setup: &GridSearchSetup<'_, P>,
    rng: &mut R,
) -> Vec<f64> {
    let entries = setup.buffer.entries();
    assert_eq!(entries.len(), setup.base_actions.len());
    let curves: Vec<_> = entries
        .iter()
        .map(|e| setup.acceptance.at_market(e.market))
        .collect();
    let rollouts: Vec<Vec<(usize, f64)>> = (0..budget.max(1))
        .map(|_| {
            (0..setup.horizon)
                .map(|_| (setup.buffer.sample_index(rng), rng.random::<f64>()))
                .collect()
        })
        .collect();
    let dims = setup.target.len();
    candidates
        .iter()
        .map(|&params| {
            let factors: Vec<f64> = entries
                .iter()
                .map(|e| modulation_factor(&e.membership, setup.rates, setup.target, params))
                .collect();
            let total: f64 = rollouts
                .iter()
                .map(|arrivals| {
                    let mut f = FrequencyVector::zeros(dims);
                    let mut profit = 0.0;
                    for &(i, u) in arrivals {
                        let e = &entries[i];
                        let a = modulate(setup.base_actions[i], factors[i]);
                        let p = curves[i](a);
                        profit += e.cost * p * (a - 1.0);
                        if u < p {
                            f.add_customer(&e.membership);
                        }
                    }
                    profit - setup.lambda * loss_counts(&f.counts, &setup.target.target)
                })
                .sum();
            total / rollouts.len() as f64
        })
        .collect()
}

/// Picks the candidate with the best offline score (earliest on ties).
pub fn grid_search_params<P: Acceptance + ?Sized, R: Rng + ?Sized>(
    candidates: &[BaselineParams],
    budget: usize,
    setup: &GridSearchSetup<'_, P>,
    rng: &mut R,
) -> Result<BaselineParams> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty baseline grid".into()));
    }
    let scores = evaluate_candidates(candidates, budget, setup, rng);
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok(candidates[best])
}
