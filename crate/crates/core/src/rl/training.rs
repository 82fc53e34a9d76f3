//! Backward training of the portfolio value function.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use super::leaving::{expected_value_after_lapse, k_value_leaving, LapseModel, DEFAULT_N_MC};
use super::sampler::PortfolioSampler;
use super::value::{NextStep, NextStepFitter, PortfolioValue, TerminalValue};
use super::value_fn::{fit_mlp_value, PursuitValue, ValueFn, ValueNetConfig};
use super::K_CLAMP;
use crate::error::Result;
use crate::market::MarketVariables;
use crate::models::{Acceptance, ActionModel};
use crate::portfolio::{FrequencyVector, TargetPortfolio};
use crate::replay::CustomerReplayBuffer;
use crate::rng::SimRng;

/// A policy that maps market variables and a k-value to an action.
pub trait KPolicy: Sync {
    fn action(&self, m: &MarketVariables, k: f64) -> f64;
}

impl<F: Fn(&MarketVariables, f64) -> f64 + Sync> KPolicy for F {
    fn action(&self, m: &MarketVariables, k: f64) -> f64 {
        self(m, k)
    }
}

impl KPolicy for ActionModel {
    fn action(&self, m: &MarketVariables, k: f64) -> f64 {
        self.predict(m, k)
    }
}

/// How customers are drawn from the replay buffer at each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CustomerDraws {
    /// `N` uniform draws with replacement, shared by every portfolio at that step.
    Sample(usize),
    /// Every buffer entry once, equally weighted.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTrainingConfig {
    pub draws: CustomerDraws,
    pub j: usize,
    pub j_plus: usize,
    /// Range the k-value is clamped to before it reaches the policy.
    pub k_clamp: (f64, f64),
    /// Relative ridge of the linear next-step fit.
    pub u_ridge: f64,
    pub lapse: LapseModel,
    pub n_mc: usize,
    /// Evaluate policy calls on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for ValueTrainingConfig {
    fn default() -> Self {
        Self {
            draws: CustomerDraws::Sample(500),
            j: 24,
            j_plus: 120,
            k_clamp: K_CLAMP,
            u_ridge: 1e-6,
            lapse: LapseModel::default(),
            n_mc: DEFAULT_N_MC,
            parallel: false,
        }
    }
}

/// Fixed inputs of a training run.
pub struct TrainingProblem<'a, Pi: KPolicy + ?Sized, P: Acceptance + ?Sized> {
    pub policy: &'a Pi,
    pub acceptance: &'a P,
    pub buffer: &'a CustomerReplayBuffer,
    pub target: &'a TargetPortfolio,
    pub lambda: f64,
    pub horizon: usize,
}

pub type Curve<'a> = Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>;

impl<'a, Pi: KPolicy + ?Sized, P: Acceptance + ?Sized> TrainingProblem<'a, Pi, P> {
    /// Acceptance as a function of action for each buffer entry.
    pub fn curves(&self) -> Vec<Curve<'a>> {
        let acceptance: &'a P = self.acceptance;
        self.buffer
            .entries()
            .iter()
            .map(|e| acceptance.at_market(e.market))
            .collect()
    }

    pub fn terminal(&self) -> TerminalValue {
        TerminalValue {
            target: self.target.clone(),
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueRow {
    pub t: usize,
    pub f: Vec<u32>,
    pub v_raw: f64,
    pub v_centred: f64,
}

/// All value estimates from a backward pass, recentred per step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValueEstimateDataset {
    pub dims: usize,
    pub rows: Vec<ValueRow>,
}

impl ValueEstimateDataset {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((1..=self.dims).map(|i| format!("f_{i}")));
        h.push("v_raw".into());
        h.push("v_centred".into());
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in &self.rows {
            let mut rec = vec![r.t.to_string()];
            rec.extend(r.f.iter().map(|c| c.to_string()));
            rec.push(r.v_raw.to_string());
            rec.push(r.v_centred.to_string());
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Mean recentred value at each step, in step order.
    pub fn centred_means(&self) -> Vec<(usize, f64)> {
        let mut acc: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
        for r in &self.rows {
            let e = acc.entry(r.t).or_insert((0.0, 0));
            e.0 += r.v_centred;
            e.1 += 1;
        }
        acc.into_iter().map(|(t, (s, n))| (t, s / n as f64)).collect()
    }
}

/// `U(f_j) + mean_i C_i p_i(a_i) (a_i − k_i)` for each portfolio, with the lapse
/// recursion when the config has a nonzero lapse. The same draws serve every
/// portfolio. Policy calls are deduplicated on `(customer, clamped k)`.
pub fn value_estimates<U, Pi, P>(
    problem: &TrainingProblem<'_, Pi, P>,
    curves: &[Curve<'_>],
    u: &U,
    portfolios: &[FrequencyVector],
    draws: &[usize],
    cfg: &ValueTrainingConfig,
    rng: &mut SimRng,
) -> Vec<f64>
where
    U: PortfolioValue + ?Sized,
    Pi: KPolicy + ?Sized,
    P: Acceptance + ?Sized,
{
    let entries = problem.buffer.entries();
    let (k_lo, k_hi) = cfg.k_clamp;
    let ks: Vec<Vec<f64>> = portfolios
        .iter()
        .map(|f| {
            draws
                .iter()
                .map(|&i| {
                    let e = &entries[i];
                    k_value_leaving(u, f, &e.membership, e.cost, cfg.lapse, cfg.n_mc, rng)
                })
                .collect()
        })
        .collect();

    let mut slot: HashMap<(usize, u64), usize> = HashMap::new();
    let mut calls: Vec<(usize, f64)> = Vec::new();
    let call_index: Vec<Vec<usize>> = ks
        .iter()
        .map(|row| {
            row.iter()
                .zip(draws)
                .map(|(&k, &i)| {
                    let kc = k.clamp(k_lo, k_hi);
                    *slot.entry((i, kc.to_bits())).or_insert_with(|| {
                        calls.push((i, kc));
                        calls.len() - 1
                    })
                })
                .collect()
        })
        .collect();
    let act = |&(i, kc): &(usize, f64)| problem.policy.action(&entries[i].market, kc);
    let actions: Vec<f64> = if cfg.parallel {
        calls.par_iter().map(act).collect()
    } else {
        calls.iter().map(act).collect()
    };

    let n = draws.len().max(1) as f64;
    portfolios
        .iter()
        .zip(ks.iter().zip(&call_index))
        .map(|(f, (k_row, idx_row))| {
            let base = expected_value_after_lapse(u, f, cfg.lapse, cfg.n_mc, rng);
            let gain: f64 = draws
                .iter()
                .zip(k_row.iter().zip(idx_row))
                .map(|(&i, (&k, &c))| {
                    let a = actions[c];
                    entries[i].cost * curves[i](a) * (a - k)
                })
                .sum();
            base + gain / n
        })
        .collect()
}

/// Sweeps `t = T, …, 1`, returning the recentred dataset and the final `U`.
pub fn backward_pass<Pi, P, S, F>(
    problem: &TrainingProblem<'_, Pi, P>,
    sampler: &S,
    fitter: &F,
    cfg: &ValueTrainingConfig,
    rng: &mut SimRng,
) -> Result<(ValueEstimateDataset, NextStep<F::Model>)>
where
    Pi: KPolicy + ?Sized,
    P: Acceptance + ?Sized,
    S: PortfolioSampler + ?Sized,
    F: NextStepFitter,
{
    let curves = problem.curves();
    let mut u: NextStep<F::Model> = NextStep::Terminal(problem.terminal());
    let mut data = ValueEstimateDataset {
        dims: problem.target.len(),
        rows: Vec::new(),
    };
    for t in (1..=problem.horizon).rev() {
        let portfolios = sampler.sample(t, cfg.j, rng);
        let draws: Vec<usize> = match cfg.draws {
            CustomerDraws::Sample(n) => (0..n).map(|_| problem.buffer.sample_index(rng)).collect(),
            CustomerDraws::Exhaustive => (0..problem.buffer.len()).collect(),
        };
        let values = value_estimates(problem, &curves, &u, &portfolios, &draws, cfg, rng);
        let prior = match &u {
            NextStep::Fitted(m) => Some(m),
            NextStep::Terminal(_) => None,
        };
        let fitted = fitter.fit_near(&portfolios, &values, prior)?;
        let augment = sampler.sample(t, cfg.j_plus, rng);
        let augment_values: Vec<f64> = augment.iter().map(|f| fitted.value(&f.counts)).collect();

        let start = data.rows.len();
        for (f, v) in portfolios
            .into_iter()
            .zip(values)
            .chain(augment.into_iter().zip(augment_values))
        {
            data.rows.push(ValueRow {
                t,
                f: f.counts,
                v_raw: v,
                v_centred: 0.0,
            });
        }
        let step = &mut data.rows[start..];
        let mean = step.iter().map(|r| r.v_raw).sum::<f64>() / step.len() as f64;
        step.iter_mut().for_each(|r| r.v_centred = r.v_raw - mean);
        u = NextStep::Fitted(fitted);
    }
    Ok((data, u))
}

/// Full training: backward pass with a linear next-step model, then a network
/// fitted to the recentred estimates.
pub fn train_value_function<Pi, P, S>(
    problem: &TrainingProblem<'_, Pi, P>,
    sampler: &S,
    cfg: &ValueTrainingConfig,
    net: &ValueNetConfig,
    rng: &mut SimRng,
) -> Result<(PursuitValue, ValueEstimateDataset)>
where
    Pi: KPolicy + ?Sized,
    P: Acceptance + ?Sized,
    S: PortfolioSampler + ?Sized,
{
    let (data, _) = backward_pass(
        problem,
        sampler,
        &super::value::LinearFitter { ridge: cfg.u_ridge },
        cfg,
        rng,
    )?;
    let fitted = fit_mlp_value(&data, problem.horizon, net, rng)?;
    Ok((
        PursuitValue {
            fitted: ValueFn::Mlp(fitted),
            terminal: problem.terminal(),
            horizon: problem.horizon,
        },
        data,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::CustomerFeatures;
    use crate::replay::ReplayEntry;
    use crate::rl::sampler::SamplerConfig;
    use crate::rng::seeded;
    use rand::Rng;

    struct Never;
    impl Acceptance for Never {
        fn accept_prob(&self, _: &MarketVariables, _: f64) -> f64 {
            0.0
        }
    }

    struct Linear;
    impl Acceptance for Linear {
        fn accept_prob(&self, _: &MarketVariables, a: f64) -> f64 {
            1.5 - a / 2.0
        }
    }

    struct Fixed(f64);
    impl KPolicy for Fixed {
        fn action(&self, _: &MarketVariables, _: f64) -> f64 {
            self.0
        }
    }

    fn buffer(n: usize) -> CustomerReplayBuffer {
        let mut rng = seeded(9);
        CustomerReplayBuffer::new(
            (0..n)
                .map(|i| ReplayEntry {
                    features: CustomerFeatures {
                        customer_id: i as u64,
                        age: 40.0,
                        region: 0,
                        occupation: 0,
                        vehicle_value: 1.0,
                        years_licensed: 1.0,
                        income: 1.0,
                        risk_score: 0.5,
                    },
                    market: MarketVariables {
                        m1: 1.1,
                        m3: 1.2,
                        m5: 1.3,
                    },
                    cost: rng.random_range(50.0..150.0),
                    membership: (0..3).map(|_| rng.random_bool(0.3)).collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn sampler(t: usize) -> SamplerConfig {
        SamplerConfig {
            sigma: 0.9,
            p_bar: vec![0.1, 0.2, 0.05],
            p_star: vec![0.2, 0.1, 0.1],
            horizon: t,
        }
    }

    #[test]
    fn no_profit_and_no_loss_gives_zero_values() {
        let buf = buffer(50);
        let target = TargetPortfolio::new(vec![4, 2, 2]);
        let problem = TrainingProblem {
            policy: &Fixed(1.3),
            acceptance: &Never,
            buffer: &buf,
            target: &target,
            lambda: 0.0,
            horizon: 20,
        };
        let cfg = ValueTrainingConfig {
            draws: CustomerDraws::Sample(40),
            j: 8,
            j_plus: 16,
            ..ValueTrainingConfig::default()
        };
        let (v, data) = train_value_function(
            &problem,
            &sampler(20),
            &cfg,
            &ValueNetConfig::default(),
            &mut seeded(1),
        )
        .unwrap();
        assert!(data
            .rows
            .iter()
            .all(|r| r.v_raw.abs() < 1e-9 && r.v_centred.abs() < 1e-9));
        use crate::rl::value::TimeValue;
        for r in &data.rows {
            assert!(v.value_at(&r.f, r.t).abs() < 1e-9);
        }
    }

    #[test]
    fn recentred_means_vanish_and_rows_cover_each_step() {
        let buf = buffer(80);
        let target = TargetPortfolio::new(vec![4, 2, 2]);
        let problem = TrainingProblem {
            policy: &Fixed(1.2),
            acceptance: &Linear,
            buffer: &buf,
            target: &target,
            lambda: 100.0,
            horizon: 15,
        };
        let cfg = ValueTrainingConfig {
            draws: CustomerDraws::Sample(60),
            j: 12,
            j_plus: 20,
            ..ValueTrainingConfig::default()
        };
        let (data, _) = backward_pass(
            &problem,
            &sampler(15),
            &super::super::value::LinearFitter::default(),
            &cfg,
            &mut seeded(2),
        )
        .unwrap();
        assert_eq!(data.rows.len(), 15 * 32);
        for (_, m) in data.centred_means() {
            assert!(m.abs() < 1e-9);
        }
        let mut out = Vec::new();
        data.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t,f_1,f_2,f_3,v_raw,v_centred\n"));
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let buf = buffer(80);
        let target = TargetPortfolio::new(vec![4, 2, 2]);
        let policy = |m: &MarketVariables, k: f64| (m.m1 + 0.3 * k).clamp(1.0, 2.0);
        let problem = TrainingProblem {
            policy: &policy,
            acceptance: &Linear,
            buffer: &buf,
            target: &target,
            lambda: 100.0,
            horizon: 10,
        };
        let mut cfg = ValueTrainingConfig {
            draws: CustomerDraws::Sample(60),
            j: 8,
            j_plus: 8,
            ..ValueTrainingConfig::default()
        };
        let fitter = super::super::value::LinearFitter::default();
        let (a, _) = backward_pass(&problem, &sampler(10), &fitter, &cfg, &mut seeded(3)).unwrap();
        cfg.parallel = true;
        let (b, _) = backward_pass(&problem, &sampler(10), &fitter, &cfg, &mut seeded(3)).unwrap();
        assert_eq!(a, b);
    }
}
