//! Customers leaving the portfolio: each counted customer independently lapses
//! with probability `q` per step, so counts are thinned binomially.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::training::{value_estimates, KPolicy, TrainingProblem, ValueTrainingConfig};
use super::value::{k_value, PortfolioValue};
use crate::error::{Error, Result};
use crate::models::Acceptance;
use crate::portfolio::FrequencyVector;
use crate::rng::SimRng;

pub const DEFAULT_N_MC: usize = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LapseModel {
    pub q: f64,
}

impl LapseModel {
    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!(
                "lapse probability {q} outside [0, 1)"
            )));
        }
        Ok(Self { q })
    }

    pub fn is_none(&self) -> bool {
        self.q == 0.0
    }
}

fn survivors<R: Rng + ?Sized>(n: u32, keep: f64, rng: &mut R) -> u32 {
    if n == 0 {
        0
    } else {
        Binomial::new(n as u64, keep).expect("keep in (0, 1]").sample(rng) as u32
    }
}

/// One coupled draw of the thinned portfolios without and with the new customer:
/// the existing customers' fates are shared.
fn thin_pair<R: Rng + ?Sized>(f: &[u32], membership: &[bool], q: f64, rng: &mut R) -> (Vec<u32>, Vec<u32>) {
    let keep = 1.0 - q;
    let stays = rng.random::<f64>() < keep;
    let without: Vec<u32> = f.iter().map(|&c| survivors(c, keep, rng)).collect();
    let with = without
        .iter()
        .zip(membership)
        .map(|(&c, &m)| c + (m && stays) as u32)
        .collect();
    (without, with)
}

/// `E[U(f')]` after one round of lapses, by `n_mc` Monte Carlo draws.
pub fn expected_value_after_lapse<U: PortfolioValue + ?Sized, R: Rng + ?Sized>(
    u: &U,
    f: &FrequencyVector,
    lapse: LapseModel,
    n_mc: usize,
    rng: &mut R,
) -> f64 {
    if lapse.is_none() {
        return u.value(&f.counts);
    }
    let keep = 1.0 - lapse.q;
    let total: f64 = (0..n_mc.max(1))
        .map(|_| {
            let g: Vec<u32> = f.counts.iter().map(|&c| survivors(c, keep, rng)).collect();
            u.value(&g)
        })
        .sum();
    total / n_mc.max(1) as f64
}

/// k-value with lapses: `1 − (E[U(f')|f ∪ s] − E[U(f')|f]) / C`, both
/// expectations from the same `n_mc` coupled thinnings. With `q = 0` this is
/// exactly [`k_value`].
pub fn k_value_leaving<U: PortfolioValue + ?Sized, R: Rng + ?Sized>(
    u: &U,
    f: &FrequencyVector,
    membership: &[bool],
    cost: f64,
    lapse: LapseModel,
    n_mc: usize,
    rng: &mut R,
) -> f64 {
    if lapse.is_none() {
        return k_value(u, f, membership, cost);
    }
    let n = n_mc.max(1);
    let diff: f64 = (0..n)
        .map(|_| {
            let (without, with) = thin_pair(&f.counts, membership, lapse.q, rng);
            u.value(&with) - u.value(&without)
        })
        .sum();
    1.0 - diff / n as f64 / cost
}

/// Value estimates for `portfolios` under the lapse recursion.
pub fn value_recursion_leaving<U, Pi, P>(
    problem: &TrainingProblem<'_, Pi, P>,
    u: &U,
    portfolios: &[FrequencyVector],
    draws: &[usize],
    cfg: &ValueTrainingConfig,
    lapse: LapseModel,
    rng: &mut SimRng,
) -> Vec<f64>
where
    U: PortfolioValue + ?Sized,
    Pi: KPolicy + ?Sized,
    P: Acceptance + ?Sized,
{
    let curves = problem.curves();
    let cfg = ValueTrainingConfig { lapse, ..cfg.clone() };
    value_estimates(problem, &curves, u, portfolios, draws, &cfg, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::value::LinearValue;
    use crate::rng::seeded;

    fn fv(c: &[u32]) -> FrequencyVector {
        FrequencyVector::from_counts(c.to_vec())
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(LapseModel::new(1.0).is_err());
        assert!(LapseModel::new(-0.1).is_err());
        assert!(LapseModel::new(0.3).is_ok());
    }

    #[test]
    fn zero_lapse_is_the_base_k() {
        let u = LinearValue {
            weights: vec![3.0, -2.0],
            bias: 1.0,
        };
        let f = fv(&[5, 2]);
        let mut rng = seeded(0);
        let a = k_value_leaving(&u, &f, &[true, true], 70.0, LapseModel::default(), 64, &mut rng);
        assert_eq!(a, k_value(&u, &f, &[true, true], 70.0));
    }

    #[test]
    fn linear_value_closed_form_at_q_point_two() {
        // With U = w·f + b, E[U(f')|f ∪ s] − E[U(f')|f] = (1 − q) w·m.
        let w = vec![30.0, -12.0, 5.0];
        let u = LinearValue {
            weights: w.clone(),
            bias: -7.0,
        };
        let f = fv(&[12, 40, 3]);
        let m = [true, true, false];
        let cost = 90.0;
        let q = 0.2;
        let exact = 1.0 - (1.0 - q) * (w[0] + w[1]) / cost;
        let mut rng = seeded(1);
        let reps: Vec<f64> = (0..200)
            .map(|_| k_value_leaving(&u, &f, &m, cost, LapseModel { q }, 64, &mut rng))
            .collect();
        let n = reps.len() as f64;
        let mean = reps.iter().sum::<f64>() / n;
        let sd = (reps.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        // Each replicate is itself a 64-draw average, so its spread is the s.e.
        assert!((reps[0] - exact).abs() < 3.0 * sd, "{} vs {exact}", reps[0]);
        assert!((mean - exact).abs() < 3.0 * sd / n.sqrt());
    }

    #[test]
    fn expected_value_after_lapse_is_linear_in_counts() {
        let u = LinearValue {
            weights: vec![2.0, 1.0],
            bias: 4.0,
        };
        let f = fv(&[50, 20]);
        let q = 0.3;
        let exact = 4.0 + (1.0 - q) * (2.0 * 50.0 + 20.0);
        let mut rng = seeded(2);
        let est = expected_value_after_lapse(&u, &f, LapseModel { q }, 4096, &mut rng);
        let var = q * (1.0 - q) * (4.0 * 50.0 + 20.0);
        assert!((est - exact).abs() < 3.0 * (var / 4096.0).sqrt());
    }

    #[test]
    fn near_total_lapse_makes_k_one() {
        let u = |f: &[u32]| {
            if f.iter().all(|&c| c == 0) {
                -5.0
            } else {
                100.0 * f[0] as f64
            }
        };
        let f = fv(&[3]);
        let k = k_value_leaving(
            &u,
            &f,
            &[true],
            10.0,
            LapseModel { q: 1.0 - 1e-15 },
            64,
            &mut seeded(3),
        );
        assert_eq!(k, 1.0);
    }
}
