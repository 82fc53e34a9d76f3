//! Portfolio samplers used to choose where value estimates are made.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::baseline::HistoricRates;
use crate::portfolio::{FrequencyVector, TargetPortfolio};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub sigma: f64,
    /// Historic per-step rates `f̄ / T`.
    pub p_bar: Vec<f64>,
    /// Target per-step rates `f* / T`.
    pub p_star: Vec<f64>,
    pub horizon: usize,
}

impl SamplerConfig {
    pub fn new(rates: &HistoricRates, target: &TargetPortfolio, horizon: usize, sigma: f64) -> Self {
        let t = horizon as f64;
        Self {
            sigma,
            p_bar: rates.f_bar.iter().map(|f| f / t).collect(),
            p_star: target.target.iter().map(|&f| f as f64 / t).collect(),
            horizon,
        }
    }

    pub fn p_max(&self) -> Vec<f64> {
        self.p_bar
            .iter()
            .zip(&self.p_star)
            .map(|(a, b)| (1.0 + self.sigma) * a.max(*b))
            .collect()
    }

    pub fn p_min(&self) -> Vec<f64> {
        self.p_bar
            .iter()
            .zip(&self.p_star)
            .map(|(a, b)| (1.0 - self.sigma) * a.min(*b))
            .collect()
    }
}

fn binomial_vector<R: Rng + ?Sized>(
    rates: impl Iterator<Item = f64>,
    t: usize,
    rng: &mut R,
) -> FrequencyVector {
    FrequencyVector::from_counts(
        rates
            .map(|p| {
                Binomial::new(t as u64, p.clamp(0.0, 1.0))
                    .expect("rate clamped to [0, 1]")
                    .sample(rng) as u32
            })
            .collect(),
    )
}

/// Each component ~ Binomial(t, min(1, p̄ + 1/T)).
pub fn sample_previously_on_policy<R: Rng + ?Sized>(
    p_bar: &[f64],
    t: usize,
    horizon: usize,
    rng: &mut R,
) -> FrequencyVector {
    let bump = 1.0 / horizon as f64;
    binomial_vector(p_bar.iter().map(|p| p + bump), t, rng)
}

/// Each component ~ Binomial(t, p*).
pub fn sample_target_on_policy<R: Rng + ?Sized>(p_star: &[f64], t: usize, rng: &mut R) -> FrequencyVector {
    binomial_vector(p_star.iter().copied(), t, rng)
}

/// `t · (ω p_max + (1 − ω) p_min)` with both rates capped at one.
pub fn high_coverage_mean(cfg: &SamplerConfig, t: usize, omega: f64) -> Vec<f64> {
    cfg.p_max()
        .iter()
        .zip(cfg.p_min())
        .map(|(hi, lo)| t as f64 * (omega * hi.min(1.0) + (1.0 - omega) * lo.clamp(0.0, 1.0)))
        .collect()
}

/// One portfolio per evenly spaced `ω ∈ [0, 1]`, each component rounded to a
/// neighbouring integer at random so its mean is the interpolated value.
pub fn sample_high_coverage<R: Rng + ?Sized>(
    cfg: &SamplerConfig,
    t: usize,
    count: usize,
    rng: &mut R,
) -> Vec<FrequencyVector> {
    (0..count)
        .map(|j| {
            let omega = if count == 1 {
                0.5
            } else {
                j as f64 / (count - 1) as f64
            };
            FrequencyVector::from_counts(
                high_coverage_mean(cfg, t, omega)
                    .into_iter()
                    .map(|x| {
                        let base = x.floor();
                        let frac = x - base;
                        base as u32 + (frac > 0.0 && rng.random::<f64>() < frac) as u32
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Counts drawn from the previously-on-policy, target and high-coverage sources
/// in the ratio 1:1:2, rounded so the total is `j`.
pub fn composition(j: usize) -> (usize, usize, usize) {
    let quarter = (j as f64 / 4.0).round() as usize;
    let prev = quarter.min(j);
    let target = quarter.min(j - prev);
    (prev, target, j - prev - target)
}

pub fn sample_portfolios<R: Rng + ?Sized>(
    cfg: &SamplerConfig,
    t: usize,
    j: usize,
    rng: &mut R,
) -> Vec<FrequencyVector> {
    let (n_prev, n_target, n_cover) = composition(j);
    let mut out = Vec::with_capacity(j);
    for _ in 0..n_prev {
        out.push(sample_previously_on_policy(&cfg.p_bar, t, cfg.horizon, rng));
    }
    for _ in 0..n_target {
        out.push(sample_target_on_policy(&cfg.p_star, t, rng));
    }
    out.extend(sample_high_coverage(cfg, t, n_cover, rng));
    out
}

/// Chooses the portfolios at which values are estimated for step `t`.
pub trait PortfolioSampler: Sync {
    fn sample(&self, t: usize, count: usize, rng: &mut SimRng) -> Vec<FrequencyVector>;
}

impl PortfolioSampler for SamplerConfig {
    fn sample(&self, t: usize, count: usize, rng: &mut SimRng) -> Vec<FrequencyVector> {
        sample_portfolios(self, t, count, rng)
    }
}

/// Every portfolio reachable before step `t` (each count in `0..t`), ignoring
/// the requested count. Only for tiny instances; returns nothing when `count`
/// is zero so augmentation can be switched off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExhaustiveSampler {
    pub dims: usize,
}

impl PortfolioSampler for ExhaustiveSampler {
    fn sample(&self, t: usize, count: usize, _: &mut SimRng) -> Vec<FrequencyVector> {
        if count == 0 {
            return Vec::new();
        }
        let mut out = vec![FrequencyVector::zeros(self.dims)];
        for d in 0..self.dims {
            out = out
                .into_iter()
                .flat_map(|f| {
                    (0..t as u32).map(move |c| {
                        let mut g = f.clone();
                        g.counts[d] = c;
                        g
                    })
                })
                .collect();
        }
        out
    }
}
