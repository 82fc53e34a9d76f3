//! Two-sample comparisons: Mann-Whitney U, Cohen's d and the common-language
//! effect size.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest combined sample size tested exactly by default.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// `a` tends to be smaller than `b`.
    Less,
    /// `a` tends to be larger than `b`.
    Greater,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `U` for the first sample: pairs with `x > y`, ties counting ½.
    pub u: f64,
    pub p: f64,
}

fn check(name: &str, xs: &[f64], min: usize) -> Result<()> {
    if xs.len() < min {
        return Err(Error::InvalidArgument(format!(
            "sample {name} needs at least {min} values, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sample {name} has non-finite values"
        )));
    }
    Ok(())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with `n − 1` in the denominator; zero for a single value.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Midranks (1-based) of the pooled sample, doubled so they are integers.
fn doubled_midranks(pooled: &[f64]) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    idx.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && pooled[idx[j + 1]] == pooled[idx[i]] {
            j += 1;
        }
        // Positions i..=j share rank ((i + 1) + (j + 1)) / 2.
        for &k in &idx[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        i = j + 1;
    }
    ranks
}

fn tie_sizes(pooled: &[f64]) -> Vec<usize> {
    let mut v = pooled.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out = vec![];
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        out.push(j - i + 1);
        i = j + 1;
    }
    out
}

fn u_statistic(a: &[f64], b: &[f64]) -> (f64, Vec<u64>) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let r2 = doubled_midranks(&pooled);
    let rank_sum2: u64 = r2[..a.len()].iter().sum();
    let na = a.len() as f64;
    (rank_sum2 as f64 / 2.0 - na * (na + 1.0) / 2.0, r2)
}

/// Exact permutation test: the null distribution of the rank sum of `a` over
/// all equally likely assignments of the pooled midranks.
pub fn mann_whitney_exact(a: &[f64], b: &[f64], alt: Alternative) -> Result<MannWhitney> {
    check("a", a, 1)?;
    check("b", b, 1)?;
    let (u, r2) = u_statistic(a, b);
    if tie_sizes(&r2.iter().map(|&r| r as f64).collect::<Vec<_>>()).len() == 1 {
        return Ok(MannWhitney { u, p: 1.0 });
    }
    let na = a.len();
    let max_sum: usize = r2.iter().sum::<u64>() as usize;
    // counts[k][s]: subsets of size k with doubled rank sum s.
    let mut counts = vec![vec![0f64; max_sum + 1]; na + 1];
    counts[0][0] = 1.0;
    for &r in &r2 {
        let r = r as usize;
        for k in (1..=na).rev() {
            let (lo, hi) = counts.split_at_mut(k);
            for s in (r..=max_sum).rev() {
                hi[0][s] += lo[k - 1][s - r];
            }
        }
    }
    let total: f64 = counts[na].iter().sum();
    let observed: usize = r2[..na].iter().sum::<u64>() as usize;
    let dist = &counts[na];
    let p = match alt {
        Alternative::Less => dist[..=observed].iter().sum::<f64>(),
        Alternative::Greater => dist[observed..].iter().sum::<f64>(),
        Alternative::TwoSided => {
            // At least as far from the null mean as the observation.
            let mid2 = (na * max_sum) as f64 / r2.len() as f64;
            let gap = (observed as f64 - mid2).abs();
            dist.iter()
                .enumerate()
                .filter(|(s, _)| (*s as f64 - mid2).abs() >= gap - 1e-9)
                .map(|(_, c)| c)
                .sum::<f64>()
        }
    } / total;
    Ok(MannWhitney { u, p: p.min(1.0) })
}

/// Normal approximation with tie and continuity corrections.
pub fn mann_whitney_normal(a: &[f64], b: &[f64], alt: Alternative) -> Result<MannWhitney> {
    check("a", a, 1)?;
    check("b", b, 1)?;
    let (u, _) = u_statistic(a, b);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let ties: f64 = tie_sizes(&pooled)
        .iter()
        .map(|&t| (t as f64).powi(3) - t as f64)
        .sum();
    let var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if !(var > 0.0) {
        return Ok(MannWhitney { u, p: 1.0 });
    }
    let sd = var.sqrt();
    let mu = na * nb / 2.0;
    let phi = Normal::new(0.0, 1.0).expect("standard normal");
    let p = match alt {
        Alternative::Less => phi.cdf((u - mu + 0.5) / sd),
        Alternative::Greater => phi.sf((u - mu - 0.5) / sd),
        Alternative::TwoSided => {
            let z = ((u - mu).abs() - 0.5).max(0.0) / sd;
            2.0 * phi.sf(z)
        }
    };
    Ok(MannWhitney { u, p: p.min(1.0) })
}

/// Exact for combined sizes up to [`EXACT_MAX_N`], normal approximation above.
pub fn mann_whitney_u(a: &[f64], b: &[f64], alt: Alternative) -> Result<MannWhitney> {
    if a.len() + b.len() <= EXACT_MAX_N {
        mann_whitney_exact(a, b, alt)
    } else {
        mann_whitney_normal(a, b, alt)
    }
}

/// `(mean(a) − mean(b)) / s_pooled`.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    check("a", a, 2)?;
    check("b", b, 2)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0)).sqrt();
    if !(pooled > 0.0) {
        return Err(Error::Numerical("pooled standard deviation is zero".into()));
    }
    Ok((mean(a) - mean(b)) / pooled)
}

/// Probability that a draw from `a` beats a draw from `b`, ties counting ½.
pub fn cles(a: &[f64], b: &[f64]) -> Result<f64> {
    check("a", a, 1)?;
    check("b", b, 1)?;
    let mut wins = 0.0;
    for x in a {
        for y in b {
            if x > y {
                wins += 1.0;
            } else if x == y {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (a.len() * b.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub u: f64,
    pub p: f64,
    /// `None` when both samples are constant.
    pub cohens_d: Option<f64>,
    pub cles: f64,
}

pub fn compare(a: &[f64], b: &[f64], alt: Alternative) -> Result<Comparison> {
    let mw = mann_whitney_u(a, b, alt)?;
    let d = if a.len() >= 2 && b.len() >= 2 {
        cohens_d(a, b).ok()
    } else {
        None
    };
    Ok(Comparison {
        n_a: a.len(),
        n_b: b.len(),
        mean_a: mean(a),
        mean_b: mean(b),
        u: mw.u,
        p: mw.p,
        cohens_d: d,
        cles: cles(a, b)?,
    })
}
