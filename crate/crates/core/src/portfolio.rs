//! Indicator sets, frequency representations of portfolios, the portfolio loss and
//! target generation.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::market::customer::{CustomerFeatures, OCCUPATIONS, REGIONS};

/// Customer attributes an indicator set can be defined over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Age,
    Region,
    Occupation,
    VehicleValue,
    YearsLicensed,
    Income,
    RiskScore,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::Age,
        Feature::Region,
        Feature::Occupation,
        Feature::VehicleValue,
        Feature::YearsLicensed,
        Feature::Income,
        Feature::RiskScore,
    ];

    /// Number of categories for categorical features.
    pub fn categories(self) -> Option<usize> {
        match self {
            Feature::Region => Some(REGIONS),
            Feature::Occupation => Some(OCCUPATIONS),
            _ => None,
        }
    }

    pub fn numeric_value(self, c: &CustomerFeatures) -> f64 {
        match self {
            Feature::Age => c.age,
            Feature::Region => c.region as f64,
            Feature::Occupation => c.occupation as f64,
            Feature::VehicleValue => c.vehicle_value,
            Feature::YearsLicensed => c.years_licensed,
            Feature::Income => c.income,
            Feature::RiskScore => c.risk_score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    /// Closed interval `[lo, hi]`.
    Interval {
        lo: f64,
        hi: f64,
    },
    Values {
        values: Vec<u8>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSet {
    pub feature: Feature,
    pub predicate: Predicate,
}

impl IndicatorSet {
    pub fn contains(&self, c: &CustomerFeatures) -> bool {
        match &self.predicate {
            Predicate::Interval { lo, hi } => {
                let v = self.feature.numeric_value(c);
                *lo <= v && v <= *hi
            }
            Predicate::Values { values } => {
                let v = match self.feature {
                    Feature::Region => c.region,
                    Feature::Occupation => c.occupation,
                    _ => return false,
                };
                values.contains(&v)
            }
        }
    }
}

pub fn membership(sets: &[IndicatorSet], c: &CustomerFeatures) -> Vec<bool> {
    sets.iter().map(|s| s.contains(c)).collect()
}

/// Counts of portfolio customers per indicator set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrequencyVector {
    pub counts: Vec<u32>,
}

impl FrequencyVector {
    pub fn zeros(len: usize) -> Self {
        Self { counts: vec![0; len] }
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Adds one customer with the given membership.
    pub fn add_customer(&mut self, membership: &[bool]) {
        assert_eq!(membership.len(), self.counts.len(), "membership length mismatch");
        for (c, &m) in self.counts.iter_mut().zip(membership) {
            *c += m as u32;
        }
    }

    /// The frequency vector after adding one customer.
    pub fn with_customer(&self, membership: &[bool]) -> Self {
        let mut next = self.clone();
        next.add_customer(membership);
        next
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

/// Desired counts per indicator set, each at least one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetPortfolio {
    pub target: Vec<u32>,
}

impl TargetPortfolio {
    pub fn new(target: Vec<u32>) -> Self {
        assert!(target.iter().all(|&t| t >= 1), "targets must be at least 1");
        Self { target }
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }
}

/// Mean over sets of `|f_i − f*_i| / max(f_i, f*_i)`, with `0/0` counted as zero.
pub fn loss_counts(f: &[u32], target: &[u32]) -> f64 {
    assert_eq!(f.len(), target.len(), "loss on vectors of different length");
    if f.is_empty() {
        return 0.0;
    }
    let total: f64 = f
        .iter()
        .zip(target)
        .map(|(&a, &b)| {
            let hi = a.max(b);
            if hi == 0 {
                0.0
            } else {
                a.abs_diff(b) as f64 / hi as f64
            }
        })
        .sum();
    total / f.len() as f64
}

pub fn loss(f: &FrequencyVector, target: &TargetPortfolio) -> f64 {
    loss_counts(&f.counts, &target.target)
}

/// Target counts from historic frequencies: doubled when `f̄ ≤ 10`, otherwise
/// doubled (rounded up) or halved (rounded down) on a fair coin. Never below one.
pub fn generate_target<R: Rng + ?Sized>(hist_freq: &[f64], rng: &mut R) -> TargetPortfolio {
    let target = hist_freq
        .iter()
        .map(|&fbar| {
            let double = (2.0 * fbar).ceil();
            let value = if fbar <= 10.0 || rng.random_bool(0.5) {
                double
            } else {
                (fbar / 2.0).floor()
            };
            (value as u32).max(1)
        })
        .collect();
    TargetPortfolio { target }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Picks `count` distinct features at random. Numeric features get an interval
/// between two random quantiles of `reference` (the generator's marginal);
/// categorical features get a random nonempty proper subset of values.
pub fn generate_indicator_sets<R: Rng + ?Sized>(
    reference: &[CustomerFeatures],
    count: usize,
    rng: &mut R,
) -> Vec<IndicatorSet> {
    assert!(
        count <= Feature::ALL.len(),
        "at most {} indicator sets",
        Feature::ALL.len()
    );
    assert!(!reference.is_empty(), "reference sample is empty");
    let mut picked: Vec<usize> = sample_indices(rng, Feature::ALL.len(), count).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|idx| {
            let feature = Feature::ALL[idx];
            let predicate = match feature.categories() {
                Some(n) => loop {
                    let values: Vec<u8> = (0..n as u8).filter(|_| rng.random_bool(0.5)).collect();
                    if !values.is_empty() && values.len() < n {
                        break Predicate::Values { values };
                    }
                },
                None => {
                    let mut xs: Vec<f64> = reference.iter().map(|c| feature.numeric_value(c)).collect();
                    xs.sort_by(f64::total_cmp);
                    let (a, b) = loop {
                        let a: f64 = rng.random();
                        let b: f64 = rng.random();
                        if (a - b).abs() >= 0.2 {
                            break (a.min(b), a.max(b));
                        }
                    };
                    Predicate::Interval {
                        lo: quantile(&xs, a),
                        hi: quantile(&xs, b),
                    }
                }
            };
            IndicatorSet { feature, predicate }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::customer::{CustomerConfig, CustomerGenerator};
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn customer(age: f64, region: u8, income: f64) -> CustomerFeatures {
        CustomerFeatures {
            customer_id: 1,
            age,
            region,
            occupation: 2,
            vehicle_value: 10_000.0,
            years_licensed: 5.0,
            income,
            risk_score: 0.3,
        }
    }

    fn fixture_sets() -> Vec<IndicatorSet> {
        vec![
            IndicatorSet {
                feature: Feature::Age,
                predicate: Predicate::Interval { lo: 25.0, hi: 40.0 },
            },
            IndicatorSet {
                feature: Feature::Region,
                predicate: Predicate::Values { values: vec![0, 3] },
            },
            IndicatorSet {
                feature: Feature::Income,
                predicate: Predicate::Interval {
                    lo: 30_000.0,
                    hi: 1e9,
                },
            },
        ]
    }

    #[test]
    fn membership_fixtures() {
        let sets = fixture_sets();
        assert_eq!(
            membership(&sets, &customer(30.0, 3, 20_000.0)),
            vec![true, true, false]
        );
        assert_eq!(
            membership(&sets, &customer(40.0, 1, 30_000.0)),
            vec![true, false, true]
        );
        assert_eq!(
            membership(&sets, &customer(18.0, 5, 29_999.0)),
            vec![false, false, false]
        );
    }

    #[test]
    fn empty_predicate_set_is_never_a_member() {
        let set = IndicatorSet {
            feature: Feature::Region,
            predicate: Predicate::Values { values: vec![] },
        };
        assert_eq!(membership(&[set], &customer(30.0, 0, 1.0)), vec![false]);
    }

    #[test]
    fn full_age_range_contains_everyone() {
        let set = IndicatorSet {
            feature: Feature::Age,
            predicate: Predicate::Interval { lo: 18.0, hi: 90.0 },
        };
        let mut gen = CustomerGenerator::new(CustomerConfig::default(), 0);
        let mut rng = seeded(5);
        for _ in 0..2000 {
            assert!(set.contains(&gen.sample(&mut rng).features));
        }
    }

    #[test]
    fn add_customer_cases() {
        let mut f = FrequencyVector::from_counts(vec![1, 2]);
        f.add_customer(&[false, false]);
        assert_eq!(f.counts, vec![1, 2]);
        let mut z = FrequencyVector::zeros(3);
        z.add_customer(&[true, true, true]);
        assert_eq!(z.counts, vec![1, 1, 1]);
    }

    #[test]
    fn loss_hand_cases() {
        assert_eq!(loss_counts(&[3, 4], &[3, 4]), 0.0);
        assert_eq!(loss_counts(&[0, 0], &[5, 7]), 1.0);
        assert_eq!(loss_counts(&[5], &[10]), 0.5);
        assert_eq!(loss_counts(&[0, 2], &[0, 2]), 0.0);
    }

    #[test]
    fn target_generation_cases() {
        let mut rng = seeded(0);
        assert_eq!(generate_target(&[4.0], &mut rng).target, vec![8]);
        assert_eq!(generate_target(&[0.0], &mut rng).target, vec![1]);
        assert_eq!(generate_target(&[2.3], &mut rng).target, vec![5]);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..100 {
            seen.insert(generate_target(&[20.0], &mut rng).target[0]);
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![10, 40]);
        for _ in 0..100 {
            let t = generate_target(&[21.5], &mut rng).target[0];
            assert!(t == 10 || t == 43);
        }
    }

    #[test]
    fn generated_sets_are_distinct_and_valid() {
        let mut gen = CustomerGenerator::new(CustomerConfig::default(), 0);
        let mut rng = seeded(8);
        let reference: Vec<_> = (0..2000).map(|_| gen.sample(&mut rng).features).collect();
        for _ in 0..50 {
            let sets = generate_indicator_sets(&reference, 5, &mut rng);
            assert_eq!(sets.len(), 5);
            let mut feats: Vec<_> = sets.iter().map(|s| s.feature).collect();
            feats.dedup();
            assert_eq!(feats.len(), 5);
            for s in &sets {
                match &s.predicate {
                    Predicate::Interval { lo, hi } => assert!(lo < hi),
                    Predicate::Values { values } => {
                        assert!(!values.is_empty());
                        assert!(values.len() < s.feature.categories().unwrap());
                    }
                }
                // Every set covers a nontrivial share of the reference population.
                let share = reference.iter().filter(|c| s.contains(c)).count();
                assert!(share > 0);
            }
        }
    }

    proptest! {
        #[test]
        fn loss_is_bounded_symmetric_and_zero_iff_equal(
            pairs in prop::collection::vec((0u32..50, 0u32..50), 1..8)
        ) {
            let f: Vec<u32> = pairs.iter().map(|p| p.0).collect();
            let g: Vec<u32> = pairs.iter().map(|p| p.1).collect();
            let l = loss_counts(&f, &g);
            prop_assert!((0.0..=1.0).contains(&l));
            prop_assert_eq!(l, loss_counts(&g, &f));
            prop_assert_eq!(l == 0.0, f == g);
        }

        #[test]
        fn adding_customers_is_order_independent(
            members in prop::collection::vec(prop::collection::vec(any::<bool>(), 4), 0..30),
            seed in any::<u64>()
        ) {
            let mut a = FrequencyVector::zeros(4);
            for m in &members {
                a.add_customer(m);
            }
            let mut shuffled = members.clone();
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut seeded(seed));
            let mut b = FrequencyVector::zeros(4);
            for m in &shuffled {
                b.add_customer(m);
            }
            prop_assert_eq!(a, b);
        }
    }
}
