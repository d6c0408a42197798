//! Seeded Monte Carlo over random bidder assignments.
//!
//! Trial `i` draws everything from generators seeded by `(seed, i)` alone and
//! trials are combined with exact integer sums, so the report does not depend
//! on how rayon schedules the work.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::money::{MoneyMicros, MICROS_PER_UNIT};
use crate::network::{assign_bidders_uniform, check_sorted};

use super::closed_form::{
    closed_form_publisher_loss, expected_loss_uniform, int, loss_upper_bound,
};
use super::pipeline::run_trial;
use super::AnalysisError;

pub const DEFAULT_SEED: u64 = 0x05F2_2009;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BidModel {
    /// The same sorted bids in every trial.
    Fixed(Vec<MoneyMicros>),
    /// `n` i.i.d. uniform draws on `[0, 1]` units (integer micros), sorted.
    UniformUnit,
}

impl fmt::Display for BidModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BidModel::UniformUnit => f.write_str("uniform"),
            BidModel::Fixed(bids) => {
                f.write_str("fixed:")?;
                for (i, b) in bids.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{}", b.micros())?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for BidModel {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "uniform" {
            return Ok(BidModel::UniformUnit);
        }
        let bad = || AnalysisError::BadBidModel(s.to_string());
        let list = s.strip_prefix("fixed:").ok_or_else(bad)?;
        if list.is_empty() {
            return Ok(BidModel::Fixed(Vec::new()));
        }
        list.split(';')
            .map(|x| {
                x.parse::<u64>()
                    .map(MoneyMicros::from_micros)
                    .map_err(|_| bad())
            })
            .collect::<Result<_, _>>()
            .map(BidModel::Fixed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub k: usize,
    pub liars: usize,
    pub bid_model: BidModel,
    pub trials: u64,
    pub seed: u64,
    pub reserve: MoneyMicros,
}

impl SimulationConfig {
    pub fn fixed(bids: Vec<MoneyMicros>, k: usize, liars: usize, trials: u64, seed: u64) -> Self {
        SimulationConfig {
            n: bids.len(),
            k,
            liars,
            bid_model: BidModel::Fixed(bids),
            trials,
            seed,
            reserve: MoneyMicros::ZERO,
        }
    }

    pub fn uniform(n: usize, k: usize, liars: usize, trials: u64, seed: u64) -> Self {
        SimulationConfig {
            n,
            k,
            liars,
            bid_model: BidModel::UniformUnit,
            trials,
            seed,
            reserve: MoneyMicros::ZERO,
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.k < 2 {
            return Err(AnalysisError::KTooSmall(self.k));
        }
        if self.liars > self.k {
            return Err(AnalysisError::TooManyLiars {
                liars: self.liars,
                k: self.k,
            });
        }
        if self.trials == 0 {
            return Err(AnalysisError::NoTrials);
        }
        if self.n == 0 {
            return Err(AnalysisError::NoBidders);
        }
        if let BidModel::Fixed(bids) = &self.bid_model {
            if bids.len() != self.n {
                return Err(AnalysisError::BidCountMismatch {
                    n: self.n,
                    bids: bids.len(),
                });
            }
            check_sorted(bids)?;
        }
        Ok(())
    }
}

/// Empirical and exact publisher-loss figures. Money values are in micros.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub config: SimulationConfig,
    pub empirical_mean_loss: f64,
    pub empirical_std_error: f64,
    /// Exact expected loss, when known: `t ∈ {0, k}` and reserve zero.
    pub closed_form_loss: Option<BigRational>,
    /// `t · d2 / k²`, using `E[d2]` for random bids.
    pub upper_bound: BigRational,
    /// Expected true second price, `d2` or `E[d2]`.
    pub revenue_baseline: BigRational,
    /// Mean true second price over the trials.
    pub empirical_baseline: f64,
    pub baseline_std_error: f64,
    pub mean_revenue: f64,
    pub fill_rate: f64,
    pub total_loss: i128,
    pub min_trial_loss: i128,
    pub max_trial_loss: i128,
}

impl LossReport {
    pub fn exact_mean_loss(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.total_loss),
            BigInt::from(self.config.trials),
        )
    }

    /// Distance of the empirical mean from the closed form, in standard errors.
    pub fn z_score(&self) -> Option<f64> {
        let exact = self.closed_form_loss.as_ref()?.to_f64()?;
        let diff = self.empirical_mean_loss - exact;
        if self.empirical_std_error == 0.0 {
            return Some(if diff == 0.0 { 0.0 } else { f64::INFINITY });
        }
        Some(diff / self.empirical_std_error)
    }
}

/// Mixes `(seed, index)` into an independent 64-bit seed (SplitMix64 finalizer).
pub fn derive_trial_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `n` uniform bids on `[0, 1]` units, sorted non-increasing.
pub fn draw_uniform_bids(n: usize, rng: &mut impl Rng) -> Vec<MoneyMicros> {
    let mut bids: Vec<MoneyMicros> = (0..n)
        .map(|_| MoneyMicros::from_micros(rng.random_range(0..=MICROS_PER_UNIT)))
        .collect();
    bids.sort_unstable_by(|a, b| b.cmp(a));
    bids
}

#[derive(Debug, Clone, Copy)]
struct Accum {
    loss: i128,
    loss_sq: u128,
    baseline: u128,
    baseline_sq: u128,
    revenue: u128,
    filled: u64,
    min_loss: i128,
    max_loss: i128,
}

impl Accum {
    const EMPTY: Accum = Accum {
        loss: 0,
        loss_sq: 0,
        baseline: 0,
        baseline_sq: 0,
        revenue: 0,
        filled: 0,
        min_loss: i128::MAX,
        max_loss: i128::MIN,
    };

    fn merge(self, o: Accum) -> Result<Accum, AnalysisError> {
        let of = || AnalysisError::Overflow;
        Ok(Accum {
            loss: self.loss.checked_add(o.loss).ok_or_else(of)?,
            loss_sq: self.loss_sq.checked_add(o.loss_sq).ok_or_else(of)?,
            baseline: self.baseline.checked_add(o.baseline).ok_or_else(of)?,
            baseline_sq: self.baseline_sq.checked_add(o.baseline_sq).ok_or_else(of)?,
            revenue: self.revenue.checked_add(o.revenue).ok_or_else(of)?,
            filled: self.filled + o.filled,
            min_loss: self.min_loss.min(o.min_loss),
            max_loss: self.max_loss.max(o.max_loss),
        })
    }
}

fn one_trial(config: &SimulationConfig, index: u64) -> Result<Accum, AnalysisError> {
    let trial_seed = derive_trial_seed(config.seed, index);
    let drawn;
    let bids = match &config.bid_model {
        BidModel::Fixed(bids) => bids.as_slice(),
        BidModel::UniformUnit => {
            // stream 0 of this seed belongs to the bidder assignment
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            rng.set_stream(1);
            drawn = draw_uniform_bids(config.n, &mut rng);
            drawn.as_slice()
        }
    };
    let books = assign_bidders_uniform(bids, config.k, trial_seed)?;
    let outcome = run_trial(&books, config.liars, config.reserve)?;
    let baseline = u128::from(outcome.oracle_price.unwrap_or_default().micros());
    let revenue = u128::from(outcome.revenue().micros());
    let sq = outcome
        .loss
        .unsigned_abs()
        .checked_mul(outcome.loss.unsigned_abs());
    Ok(Accum {
        loss: outcome.loss,
        loss_sq: sq.ok_or(AnalysisError::Overflow)?,
        baseline,
        baseline_sq: baseline
            .checked_mul(baseline)
            .ok_or(AnalysisError::Overflow)?,
        revenue,
        filled: u64::from(outcome.exchange.is_filled()),
        min_loss: outcome.loss,
        max_loss: outcome.loss,
    })
}

/// Mean and standard error of the mean from exact sums.
fn mean_and_std_error(sum: BigInt, sum_sq: BigInt, count: u64) -> (f64, f64) {
    let n = BigInt::from(count);
    let mean = BigRational::new(sum.clone(), n.clone())
        .to_f64()
        .unwrap_or(f64::NAN);
    if count < 2 {
        return (mean, 0.0);
    }
    // sample variance = (n Σx² - (Σx)²) / (n (n - 1))
    let numer = &n * sum_sq - &sum * &sum;
    let var = BigRational::new(numer, &n * (&n - 1u32))
        .to_f64()
        .unwrap_or(f64::NAN)
        .max(0.0);
    (mean, (var / count as f64).sqrt())
}

pub fn simulate_losses(config: &SimulationConfig) -> Result<LossReport, AnalysisError> {
    config.validate()?;

    let acc = (0..config.trials)
        .into_par_iter()
        .map(|i| one_trial(config, i))
        .try_reduce(|| Accum::EMPTY, Accum::merge)?;

    let (mean_loss, loss_se) = mean_and_std_error(
        BigInt::from(acc.loss),
        BigInt::from(acc.loss_sq),
        config.trials,
    );
    let (mean_baseline, baseline_se) = mean_and_std_error(
        BigInt::from(acc.baseline),
        BigInt::from(acc.baseline_sq),
        config.trials,
    );

    let exact_t = config.liars == 0 || config.liars == config.k;
    let zero_reserve = config.reserve.is_zero();
    let (closed_form_loss, revenue_baseline) = match &config.bid_model {
        BidModel::Fixed(bids) => {
            let closed = if exact_t && zero_reserve {
                Some(if config.liars == 0 {
                    BigRational::zero()
                } else {
                    closed_form_publisher_loss(bids, config.k)?
                })
            } else {
                None
            };
            let d2 = bids.get(1).copied().unwrap_or_default();
            (closed, int(d2.micros()))
        }
        BidModel::UniformUnit => {
            let e = expected_loss_uniform(config.n, config.k)?;
            let closed = if exact_t && zero_reserve {
                Some(if config.liars == 0 {
                    BigRational::zero()
                } else {
                    e.loss_micros()
                })
            } else {
                None
            };
            (closed, e.baseline_micros())
        }
    };
    // t · E[d2] / k² is linear in d2, so the bound carries over to random bids
    let upper_bound =
        loss_upper_bound(MoneyMicros::from_micros(1), config.k, config.liars)? * &revenue_baseline;

    Ok(LossReport {
        config: config.clone(),
        empirical_mean_loss: mean_loss,
        empirical_std_error: loss_se,
        closed_form_loss,
        upper_bound,
        revenue_baseline,
        empirical_baseline: mean_baseline,
        baseline_std_error: baseline_se,
        mean_revenue: BigRational::new(BigInt::from(acc.revenue), BigInt::from(config.trials))
            .to_f64()
            .unwrap_or(f64::NAN),
        fill_rate: acc.filled as f64 / config.trials as f64,
        total_loss: acc.loss,
        min_trial_loss: acc.min_loss,
        max_trial_loss: acc.max_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units(xs: &[u64]) -> Vec<MoneyMicros> {
        xs.iter().map(|&x| MoneyMicros::from_units(x)).collect()
    }

    #[test]
    fn config_validation() {
        let ok = SimulationConfig::fixed(units(&[3, 2]), 2, 1, 10, 1);
        assert!(ok.validate().is_ok());
        let mut c = ok.clone();
        c.k = 1;
        assert_eq!(c.validate(), Err(AnalysisError::KTooSmall(1)));
        let mut c = ok.clone();
        c.liars = 3;
        assert!(matches!(
            c.validate(),
            Err(AnalysisError::TooManyLiars { .. })
        ));
        let mut c = ok.clone();
        c.trials = 0;
        assert_eq!(c.validate(), Err(AnalysisError::NoTrials));
        let mut c = ok.clone();
        c.n = 3;
        assert!(matches!(
            c.validate(),
            Err(AnalysisError::BidCountMismatch { .. })
        ));
        let c = SimulationConfig::fixed(units(&[1, 3]), 2, 1, 10, 1);
        assert_eq!(c.validate(), Err(AnalysisError::NotSorted));
    }

    #[test]
    fn honest_market_has_zero_loss_every_trial() {
        let r = simulate_losses(&SimulationConfig::uniform(5, 3, 0, 2_000, 9)).unwrap();
        assert_eq!(
            (r.min_trial_loss, r.max_trial_loss, r.total_loss),
            (0, 0, 0)
        );
        assert_eq!(r.empirical_std_error, 0.0);
        assert_eq!(r.fill_rate, 1.0);
    }

    #[test]
    fn deterministic_in_seed() {
        let c = SimulationConfig::uniform(4, 2, 2, 3_000, 77);
        assert_eq!(simulate_losses(&c).unwrap(), simulate_losses(&c).unwrap());
        let mut other = c.clone();
        other.seed = 78;
        assert_ne!(
            simulate_losses(&c).unwrap().total_loss,
            simulate_losses(&other).unwrap().total_loss
        );
    }

    #[test]
    fn reserve_above_all_bids_never_fills() {
        let mut c = SimulationConfig::fixed(units(&[10, 8, 5]), 2, 2, 500, 3);
        c.reserve = MoneyMicros::from_units(11);
        let r = simulate_losses(&c).unwrap();
        assert_eq!(r.fill_rate, 0.0);
        assert_eq!(r.total_loss, 0);
        assert_eq!(r.closed_form_loss, None);
    }

    #[test]
    fn losses_are_never_negative() {
        for liars in 0..=3 {
            let r = simulate_losses(&SimulationConfig::uniform(6, 3, liars, 2_000, 5)).unwrap();
            assert!(r.min_trial_loss >= 0);
        }
    }

    #[test]
    fn trial_seeds_differ() {
        let seeds: std::collections::HashSet<u64> =
            (0..10_000).map(|i| derive_trial_seed(1, i)).collect();
        assert_eq!(seeds.len(), 10_000);
    }

    #[test]
    fn bid_model_round_trip() {
        for m in [
            BidModel::UniformUnit,
            BidModel::Fixed(units(&[10, 8, 5])),
            BidModel::Fixed(vec![]),
        ] {
            assert_eq!(m.to_string().parse::<BidModel>().unwrap(), m);
        }
        assert!("fixed:a".parse::<BidModel>().is_err());
        assert!("normal".parse::<BidModel>().is_err());
    }

    #[test]
    fn std_error_of_constant_is_zero() {
        let (m, se) = mean_and_std_error(BigInt::from(30), BigInt::from(300), 3);
        assert_eq!((m, se), (10.0, 0.0));
        let (m, se) = mean_and_std_error(BigInt::from(2), BigInt::from(4), 2);
        // samples {0, 2}: sample variance 2, se = 1
        assert_eq!((m, se), (1.0, 1.0));
    }
}
