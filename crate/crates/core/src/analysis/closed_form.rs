//! Exact publisher-loss expressions for a winning network that withholds its
//! optional bid while bidders are spread uniformly over `k` networks.
//!
//! With bids `d1 ≥ d2 ≥ … ≥ dn`, the lying winner pays `dj` exactly when
//! `d2..d(j-1)` share its network and `dj` does not, which happens with
//! probability `(1/k)^(j-2) · (1 - 1/k)`. The publisher's expected loss
//! against the true second price `d2` telescopes to
//!
//! ```text
//! Σ_{i=1..n} (d(i+1) - d(i+2)) / k^i        with dm = 0 for m > n
//! ```
//!
//! All values here are exact rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::money::{MoneyMicros, MICROS_PER_UNIT};
use crate::network::check_sorted;

use super::AnalysisError;

fn check_k(k: usize) -> Result<(), AnalysisError> {
    if k < 2 {
        return Err(AnalysisError::KTooSmall(k));
    }
    Ok(())
}

fn bid_at(bids: &[MoneyMicros], rank: usize) -> BigInt {
    // ranks are one-based; anything past the end is a zero bid
    bids.get(rank - 1)
        .map_or_else(BigInt::zero, |m| BigInt::from(m.micros()))
}

pub(crate) fn int(x: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(x.into())
}

/// Expected publisher loss in micros when the winning network lies, via the
/// telescoped sum of consecutive gaps.
pub fn closed_form_publisher_loss(
    sorted_bids: &[MoneyMicros],
    k: usize,
) -> Result<BigRational, AnalysisError> {
    check_k(k)?;
    check_sorted(sorted_bids)?;
    let n = sorted_bids.len();
    let kk = BigInt::from(k);
    let mut total = BigRational::zero();
    let mut weight = BigRational::one();
    for i in 1..=n {
        weight /= int(kk.clone());
        let gap = bid_at(sorted_bids, i + 1) - bid_at(sorted_bids, i + 2);
        total += BigRational::from_integer(gap) * &weight;
    }
    Ok(total)
}

/// Expected price paid by a lying winner, summing `dj · P(price = dj)` over
/// `j = 2..n`. The loss is `d2` minus this value.
pub fn lying_winner_expected_price(
    sorted_bids: &[MoneyMicros],
    k: usize,
) -> Result<BigRational, AnalysisError> {
    check_k(k)?;
    check_sorted(sorted_bids)?;
    let n = sorted_bids.len();
    let kr = int(k);
    let escape = BigRational::one() - kr.recip();
    let mut stay = BigRational::one();
    let mut total = BigRational::zero();
    for j in 2..=n {
        total += int(bid_at(sorted_bids, j)) * &stay * &escape;
        stay /= kr.clone();
    }
    Ok(total)
}

/// `t · d2 / k²`: the unconditional bound with `t` lying networks out of `k`.
/// With `t = k` this is `d2 / k`, the bound given that the winner lies.
pub fn loss_upper_bound(d2: MoneyMicros, k: usize, t: usize) -> Result<BigRational, AnalysisError> {
    check_k(k)?;
    if t > k {
        return Err(AnalysisError::TooManyLiars { liars: t, k });
    }
    Ok(BigRational::new(
        BigInt::from(t) * BigInt::from(d2.micros()),
        BigInt::from(k) * BigInt::from(k),
    ))
}

/// Exact expectations for `n` i.i.d. uniform bids on the unit interval, in units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniformExpectation {
    /// Expected loss when the winner lies: `Σ_{i=1..n-1} 1 / ((n+1) k^i)`.
    pub loss: BigRational,
    /// `E[d2] = 1 - 2/(n+1)`.
    pub baseline: BigRational,
}

impl UniformExpectation {
    pub fn loss_micros(&self) -> BigRational {
        &self.loss * int(MICROS_PER_UNIT)
    }

    pub fn baseline_micros(&self) -> BigRational {
        &self.baseline * int(MICROS_PER_UNIT)
    }
}

/// Each gap `d(i+1) - d(i+2)` for `i < n` has mean `1/(n+1)`; the `i = n`
/// gap is identically zero, so the sum stops at `n - 1`.
pub fn expected_loss_uniform(n: usize, k: usize) -> Result<UniformExpectation, AnalysisError> {
    check_k(k)?;
    if n == 0 {
        return Err(AnalysisError::NoBidders);
    }
    let spacing = BigRational::new(BigInt::one(), BigInt::from(n + 1));
    let mut loss = BigRational::zero();
    let mut weight = BigRational::one();
    for _ in 1..n {
        weight /= int(k);
        loss += &spacing * &weight;
    }
    let baseline = BigRational::one() - BigRational::new(BigInt::from(2), BigInt::from(n + 1));
    Ok(UniformExpectation { loss, baseline })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units(xs: &[u64]) -> Vec<MoneyMicros> {
        xs.iter().map(|&x| MoneyMicros::from_units(x)).collect()
    }

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn micros(n: i64, d: i64) -> BigRational {
        ratio(n, d) * int(MICROS_PER_UNIT)
    }

    #[test]
    fn running_example_loss() {
        // hand enumeration over 2^3 assignments: E[price] = 8/2 + 5/4 + 0/4 = 5.25
        let d = units(&[10, 8, 5]);
        assert_eq!(closed_form_publisher_loss(&d, 2).unwrap(), micros(11, 4));
        assert_eq!(lying_winner_expected_price(&d, 2).unwrap(), micros(21, 4));
    }

    #[test]
    fn zero_second_bid_means_no_loss() {
        assert_eq!(
            closed_form_publisher_loss(&units(&[10, 0]), 2).unwrap(),
            ratio(0, 1)
        );
    }

    #[test]
    fn two_bidders_hit_the_bound() {
        let d = units(&[10, 8]);
        let loss = closed_form_publisher_loss(&d, 2).unwrap();
        assert_eq!(loss, micros(4, 1));
        assert_eq!(loss, loss_upper_bound(d[1], 2, 2).unwrap());
    }

    #[test]
    fn both_routes_agree() {
        for d in [
            units(&[10, 8, 5]),
            units(&[9, 9, 9, 9]),
            units(&[7]),
            units(&[100, 50, 25, 12, 6, 3, 1]),
            units(&[]),
        ] {
            for k in 2..6 {
                let d2 = int(d.get(1).map_or(0, |m| m.micros()));
                assert_eq!(
                    closed_form_publisher_loss(&d, k).unwrap(),
                    d2 - lying_winner_expected_price(&d, k).unwrap()
                );
            }
        }
    }

    #[test]
    fn bound_examples() {
        let eight = MoneyMicros::from_units(8);
        assert_eq!(loss_upper_bound(eight, 2, 2).unwrap(), micros(4, 1));
        assert_eq!(loss_upper_bound(eight, 4, 1).unwrap(), micros(1, 2));
        assert_eq!(
            loss_upper_bound(MoneyMicros::ZERO, 3, 2).unwrap(),
            ratio(0, 1)
        );
        assert!(matches!(
            loss_upper_bound(eight, 2, 3),
            Err(AnalysisError::TooManyLiars { .. })
        ));
    }

    #[test]
    fn uniform_examples() {
        // n = 2: loss is d2/2 in every draw and E[d2] = E[min of two] = 1/3
        let e = expected_loss_uniform(2, 2).unwrap();
        assert_eq!((e.loss, e.baseline), (ratio(1, 6), ratio(1, 3)));
        let e = expected_loss_uniform(3, 2).unwrap();
        assert_eq!((e.loss, e.baseline), (ratio(3, 16), ratio(1, 2)));
        for k in 2..5 {
            let e = expected_loss_uniform(1, k).unwrap();
            assert_eq!((e.loss, e.baseline), (ratio(0, 1), ratio(0, 1)));
        }
        assert!(expected_loss_uniform(0, 2).is_err());
    }

    #[test]
    fn uniform_n2_by_integration() {
        // ∫∫ min(x, y)/2 over the unit square, by midpoint quadrature
        let m = 400;
        let h = 1.0 / m as f64;
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                let x = (i as f64 + 0.5) * h;
                let y = (j as f64 + 0.5) * h;
                acc += x.min(y) / 2.0 * h * h;
            }
        }
        assert!((acc - 1.0 / 6.0).abs() < 1e-5, "{acc}");
    }

    #[test]
    fn errors() {
        assert_eq!(
            closed_form_publisher_loss(&units(&[1, 2]), 2),
            Err(AnalysisError::NotSorted)
        );
        assert_eq!(
            closed_form_publisher_loss(&units(&[2, 1]), 1),
            Err(AnalysisError::KTooSmall(1))
        );
    }
}
