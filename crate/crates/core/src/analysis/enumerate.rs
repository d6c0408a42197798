//! Brute-force expected loss over every equiprobable bidder assignment.

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;

use crate::money::MoneyMicros;
use crate::network::{books_from_assignment, check_sorted};

use super::pipeline::run_trial;
use super::AnalysisError;

/// Largest number of assignments `enumerate_losses` will visit.
pub const MAX_ENUMERATION: u64 = 10_000_000;

/// Number of assignments of `n` bidders to `k` networks, if within the guard.
pub fn enumeration_size(n: usize, k: usize) -> Option<u64> {
    let n = u32::try_from(n).ok()?;
    (k as u64).checked_pow(n).filter(|&s| s <= MAX_ENUMERATION)
}

/// Exact expected publisher loss (micros) with reserve zero.
pub fn enumerate_losses(
    sorted_bids: &[MoneyMicros],
    k: usize,
    liars: usize,
) -> Result<BigRational, AnalysisError> {
    enumerate_losses_with_reserve(sorted_bids, k, liars, MoneyMicros::ZERO)
}

/// Runs the full pipeline on all `k^n` assignments and averages the loss.
pub fn enumerate_losses_with_reserve(
    sorted_bids: &[MoneyMicros],
    k: usize,
    liars: usize,
    reserve: MoneyMicros,
) -> Result<BigRational, AnalysisError> {
    if k < 2 {
        return Err(AnalysisError::KTooSmall(k));
    }
    if liars > k {
        return Err(AnalysisError::TooManyLiars { liars, k });
    }
    check_sorted(sorted_bids)?;
    let n = sorted_bids.len();
    let total = enumeration_size(n, k).ok_or(AnalysisError::InstanceTooLarge { n, k })?;

    let sum = (0..total)
        .into_par_iter()
        .map_init(
            || vec![0usize; n],
            |assignment, index| {
                let mut rest = index;
                for slot in assignment.iter_mut() {
                    *slot = (rest % k as u64) as usize;
                    rest /= k as u64;
                }
                let books = books_from_assignment(sorted_bids, k, assignment);
                run_trial(&books, liars, reserve).map(|t| t.loss)
            },
        )
        .try_reduce(|| 0i128, |a, b| Ok(a + b))?;

    Ok(BigRational::new(BigInt::from(sum), BigInt::from(total)))
}
