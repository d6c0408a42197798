//! Exact currency amounts in micro-units.

use std::fmt;
use std::iter::Sum;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of micros in one whole currency unit.
pub const MICROS_PER_UNIT: u64 = 1_000_000;

/// A non-negative amount of money, stored as an integer count of
/// 10⁻⁶ currency units. Every bid, reserve and price in the auction is one
/// of these, so comparisons and maxima never round.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct MoneyMicros(u64);

impl MoneyMicros {
    pub const ZERO: MoneyMicros = MoneyMicros(0);
    pub const MAX: MoneyMicros = MoneyMicros(u64::MAX);

    pub const fn from_micros(micros: u64) -> Self {
        MoneyMicros(micros)
    }

    /// Whole units, panicking on overflow. Intended for constants and tests.
    pub const fn from_units(units: u64) -> Self {
        match units.checked_mul(MICROS_PER_UNIT) {
            Some(m) => MoneyMicros(m),
            None => panic!("money overflow"),
        }
    }

    pub const fn micros(self) -> u64 {
        self.0
    }

    pub fn checked_add(self, other: MoneyMicros) -> Option<MoneyMicros> {
        self.0.checked_add(other.0).map(MoneyMicros)
    }

    pub fn checked_sub(self, other: MoneyMicros) -> Option<MoneyMicros> {
        self.0.checked_sub(other.0).map(MoneyMicros)
    }

    /// Signed difference `self - other` in micros.
    pub fn signed_diff(self, other: MoneyMicros) -> i128 {
        i128::from(self.0) - i128::from(other.0)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl From<u64> for MoneyMicros {
    fn from(micros: u64) -> Self {
        MoneyMicros(micros)
    }
}

impl TryFrom<i64> for MoneyMicros {
    type Error = MoneyParseError;

    fn try_from(micros: i64) -> Result<Self, Self::Error> {
        u64::try_from(micros)
            .map(MoneyMicros)
            .map_err(|_| MoneyParseError::Negative(micros.to_string()))
    }
}

impl Sum for MoneyMicros {
    fn sum<I: Iterator<Item = MoneyMicros>>(iter: I) -> Self {
        iter.fold(MoneyMicros::ZERO, |acc, m| {
            acc.checked_add(m).expect("money overflow in sum")
        })
    }
}

/// Prints as decimal units with exactly six fractional digits, e.g. `5.000000`.
impl fmt::Display for MoneyMicros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{:06}",
            self.0 / MICROS_PER_UNIT,
            self.0 % MICROS_PER_UNIT
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoneyParseError {
    #[error("empty money value")]
    Empty,
    #[error("negative money value `{0}`")]
    Negative(String),
    #[error("invalid money value `{0}`")]
    Invalid(String),
    #[error("money value `{0}` has more than six fractional digits")]
    TooPrecise(String),
    #[error("money value `{0}` overflows")]
    Overflow(String),
}

/// Accepts decimal units (`10`, `2.75`, `0.000001`) or integer micros with a
/// `u`/`µ` suffix (`2750000u`).
impl FromStr for MoneyMicros {
    type Err = MoneyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(MoneyParseError::Empty);
        }
        if s.starts_with('-') {
            return Err(MoneyParseError::Negative(s.to_string()));
        }
        let invalid = || MoneyParseError::Invalid(s.to_string());
        let overflow = || MoneyParseError::Overflow(s.to_string());

        if let Some(digits) = s.strip_suffix('u').or_else(|| s.strip_suffix('µ')) {
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(invalid());
            }
            return digits
                .parse::<u64>()
                .map(MoneyMicros)
                .map_err(|_| overflow());
        }

        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(invalid());
        }
        if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(invalid());
        }
        if frac.len() > 6 {
            return Err(MoneyParseError::TooPrecise(s.to_string()));
        }
        let whole: u64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| overflow())?
        };
        let frac_micros: u64 = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<6}").parse().map_err(|_| invalid())?
        };
        whole
            .checked_mul(MICROS_PER_UNIT)
            .and_then(|m| m.checked_add(frac_micros))
            .map(MoneyMicros)
            .ok_or_else(overflow)
    }
}
