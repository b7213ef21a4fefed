//! Fixed-point decimals with exactly four fractional digits.
//!
//! Hashed records never carry floating point. Confidences, thresholds and
//! reported metric values travel as strings such as `"0.8000"` or `"-0.7500"`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A decimal stored as an integer count of ten-thousandths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fixed4(i64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecimalError {
    #[error("not a finite number")]
    NotFinite,
    #[error("`{0}` is not a decimal with exactly four fractional digits")]
    Syntax(String),
}

impl Fixed4 {
    pub const ZERO: Fixed4 = Fixed4(0);
    pub const ONE: Fixed4 = Fixed4(10_000);
    pub const SCALE: i64 = 10_000;

    pub const fn from_ten_thousandths(units: i64) -> Self {
        Fixed4(units)
    }

    pub const fn ten_thousandths(self) -> i64 {
        self.0
    }

    /// Rounds to four fractional digits, ties to even on the exact binary value.
    pub fn from_f64(x: f64) -> Result<Self, DecimalError> {
        if !x.is_finite() {
            return Err(DecimalError::NotFinite);
        }
        // std's fixed-precision formatting is exact and rounds half to even.
        let text = format!("{x:.4}");
        match text.strip_prefix("-0.0000") {
            // negative values that round to zero
            Some("") => Ok(Fixed4::ZERO),
            _ => text.parse(),
        }
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }

    pub fn in_unit_interval(self) -> bool {
        (0..=Self::SCALE).contains(&self.0)
    }
}

impl fmt::Display for Fixed4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:04}", abs / 10_000, abs % 10_000)
    }
}

impl FromStr for Fixed4 {
    type Err = DecimalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DecimalError::Syntax(s.to_string());
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').ok_or_else(bad)?;
        let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
        if !digits(int) || frac.len() != 4 || !digits(frac) {
            return Err(bad());
        }
        if int.len() > 1 && int.starts_with('0') {
            return Err(bad());
        }
        let int: i64 = int.parse().map_err(|_| bad())?;
        let frac: i64 = frac.parse().map_err(|_| bad())?;
        let units = int
            .checked_mul(Self::SCALE)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(bad)?;
        if negative && units == 0 {
            // "-0.0000" has a canonical spelling without the sign
            return Err(bad());
        }
        Ok(Fixed4(if negative { -units } else { units }))
    }
}

impl Serialize for Fixed4 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fixed4 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
