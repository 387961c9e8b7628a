//! Exact decimal numbers stored as scaled integers.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

const MAX_PLACES: u8 = 12;

/// `units / 10^places`. Two decimals with different `places` may be equal in
/// value; use [`Decimal::value_eq`] for numeric comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decimal {
    pub units: i64,
    pub places: u8,
}

fn pow10(p: u8) -> i64 {
    10i64.pow(p as u32)
}

impl Decimal {
    pub fn new(units: i64, places: u8) -> Self {
        assert!(places <= MAX_PLACES, "at most {MAX_PLACES} decimal places");
        Self { units, places }
    }

    pub fn from_int(v: i64) -> Self {
        Self::new(v, 0)
    }

    pub fn zero(places: u8) -> Self {
        Self::new(0, places)
    }

    /// Exact sum; the result carries the larger number of places.
    pub fn checked_add(self, other: Decimal) -> Option<Decimal> {
        let places = self.places.max(other.places);
        let a = self.units.checked_mul(pow10(places - self.places))?;
        let b = other.units.checked_mul(pow10(places - other.places))?;
        Some(Decimal::new(a.checked_add(b)?, places))
    }

    /// Adds an integer offset without changing the number of places.
    pub fn offset(self, whole: i64) -> Decimal {
        Decimal::new(self.units + whole * pow10(self.places), self.places)
    }

    pub fn to_ratio(self) -> Ratio<i128> {
        Ratio::new(self.units as i128, pow10(self.places) as i128)
    }

    pub fn to_f64(self) -> f64 {
        self.units as f64 / pow10(self.places) as f64
    }

    pub fn value_eq(&self, other: &Decimal) -> bool {
        self.to_ratio() == other.to_ratio()
    }

    pub fn value_cmp(&self, other: &Decimal) -> Ordering {
        self.to_ratio().cmp(&other.to_ratio())
    }

    pub fn is_integer_valued(&self) -> bool {
        self.units % pow10(self.places) == 0
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.units < 0 { "-" } else { "" };
        let abs = self.units.unsigned_abs();
        if self.places == 0 {
            return write!(f, "{sign}{abs}");
        }
        let scale = pow10(self.places) as u64;
        write!(
            f,
            "{sign}{}.{:0width$}",
            abs / scale,
            abs % scale,
            width = self.places as usize
        )
    }
}

impl FromStr for Decimal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || Error::InvalidParameter(format!("not a decimal number: {s:?}"));
        let t = s.trim();
        let (neg, body) = match t.as_bytes().first() {
            Some(b'-') => (true, &t[1..]),
            Some(b'+') => (false, &t[1..]),
            _ => (false, t),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if body.ends_with('.') {
            return Err(bad());
        }
        let places = u8::try_from(frac_part.len()).ok().filter(|p| *p <= MAX_PLACES).ok_or_else(bad)?;
        let digits = format!("{int_part}{frac_part}");
        let digits = digits.trim_start_matches('0');
        let magnitude: i64 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
        Ok(Decimal::new(if neg { -magnitude } else { magnitude }, places))
    }
}

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
