use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A depth in metres stored as whole micrometres.
///
/// Formation boundaries are parsed exactly, so derived thickness and median
/// depth are the correctly rounded values of the decimal inputs
/// (`2404.0 − 2307.9` is `96.1`, not `96.09999999999991`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Depth(i64);

const PER_METRE: i64 = 1_000_000;
const DECIMALS: usize = 6;

impl Depth {
    pub const fn from_micrometres(um: i64) -> Self {
        Depth(um)
    }

    pub const fn micrometres(self) -> i64 {
        self.0
    }

    /// Nearest `f64`, identical to parsing the decimal text directly.
    pub fn metres(self) -> f64 {
        self.0 as f64 / PER_METRE as f64
    }

    /// Midpoint in metres, rounded once.
    pub fn midpoint(self, other: Depth) -> f64 {
        (self.0 + other.0) as f64 / (2 * PER_METRE) as f64
    }
}

impl Add for Depth {
    type Output = Depth;
    fn add(self, rhs: Depth) -> Depth {
        Depth(self.0 + rhs.0)
    }
}

impl Sub for Depth {
    type Output = Depth;
    fn sub(self, rhs: Depth) -> Depth {
        Depth(self.0 - rhs.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDepthError(String);

impl fmt::Display for ParseDepthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseDepthError {}

impl FromStr for Depth {
    type Err = ParseDepthError;

    /// Accepts plain decimals with at most six fractional digits.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| ParseDepthError(format!("`{s}` is not a depth: {why}"));
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad("no digits"));
        }
        if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad("expected a plain decimal number"));
        }
        if frac.len() > DECIMALS {
            return Err(bad("more than 6 decimal places"));
        }
        let whole: i64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad("out of range"))?
        };
        let mut micro: i64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad("out of range"))?
        };
        micro *= 10_i64.pow((DECIMALS - frac.len()) as u32);
        let um = whole
            .checked_mul(PER_METRE)
            .and_then(|w| w.checked_add(micro))
            .ok_or_else(|| bad("out of range"))?;
        Ok(Depth(if negative { -um } else { um }))
    }
}

impl fmt::Display for Depth {
    /// Shortest decimal that parses back to the same value.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let (whole, micro) = (abs / PER_METRE as u64, abs % PER_METRE as u64);
        if micro == 0 {
            return write!(f, "{sign}{whole}.0");
        }
        let frac = format!("{micro:06}");
        write!(f, "{sign}{whole}.{}", frac.trim_end_matches('0'))
    }
}
