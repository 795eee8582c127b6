use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// A nonnegative half-integer, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HalfInt(u32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: u32) -> Self {
        HalfInt(twice)
    }

    pub const fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0.is_multiple_of(2)
    }

    /// Iterates `0, 1/2, 1, ...` up to and including `self`.
    pub fn up_to(self) -> impl Iterator<Item = HalfInt> {
        (0..=self.0).map(HalfInt)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Accepts `"n/2"`, a plain integer `"n"`, or a decimal such as `"1.5"`.
impl FromStr for HalfInt {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || Error::InvalidHalfInt(s.to_string());
        let t = s.trim();
        if let Some((num, den)) = t.split_once('/') {
            let num: u32 = num.trim().parse().map_err(|_| bad())?;
            return match den.trim() {
                "2" => Ok(HalfInt(num)),
                "1" => num.checked_mul(2).map(HalfInt).ok_or_else(bad),
                _ => Err(bad()),
            };
        }
        if let Ok(n) = t.parse::<u32>() {
            return n.checked_mul(2).map(HalfInt).ok_or_else(bad);
        }
        let x: f64 = t.parse().map_err(|_| bad())?;
        let twice = 2.0 * x;
        if !twice.is_finite() || twice < 0.0 || twice.fract() != 0.0 || twice > u32::MAX as f64 {
            return Err(bad());
        }
        Ok(HalfInt(twice as u32))
    }
}

impl Serialize for HalfInt {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
