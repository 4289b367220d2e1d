//! Exact dyadic rationals `k / 2^m`.
//!
//! Every connective of the restricted formula language (`1 - x`, `x / 2`,
//! `min(1, x + y)`) is closed on dyadic values, so the whole engine runs on
//! this type and never touches floating point.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest exponent a value may carry.
pub const MAX_EXP: u32 = 60;

/// A non-negative dyadic rational in canonical form (`num` odd, or `exp == 0`).
///
/// Values of formulas live in `[0, 1]`; sums of two such values (used for
/// genericity gaps) may exceed one, so the type itself is not clamped.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: u64,
    exp: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DyadicError {
    #[error("malformed dyadic literal `{0}` (expected `k/2^m`)")]
    Malformed(String),
    #[error("dyadic exponent {0} exceeds the supported maximum")]
    ExponentTooLarge(u32),
    #[error("dyadic value `{0}` lies outside [0, 1]")]
    OutOfUnit(String),
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };
    pub const HALF: Dyadic = Dyadic { num: 1, exp: 1 };

    /// `num / 2^exp`, canonicalised.
    pub fn new(num: u64, exp: u32) -> Dyadic {
        assert!(exp <= MAX_EXP, "dyadic exponent {exp} too large");
        let mut d = Dyadic { num, exp };
        d.normalize();
        d
    }

    /// `2^-k`.
    pub fn pow2_inv(k: u32) -> Dyadic {
        Dyadic::new(1, k)
    }

    fn normalize(&mut self) {
        if self.num == 0 {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().min(self.exp);
        self.num >>= tz;
        self.exp -= tz;
    }

    pub fn numerator(self) -> u64 {
        self.num
    }

    pub fn exponent(self) -> u32 {
        self.exp
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn is_unit(self) -> bool {
        self <= Dyadic::ONE
    }

    /// Numerator over the common denominator `2^e` (requires `e >= self.exp`).
    fn scaled(self, e: u32) -> u128 {
        (self.num as u128) << (e - self.exp)
    }

    fn from_scaled(v: u128, e: u32) -> Dyadic {
        let mut v = v;
        let mut e = e;
        while e > 0 && v & 1 == 0 {
            v >>= 1;
            e -= 1;
        }
        assert!(v <= u64::MAX as u128, "dyadic numerator overflow");
        Dyadic::new(v as u64, e)
    }

    pub fn add(self, other: Dyadic) -> Dyadic {
        let e = self.exp.max(other.exp);
        Dyadic::from_scaled(self.scaled(e) + other.scaled(e), e)
    }

    /// `max(0, self - other)`.
    pub fn sub_sat(self, other: Dyadic) -> Dyadic {
        let e = self.exp.max(other.exp);
        let (a, b) = (self.scaled(e), other.scaled(e));
        if a <= b {
            Dyadic::ZERO
        } else {
            Dyadic::from_scaled(a - b, e)
        }
    }

    /// `min(1, self + other)`: the truncated addition connective.
    pub fn dot_plus(self, other: Dyadic) -> Dyadic {
        self.add(other).min(Dyadic::ONE)
    }

    /// `1 - self`; callers keep `self` in the unit interval.
    pub fn one_minus(self) -> Dyadic {
        Dyadic::ONE.sub_sat(self)
    }

    pub fn half(self) -> Dyadic {
        if self.num == 0 {
            return self;
        }
        Dyadic::new(self.num, self.exp + 1)
    }

    /// `self * 2^k`.
    pub fn shl(self, k: u32) -> Dyadic {
        if k <= self.exp {
            Dyadic::new(self.num, self.exp - k)
        } else {
            Dyadic::new(self.num << (k - self.exp), 0)
        }
    }

    /// `self * m` for a small integer multiplier.
    pub fn mul_int(self, m: u64) -> Dyadic {
        Dyadic::new(self.num * m, self.exp)
    }

    /// `|self - other|`.
    pub fn abs_diff(self, other: Dyadic) -> Dyadic {
        if self >= other {
            self.sub_sat(other)
        } else {
            other.sub_sat(self)
        }
    }

    /// Whether the value is a multiple of `2^-g`.
    pub fn on_grid(self, g: u32) -> bool {
        self.exp <= g
    }

    /// Numerator of the value over denominator `2^g` (value must be on the grid).
    pub fn grid_index(self, g: u32) -> u64 {
        debug_assert!(self.on_grid(g));
        self.num << (g - self.exp)
    }

    /// Smallest `k` with `k * 2^-g >= self`.
    pub fn grid_index_ceil(self, g: u32) -> u64 {
        if self.exp <= g {
            self.num << (g - self.exp)
        } else {
            let shift = self.exp - g;
            (self.num >> shift) + u64::from(self.num & ((1 << shift) - 1) != 0)
        }
    }

    /// All multiples of `2^-g` in `[0, 1]`, ascending.
    pub fn grid(g: u32) -> Vec<Dyadic> {
        (0..=(1u64 << g)).map(|k| Dyadic::new(k, g)).collect()
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exp.max(other.exp);
        self.scaled(e).cmp(&other.scaled(e))
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.num, self.exp)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Dyadic {
    type Err = DyadicError;

    /// Accepts `k/2^m`, `k/d` with `d` a power of two, or a bare integer.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || DyadicError::Malformed(s.to_string());
        let (num, exp) = match t.split_once('/') {
            None => (t.parse::<u64>().map_err(|_| bad())?, 0),
            Some((k, den)) => {
                let k = k.trim().parse::<u64>().map_err(|_| bad())?;
                let den = den.trim();
                let exp = if let Some(m) = den.strip_prefix("2^") {
                    m.parse::<u32>().map_err(|_| bad())?
                } else {
                    let d = den.parse::<u64>().map_err(|_| bad())?;
                    if d == 0 || !d.is_power_of_two() {
                        return Err(bad());
                    }
                    d.trailing_zeros()
                };
                (k, exp)
            }
        };
        if exp > MAX_EXP {
            return Err(DyadicError::ExponentTooLarge(exp));
        }
        Ok(Dyadic::new(num, exp))
    }
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a value and checks it lies in `[0, 1]`.
pub fn parse_unit(s: &str) -> Result<Dyadic, DyadicError> {
    let d: Dyadic = s.parse()?;
    if !d.is_unit() {
        return Err(DyadicError::OutOfUnit(s.to_string()));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_form() {
        assert_eq!(Dyadic::new(4, 3), Dyadic::new(1, 1));
        assert_eq!(Dyadic::new(0, 7).exponent(), 0);
        assert_eq!(Dyadic::new(8, 3), Dyadic::ONE);
        assert_eq!(d("2/2^2").to_string(), "1/2^1");
        assert_eq!(d("3/8"), Dyadic::new(3, 3));
    }

    #[test]
    fn connectives() {
        assert_eq!(d("3/2^4").one_minus(), d("13/2^4"));
        assert_eq!(d("7/2^3").dot_plus(d("1/2^1")), Dyadic::ONE);
        assert_eq!(d("1/2^2").half(), d("1/2^3"));
        assert_eq!(d("2/2^3").sub_sat(d("7/2^4")), Dyadic::ZERO);
        assert_eq!(d("9/2^4").sub_sat(d("1/2^3")), d("7/2^4"));
    }

    #[test]
    fn parse_errors() {
        assert!("1/3".parse::<Dyadic>().is_err());
        assert!("x".parse::<Dyadic>().is_err());
        assert!(parse_unit("3/2^1").is_err());
        assert_eq!(parse_unit("1").unwrap(), Dyadic::ONE);
    }

    proptest! {
        #[test]
        fn display_round_trips(k in 0u64..=1024, m in 0u32..=10) {
            let v = Dyadic::new(k, m);
            prop_assert_eq!(v.to_string().parse::<Dyadic>().unwrap(), v);
        }

        #[test]
        fn order_matches_scaled_integers(a in 0u64..=256, b in 0u64..=256) {
            prop_assert_eq!(Dyadic::new(a, 8).cmp(&Dyadic::new(b, 8)), a.cmp(&b));
        }
    }
}
