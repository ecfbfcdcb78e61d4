//! Exact integer money in wei.
//!
//! All settlement arithmetic goes through [`Amount`]; there is no floating
//! point anywhere on a path that moves value. Overflow and underflow are
//! reported as errors instead of wrapping or saturating.

use std::fmt;
use std::iter::Sum;
use std::str::FromStr;

use ethnum::U256;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const WEI_PER_GWEI: u128 = 1_000_000_000;
pub const GWEI_PER_ETH: u128 = 1_000_000_000;
pub const WEI_PER_ETH: u128 = WEI_PER_GWEI * GWEI_PER_ETH;

/// Denominator for every basis-point quantity (availability, multipliers, fee rates).
pub const BASIS_POINTS: u128 = 10_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(u128);

impl Amount {
    pub const ZERO: Amount = Amount(0);

    pub const fn from_wei(wei: u128) -> Self {
        Amount(wei)
    }

    pub fn from_gwei(gwei: u128) -> Result<Self> {
        gwei.checked_mul(WEI_PER_GWEI)
            .map(Amount)
            .ok_or(Error::AmountOverflow)
    }

    pub fn from_eth(eth: u128) -> Result<Self> {
        eth.checked_mul(WEI_PER_ETH)
            .map(Amount)
            .ok_or(Error::AmountOverflow)
    }

    pub const fn wei(self) -> u128 {
        self.0
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: Amount) -> Result<Amount> {
        self.0.checked_add(rhs.0).map(Amount).ok_or(Error::AmountOverflow)
    }

    pub fn checked_sub(self, rhs: Amount) -> Result<Amount> {
        self.0
            .checked_sub(rhs.0)
            .map(Amount)
            .ok_or(Error::AmountUnderflow)
    }

    pub fn checked_mul(self, factor: u128) -> Result<Amount> {
        self.0
            .checked_mul(factor)
            .map(Amount)
            .ok_or(Error::AmountOverflow)
    }

    /// `floor(self * numerator / denominator)` with a 256-bit intermediate, so
    /// the product itself never overflows; only a quotient above `u128::MAX`
    /// is an error.
    pub fn mul_div_floor(self, numerator: u128, denominator: u128) -> Result<Amount> {
        self.mul_div_rem(numerator, denominator).map(|(q, _)| q)
    }

    /// Like [`Amount::mul_div_floor`] but also returns the remainder
    /// `(self * numerator) mod denominator`.
    pub fn mul_div_rem(self, numerator: u128, denominator: u128) -> Result<(Amount, u128)> {
        if denominator == 0 {
            return Err(Error::InvalidInput("division by zero".into()));
        }
        if let Some(product) = self.0.checked_mul(numerator) {
            return Ok((Amount(product / denominator), product % denominator));
        }
        let product = U256::from(self.0) * U256::from(numerator);
        let d = U256::from(denominator);
        let q = product / d;
        let r = product % d;
        let q = u128::try_from(q).map_err(|_| Error::AmountOverflow)?;
        Ok((Amount(q), r.as_u128()))
    }

    /// Apply a basis-point multiplier with floor rounding.
    pub fn scale_bp(self, multiplier_bp: u32) -> Result<Amount> {
        self.mul_div_floor(u128::from(multiplier_bp), BASIS_POINTS)
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Amount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::InvalidInput(format!(
                "amount must be a decimal wei string, got {s:?}"
            )));
        }
        s.parse::<u128>().map(Amount).map_err(|_| Error::AmountOverflow)
    }
}

impl Sum for Amount {
    /// Panics on overflow; callers summing untrusted values should fold with
    /// [`Amount::checked_add`].
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Self {
        iter.fold(Amount::ZERO, |acc, a| {
            acc.checked_add(a).expect("amount sum overflowed")
        })
    }
}

// Amounts travel as decimal strings: 10^18-scale values do not survive
// a round trip through a double.
impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_relations() {
        assert_eq!(
            Amount::from_eth(1).unwrap(),
            Amount::from_gwei(GWEI_PER_ETH).unwrap()
        );
        assert_eq!(Amount::from_eth(1).unwrap().wei(), 1_000_000_000_000_000_000);
        assert_eq!(Amount::from_gwei(1).unwrap().wei(), 1_000_000_000);
    }

    #[test]
    fn overflow_is_an_error() {
        let max = Amount::from_wei(u128::MAX);
        assert_eq!(max.checked_add(Amount::from_wei(1)), Err(Error::AmountOverflow));
        assert_eq!(
            Amount::ZERO.checked_sub(Amount::from_wei(1)),
            Err(Error::AmountUnderflow)
        );
        assert_eq!(max.checked_mul(2), Err(Error::AmountOverflow));
    }

    #[test]
    fn mul_div_uses_wide_intermediate() {
        let big = Amount::from_wei(u128::MAX / 3);
        // product overflows u128 but the quotient fits
        assert_eq!(big.mul_div_floor(6, 6).unwrap(), big);
        let (q, r) = Amount::from_wei(u128::MAX).mul_div_rem(3, 4).unwrap();
        assert_eq!(q.wei(), u128::MAX / 4 * 3 + (u128::MAX % 4) * 3 / 4);
        assert_eq!(r, (u128::MAX % 4) * 3 % 4);
        assert_eq!(
            Amount::from_wei(u128::MAX).mul_div_floor(2, 1),
            Err(Error::AmountOverflow)
        );
    }

    #[test]
    fn decimal_string_serde() {
        let a = Amount::from_wei(277_777_777_777_777_777);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, "\"277777777777777777\"");
        assert_eq!(serde_json::from_str::<Amount>(&json).unwrap(), a);
        assert!(serde_json::from_str::<Amount>("\"-5\"").is_err());
        assert!(serde_json::from_str::<Amount>("\"1e18\"").is_err());
    }
}
