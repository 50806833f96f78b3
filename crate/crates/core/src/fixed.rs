//! Fixed-point numbers for the contract and audit layers.
//!
//! Values are signed 64-bit integers counting units of 1e-9, so hashes and
//! serialized transcripts are bit-exact on every platform. Conversion from
//! `f64` rounds half to even.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const SCALE: i64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fixed(pub i64);

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);
    pub const ONE: Fixed = Fixed(SCALE);

    pub fn from_f64(x: f64) -> Option<Fixed> {
        let scaled = (x * SCALE as f64).round_ties_even();
        // i64::MAX is not representable in f64; stay strictly inside
        if scaled.is_finite() && scaled >= -9.2e18 && scaled <= 9.2e18 {
            Some(Fixed(scaled as i64))
        } else {
            None
        }
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    pub fn raw(self) -> i64 {
        self.0
    }

    pub fn checked_add(self, other: Fixed) -> Option<Fixed> {
        self.0.checked_add(other.0).map(Fixed)
    }

    pub fn checked_sub(self, other: Fixed) -> Option<Fixed> {
        self.0.checked_sub(other.0).map(Fixed)
    }

    /// Product rounded half to even back to 1e-9 units.
    pub fn checked_mul(self, other: Fixed) -> Option<Fixed> {
        let wide = self.0 as i128 * other.0 as i128;
        i64::try_from(div_half_even(wide, SCALE as i128)).ok().map(Fixed)
    }

    /// `(self + other) / 2`, rounded half to even.
    pub fn midpoint(self, other: Fixed) -> Fixed {
        Fixed(div_half_even(self.0 as i128 + other.0 as i128, 2) as i64)
    }

    /// Split into `parts` equal shares rounded down, plus the remainder in
    /// raw units.
    pub fn split(self, parts: i64) -> (Fixed, i64) {
        (Fixed(self.0.div_euclid(parts)), self.0.rem_euclid(parts))
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

/// Exact `(r_rm - r_mm) * volume` in units of 1e-18, used to rank trades
/// without rounding.
pub fn exact_profit(r_mm: Fixed, r_rm: Fixed, volume: Fixed) -> i128 {
    (r_rm.0 as i128 - r_mm.0 as i128) * volume.0 as i128
}

fn div_half_even(n: i128, d: i128) -> i128 {
    let q = n.div_euclid(d);
    let r = n.rem_euclid(d);
    match (2 * r).cmp(&d) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:09}", abs / SCALE as u64, abs % SCALE as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rounds_half_to_even() {
        assert_eq!(Fixed::from_f64(0.5e-9).unwrap(), Fixed(0));
        assert_eq!(Fixed::from_f64(1.5e-9).unwrap(), Fixed(2));
        assert_eq!(Fixed::from_f64(-2.5e-9).unwrap(), Fixed(-2));
        assert_eq!(Fixed::from_f64(1.0).unwrap(), Fixed::ONE);
        assert!(Fixed::from_f64(f64::NAN).is_none());
        assert!(Fixed::from_f64(1e12).is_none());
    }

    #[test]
    fn midpoint_and_mul() {
        assert_eq!(Fixed(1).midpoint(Fixed(2)), Fixed(2));
        assert_eq!(Fixed(1).midpoint(Fixed(0)), Fixed(0));
        assert_eq!(Fixed(SCALE).midpoint(Fixed(5 * SCALE)), Fixed(3 * SCALE));
        assert_eq!(Fixed(2 * SCALE).checked_mul(Fixed(SCALE / 2)).unwrap(), Fixed::ONE);
        assert_eq!(Fixed(3).checked_mul(Fixed(SCALE / 2)).unwrap(), Fixed(2));
    }

    #[test]
    fn display_uses_nine_decimals() {
        assert_eq!(Fixed::ONE.to_string(), "1.000000000");
        assert_eq!(Fixed(-1_500_000_000).to_string(), "-1.500000000");
        assert_eq!(Fixed(7).to_string(), "0.000000007");
    }

    #[test]
    fn split_keeps_every_unit() {
        let (share, rem) = Fixed(10).split(3);
        assert_eq!((share, rem), (Fixed(3), 1));
    }

    proptest! {
        #[test]
        fn round_trip_within_half_unit(x in -1e6f64..1e6) {
            let f = Fixed::from_f64(x).unwrap();
            prop_assert!((f.to_f64() - x).abs() <= 0.5e-9 + x.abs() * f64::EPSILON);
        }

        #[test]
        fn midpoint_is_symmetric(a in -1i64 << 60..1i64 << 60, b in -1i64 << 60..1i64 << 60) {
            prop_assert_eq!(Fixed(a).midpoint(Fixed(b)), Fixed(b).midpoint(Fixed(a)));
        }
    }
}
