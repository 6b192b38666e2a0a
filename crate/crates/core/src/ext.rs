//! Extended-range reals and forward-mode dual numbers.
//!
//! Off the spectrum, transfer-matrix traces grow like `exp(c·F_k)` and leave
//! the `f64` exponent range long before `k = 25`. [`ExtReal`] carries an
//! `f64` mantissa with a separate binary exponent so those pipelines keep
//! their relative accuracy.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Mantissas are kept within `[2^-256, 2^256]` in magnitude.
const RENORM_BITS: i64 = 256;

/// `x·2^e` for any `e`, stepping in chunks so intermediate powers stay
/// finite.
pub(crate) fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= pow2(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= pow2(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * pow2(e)
}

/// `2^e` for `-1022 ≤ e ≤ 1023`.
fn pow2(e: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Binary exponent of a normal, finite, nonzero double.
fn ilogb(x: f64) -> i64 {
    (((x.to_bits() >> 52) & 0x7ff) as i64) - 1023
}

/// `mant · 2^exp`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExtReal {
    mant: f64,
    exp: i64,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal { mant: 0.0, exp: 0 };
    pub const ONE: ExtReal = ExtReal { mant: 1.0, exp: 0 };

    pub fn new(mant: f64, exp: i64) -> Self {
        ExtReal { mant, exp }.normalized()
    }

    pub fn from_f64(x: f64) -> Self {
        ExtReal { mant: x, exp: 0 }.normalized()
    }

    fn normalized(self) -> Self {
        if self.mant == 0.0 || !self.mant.is_finite() {
            return ExtReal { mant: self.mant, exp: 0 };
        }
        let e = ilogb(self.mant);
        if e.abs() > RENORM_BITS {
            ExtReal { mant: self.mant * pow2(-e), exp: self.exp + e }
        } else {
            self
        }
    }

    pub fn mantissa(self) -> f64 {
        self.mant
    }

    pub fn exponent(self) -> i64 {
        self.exp
    }

    /// Nearest double; saturates to ±∞ or 0 outside the `f64` range.
    pub fn to_f64(self) -> f64 {
        ldexp(self.mant, self.exp)
    }

    pub fn is_zero(self) -> bool {
        self.mant == 0.0
    }

    pub fn is_finite(self) -> bool {
        self.mant.is_finite()
    }

    pub fn abs(self) -> Self {
        ExtReal { mant: self.mant.abs(), exp: self.exp }
    }

    pub fn signum(self) -> f64 {
        if self.mant == 0.0 {
            0.0
        } else {
            self.mant.signum()
        }
    }

    /// Natural log of the magnitude.
    pub fn ln_abs(self) -> f64 {
        self.mant.abs().ln() + self.exp as f64 * std::f64::consts::LN_2
    }

    pub fn log10_abs(self) -> f64 {
        self.mant.abs().log10() + self.exp as f64 * std::f64::consts::LOG10_2
    }

    pub fn sqrt(self) -> Self {
        let (m, e) = if self.exp % 2 == 0 { (self.mant, self.exp) } else { (self.mant * 2.0, self.exp - 1) };
        ExtReal { mant: m.sqrt(), exp: e / 2 }.normalized()
    }

    /// `|self|^p`.
    pub fn powf_abs(self, p: f64) -> Self {
        if self.mant == 0.0 {
            return if p > 0.0 { ExtReal::ZERO } else { ExtReal::from_f64(f64::INFINITY) };
        }
        let scaled = p * self.exp as f64;
        let whole = scaled.floor();
        let mant = self.mant.abs().powf(p) * (scaled - whole).exp2();
        ExtReal { mant, exp: whole as i64 }.normalized()
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal::from_f64(x)
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;
    fn neg(self) -> ExtReal {
        ExtReal { mant: -self.mant, exp: self.exp }
    }
}

impl Mul for ExtReal {
    type Output = ExtReal;
    fn mul(self, rhs: ExtReal) -> ExtReal {
        ExtReal { mant: self.mant * rhs.mant, exp: self.exp + rhs.exp }.normalized()
    }
}

impl Mul<f64> for ExtReal {
    type Output = ExtReal;
    fn mul(self, rhs: f64) -> ExtReal {
        ExtReal { mant: self.mant * rhs, exp: self.exp }.normalized()
    }
}

impl Div for ExtReal {
    type Output = ExtReal;
    fn div(self, rhs: ExtReal) -> ExtReal {
        ExtReal { mant: self.mant / rhs.mant, exp: self.exp - rhs.exp }.normalized()
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        if rhs.mant == 0.0 {
            return self;
        }
        if self.mant == 0.0 {
            return rhs;
        }
        let (big, small) = if self.exp >= rhs.exp { (self, rhs) } else { (rhs, self) };
        let gap = big.exp - small.exp;
        if gap > 1100 {
            return big;
        }
        ExtReal { mant: big.mant + ldexp(small.mant, -gap), exp: big.exp }.normalized()
    }
}

impl Sub for ExtReal {
    type Output = ExtReal;
    fn sub(self, rhs: ExtReal) -> ExtReal {
        self + (-rhs)
    }
}

impl PartialEq for ExtReal {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let d = *self - *other;
        d.mant.partial_cmp(&0.0)
    }
}

impl fmt::Display for ExtReal {
    /// Plain `f64` formatting inside the double range, otherwise
    /// `d.ddddddddddddddde±NNN` computed from the decimal logarithm.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let plain = self.to_f64();
        if plain.is_finite() && (plain != 0.0 || self.mant == 0.0) && (plain == 0.0 || plain.abs() >= 1e-300) {
            return write!(f, "{plain:e}");
        }
        if !self.mant.is_finite() {
            return write!(f, "{}", self.mant);
        }
        let lg = self.log10_abs();
        let mut e10 = lg.floor();
        let mut m10 = 10f64.powf(lg - e10);
        if m10 >= 10.0 {
            m10 /= 10.0;
            e10 += 1.0;
        }
        let sign = if self.mant < 0.0 { "-" } else { "" };
        write!(f, "{sign}{m10:.15}e{}", e10 as i64)
    }
}

/// A value and its derivative with respect to the energy.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DualScalar {
    pub value: f64,
    pub deriv: f64,
}

impl DualScalar {
    pub fn new(value: f64, deriv: f64) -> Self {
        DualScalar { value, deriv }
    }

    pub fn constant(value: f64) -> Self {
        DualScalar { value, deriv: 0.0 }
    }

    /// The independent variable itself.
    pub fn variable(value: f64) -> Self {
        DualScalar { value, deriv: 1.0 }
    }
}

impl Add for DualScalar {
    type Output = DualScalar;
    fn add(self, rhs: DualScalar) -> DualScalar {
        DualScalar::new(self.value + rhs.value, self.deriv + rhs.deriv)
    }
}

impl Sub for DualScalar {
    type Output = DualScalar;
    fn sub(self, rhs: DualScalar) -> DualScalar {
        DualScalar::new(self.value - rhs.value, self.deriv - rhs.deriv)
    }
}

impl Mul for DualScalar {
    type Output = DualScalar;
    fn mul(self, rhs: DualScalar) -> DualScalar {
        DualScalar::new(self.value * rhs.value, self.deriv * rhs.value + self.value * rhs.deriv)
    }
}

impl Neg for DualScalar {
    type Output = DualScalar;
    fn neg(self) -> DualScalar {
        DualScalar::new(-self.value, -self.deriv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn huge_products_keep_relative_accuracy() {
        let mut x = ExtReal::ONE;
        for _ in 0..2000 {
            x = x * ExtReal::from_f64(1e10);
        }
        assert!((x.log10_abs() - 20000.0).abs() < 1e-9);
        assert_eq!(x.to_f64(), f64::INFINITY);
        assert_eq!(format!("{x}").split('e').nth(1), Some("20000"));
    }

    #[test]
    fn sqrt_and_pow_of_large_values() {
        let x = ExtReal::new(1.0, 3001);
        assert!((x.sqrt().ln_abs() - 1500.5 * std::f64::consts::LN_2).abs() < 1e-9);
        assert!((x.powf_abs(1.5).ln_abs() - 4501.5 * std::f64::consts::LN_2).abs() < 1e-9);
        assert!((ExtReal::from_f64(4.0).powf_abs(1.5).to_f64() - 8.0).abs() < 1e-14);
    }

    #[test]
    fn display_inside_double_range_is_plain() {
        assert_eq!(ExtReal::from_f64(-2.5).to_string(), "-2.5e0");
        assert_eq!(ExtReal::ZERO.to_string(), "0e0");
    }

    proptest! {
        #[test]
        fn arithmetic_matches_f64_in_range(a in -1e100f64..1e100, b in -1e100f64..1e100) {
            let (x, y) = (ExtReal::from_f64(a), ExtReal::from_f64(b));
            prop_assert_eq!((x * y).to_f64(), a * b);
            prop_assert_eq!((x + y).to_f64(), a + b);
            prop_assert_eq!((x - y).to_f64(), a - b);
            prop_assert_eq!(x < y, a < b);
        }

        #[test]
        fn dual_product_rule(a in -10f64..10.0, b in -10f64..10.0) {
            // d/dE [(E + a)(E·b)] at E = 1
            let e = DualScalar::variable(1.0);
            let p = (e + DualScalar::constant(a)) * (e * DualScalar::constant(b));
            prop_assert!((p.deriv - (2.0 * b + a * b)).abs() < 1e-12);
        }
    }
}
