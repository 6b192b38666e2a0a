//! Fixed-point phases on the circle and the golden rotation number.
//!
//! A [`PhasePoint`] stores a fraction in `[0, 1)` as a `u128` scaled by
//! `2^128`, so wrapping integer arithmetic is exactly arithmetic mod 1.
//! Orbit points `n·ω + θ mod 1` are therefore evaluated without any
//! floating-point drift; the only error is the truncation of ω itself,
//! bounded by `|n|·2^-128`.
//!
//! The working width defaults to 128 bits and can be lowered (never below
//! 96) through the `QUASITRACE_PRECISION_BITS` environment variable. Lower
//! widths simply zero the trailing bits of ω, θ and every orbit point.

use std::fmt;
use std::ops::Add;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use thiserror::Error;

pub const DEFAULT_PRECISION_BITS: u32 = 128;
pub const MIN_PRECISION_BITS: u32 = 96;
pub const PRECISION_ENV: &str = "QUASITRACE_PRECISION_BITS";

/// ω = (√5 − 1)/2 to 90 decimal places.
pub const OMEGA_DECIMAL: &str =
    "0.618033988749894848204586834365638117720309179805762862135448622705260462818902449707207204";

/// Decimal digits used when printing a phase.
const DISPLAY_DIGITS: u32 = 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PhaseError {
    #[error("malformed phase `{0}`: expected a decimal in [0,1), a fraction p/q, or [p*]omega[/q]")]
    Malformed(String),
    #[error("phase `{0}` lies outside [0,1)")]
    OutOfRange(String),
    #[error("zero denominator in phase `{0}`")]
    ZeroDenominator(String),
    #[error("{PRECISION_ENV}={0} is invalid: expected an integer in [96, 128]")]
    Precision(String),
}

/// Parses the precision override from the environment.
///
/// Unset means the default width. The CLI calls this up front so that a bad
/// value becomes a usage error; library code falls back to the default.
pub fn precision_bits_from_env() -> Result<u32, PhaseError> {
    match std::env::var(PRECISION_ENV) {
        Err(_) => Ok(DEFAULT_PRECISION_BITS),
        Ok(s) => match s.trim().parse::<u32>() {
            Ok(b) if (MIN_PRECISION_BITS..=128).contains(&b) => Ok(b),
            _ => Err(PhaseError::Precision(s)),
        },
    }
}

/// Fractional bits in effect for this process.
pub fn precision_bits() -> u32 {
    static BITS: OnceLock<u32> = OnceLock::new();
    *BITS.get_or_init(|| precision_bits_from_env().unwrap_or(DEFAULT_PRECISION_BITS))
}

fn precision_mask() -> u128 {
    mask_for_bits(precision_bits())
}

fn mask_for_bits(bits: u32) -> u128 {
    if bits >= 128 {
        u128::MAX
    } else {
        u128::MAX << (128 - bits)
    }
}

/// A point of ℝ/ℤ in fixed point: `raw / 2^128`.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhasePoint(u128);

impl PhasePoint {
    pub const ZERO: PhasePoint = PhasePoint(0);

    /// Wraps a raw 128-bit fraction, truncated to the working precision.
    pub fn from_raw(raw: u128) -> Self {
        PhasePoint(raw & precision_mask())
    }

    pub fn raw(self) -> u128 {
        self.0
    }

    /// Exact conversion of a double in `[0, 1)`.
    pub fn from_f64(x: f64) -> Result<Self, PhaseError> {
        if !(0.0..1.0).contains(&x) {
            return Err(PhaseError::OutOfRange(x.to_string()));
        }
        // x * 2^128 is exact (power-of-two scaling) and below 2^128.
        Ok(Self::from_raw((x * 2f64.powi(128)) as u128))
    }

    /// The rational `num/den` reduced mod 1.
    pub fn from_ratio(num: u128, den: u128) -> Result<Self, PhaseError> {
        if den == 0 {
            return Err(PhaseError::ZeroDenominator(format!("{num}/{den}")));
        }
        let scaled = (BigUint::from(num) << 128) / BigUint::from(den);
        Ok(Self::from_raw(low_u128(&scaled)))
    }

    /// `num·ω/den` reduced mod 1, evaluated from a 256-bit ω.
    pub fn omega_multiple(num: u128, den: u128) -> Result<Self, PhaseError> {
        if den == 0 {
            return Err(PhaseError::ZeroDenominator(format!("{num}*omega/{den}")));
        }
        let scaled = (BigUint::from(num) * omega_wide()) / BigUint::from(den);
        Ok(Self::from_raw(low_u128(&(scaled >> 128))))
    }

    /// Uniformly random phase at the working precision.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::from_raw(rng.random::<u128>())
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2f64.powi(128)
    }

    /// `n·self mod 1`, exact in the fixed-point representation.
    pub fn mul_int(self, n: i64) -> Self {
        PhasePoint((n as i128 as u128).wrapping_mul(self.0) & precision_mask())
    }

    /// Distance between two points on the circle, in raw units.
    pub fn circle_distance(self, other: PhasePoint) -> u128 {
        let d = self.0.wrapping_sub(other.0);
        d.min(d.wrapping_neg())
    }
}

fn low_u128(x: &BigUint) -> u128 {
    let digits = x.to_u64_digits();
    let lo = digits.first().copied().unwrap_or(0) as u128;
    let hi = digits.get(1).copied().unwrap_or(0) as u128;
    lo | (hi << 64)
}

impl fmt::Debug for PhasePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhasePoint({self})")
    }
}

/// Addition mod 1.
impl Add for PhasePoint {
    type Output = PhasePoint;

    fn add(self, other: PhasePoint) -> PhasePoint {
        PhasePoint::from_raw(self.0.wrapping_add(other.0))
    }
}

impl fmt::Display for PhasePoint {
    /// Decimal expansion rounded to `DISPLAY_DIGITS` places, trailing zeros
    /// removed.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("0");
        }
        let unit = BigUint::from(10u8).pow(DISPLAY_DIGITS);
        let half = BigUint::from(1u8) << 127usize;
        let scaled: BigUint = ((BigUint::from(self.0) * &unit + half) >> 128usize).min(&unit - 1u8);
        let mut digits = format!("{:0>width$}", scaled.to_string(), width = DISPLAY_DIGITS as usize);
        while digits.ends_with('0') {
            digits.pop();
        }
        if digits.is_empty() {
            digits.push('0');
        }
        write!(f, "0.{digits}")
    }
}

impl FromStr for PhasePoint {
    type Err = PhaseError;

    /// Accepts `0.25`, `1/3`, `omega`, `omega/2`, `3*omega`, `2*omega/5`.
    ///
    /// Decimals and fractions must lie in `[0, 1)`; multiples of ω are
    /// reduced mod 1.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let token = s.trim();
        let malformed = || PhaseError::Malformed(s.to_string());
        if token.is_empty() {
            return Err(malformed());
        }
        if token.contains("omega") {
            let (head, tail) = token.split_once("omega").ok_or_else(malformed)?;
            let num = match head {
                "" => 1,
                h => h.strip_suffix('*').ok_or_else(malformed)?.parse::<u128>().map_err(|_| malformed())?,
            };
            let den = match tail {
                "" => 1,
                t => t.strip_prefix('/').ok_or_else(malformed)?.parse::<u128>().map_err(|_| malformed())?,
            };
            return Self::omega_multiple(num, den).map_err(|_| PhaseError::ZeroDenominator(s.to_string()));
        }
        if let Some((p, q)) = token.split_once('/') {
            let p = p.trim().parse::<u128>().map_err(|_| malformed())?;
            let q = q.trim().parse::<u128>().map_err(|_| malformed())?;
            if q == 0 {
                return Err(PhaseError::ZeroDenominator(s.to_string()));
            }
            if p >= q {
                return Err(PhaseError::OutOfRange(s.to_string()));
            }
            return Self::from_ratio(p, q);
        }
        parse_decimal(token).ok_or_else(malformed)?.map_err(|_| PhaseError::OutOfRange(s.to_string()))
    }
}

/// `None` on a syntax error, `Some(Err)` for a value outside `[0,1)`.
fn parse_decimal(token: &str) -> Option<Result<PhasePoint, ()>> {
    let (int_part, frac_part) = match token.split_once('.') {
        Some((i, f)) => (i, f),
        None => (token, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) {
        return None;
    }
    if int_part.bytes().any(|b| b != b'0') {
        return Some(Err(()));
    }
    if frac_part.is_empty() {
        return Some(Ok(PhasePoint::ZERO));
    }
    let numer: BigUint = frac_part.parse().ok()?;
    let denom = BigUint::from(10u8).pow(frac_part.len() as u32);
    let scaled = (numer << 128) / denom;
    Some(Ok(PhasePoint::from_raw(low_u128(&scaled))))
}

/// ω·2^256, floor, from an integer square root: ω = (√5 − 1)/2.
pub(crate) fn omega_wide() -> &'static BigUint {
    static WIDE: OnceLock<BigUint> = OnceLock::new();
    WIDE.get_or_init(|| {
        let one = BigUint::from(1u8) << 256;
        let root = (BigUint::from(5u8) << 512usize).sqrt();
        (root - &one) >> 1
    })
}

/// The golden rotation number ω = (√5 − 1)/2 in fixed point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GoldenConstant {
    omega: u128,
}

impl GoldenConstant {
    /// Process-wide constant at the working precision, built from the
    /// embedded decimal literal.
    pub fn get() -> &'static GoldenConstant {
        static OMEGA: OnceLock<GoldenConstant> = OnceLock::new();
        OMEGA.get_or_init(|| GoldenConstant::from_decimal(OMEGA_DECIMAL, precision_bits()))
    }

    fn from_decimal(literal: &str, bits: u32) -> Self {
        let digits = literal.strip_prefix("0.").expect("ω literal starts with 0.");
        let numer: BigUint = digits.parse().expect("ω literal is decimal");
        let denom = BigUint::from(10u8).pow(digits.len() as u32);
        let raw = low_u128(&((numer << 128) / denom));
        GoldenConstant { omega: raw & mask_for_bits(bits) }
    }

    pub fn omega(&self) -> PhasePoint {
        PhasePoint(self.omega)
    }

    /// Left endpoint `1 − ω` of the coding interval.
    pub fn threshold(&self) -> PhasePoint {
        PhasePoint(self.omega.wrapping_neg())
    }

    /// `ω² + ω − 1` evaluated exactly on the stored fixed-point ω, in units
    /// of `2^-256`, with its sign.
    pub fn quadratic_residual(&self) -> (bool, BigUint) {
        let w = BigUint::from(self.omega);
        let lhs = &w * &w + (&w << 128);
        let one = BigUint::from(1u8) << 256;
        if lhs >= one {
            (false, lhs - one)
        } else {
            (true, one - lhs)
        }
    }

    /// `frac(n·ω + θ)`.
    pub fn orbit(&self, n: i64, theta: PhasePoint) -> PhasePoint {
        let shift = (n as i128 as u128).wrapping_mul(self.omega);
        PhasePoint(theta.0.wrapping_add(shift) & precision_mask())
    }
}

/// log2 of the residual scale, for diagnostics: `|ω² + ω − 1| ≤ 2^result`.
pub fn omega_residual_log2(c: &GoldenConstant) -> f64 {
    let (_, r) = c.quadratic_residual();
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    r.to_f64().map(|v| v.log2() - 256.0).unwrap_or(f64::INFINITY)
}
