// SPDX-License-Identifier: Apache-2.0

//! Exact rational helpers and the [`Energy`] newtype.
//!
//! Every energy figure in the crate is an exact rational number of joules.
//! Conversion to floating point happens only at the reporting boundary, where
//! values are rounded to four significant digits of nanojoules.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

fn pow10(k: u32) -> BigInt {
    num_traits::pow(BigInt::from(10), k as usize)
}

/// Parses a plain decimal literal (`-12`, `0.015`, `1.3`, `2e-9`) exactly.
pub fn parse_decimal(s: &str) -> Option<Q> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((a, b)) => (a, b),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut num: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().ok()? };
    if neg {
        num = -num;
    }
    let scale = frac_part.len() as i32 - exp;
    Some(if scale >= 0 {
        Q::new(num, pow10(scale as u32))
    } else {
        Q::from_integer(num * pow10((-scale) as u32))
    })
}

/// Rounds `value` to `digits` significant decimal digits (half away from zero).
/// Returns the rounded value together with the decimal exponent of its last kept digit.
fn round_sig_parts(value: &Q, digits: u32) -> (BigInt, i32) {
    if value.is_zero() {
        return (BigInt::zero(), 0);
    }
    let abs = value.abs();
    // Find e with 10^e <= abs < 10^(e+1).
    let mut e: i32 = (abs.numer().to_string().len() as i32) - (abs.denom().to_string().len() as i32);
    loop {
        let lo = pow10_q(e);
        if abs < lo {
            e -= 1;
            continue;
        }
        if abs >= pow10_q(e + 1) {
            e += 1;
            continue;
        }
        break;
    }
    let shift = e - (digits as i32 - 1);
    let scaled = &abs / pow10_q(shift);
    let (quot, rem) = scaled.numer().div_rem(scaled.denom());
    let twice_rem: BigInt = rem * 2;
    let mut int = quot;
    if &twice_rem >= scaled.denom() {
        int += 1;
    }
    let mut shift = shift;
    if int == pow10(digits) {
        int = pow10(digits - 1);
        shift += 1;
    }
    if value.is_negative() {
        int = -int;
    }
    (int, shift)
}

fn pow10_q(e: i32) -> Q {
    if e >= 0 {
        Q::from_integer(pow10(e as u32))
    } else {
        Q::new(BigInt::one(), pow10((-e) as u32))
    }
}

/// Rounds to `digits` significant digits, exactly.
pub fn round_sig(value: &Q, digits: u32) -> Q {
    let (int, shift) = round_sig_parts(value, digits);
    Q::from_integer(int) * pow10_q(shift)
}

/// Decimal rendering with exactly `digits` significant digits (`0.3160`, `30.00`, `12350`).
pub fn format_sig(value: &Q, digits: u32) -> String {
    let (int, shift) = round_sig_parts(value, digits);
    if int.is_zero() {
        return "0".to_string();
    }
    let neg = int.is_negative();
    let mut s = int.abs().to_string();
    if shift >= 0 {
        s.push_str(&"0".repeat(shift as usize));
    } else {
        let frac = (-shift) as usize;
        if s.len() <= frac {
            s = format!("{}{}", "0".repeat(frac - s.len() + 1), s);
        }
        let split = s.len() - frac;
        s.insert(split, '.');
    }
    if neg {
        s.insert(0, '-');
    }
    s
}

/// Significant-digit rounding followed by conversion; stable across platforms
/// because the f64 is parsed from the exact decimal string.
pub fn to_f64_sig(value: &Q, digits: u32) -> f64 {
    format_sig(value, digits).parse().unwrap_or(f64::NAN)
}

pub fn to_f64(value: &Q) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Exact conversion of a finite f64.
pub fn from_f64(x: f64) -> Option<Q> {
    Q::from_float(x)
}

/// `num/den` rendering used in JSON for exact values.
pub fn exact_string(value: &Q) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn parse_exact(s: &str) -> Option<Q> {
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(Q::new(n, d))
            }
        }
        None => parse_decimal(s),
    }
}

/// An amount of energy in joules, held exactly.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Energy(pub Q);

impl Energy {
    pub fn zero() -> Self {
        Energy(Q::zero())
    }

    pub fn joules(&self) -> &Q {
        &self.0
    }

    pub fn nanojoules(&self) -> Q {
        &self.0 * q(1_000_000_000)
    }

    pub fn from_nanojoules(nj: Q) -> Self {
        Energy(nj / q(1_000_000_000))
    }

    /// Nanojoules rounded to 4 significant digits.
    pub fn nj_f64(&self) -> f64 {
        to_f64_sig(&self.nanojoules(), 4)
    }

    pub fn nj_string(&self) -> String {
        format_sig(&self.nanojoules(), 4)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn scale(&self, k: &Q) -> Energy {
        Energy(&self.0 * k)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} nJ", self.nj_string())
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Energy> for &'a Energy {
    type Output = Energy;
    fn add(self, rhs: &Energy) -> Energy {
        Energy(&self.0 + &rhs.0)
    }
}

impl Sub for Energy {
    type Output = Energy;
    fn sub(self, rhs: Energy) -> Energy {
        Energy(self.0 - rhs.0)
    }
}

impl AddAssign for Energy {
    fn add_assign(&mut self, rhs: Energy) {
        self.0 += rhs.0;
    }
}

impl<'a> AddAssign<&'a Energy> for Energy {
    fn add_assign(&mut self, rhs: &Energy) {
        self.0 += &rhs.0;
    }
}

impl Mul<u64> for &Energy {
    type Output = Energy;
    fn mul(self, k: u64) -> Energy {
        Energy(&self.0 * Q::from_integer(BigInt::from(k)))
    }
}

impl Sum for Energy {
    fn sum<I: Iterator<Item = Energy>>(iter: I) -> Energy {
        iter.fold(Energy::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Energy> for Energy {
    fn sum<I: Iterator<Item = &'a Energy>>(iter: I) -> Energy {
        iter.fold(Energy::zero(), |mut a, b| {
            a += b;
            a
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_decimal("1.3").unwrap(), q_frac(13, 10));
        assert_eq!(parse_decimal("-0.015").unwrap(), q_frac(-15, 1000));
        assert_eq!(parse_decimal("2e-9").unwrap(), q_frac(2, 1_000_000_000));
        assert_eq!(parse_decimal("94.2").unwrap(), q_frac(471, 5));
        assert!(parse_decimal("1.2.3").is_none());
        assert!(parse_decimal("").is_none());
        assert!(parse_decimal("abc").is_none());
    }

    #[test]
    fn four_significant_digits() {
        assert_eq!(format_sig(&q_frac(316, 1000), 4), "0.3160");
        assert_eq!(format_sig(&q(30), 4), "30.00");
        assert_eq!(format_sig(&q(123_456), 4), "123500");
        assert_eq!(format_sig(&q_frac(14_140, 100_000), 4), "0.1414");
        assert_eq!(format_sig(&q_frac(-25, 1), 4), "-25.00");
        assert_eq!(format_sig(&q(0), 4), "0");
        assert_eq!(format_sig(&q_frac(99_995, 1000), 4), "100.0");
        assert_eq!(to_f64_sig(&q_frac(1, 3), 4), 0.3333);
    }

    #[test]
    fn exact_strings_round_trip() {
        let v = q_frac(-7, 12);
        assert_eq!(parse_exact(&exact_string(&v)).unwrap(), v);
        assert_eq!(exact_string(&q(5)), "5");
    }
}
