//! Sparse exact dyadic numbers `Σ ±2^e` with `i128` exponents.
//!
//! The homeomorphism of [`crate::vanishing`] uses scales such as `2^-(10^25)`,
//! far beyond what a dense big-integer denominator can hold. Those numbers
//! only ever have a handful of nonzero binary digits, so they are stored as
//! their non-adjacent form: a strictly decreasing list of exponents with signs,
//! no two exponents consecutive. The form is unique, and the sign of a value is
//! the sign of its leading digit.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::arith::Rational;
use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Dyadic {
    // (exponent, sign), exponents strictly decreasing and pairwise non-adjacent
    digits: Vec<(i128, i8)>,
}

impl Dyadic {
    pub fn zero() -> Self {
        Self { digits: Vec::new() }
    }

    pub fn one() -> Self {
        Self::pow2(0)
    }

    pub fn pow2(e: i128) -> Self {
        Self { digits: vec![(e, 1)] }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_bigint(&BigInt::from(n))
    }

    pub fn from_bigint(n: &BigInt) -> Self {
        let neg = n.is_negative();
        let mag = n.magnitude();
        let terms = (0..mag.bits())
            .filter(|&i| mag.bit(i))
            .map(|i| (i as i128, if neg { -1 } else { 1 }));
        Self::normalize(terms)
    }

    /// Exact conversion of a rational whose denominator is a power of two.
    pub fn from_rational(q: &Rational) -> Result<Self> {
        let d = q.denom().magnitude();
        if d.count_ones() != 1 {
            return Err(Error::DomainViolation(format!("{q} is not dyadic")));
        }
        let shift = d.trailing_zeros().unwrap_or(0) as i128;
        Ok(Self::from_bigint(q.numer()).shift(-shift))
    }

    fn normalize(terms: impl IntoIterator<Item = (i128, i8)>) -> Self {
        let mut acc: BTreeMap<i128, i64> = BTreeMap::new();
        for (e, s) in terms {
            *acc.entry(e).or_insert(0) += s as i64;
        }
        Self::from_counts(acc)
    }

    fn from_counts(mut acc: BTreeMap<i128, i64>) -> Self {
        let mut out: Vec<(i128, i8)> = Vec::new();
        let mut carry: i64 = 0;
        let mut cur: Option<i128> = None;
        loop {
            let e = match (cur, carry) {
                (Some(c), k) if k != 0 => c + 1,
                _ => match acc.keys().next() {
                    Some(&e) => e,
                    None => break,
                },
            };
            let total = acc.remove(&e).unwrap_or(0) + carry;
            if total & 1 == 0 {
                carry = total / 2;
            } else {
                // the next position's coefficient also affects the residue mod 4
                let next = acc.get(&(e + 1)).copied().unwrap_or(0);
                let d: i64 = if (total + 2 * next).rem_euclid(4) == 1 { 1 } else { -1 };
                out.push((e, d as i8));
                carry = (total - d) / 2;
            }
            cur = Some(e);
            if carry == 0 && acc.is_empty() {
                break;
            }
        }
        out.reverse();
        Self { digits: out }
    }

    pub fn is_zero(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn signum(&self) -> Ordering {
        match self.digits.first() {
            None => Ordering::Equal,
            Some((_, s)) if *s > 0 => Ordering::Greater,
            Some(_) => Ordering::Less,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.signum() == Ordering::Greater
    }

    pub fn is_negative(&self) -> bool {
        self.signum() == Ordering::Less
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    /// Multiplies by `2^k`.
    pub fn shift(&self, k: i128) -> Self {
        Self { digits: self.digits.iter().map(|&(e, s)| (e + k, s)).collect() }
    }

    pub fn half(&self) -> Self {
        self.shift(-1)
    }

    /// Exponent of the leading digit; `floor(log2 |x|)` is this or one less.
    pub fn top_exponent(&self) -> Option<i128> {
        self.digits.first().map(|d| d.0)
    }

    pub fn lowest_exponent(&self) -> Option<i128> {
        self.digits.last().map(|d| d.0)
    }

    pub fn num_digits(&self) -> usize {
        self.digits.len()
    }

    pub fn digits(&self) -> &[(i128, i8)] {
        &self.digits
    }

    /// Exact rational value, refused when it would need more than `max_bits`.
    pub fn to_rational(&self, max_bits: u64) -> Result<Rational> {
        let (Some(hi), Some(lo)) = (self.top_exponent(), self.lowest_exponent()) else {
            return Ok(Rational::zero());
        };
        if hi - lo > max_bits as i128 || hi.abs() > max_bits as i128 || lo.abs() > max_bits as i128 {
            return Err(Error::PrecisionInsufficient(format!(
                "dyadic spans exponents {lo}..{hi}, over {max_bits} bits"
            )));
        }
        let mut n = BigInt::zero();
        for &(e, s) in &self.digits {
            let t = BigInt::one() << (e - lo) as usize;
            if s > 0 {
                n += t;
            } else {
                n -= t;
            }
        }
        let q = Rational::from_integer(n);
        Ok(if lo >= 0 {
            q * Rational::from_integer(BigInt::one() << lo as usize)
        } else {
            q / Rational::from_integer(BigInt::one() << (-lo) as usize)
        })
    }

    /// `floor(x * 2^p)`, exact even when `x` has digits far below `2^-p`.
    pub fn floor_scaled(&self, p: i128) -> BigInt {
        let scaled = self.shift(p);
        let mut int_part = BigInt::zero();
        let mut frac_sign = Ordering::Equal;
        for &(e, s) in &scaled.digits {
            if e >= 0 {
                let t = BigInt::one() << e as usize;
                if s > 0 {
                    int_part += t;
                } else {
                    int_part -= t;
                }
            } else {
                // leading digit of the fractional tail decides its sign
                frac_sign = if s > 0 { Ordering::Greater } else { Ordering::Less };
                break;
            }
        }
        if frac_sign == Ordering::Less {
            int_part - 1
        } else {
            int_part
        }
    }

    pub fn ceil_scaled(&self, p: i128) -> BigInt {
        -(-self).floor_scaled(p)
    }

    /// Outward rational bracket on the grid `2^-p`.
    pub fn rational_bracket(&self, p: u32) -> (Rational, Rational) {
        let den = BigInt::one() << p as usize;
        (
            Rational::new(self.floor_scaled(p as i128), den.clone()),
            Rational::new(self.ceil_scaled(p as i128), den),
        )
    }

    /// Compares against an arbitrary rational without materialising `self`.
    pub fn cmp_rational(&self, q: &Rational) -> Ordering {
        let d = Dyadic::from_bigint(q.denom());
        let n = Dyadic::from_bigint(q.numer());
        (&(self * &d) - &n).signum()
    }

    pub fn mul_int(&self, k: i64) -> Self {
        self * &Dyadic::from_int(k)
    }

    pub fn to_f64(&self) -> f64 {
        let mut x = 0.0f64;
        for &(e, s) in self.digits.iter().take(60) {
            let t = match e.to_i32() {
                Some(e) if e > -1100 && e < 1100 => 2f64.powi(e),
                Some(e) if e >= 1100 => f64::INFINITY,
                _ => 0.0,
            };
            x += s as f64 * t;
        }
        x
    }

    /// `log2 |x|` as an `f64`; meaningful for any exponent range.
    pub fn log2_abs(&self) -> f64 {
        match self.digits.first() {
            None => f64::NEG_INFINITY,
            Some(&(e, _)) => {
                let rest = self.shift(-e).to_f64().abs();
                e as f64 + rest.log2()
            }
        }
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.digits.is_empty() {
            return write!(f, "0");
        }
        for (i, &(e, s)) in self.digits.iter().enumerate() {
            match (i, s > 0) {
                (0, true) => {}
                (0, false) => write!(f, "-")?,
                (_, true) => write!(f, " + ")?,
                (_, false) => write!(f, " - ")?,
            }
            write!(f, "2^{e}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dyadic({self})")
    }
}

impl std::str::FromStr for Dyadic {
    type Err = Error;

    /// Accepts the `Display` form, e.g. `"2^0 - 2^-12"` or `"0"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("not a dyadic sum: {s:?}"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact == "0" {
            return Ok(Dyadic::zero());
        }
        let mut terms = Vec::new();
        let mut rest = compact.as_str();
        while !rest.is_empty() {
            let (sign, body) = match rest.as_bytes()[0] {
                b'-' => (-1i8, &rest[1..]),
                b'+' => (1, &rest[1..]),
                _ => (1, rest),
            };
            let body = body.strip_prefix("2^").ok_or_else(bad)?;
            let end = body[1..].find(['+', '-']).map(|i| i + 1).unwrap_or(body.len());
            let e: i128 = body[..end].parse().map_err(|_| bad())?;
            terms.push((e, sign));
            rest = &body[end..];
        }
        Ok(Dyadic::normalize(terms))
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum()
    }
}

impl<'a> Add<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::normalize(self.digits.iter().chain(rhs.digits.iter()).copied())
    }
}

impl<'a> Sub<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::normalize(
            self.digits.iter().copied().chain(rhs.digits.iter().map(|&(e, s)| (e, -s))),
        )
    }
}

impl<'a> Mul<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        let mut acc: BTreeMap<i128, i64> = BTreeMap::new();
        for &(a, s) in &self.digits {
            for &(b, t) in &rhs.digits {
                *acc.entry(a + b).or_insert(0) += (s * t) as i64;
            }
        }
        Dyadic::from_counts(acc)
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { digits: self.digits.iter().map(|&(e, s)| (e, -s)).collect() }
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        -&self
    }
}

macro_rules! owned_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<Dyadic> for Dyadic {
            type Output = Dyadic;
            fn $m(self, rhs: Dyadic) -> Dyadic {
                (&self).$m(&rhs)
            }
        }
    };
}
owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);

impl From<i64> for Dyadic {
    fn from(n: i64) -> Self {
        Dyadic::from_int(n)
    }
}


impl serde::Serialize for Dyadic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Dyadic {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
