//! Exact rationals and rigorous enclosures of real numbers.
//!
//! Every irrational quantity in the crate (logarithms, Hölder exponents,
//! growth rates) is carried as a [`RealEnclosure`]: a pair of rationals that
//! provably brackets the true value. Transcendental functions are evaluated
//! in fixed point on the grid `2^-P` with floor/ceil rounding on the two
//! sides, so the returned bounds never cross the true value.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `2^e` for any signed exponent.
pub fn pow2(e: i64) -> Rational {
    if e >= 0 {
        Rational::from_integer(BigInt::one() << (e as usize))
    } else {
        Rational::new(BigInt::one(), BigInt::one() << ((-e) as usize))
    }
}

/// Parses `"n/d"`, `"n"` or a plain decimal such as `"0.3"` or `"-1.25e-2"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut q = if scale >= 0 {
        Rational::from_integer(n * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(n, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        q = -q;
    }
    Ok(q)
}

/// Always `"num/den"`, including integers (`"1/1"`).
pub fn format_rational(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn to_f64(q: &Rational) -> f64 {
    // Scale into a range where both halves fit in an f64 without overflow.
    let nb = q.numer().bits() as i64;
    let db = q.denom().bits() as i64;
    let shift = nb - db;
    let scaled = if shift > 0 {
        q / pow2(shift)
    } else {
        q * pow2(-shift)
    };
    let n = scaled.numer();
    let d = scaled.denom();
    let trim = (d.bits() as i64 - 60).max(0) as usize;
    let nf = f64_of(&(n >> trim));
    let df = f64_of(&(d >> trim));
    (nf / df) * 2f64.powi(shift.clamp(-1100, 1100) as i32)
}

fn f64_of(n: &BigInt) -> f64 {
    let s = n.to_string();
    s.parse::<f64>().unwrap_or(0.0)
}

/// `floor(q * 2^p)`.
pub fn floor_scaled(q: &Rational, p: u64) -> BigInt {
    (q.numer() << p as usize).div_floor(q.denom())
}

/// `ceil(q * 2^p)`.
pub fn ceil_scaled(q: &Rational, p: u64) -> BigInt {
    -((-q.numer() << p as usize).div_floor(q.denom()))
}

fn from_grid(n: BigInt, p: u64) -> Rational {
    Rational::new(n, BigInt::one() << p as usize)
}

fn div_floor_pow2(n: &BigInt, p: u64) -> BigInt {
    n >> p as usize
}

fn div_ceil_pow2(n: &BigInt, p: u64) -> BigInt {
    -((-n) >> p as usize)
}

fn ceil_div(n: &BigInt, d: &BigInt) -> BigInt {
    -((-n).div_floor(d))
}

/// Closed interval `[lo, hi]` of rationals known to contain a real number.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealEnclosure {
    #[serde(with = "crate::serde_rational")]
    pub lo: Rational,
    #[serde(with = "crate::serde_rational")]
    pub hi: Rational,
}

impl RealEnclosure {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        debug_assert!(lo <= hi, "inverted enclosure");
        Self { lo, hi }
    }

    pub fn point(q: Rational) -> Self {
        Self { lo: q.clone(), hi: q }
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, q: &Rational) -> bool {
        &self.lo <= q && q <= &self.hi
    }

    pub fn contains_enclosure(&self, other: &RealEnclosure) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &RealEnclosure) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / int(2)
    }

    pub fn is_positive(&self) -> bool {
        self.lo.is_positive()
    }

    pub fn add(&self, other: &RealEnclosure) -> RealEnclosure {
        RealEnclosure::new(&self.lo + &other.lo, &self.hi + &other.hi)
    }

    pub fn sub(&self, other: &RealEnclosure) -> RealEnclosure {
        RealEnclosure::new(&self.lo - &other.hi, &self.hi - &other.lo)
    }

    pub fn neg(&self) -> RealEnclosure {
        RealEnclosure::new(-&self.hi, -&self.lo)
    }

    pub fn add_rational(&self, q: &Rational) -> RealEnclosure {
        RealEnclosure::new(&self.lo + q, &self.hi + q)
    }

    pub fn scale(&self, q: &Rational) -> RealEnclosure {
        let a = &self.lo * q;
        let b = &self.hi * q;
        if a <= b {
            RealEnclosure::new(a, b)
        } else {
            RealEnclosure::new(b, a)
        }
    }

    pub fn mul(&self, other: &RealEnclosure) -> RealEnclosure {
        let c = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = c.iter().min().cloned().unwrap();
        let hi = c.iter().max().cloned().unwrap();
        RealEnclosure::new(lo, hi)
    }

    /// Fails when the divisor straddles zero.
    pub fn div(&self, other: &RealEnclosure) -> Result<RealEnclosure> {
        if !other.lo.is_positive() && !other.hi.is_negative() {
            return Err(Error::DomainViolation("division by an enclosure containing 0".into()));
        }
        let inv = RealEnclosure::new(other.hi.recip(), other.lo.recip());
        Ok(self.mul(&inv))
    }

    pub fn min(&self, other: &RealEnclosure) -> RealEnclosure {
        RealEnclosure::new(
            self.lo.clone().min(other.lo.clone()),
            self.hi.clone().min(other.hi.clone()),
        )
    }

    pub fn max(&self, other: &RealEnclosure) -> RealEnclosure {
        RealEnclosure::new(
            self.lo.clone().max(other.lo.clone()),
            self.hi.clone().max(other.hi.clone()),
        )
    }

    /// Snaps both ends outward onto the dyadic grid `2^-p`.
    pub fn round_out(&self, p: u64) -> RealEnclosure {
        RealEnclosure::new(
            from_grid(floor_scaled(&self.lo, p), p),
            from_grid(ceil_scaled(&self.hi, p), p),
        )
    }

    /// `true` when the width is at most `2^-bits`.
    pub fn is_tight(&self, bits: u64) -> bool {
        self.width() <= pow2(-(bits as i64))
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.midpoint())
    }
}

impl fmt::Display for RealEnclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.12}, {:.12}]", to_f64(&self.lo), to_f64(&self.hi))
    }
}

/// Bounds on `atanh(z)` for `0 <= z <= 1/3` on the grid `2^-p`.
fn atanh_grid(z: &Rational, p: u64) -> (BigInt, BigInt) {
    debug_assert!(!z.is_negative() && *z <= rat(1, 3));
    if z.is_zero() {
        return (BigInt::zero(), BigInt::zero());
    }
    let zl = floor_scaled(z, p);
    let zh = ceil_scaled(z, p);
    let z2l = div_floor_pow2(&(&zl * &zl), p);
    let z2h = div_ceil_pow2(&(&zh * &zh), p);
    let mut pow_l = zl;
    let mut pow_h = zh;
    let mut sum_l = BigInt::zero();
    let mut sum_h = BigInt::zero();
    let mut k: u64 = 0;
    loop {
        let d = BigInt::from(2 * k + 1);
        sum_l += pow_l.div_floor(&d);
        sum_h += ceil_div(&pow_h, &d);
        pow_l = div_floor_pow2(&(&pow_l * &z2l), p);
        pow_h = div_ceil_pow2(&(&pow_h * &z2h), p);
        // Remaining terms are bounded by z^(2k+3) / ((2k+3)(1 - z^2)) and 1/(1-z^2) <= 9/8.
        let tail = ceil_div(&(&pow_h * BigInt::from(9)), &BigInt::from(8 * (2 * k + 3)));
        k += 1;
        if tail <= BigInt::from(2) {
            sum_h += tail;
            break;
        }
    }
    (sum_l, sum_h)
}

/// Bounds on `ln 2` on the grid `2^-p`.
fn ln2_grid(p: u64) -> (BigInt, BigInt) {
    let (l, h) = atanh_grid(&rat(1, 3), p);
    (l * 2, h * 2)
}

/// Enclosure of `ln q` of width at most `2^-bits`.
pub fn log_enclosure(q: &Rational, bits: u64) -> Result<RealEnclosure> {
    if !q.is_positive() {
        return Err(Error::NonPositiveArgument);
    }
    if q.is_one() {
        return Ok(RealEnclosure::point(Rational::zero()));
    }
    // q = m * 2^e with 1 <= m < 2
    let mut e = q.numer().bits() as i64 - q.denom().bits() as i64;
    let mut m = q / pow2(e);
    if m < int(1) {
        e -= 1;
        m *= int(2);
    }
    debug_assert!(m >= int(1) && m < int(2));
    let z = (&m - int(1)) / (&m + int(1));
    let ebits = 64 - (e.unsigned_abs() + 1).leading_zeros() as u64;
    let mut guard = 12;
    loop {
        let p = bits + guard + ebits;
        let (ml, mh) = atanh_grid(&z, p);
        let (ml, mh) = (ml * 2, mh * 2);
        let (l2l, l2h) = ln2_grid(p);
        let eb = BigInt::from(e);
        let (lo, hi) = if e >= 0 {
            (&eb * &l2l + ml, &eb * &l2h + mh)
        } else {
            (&eb * &l2h + ml, &eb * &l2l + mh)
        };
        let enc = RealEnclosure::new(from_grid(lo, p), from_grid(hi, p));
        if enc.is_tight(bits) {
            return Ok(enc);
        }
        guard += 8;
    }
}

/// Bounds on `exp(v)` for `0 <= v <= 1/2` on the grid `2^-p`.
fn exp_small_grid(v: &Rational, p: u64) -> (BigInt, BigInt) {
    let one = BigInt::one() << p as usize;
    let vl = floor_scaled(v, p);
    let vh = ceil_scaled(v, p);
    let mut term_l = one.clone();
    let mut term_h = one;
    let mut sum_l = BigInt::zero();
    let mut sum_h = BigInt::zero();
    let mut k: u64 = 0;
    loop {
        sum_l += &term_l;
        sum_h += &term_h;
        k += 1;
        let d = BigInt::from(k);
        term_l = div_floor_pow2(&(&term_l * &vl), p).div_floor(&d);
        term_h = ceil_div(&div_ceil_pow2(&(&term_h * &vh), p), &d);
        // Term ratio is at most 1/2, so the tail is at most twice the next term.
        if term_h <= BigInt::from(1) {
            sum_h += term_h * 2 + 1;
            break;
        }
    }
    (sum_l, sum_h)
}

fn exp_rational_bounds(x: &Rational, bits: u64) -> (Rational, Rational) {
    if x.is_negative() {
        let (l, h) = exp_rational_bounds(&-x, bits + 4);
        return (h.recip(), l.recip());
    }
    // halve until x / 2^r <= 1/2
    let mut r: u64 = 0;
    let mut v = x.clone();
    while v > rat(1, 2) {
        v /= int(2);
        r += 1;
    }
    let magnitude = (crate::arith::to_f64(x) * 1.45).ceil().max(0.0) as u64;
    let p = bits + 2 * r + magnitude + 16;
    let (mut l, mut h) = exp_small_grid(&v, p);
    for _ in 0..r {
        l = div_floor_pow2(&(&l * &l), p);
        h = div_ceil_pow2(&(&h * &h), p);
    }
    (from_grid(l, p), from_grid(h, p))
}

/// Enclosure of `exp(x)` for every `x` in the input enclosure.
pub fn exp_enclosure(x: &RealEnclosure, bits: u64) -> RealEnclosure {
    let mut guard = 8;
    loop {
        let (lo, _) = exp_rational_bounds(&x.lo, bits + guard);
        let (_, hi) = exp_rational_bounds(&x.hi, bits + guard);
        let enc = RealEnclosure::new(lo, hi);
        if enc.is_tight(bits) || guard > 64 {
            return enc;
        }
        guard += 16;
    }
}

/// Sign of a rational as an `Ordering` against zero.
pub fn sign(q: &Rational) -> Ordering {
    match q.numer().sign() {
        Sign::Minus => Ordering::Less,
        Sign::NoSign => Ordering::Equal,
        Sign::Plus => Ordering::Greater,
    }
}
