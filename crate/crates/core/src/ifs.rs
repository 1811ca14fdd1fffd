//! Parameters, the horizontal and vertical iterated function systems, words
//! and their tiles.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{format_rational, int, parse_rational, Rational};
use crate::error::{Error, Result};

/// Default cap on the number of tiles a single enumeration may produce.
pub const DEFAULT_TILE_CAP: u128 = 4_782_969; // 3^14

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AffineMap1D {
    pub slope: Rational,
    pub offset: Rational,
}

impl AffineMap1D {
    pub fn new(slope: Rational, offset: Rational) -> Result<Self> {
        if slope.is_zero() {
            return Err(Error::InvalidParameter("affine map with zero slope".into()));
        }
        Ok(Self { slope, offset })
    }

    pub fn identity() -> Self {
        Self { slope: Rational::one(), offset: Rational::zero() }
    }

    pub fn apply(&self, x: &Rational) -> Rational {
        &self.slope * x + &self.offset
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &AffineMap1D) -> AffineMap1D {
        AffineMap1D {
            slope: &self.slope * &other.slope,
            offset: &self.slope * &other.offset + &self.offset,
        }
    }

    pub fn inverse(&self) -> AffineMap1D {
        let s = self.slope.recip();
        AffineMap1D { offset: -(&self.offset * &s), slope: s }
    }

    pub fn image(&self, iv: &Interval) -> Interval {
        Interval::spanning(self.apply(&iv.lo), self.apply(&iv.hi))
    }

    pub fn unit_image(&self) -> Interval {
        Interval::spanning(self.offset.clone(), &self.slope + &self.offset)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "crate::serde_rational")]
    pub lo: Rational,
    #[serde(with = "crate::serde_rational")]
    pub hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidParameter(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// Interval between two points given in either order.
    pub fn spanning(a: Rational, b: Rational) -> Self {
        if a <= b {
            Self { lo: a, hi: b }
        } else {
            Self { lo: b, hi: a }
        }
    }

    pub fn unit() -> Self {
        Self { lo: Rational::zero(), hi: Rational::one() }
    }

    pub fn point(x: Rational) -> Self {
        Self { lo: x.clone(), hi: x }
    }

    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / int(2)
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// `other ⊆ interior(self)`
    pub fn strictly_contains(&self, other: &Interval) -> bool {
        self.lo < other.lo && other.hi < self.hi
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn interiors_meet(&self, other: &Interval) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }

    pub fn intersection(&self, other: &Interval) -> Option<Interval> {
        let lo = (&self.lo).max(&other.lo).clone();
        let hi = (&self.hi).min(&other.hi).clone();
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: (&self.lo).min(&other.lo).clone(),
            hi: (&self.hi).max(&other.hi).clone(),
        }
    }

    /// `max self < min other`
    pub fn strictly_left_of(&self, other: &Interval) -> bool {
        self.hi < other.lo
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rect {
    pub horizontal: Interval,
    pub vertical: Interval,
}

/// Finite word over `{0,1,2}` (or `{0,1,2,3}` for the four-map system).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn repeat(letter: u8, n: usize) -> Self {
        Word(vec![letter; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn child(&self, letter: u8) -> Word {
        let mut v = self.0.clone();
        v.push(letter);
        Word(v)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn parse_with_alphabet(s: &str, size: u8) -> Result<Word> {
        s.bytes()
            .map(|b| match b.checked_sub(b'0') {
                Some(d) if d < size => Ok(d),
                _ => Err(Error::InvalidWord(format!("{s:?} uses letters outside 0..{size}"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Word)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;
    fn from_str(s: &str) -> Result<Word> {
        Word::parse_with_alphabet(s, 3)
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The pair of points `(x1, y1)`, `(x2, y2)` defining a zipper map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parameter {
    x1: Rational,
    y1: Rational,
    x2: Rational,
    y2: Rational,
    h: [AffineMap1D; 3],
    v: [AffineMap1D; 3],
}

impl Parameter {
    pub fn new(x1: Rational, y1: Rational, x2: Rational, y2: Rational) -> Result<Self> {
        let zero = Rational::zero();
        let one = Rational::one();
        if !(zero < x1 && x1 < x2 && x2 < one) {
            return Err(Error::InvalidParameter(format!("need 0 < x1 < x2 < 1, got x1={x1}, x2={x2}")));
        }
        if !(zero < y2 && y2 < y1 && y1 < one) {
            return Err(Error::InvalidParameter(format!("need 0 < y2 < y1 < 1, got y1={y1}, y2={y2}")));
        }
        let h = [
            AffineMap1D { slope: x1.clone(), offset: zero.clone() },
            AffineMap1D { slope: &x2 - &x1, offset: x1.clone() },
            AffineMap1D { slope: &one - &x2, offset: x2.clone() },
        ];
        let v = [
            AffineMap1D { slope: y1.clone(), offset: zero },
            AffineMap1D { slope: &y2 - &y1, offset: y1.clone() },
            AffineMap1D { slope: &one - &y2, offset: y2.clone() },
        ];
        Ok(Self { x1, y1, x2, y2, h, v })
    }

    /// Parses `"x1,y1,x2,y2"`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Parse(format!("expected four comma-separated rationals, got {s:?}")));
        }
        let q: Vec<Rational> = parts.iter().map(|p| parse_rational(p)).collect::<Result<_>>()?;
        Self::new(q[0].clone(), q[1].clone(), q[2].clone(), q[3].clone())
    }

    pub fn x1(&self) -> &Rational {
        &self.x1
    }
    pub fn y1(&self) -> &Rational {
        &self.y1
    }
    pub fn x2(&self) -> &Rational {
        &self.x2
    }
    pub fn y2(&self) -> &Rational {
        &self.y2
    }

    /// Coordinates in the order `x1, y1, x2, y2`.
    pub fn coords(&self) -> [&Rational; 4] {
        [&self.x1, &self.y1, &self.x2, &self.y2]
    }

    pub fn to_strings(&self) -> [String; 4] {
        self.coords().map(format_rational)
    }

    pub fn h(&self, i: u8) -> &AffineMap1D {
        &self.h[i as usize]
    }

    pub fn v(&self, i: u8) -> &AffineMap1D {
        &self.v[i as usize]
    }

    /// `H_ω = H_{i1} ∘ … ∘ H_{iℓ}`
    pub fn h_word(&self, w: &Word) -> AffineMap1D {
        compose_word(&self.h, w)
    }

    pub fn v_word(&self, w: &Word) -> AffineMap1D {
        compose_word(&self.v, w)
    }

    /// `(I_ω, J_ω)`
    pub fn tile(&self, w: &Word) -> (Interval, Interval) {
        (self.h_word(w).unit_image(), self.v_word(w).unit_image())
    }

    pub fn rect(&self, w: &Word) -> Rect {
        let (horizontal, vertical) = self.tile(w);
        Rect { horizontal, vertical }
    }

    pub fn widths(&self) -> [Rational; 3] {
        [self.h[0].slope.clone(), self.h[1].slope.clone(), self.h[2].slope.clone()]
    }

    pub fn heights(&self) -> [Rational; 3] {
        [self.v[0].slope.abs(), self.v[1].slope.abs(), self.v[2].slope.abs()]
    }

    pub fn derived(&self) -> DerivedQuantities {
        let w = self.widths();
        let ht = self.heights();
        let lambda: Vec<Rational> = (0..3).map(|i| &ht[i] / &w[i]).collect();
        let min = |v: &[Rational]| v.iter().min().unwrap().clone();
        let max = |v: &[Rational]| v.iter().max().unwrap().clone();
        let lambda_min = min(&lambda);
        let one = Rational::one();
        DerivedQuantities {
            lambda0: lambda[0].clone(),
            lambda1: lambda[1].clone(),
            lambda2: lambda[2].clone(),
            lambda_max: max(&lambda),
            h_min: min(&w),
            h_max: max(&w),
            v_min: min(&ht),
            v_max: max(&ht),
            hypersensitive: lambda_min > one,
            symmetric: &self.x1 + &self.x2 == one && &self.y1 + &self.y2 == one,
            in_region_b: &self.y1 * &self.y1 > self.y2
                && self.y1 > (int(2) - &self.y2) * &self.y2,
            lambda_min,
        }
    }

    /// Word of length `depth` whose tile contains `x`; the leftmost one on ties.
    pub fn locate(&self, x: &Rational, depth: usize) -> Result<Word> {
        if x.is_negative() || *x > Rational::one() {
            return Err(Error::DomainViolation(format!("{x} is outside [0,1]")));
        }
        let mut letters = Vec::with_capacity(depth);
        let mut x = x.clone();
        for _ in 0..depth {
            let i = self.letter_of(&x);
            x = self.h(i).inverse().apply(&x);
            letters.push(i);
        }
        Ok(Word(letters))
    }

    pub(crate) fn letter_of(&self, x: &Rational) -> u8 {
        if *x <= self.x1 {
            0
        } else if *x <= self.x2 {
            1
        } else {
            2
        }
    }

    /// All tiles of depth `depth`, left to right.
    pub fn tiling(&self, depth: usize) -> Result<Vec<(Word, Interval)>> {
        self.tiling_with_cap(depth, DEFAULT_TILE_CAP)
    }

    pub fn tiling_with_cap(&self, depth: usize, cap: u128) -> Result<Vec<(Word, Interval)>> {
        check_budget("tiling", depth, cap)?;
        let mut out = Vec::with_capacity(3usize.pow(depth as u32));
        self.walk(depth, &mut |c: &TileCursor| {
            if c.word.len() == depth {
                out.push((c.word.clone(), c.i()));
            }
            true
        });
        Ok(out)
    }

    /// Depth-first walk over all words of length `<= max_depth` in
    /// lexicographic order. The visitor returns `false` to prune a subtree.
    pub fn walk<F: FnMut(&TileCursor) -> bool>(&self, max_depth: usize, visit: &mut F) {
        let root = TileCursor::root();
        self.walk_from(&root, max_depth, visit);
    }

    pub fn walk_from<F: FnMut(&TileCursor) -> bool>(
        &self,
        cursor: &TileCursor,
        max_depth: usize,
        visit: &mut F,
    ) {
        if !visit(cursor) || cursor.word.len() >= max_depth {
            return;
        }
        for i in 0..3 {
            self.walk_from(&cursor.child(self, i), max_depth, visit);
        }
    }
}

pub(crate) fn check_budget(what: &'static str, depth: usize, cap: u128) -> Result<()> {
    let needed = 3u128.checked_pow(depth as u32).unwrap_or(u128::MAX);
    if needed > cap {
        return Err(Error::BudgetExceeded { what, needed, cap });
    }
    Ok(())
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(({}, {}), ({}, {}))", self.x1, self.y1, self.x2, self.y2)
    }
}

impl Serialize for Parameter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Parameter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: [String; 4] = Deserialize::deserialize(d)?;
        Parameter::parse(&v.join(",")).map_err(serde::de::Error::custom)
    }
}

/// Composition over the common denominator `D^ℓ` of the three maps, with a
/// single reduction at the end; reducing after every step dominates the cost
/// for long words.
fn compose_word(maps: &[AffineMap1D; 3], w: &Word) -> AffineMap1D {
    if w.len() < 8 {
        return w.0.iter().fold(AffineMap1D::identity(), |acc, &i| acc.compose(&maps[i as usize]));
    }
    let d = maps.iter().fold(BigInt::one(), |d, m| d.lcm(m.slope.denom()).lcm(m.offset.denom()));
    let scaled = |q: &Rational| q.numer() * (&d / q.denom());
    let nums: Vec<(BigInt, BigInt)> = maps.iter().map(|m| (scaled(&m.slope), scaled(&m.offset))).collect();
    let (mut sn, mut on) = (BigInt::one(), BigInt::zero());
    for &i in &w.0 {
        let (a, b) = &nums[i as usize];
        on = &sn * b + on * &d;
        sn *= a;
    }
    let den = num_traits::pow(d, w.len());
    AffineMap1D { slope: Rational::new(sn, den.clone()), offset: Rational::new(on, den) }
}

/// A word together with its composed maps, for incremental tile walks.
#[derive(Clone, Debug)]
pub struct TileCursor {
    pub word: Word,
    pub h: AffineMap1D,
    pub v: AffineMap1D,
}

impl TileCursor {
    pub fn root() -> Self {
        Self { word: Word::empty(), h: AffineMap1D::identity(), v: AffineMap1D::identity() }
    }

    pub fn at(p: &Parameter, word: &Word) -> Self {
        Self { word: word.clone(), h: p.h_word(word), v: p.v_word(word) }
    }

    pub fn child(&self, p: &Parameter, i: u8) -> Self {
        Self {
            word: self.word.child(i),
            h: self.h.compose(p.h(i)),
            v: self.v.compose(p.v(i)),
        }
    }

    pub fn i(&self) -> Interval {
        self.h.unit_image()
    }

    pub fn j(&self) -> Interval {
        self.v.unit_image()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    #[serde(with = "crate::serde_rational")]
    pub lambda0: Rational,
    #[serde(with = "crate::serde_rational")]
    pub lambda1: Rational,
    #[serde(with = "crate::serde_rational")]
    pub lambda2: Rational,
    #[serde(with = "crate::serde_rational")]
    pub lambda_min: Rational,
    #[serde(with = "crate::serde_rational")]
    pub lambda_max: Rational,
    #[serde(with = "crate::serde_rational")]
    pub h_min: Rational,
    #[serde(with = "crate::serde_rational")]
    pub h_max: Rational,
    #[serde(with = "crate::serde_rational")]
    pub v_min: Rational,
    #[serde(with = "crate::serde_rational")]
    pub v_max: Rational,
    pub hypersensitive: bool,
    pub symmetric: bool,
    pub in_region_b: bool,
}
