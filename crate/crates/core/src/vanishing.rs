//! The coordinate change `h_s` built from the four-piece operator `Ψ^α`,
//! the cover `h^{-1}([kε', (k+1)ε'])` with its size classes, and the
//! complexity of the map in the conjugated metric `|h(x) - h(y)|`.
//!
//! The scales `s_k = 2^{-m_k}` shrink so fast (`m_6` has 26 digits) that
//! tiles are handled as sparse [`Dyadic`] numbers.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{int, log_enclosure, rat, Rational, RealEnclosure};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::ifs::{AffineMap1D, Interval, Parameter, Word};
use crate::mdim::{growth_rate, GrowthEstimate, TransitionGraph};
use crate::pl::PiecewiseLinear;
use crate::regularity::hoelder;
use crate::zipper;

fn psi_maps(alpha: &Rational) -> [(AffineMap1D, AffineMap1D); 4] {
    let a2 = alpha / int(2);
    let b2 = (Rational::one() - alpha) / int(2);
    let half = rat(1, 2);
    let m = |s: &Rational, o: Rational| AffineMap1D { slope: s.clone(), offset: o };
    [
        (m(&a2, Rational::zero()), m(&b2, Rational::zero())),
        (m(&b2, a2.clone()), m(&a2, b2.clone())),
        (m(&a2, half.clone()), m(&b2, half.clone())),
        (m(&b2, (Rational::one() + alpha) / int(2)), m(&a2, Rational::one() - &a2)),
    ]
}

/// `Ψ^α f`: the graph of the result is the union of the images of the graph
/// of `f` under the four planar maps.
pub fn psi_apply(alpha: &Rational, f: &PiecewiseLinear) -> Result<PiecewiseLinear> {
    if !alpha.is_positive() || *alpha >= rat(1, 2) {
        return Err(Error::DomainViolation("α must lie in (0, 1/2)".into()));
    }
    f.check_fixed_space()?;
    let pieces = psi_maps(alpha)
        .into_iter()
        .map(|(h, v)| f.points().iter().map(|(x, y)| (h.apply(x), v.apply(y))).collect::<Vec<_>>());
    PiecewiseLinear::from_pieces(pieces)
}

/// Affine map of the line with dyadic coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadicAffine {
    pub slope: Dyadic,
    pub offset: Dyadic,
}

impl DyadicAffine {
    pub fn identity() -> Self {
        Self { slope: Dyadic::one(), offset: Dyadic::zero() }
    }

    pub fn apply(&self, x: &Dyadic) -> Dyadic {
        &(&self.slope * x) + &self.offset
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &DyadicAffine) -> DyadicAffine {
        DyadicAffine { slope: &self.slope * &other.slope, offset: self.apply(&other.offset) }
    }

    pub fn at0(&self) -> Dyadic {
        self.offset.clone()
    }

    pub fn at1(&self) -> Dyadic {
        &self.slope + &self.offset
    }
}

fn four_maps(alpha: &Dyadic) -> [(DyadicAffine, DyadicAffine); 4] {
    let one = Dyadic::one();
    let a2 = alpha.half();
    let b2 = (&one - alpha).half();
    let half = Dyadic::pow2(-1);
    let m = |s: &Dyadic, o: Dyadic| DyadicAffine { slope: s.clone(), offset: o };
    [
        (m(&a2, Dyadic::zero()), m(&b2, Dyadic::zero())),
        (m(&b2, a2.clone()), m(&a2, b2.clone())),
        (m(&a2, half.clone()), m(&b2, half)),
        (m(&b2, (&one + alpha).half()), m(&a2, &one - &a2)),
    ]
}

/// Exponents as decimal strings: they overflow the integer range of JSON readers.
mod exponent_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &i128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&m.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<i128, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(v: &[i128], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|m| m.to_string()).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<i128>, D::Error> {
            Vec::<String>::deserialize(d)?.iter().map(|m| m.parse().map_err(serde::de::Error::custom)).collect()
        }
    }
}

/// Certification record for one scale `s_k = 2^{-m_k}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub k: usize,
    #[serde(with = "exponent_serde")]
    pub m: i128,
    /// Smallest exponent giving `s_k <= P_k / 2`.
    #[serde(with = "exponent_serde")]
    pub m_gap: i128,
    /// Smallest exponent for which the iterated Hölder bound beats `P_k`.
    #[serde(with = "exponent_serde")]
    pub m_modulus: i128,
    pub gap_ok: bool,
    pub modulus_ok: bool,
}

/// Scales `s_k = 2^{-m_k}`, `k = 1..=K`, with the data certifying them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSpec {
    #[serde(with = "exponent_serde::vec")]
    pub exponents: Vec<i128>,
    pub records: Vec<SequenceRecord>,
    /// Rational lower bound for the Hölder exponent.
    #[serde(with = "crate::serde_rational")]
    pub alpha_lower: Rational,
    /// Rational upper bound for `log2` of the Hölder constant.
    #[serde(with = "crate::serde_rational")]
    pub log2_constant_upper: Rational,
}

impl SequenceSpec {
    /// Bare sequence without a modulus witness.
    pub fn from_exponents(exponents: Vec<i128>) -> Self {
        SequenceSpec { exponents, records: Vec::new(), alpha_lower: Rational::zero(), log2_constant_upper: Rational::zero() }
    }

    /// Smallest exponents with the gap condition, `m_k = k + 11 + Σ_{j<k} m_j`.
    pub fn minimal_gaps(k_max: usize) -> Self {
        let mut acc = 0i128;
        let exps = (1..=k_max as i128)
            .map(|k| {
                let m = k + 11 + acc;
                acc += m;
                m
            })
            .collect();
        Self::from_exponents(exps)
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// `s_k`, with `s_0 = 1`.
    pub fn s(&self, k: usize) -> Dyadic {
        if k == 0 {
            Dyadic::one()
        } else {
            Dyadic::pow2(-self.exponents[k - 1])
        }
    }

    /// `s_n < 2^{-n-10} ∏_{j<n} s_j` for every `n`, an integer comparison of exponents.
    pub fn gaps_hold(&self) -> bool {
        let mut acc: i128 = 0;
        for (i, &m) in self.exponents.iter().enumerate() {
            let bound = (i as i128 + 1) + 10 + acc;
            if m <= bound {
                return false;
            }
            acc += m;
        }
        true
    }

    /// `∏ (1 - s_i) > 1 - 2^{-10}`, through `Σ s_i < 2^{-10}`.
    pub fn product_holds(&self) -> bool {
        let sum = (1..=self.len()).fold(Dyadic::zero(), |a, k| &a + &self.s(k));
        sum < Dyadic::pow2(-10)
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.exponents.first().is_none_or(|&m| m > 1) && self.exponents.windows(2).all(|w| w[0] < w[1])
    }

    pub fn modulus_holds(&self) -> bool {
        self.records.len() == self.len() && self.records.iter().all(|r| r.modulus_ok)
    }
}

fn floor_on_grid(q: &Rational, bits: u64) -> Rational {
    let scale = Rational::from_integer(BigInt::one() << bits as usize);
    (q * &scale).floor() / scale
}

fn ceil_on_grid(q: &Rational, bits: u64) -> Rational {
    let scale = Rational::from_integer(BigInt::one() << bits as usize);
    (q * &scale).ceil() / scale
}

/// Picks `s_1 > s_2 > … > s_K` as powers of two satisfying the gap condition
/// and the Hölder surrogate
/// `C^{(1-α^k)/(1-α)} s_k^{α^k} < P_k`, where `α` is a certified lower bound
/// of the Hölder exponent and `C = (x2 - x1)^{-ᾱ}` uses its upper bound.
pub fn choose_sequence(p: &Parameter, k_max: usize, bits: u64) -> Result<SequenceSpec> {
    if !p.derived().hypersensitive {
        return Err(Error::Precondition("the Hölder witness needs a hypersensitive parameter".into()));
    }
    let (alpha, _) = hoelder(p, bits)?;
    let a_lo = floor_on_grid(&alpha.lo, bits);
    let a_hi = ceil_on_grid(&alpha.hi, bits);
    if !a_lo.is_positive() {
        return Err(Error::PrecisionInsufficient("Hölder exponent not bounded away from 0".into()));
    }
    let w = p.x2() - p.x1();
    let ln_inv_w = log_enclosure(&(Rational::one() / w), bits)?;
    let ln2 = log_enclosure(&int(2), bits)?;
    let log2_c = ceil_on_grid(&(&a_hi * &ln_inv_w.hi / &ln2.lo), bits);
    let mut exponents = Vec::with_capacity(k_max);
    let mut records = Vec::with_capacity(k_max);
    let mut acc: i128 = 0;
    let mut a_pow = Rational::one();
    for k in 1..=k_max {
        a_pow *= &a_lo;
        let big_m = k as i128 + 10 + acc;
        let m_gap = big_m + 1;
        let c_k = (Rational::one() - &a_pow) / (Rational::one() - &a_lo);
        let need = (&c_k * &log2_c + Rational::from_integer(big_m.into())) / &a_pow;
        let m_modulus = (need.floor().to_integer() + BigInt::one())
            .to_i128()
            .ok_or_else(|| Error::Overflow(format!("scale exponent m_{k} exceeds i128")))?;
        let m = m_gap.max(m_modulus);
        // log2 of C_k s_k^{α^k} is at most c_k log2 C - α^k m; compare with log2 P_k = -M_k
        let lhs = &c_k * &log2_c - &a_pow * Rational::from_integer(m.into());
        let modulus_ok = lhs < Rational::from_integer((-big_m).into());
        records.push(SequenceRecord { k, m, m_gap, m_modulus, gap_ok: m > big_m, modulus_ok });
        exponents.push(m);
        acc = acc
            .checked_add(m)
            .ok_or_else(|| Error::Overflow(format!("exponent sum through m_{k} exceeds i128")))?;
    }
    Ok(SequenceSpec { exponents, records, alpha_lower: a_lo, log2_constant_upper: log2_c })
}

/// Piecewise-linear curve with dyadic breakpoints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicCurve {
    pub points: Vec<(Dyadic, Dyadic)>,
}

impl DyadicCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1)
    }

    /// Whether every breakpoint of `other` lies within `bound` of `self`
    /// (vertically), tested without division.
    pub fn within(&self, other: &DyadicCurve, bound: &Dyadic) -> bool {
        let mut seg = 0;
        for (x, y) in &other.points {
            while seg + 2 < self.points.len() && self.points[seg + 1].0 < *x {
                seg += 1;
            }
            let (xa, ya) = &self.points[seg];
            let (xb, yb) = &self.points[seg + 1];
            let dx = xb - xa;
            let lhs = (&(&(y - ya) * &dx) - &(&(x - xa) * &(yb - ya))).abs();
            if lhs > bound * &dx {
                return false;
            }
        }
        true
    }
}

const HOMEO_CAP: u128 = 1 << 16;

fn cursor_children(s: &SequenceSpec, level: usize, h: &DyadicAffine, v: &DyadicAffine) -> Vec<(DyadicAffine, DyadicAffine)> {
    four_maps(&s.s(level + 1)).iter().map(|(hi, vi)| (h.compose(hi), v.compose(vi))).collect()
}

/// `h^n = Ψ^{s_1} ∘ … ∘ Ψ^{s_n}(Id)` and `∏ (1 - s_j)/2`, which bounds
/// `sup |h^n - h_s|`.
pub fn build_homeo(s: &SequenceSpec, n: usize) -> Result<(DyadicCurve, Dyadic)> {
    if n > s.len() {
        return Err(Error::DepthExceedsSequence { depth: n, len: s.len() });
    }
    let needed = 4u128.pow(n as u32);
    if needed > HOMEO_CAP {
        return Err(Error::BudgetExceeded { what: "homeomorphism breakpoints", needed, cap: HOMEO_CAP });
    }
    let mut points = Vec::with_capacity(needed as usize + 1);
    let mut stack = vec![(0usize, DyadicAffine::identity(), DyadicAffine::identity())];
    while let Some((level, h, v)) = stack.pop() {
        if level == n {
            points.push((h.at0(), v.at0()));
            continue;
        }
        for (ch, cv) in cursor_children(s, level, &h, &v).into_iter().rev() {
            stack.push((level + 1, ch, cv));
        }
    }
    points.push((Dyadic::one(), Dyadic::one()));
    let err = (1..=n).fold(Dyadic::one(), |acc, j| (&acc * &(&Dyadic::one() - &s.s(j))).half());
    Ok((DyadicCurve { points }, err))
}

/// `sup |h^{n+1} - h^n| <= 2^{-n}` at the breakpoints of `h^{n+1}`.
pub fn successive_gap_holds(s: &SequenceSpec, n: usize) -> Result<bool> {
    let (a, _) = build_homeo(s, n)?;
    let (b, _) = build_homeo(s, n + 1)?;
    Ok(a.within(&b, &Dyadic::pow2(-(n as i128))))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourTile {
    pub word: Word,
    pub i: (Dyadic, Dyadic),
    pub j: (Dyadic, Dyadic),
    /// Last letter even: a thin, tall rectangle.
    pub vertical: bool,
    /// `2^{p+9}|I| <= |J|` for vertical tiles, `|I| > 2^{p+9}|J|` for horizontal ones.
    pub aspect_ok: bool,
}

impl FourTile {
    pub fn width(&self) -> Dyadic {
        &self.i.1 - &self.i.0
    }

    pub fn height(&self) -> Dyadic {
        &self.j.1 - &self.j.0
    }
}

fn make_tile(word: Word, h: &DyadicAffine, v: &DyadicAffine) -> FourTile {
    let i = (h.at0(), h.at1());
    let j = (v.at0(), v.at1());
    let p = word.len() as i128;
    let w = &i.1 - &i.0;
    let ht = &j.1 - &j.0;
    let vertical = word.letters().last().is_some_and(|l| l % 2 == 0);
    let aspect_ok = if vertical { w.shift(p + 9) <= ht } else { w > ht.shift(p + 9) };
    FourTile { word, i, j, vertical, aspect_ok }
}

pub fn four_tile(s: &SequenceSpec, w: &Word) -> Result<FourTile> {
    if w.is_empty() {
        return Err(Error::InvalidWord("a tile word needs at least one letter".into()));
    }
    if w.len() > s.len() {
        return Err(Error::DepthExceedsSequence { depth: w.len(), len: s.len() });
    }
    if w.letters().iter().any(|&l| l > 3) {
        return Err(Error::InvalidWord(format!("{w} is not over {{0,1,2,3}}")));
    }
    let (mut h, mut v) = (DyadicAffine::identity(), DyadicAffine::identity());
    for (level, &l) in w.letters().iter().enumerate() {
        let (hi, vi) = &four_maps(&s.s(level + 1))[l as usize];
        h = h.compose(hi);
        v = v.compose(vi);
    }
    Ok(make_tile(w.clone(), &h, &v))
}

/// All tiles of depth `p`, left to right.
pub fn four_tiles(s: &SequenceSpec, p: usize) -> Result<Vec<FourTile>> {
    if p > s.len() {
        return Err(Error::DepthExceedsSequence { depth: p, len: s.len() });
    }
    let needed = 4u128.pow(p as u32);
    if needed > HOMEO_CAP {
        return Err(Error::BudgetExceeded { what: "four-letter tiles", needed, cap: HOMEO_CAP });
    }
    let mut out = Vec::with_capacity(needed as usize);
    let mut stack = vec![(Word::empty(), DyadicAffine::identity(), DyadicAffine::identity())];
    while let Some((w, h, v)) = stack.pop() {
        if w.len() == p {
            out.push(make_tile(w, &h, &v));
            continue;
        }
        for (l, (ch, cv)) in cursor_children(s, w.len(), &h, &v).into_iter().enumerate().rev() {
            stack.push((w.child(l as u8), ch, cv));
        }
    }
    Ok(out)
}

/// Enclosure `[lo, hi] ∋ h^{-1}(y)` read off the tile whose `J` holds `y`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreimageBracket {
    pub lo: Dyadic,
    pub hi: Dyadic,
    pub word: Word,
}

impl PreimageBracket {
    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }
}

/// Brackets `h^{-1}(y)` by descending to depth `depth`; `h` maps every `I_ω`
/// onto `J_ω` increasingly, so tile endpoints are matched exactly.
pub fn preimage_bracket(s: &SequenceSpec, y: &Rational, depth: usize) -> Result<PreimageBracket> {
    if depth > s.len() {
        return Err(Error::DepthExceedsSequence { depth, len: s.len() });
    }
    if *y < Rational::zero() || *y > Rational::one() {
        return Err(Error::DomainViolation(format!("{y} is outside [0,1]")));
    }
    let (mut h, mut v) = (DyadicAffine::identity(), DyadicAffine::identity());
    let mut word = Word::empty();
    for level in 0..=depth {
        for (end_v, end_h) in [(v.at0(), h.at0()), (v.at1(), h.at1())] {
            if end_v.cmp_rational(y) == Ordering::Equal {
                return Ok(PreimageBracket { lo: end_h.clone(), hi: end_h, word });
            }
        }
        if level == depth {
            break;
        }
        let children = cursor_children(s, level, &h, &v);
        // the J's of the children tile J left to right
        let l = (0..4).find(|&l| children[l].1.at1().cmp_rational(y) == Ordering::Greater).unwrap_or(3);
        let (ch, cv) = children.into_iter().nth(l).expect("four children");
        h = ch;
        v = cv;
        word = word.child(l as u8);
    }
    Ok(PreimageBracket { lo: h.at0(), hi: h.at1(), word })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverElement {
    /// `h(I) = [index·ε', (index+1)·ε']`.
    pub index: usize,
    pub left: PreimageBracket,
    pub right: PreimageBracket,
    /// `s_class <= |I| < s_{class-1}`.
    pub class: usize,
}

impl CoverElement {
    /// Interval certainly containing the element.
    pub fn outer(&self) -> (Dyadic, Dyadic) {
        (self.left.lo.clone(), self.right.hi.clone())
    }

    pub fn length_bounds(&self) -> (Dyadic, Dyadic) {
        let inner = &self.right.lo - &self.left.hi;
        let inner = if inner.is_negative() { Dyadic::zero() } else { inner };
        (inner, &self.right.hi - &self.left.lo)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardRow {
    pub k: usize,
    pub count: usize,
    pub bound: u128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverClassification {
    #[serde(with = "crate::serde_rational")]
    pub epsilon: Rational,
    #[serde(with = "crate::serde_rational")]
    pub epsilon_prime: Rational,
    pub p0: usize,
    pub k_eps: usize,
    pub depth: usize,
    pub elements: Vec<CoverElement>,
    /// At most three depth-`m` tiles meet an element shorter than `s_m`.
    pub horizontal_ok: bool,
    /// `Card L(k) <= 4^max(k, p0)`.
    pub card_rows: Vec<CardRow>,
    /// Every class is at most `K_ε`.
    pub depth_ok: bool,
}

impl CoverClassification {
    pub fn card_ok(&self) -> bool {
        self.card_rows.iter().all(|r| r.count as u128 <= r.bound)
    }

    pub fn all_ok(&self) -> bool {
        self.horizontal_ok && self.card_ok() && self.depth_ok
    }

    pub fn max_class(&self) -> usize {
        self.elements.iter().map(|e| e.class).max().unwrap_or(0)
    }

    /// Upper bound on the number of elements of class at most `level`
    /// meeting the closed interval `i0`.
    pub fn transversal_count(&self, i0: &(Dyadic, Dyadic), level: usize) -> usize {
        self.elements
            .iter()
            .filter(|e| e.class <= level)
            .filter(|e| {
                let (a, b) = e.outer();
                a <= i0.1 && i0.0 <= b
            })
            .count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("class_k,count,bound_4^max(k,p0)\n");
        for r in &self.card_rows {
            s.push_str(&format!("{},{},{}\n", r.k, r.count, r.bound));
        }
        s
    }
}

/// `⌈log2(1/ε)⌉ + 2`.
pub fn k_epsilon(eps: &Rational) -> usize {
    let inv = Rational::one() / eps;
    let mut k = 0usize;
    while Rational::from_integer(BigInt::one() << k) < inv {
        k += 1;
    }
    k + 2
}

/// `1/(⌊1/ε⌋ + 1)`.
pub fn epsilon_prime(eps: &Rational) -> Rational {
    Rational::one() / ((Rational::one() / eps).floor() + Rational::one())
}

fn size_class(s: &SequenceSpec, lo: &Dyadic, hi: &Dyadic) -> Option<usize> {
    (1..=s.len()).find(|&k| s.s(k) <= *lo && *hi < s.s(k - 1))
}

fn tiles_meeting(s: &SequenceSpec, iv: &(Dyadic, Dyadic), m: usize) -> usize {
    let mut count = 0;
    let mut stack = vec![(0usize, DyadicAffine::identity(), DyadicAffine::identity())];
    while let Some((level, h, v)) = stack.pop() {
        if h.at1() < iv.0 || iv.1 < h.at0() {
            continue;
        }
        if level == m {
            count += 1;
            continue;
        }
        for (ch, cv) in cursor_children(s, level, &h, &v) {
            stack.push((level + 1, ch, cv));
        }
    }
    count
}

pub fn cover_and_classify(s: &SequenceSpec, eps: &Rational, depth: usize) -> Result<CoverClassification> {
    if !eps.is_positive() || *eps >= Rational::one() {
        return Err(Error::DomainViolation("ε must lie in (0, 1)".into()));
    }
    if depth > s.len() {
        return Err(Error::DepthExceedsSequence { depth, len: s.len() });
    }
    let ep = epsilon_prime(eps);
    let count = (Rational::one() / &ep).to_integer().to_usize().expect("1/ε' is small");
    let p0 = (1..=s.len())
        .find(|&k| s.s(k).cmp_rational(&ep) != Ordering::Greater)
        .ok_or_else(|| Error::DepthInsufficient("ε' is below every scale of the sequence".into()))?;
    let k_eps = k_epsilon(eps);
    let ends: Vec<PreimageBracket> = (0..=count)
        .map(|k| preimage_bracket(s, &(Rational::from_integer(k.into()) * &ep), depth))
        .collect::<Result<_>>()?;
    let mut elements = Vec::with_capacity(count);
    for k in 0..count {
        let mut e = CoverElement { index: k, left: ends[k].clone(), right: ends[k + 1].clone(), class: 0 };
        let (lo, hi) = e.length_bounds();
        e.class = size_class(s, &lo, &hi).ok_or_else(|| {
            Error::DepthInsufficient(format!("size class of element {k} undecided at depth {depth}"))
        })?;
        elements.push(e);
    }
    let mut horizontal_ok = true;
    for e in &elements {
        let (_, hi) = e.length_bounds();
        for m in 1..=depth {
            if hi < s.s(m) && tiles_meeting(s, &e.outer(), m) > 3 {
                horizontal_ok = false;
            }
        }
    }
    let top = k_eps.max(elements.iter().map(|e| e.class).max().unwrap_or(1));
    let card_rows = (1..=top)
        .map(|k| CardRow {
            k,
            count: elements.iter().filter(|e| e.class <= k).count(),
            bound: 4u128.saturating_pow(k.max(p0) as u32),
        })
        .collect();
    let depth_ok = elements.iter().all(|e| e.class <= k_eps);
    Ok(CoverClassification { epsilon: eps.clone(), epsilon_prime: ep, p0, k_eps, depth, elements, horizontal_ok, card_rows, depth_ok })
}

/// Grid for the rational hulls of cover elements passed to the image routine.
pub const BRACKET_BITS: u32 = 256;
const RATE_IMAGE_CAP: u128 = 4_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjugatedRate {
    pub cover: CoverClassification,
    pub graph: TransitionGraph,
    pub estimate: GrowthEstimate,
    /// Upper growth rate over `ln(1/ε)`; its upper end is the certified bound.
    pub ratio: RealEnclosure,
    /// Every vertex label lies in `1..=K_ε`.
    pub labels_ok: bool,
}

/// Upper bound on the growth of `(n, ε)`-covers in the metric `|h(x) - h(y)|`:
/// paths in the graph on the cover with an edge `I → I'` whenever the outer
/// image of `I` meets `I'`. A `depth` of 0 uses the complete graph.
pub fn conjugated_rate(p: &Parameter, s: &SequenceSpec, eps: &Rational, n_max: usize, depth: usize) -> Result<ConjugatedRate> {
    let cover = cover_and_classify(s, eps, s.len())?;
    let hulls: Vec<Interval> = cover
        .elements
        .iter()
        .map(|e| {
            let (a, b) = e.outer();
            Interval::spanning(a.rational_bracket(BRACKET_BITS).0, b.rational_bracket(BRACKET_BITS).1)
        })
        .collect();
    let n = hulls.len();
    let adjacency: Vec<Vec<usize>> = if depth == 0 {
        vec![(0..n).collect(); n]
    } else {
        let mut adj = Vec::with_capacity(n);
        for a in &hulls {
            // split partial tiles until they are shorter than |A|·2^-depth
            let limit = a.length() / Rational::from_integer(BigInt::one() << depth);
            let img = zipper::image_refined(p, a, RATE_IMAGE_CAP, &mut |c| c.i().length() > limit)?;
            adj.push((0..n).filter(|&l| img.outer.intersects(&hulls[l])).collect());
        }
        adj
    };
    let mut graph = TransitionGraph::from_adjacency(adjacency);
    graph.cells = hulls.clone();
    graph.cores = hulls;
    graph.epsilon = eps.clone();
    graph.depth = depth;
    let estimate = growth_rate(&graph, n_max)?;
    let ln_inv = log_enclosure(&(Rational::one() / eps), 40)?;
    let ratio = RealEnclosure::point(estimate.upper.hi.clone()).div(&ln_inv)?;
    let labels_ok = cover.elements.iter().all(|e| (1..=cover.k_eps).contains(&e.class));
    Ok(ConjugatedRate { cover, graph, estimate, ratio, labels_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::tests::p_a;

    fn w4(s: &str) -> Word {
        Word::parse_with_alphabet(s, 4).unwrap()
    }

    fn small_seq() -> SequenceSpec {
        SequenceSpec::from_exponents(vec![12, 30, 60])
    }

    #[test]
    fn psi_of_identity() {
        let f = psi_apply(&rat(1, 4), &PiecewiseLinear::identity()).unwrap();
        let expect = [(0, 1, 0, 1), (1, 8, 3, 8), (1, 2, 1, 2), (5, 8, 7, 8), (1, 1, 1, 1)];
        let pts: Vec<(Rational, Rational)> = expect.iter().map(|&(a, b, c, d)| (rat(a, b), rat(c, d))).collect();
        assert_eq!(f.points(), pts.as_slice());
        let a = rat(1, 10);
        let g = psi_apply(&a, &PiecewiseLinear::identity()).unwrap();
        let slopes: Vec<Rational> =
            g.points().windows(2).map(|w| (&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0)).collect();
        let steep = (Rational::one() - &a) / &a;
        assert_eq!(slopes, vec![steep.clone(), steep.recip(), steep.clone(), steep.recip()]);
        assert!(psi_apply(&rat(1, 2), &PiecewiseLinear::identity()).is_err());
    }

    #[test]
    fn dyadic_homeo_matches_rational_operator() {
        let s = SequenceSpec::from_exponents(vec![3, 5]);
        let (h, err) = build_homeo(&s, 2).unwrap();
        let f = psi_apply(&rat(1, 32), &PiecewiseLinear::identity()).unwrap();
        let f = psi_apply(&rat(1, 8), &f).unwrap();
        assert_eq!(h.len(), f.len());
        for ((x, y), (a, b)) in h.points.iter().zip(f.points()) {
            assert_eq!(x.cmp_rational(a), Ordering::Equal);
            assert_eq!(y.cmp_rational(b), Ordering::Equal);
        }
        assert_eq!(err.cmp_rational(&(rat(7, 16) * rat(31, 64))), Ordering::Equal);
    }

    #[test]
    fn homeo_examples() {
        let s = small_seq();
        let (h0, e0) = build_homeo(&s, 0).unwrap();
        assert_eq!(h0.points, vec![(Dyadic::zero(), Dyadic::zero()), (Dyadic::one(), Dyadic::one())]);
        assert_eq!(e0, Dyadic::one());
        let (h1, _) = build_homeo(&s, 1).unwrap();
        assert_eq!(h1.len(), 5);
        let s1 = s.s(1);
        assert_eq!(h1.points[1], (s1.half(), (&Dyadic::one() - &s1).half()));
        for n in 0..=3 {
            assert!(build_homeo(&s, n).unwrap().0.is_strictly_increasing());
        }
        for n in 0..=2 {
            assert!(successive_gap_holds(&s, n).unwrap());
        }
        assert!(matches!(build_homeo(&s, 4), Err(Error::DepthExceedsSequence { .. })));
    }

    #[test]
    fn tiles_and_aspect() {
        let s = small_seq();
        let t = four_tile(&s, &w4("0")).unwrap();
        assert_eq!(t.i, (Dyadic::zero(), s.s(1).half()));
        assert_eq!(t.j, (Dyadic::zero(), (&Dyadic::one() - &s.s(1)).half()));
        assert!(t.vertical && t.aspect_ok);
        let t = four_tile(&s, &w4("1")).unwrap();
        assert!(!t.vertical && t.aspect_ok);
        assert_eq!(t.width(), (&Dyadic::one() - &s.s(1)).half());
        assert_eq!(t.height(), s.s(1).half());
        for p in 1..=3 {
            let tiles = four_tiles(&s, p).unwrap();
            let area = (1..=p).fold(Dyadic::pow2(-2 * p as i128), |a, j| &a * &(&s.s(j) * &(&Dyadic::one() - &s.s(j))));
            for (n, t) in tiles.iter().enumerate() {
                assert_eq!(&t.width() * &t.height(), area);
                assert!(t.aspect_ok, "{}", t.word);
                assert_eq!(t.vertical, n % 2 == 0);
            }
            // the chain: consecutive rectangles share a corner
            for w in tiles.windows(2) {
                assert_eq!(w[0].i.1, w[1].i.0);
                assert_eq!(w[0].j.1, w[1].j.0);
            }
        }
        assert!(four_tile(&s, &w4("0000")).is_err());
    }

    #[test]
    fn sequence_for_the_figure_parameter() {
        let p = p_a();
        let one = choose_sequence(&p, 1, 60).unwrap();
        assert!(one.s(1) <= Dyadic::pow2(-12));
        assert_eq!(one.records[0].m_gap, 12);
        let three = choose_sequence(&p, 3, 60).unwrap();
        assert!(three.strictly_decreasing() && three.gaps_hold() && three.product_holds() && three.modulus_holds());
        let empty = choose_sequence(&p, 0, 60).unwrap();
        assert!(empty.is_empty() && empty.gaps_hold());
        let six = choose_sequence(&p, 6, 60).unwrap();
        assert!(six.modulus_holds() && six.gaps_hold());
        assert!(six.exponents[5] > 10i128.pow(25));
    }

    #[test]
    fn gap_check_is_strict() {
        assert!(SequenceSpec::from_exponents(vec![12, 25]).gaps_hold());
        assert!(!SequenceSpec::from_exponents(vec![11]).gaps_hold());
        assert!(!SequenceSpec::from_exponents(vec![12, 23]).gaps_hold());
    }

    #[test]
    fn preimages_of_tile_corners_are_exact() {
        let s = small_seq();
        let (h, _) = build_homeo(&s, 2).unwrap();
        for (x, y) in h.points.iter().step_by(3) {
            let yq = y.to_rational(200).unwrap();
            let b = preimage_bracket(&s, &yq, 3).unwrap();
            assert!(b.is_exact());
            assert_eq!(&b.lo, x);
        }
        let b = preimage_bracket(&s, &rat(1, 3), 3).unwrap();
        assert!(b.lo < b.hi);
    }

    #[test]
    fn cover_small_cases() {
        let s = small_seq();
        let c = cover_and_classify(&s, &rat(1, 2), 3).unwrap();
        assert_eq!(c.epsilon_prime, rat(1, 3));
        assert_eq!(c.elements.len(), 3);
        assert_eq!(k_epsilon(&rat(1, 100)), 9);
        assert_eq!(k_epsilon(&rat(1, 2)), 3);
        assert_eq!(epsilon_prime(&rat(1, 40)), rat(1, 41));
        assert_eq!(SequenceSpec::minimal_gaps(3).exponents, vec![12, 25, 51]);
        let s = SequenceSpec::minimal_gaps(8);
        assert!(s.gaps_hold() && s.product_holds());
        let c = cover_and_classify(&s, &rat(1, 40), 8).unwrap();
        assert!(c.all_ok(), "{c:?}");
        assert_eq!(c.card_rows.last().unwrap().count, 41);
    }

    #[test]
    fn complete_graph_fallback() {
        let s = SequenceSpec::minimal_gaps(6);
        let r = conjugated_rate(&p_a(), &s, &rat(1, 4), 4, 0).unwrap();
        let n = r.cover.elements.len();
        assert_eq!(r.graph.edge_count(), n * n);
        let ln_n = log_enclosure(&Rational::from_integer(n.into()), 40).unwrap();
        assert!(r.estimate.upper.intersects(&ln_n));
    }
}
