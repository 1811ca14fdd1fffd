//! Horseshoes: families of tiles `I_{ω_1}, …, I_{ω_k}` with disjoint
//! interiors whose images `J_{ω_i}` all contain every `I_{ω_j}`.
//!
//! Every search below is only a way of proposing words; [`verify`] is the
//! single exact check that decides whether a certificate holds.

use std::collections::VecDeque;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{int, pow2, rat, Rational};
use crate::error::{Error, Result};
use crate::ifs::{AffineMap1D, Interval, Parameter, TileCursor, Word};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorseshoeCertificate {
    #[serde(rename = "p")]
    pub parameter: Parameter,
    pub words: Vec<Word>,
    pub order: usize,
}

impl HorseshoeCertificate {
    pub fn new(parameter: Parameter, words: Vec<Word>) -> Self {
        let order = words.len();
        Self { parameter, words, order }
    }

    /// Tiles `I_ω` of the words, in the stored order.
    pub fn intervals(&self) -> Vec<Interval> {
        self.words.iter().map(|w| self.parameter.tile(w).0).collect()
    }

    /// The same words sorted left to right.
    pub fn sorted(&self) -> HorseshoeCertificate {
        let mut words = self.words.clone();
        words.sort();
        HorseshoeCertificate::new(self.parameter.clone(), words)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OrderMismatch { declared: usize, actual: usize },
    Prefix { i: usize, j: usize },
    Containment { i: usize, j: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OrderMismatch { declared, actual } => {
                write!(f, "declared order {declared} but {actual} words")
            }
            Violation::Prefix { i, j } => write!(f, "word {i} is a prefix of word {j}"),
            Violation::Containment { i, j } => write!(f, "J of word {i} does not contain I of word {j}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Exact check of both certificate conditions: no word is a prefix of another,
/// and `J_{ω_i} ⊇ I_{ω_j}` for all `i, j`.
pub fn verify(cert: &HorseshoeCertificate) -> Verification {
    let mut violations = Vec::new();
    if cert.order != cert.words.len() {
        violations.push(Violation::OrderMismatch { declared: cert.order, actual: cert.words.len() });
    }
    let words = &cert.words;
    for i in 0..words.len() {
        for j in 0..words.len() {
            if i != j && words[i].is_prefix_of(&words[j]) {
                violations.push(Violation::Prefix { i, j });
            }
        }
    }
    let tiles: Vec<(Interval, Interval)> = words.iter().map(|w| cert.parameter.tile(w)).collect();
    for (i, (_, ji)) in tiles.iter().enumerate() {
        for (j, (ij, _)) in tiles.iter().enumerate() {
            if !ji.contains_interval(ij) {
                violations.push(Violation::Containment { i, j });
            }
        }
    }
    Verification { ok: violations.is_empty(), violations }
}

/// Horseshoe around the fixed point `1/2` of a symmetric parameter, from the
/// words `1^(n+ℓ) i` with even `ℓ <= k` and `i ∈ {0, 2}`.
pub fn symmetric_search(p: &Parameter, k: usize) -> Result<HorseshoeCertificate> {
    let d = p.derived();
    if !(d.symmetric && d.hypersensitive) {
        return Err(Error::Precondition("symmetric search needs a symmetric hypersensitive parameter".into()));
    }
    let (x1, y1, x2, y2) = (p.x1(), p.y1(), p.x2(), p.y2());
    let half = rat(1, 2);
    let ratio = (x2 - x1) / (y1 - y2);
    // η must lie strictly between ½·ratio^n and (½ - y2)(y1 - y2)^k
    let upper = (&half - y2) * num_traits::pow(y1 - y2, k);
    let mut n = 0usize;
    let mut lower = half.clone();
    while lower >= upper {
        n += 1;
        lower = &half * num_traits::pow(ratio.clone(), n);
        if n > 4096 {
            return Err(Error::NotFound("no admissible zoom depth".into()));
        }
    }
    let _eta = (&lower + &upper) / int(2);
    let mut words = Vec::new();
    for l in (0..=k).step_by(2) {
        for i in [0u8, 2] {
            words.push(Word::repeat(1, n + l).child(i));
        }
    }
    let cert = HorseshoeCertificate::new(p.clone(), words);
    check_found(cert)
}

/// Zoom depth `n` used by [`symmetric_search`] for order `k`.
pub fn symmetric_zoom_depth(p: &Parameter, k: usize) -> usize {
    let half = rat(1, 2);
    let ratio = (p.x2() - p.x1()) / (p.y1() - p.y2());
    let upper = (&half - p.y2()) * num_traits::pow(p.y1() - p.y2(), k);
    let mut n = 0;
    while &half * num_traits::pow(ratio.clone(), n) >= upper {
        n += 1;
    }
    n
}

fn check_found(cert: HorseshoeCertificate) -> Result<HorseshoeCertificate> {
    let v = verify(&cert);
    if v.ok {
        Ok(cert)
    } else {
        Err(Error::NotFound(format!("candidate failed verification: {}", v.violations[0])))
    }
}

/// Count step of a coverage profile: the count exactly at `y` and on the
/// open gap up to the next step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileStep {
    #[serde(with = "crate::serde_rational")]
    pub y: Rational,
    pub at: usize,
    pub after: usize,
}

/// Number of `σ ∈ {0,2}^n` with `[y-η, y+η] ⊆ V_σ([0,1])`, as a function of `y`.
/// The count is 0 before the first step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageProfile {
    pub n: usize,
    #[serde(with = "crate::serde_rational")]
    pub eta: Rational,
    pub steps: Vec<ProfileStep>,
}

impl CoverageProfile {
    pub fn count_at(&self, y: &Rational) -> usize {
        let k = self.steps.partition_point(|s| &s.y <= y);
        if k == 0 {
            return 0;
        }
        let s = &self.steps[k - 1];
        if &s.y == y {
            s.at
        } else {
            s.after
        }
    }

    /// Smallest count on the closed interval `[lo, hi]`.
    pub fn min_on(&self, lo: &Rational, hi: &Rational) -> usize {
        let mut m = self.count_at(lo);
        for s in self.steps.iter().filter(|s| &s.y > lo && &s.y <= hi) {
            m = m.min(s.at);
            if &s.y < hi {
                m = m.min(s.after);
            }
        }
        m
    }

    /// Integral of the count over the real line.
    pub fn mass(&self) -> Rational {
        self.steps
            .windows(2)
            .map(|w| Rational::from_integer(w[0].after.into()) * (&w[1].y - &w[0].y))
            .fold(Rational::zero(), |a, b| a + b)
    }

    /// `(y, count)` pairs: the count on `[y, next y)`.
    pub fn breakpoints(&self) -> Vec<(Rational, usize)> {
        self.steps.iter().map(|s| (s.y.clone(), s.after)).collect()
    }
}

const COVER_ENUM_CAP: u128 = 1 << 22;

/// Images `V_σ([0,1])` for all `σ ∈ {0,2}^n`, with the words.
pub fn two_map_images(p: &Parameter, n: usize) -> Result<Vec<(Word, Interval)>> {
    let needed = 1u128.checked_shl(n as u32).unwrap_or(u128::MAX);
    if needed > COVER_ENUM_CAP {
        return Err(Error::BudgetExceeded { what: "two-map words", needed, cap: COVER_ENUM_CAP });
    }
    let mut out = Vec::with_capacity(needed as usize);
    let mut stack = vec![(Word::empty(), AffineMap1D::identity())];
    while let Some((w, m)) = stack.pop() {
        if w.len() == n {
            out.push((w, m.unit_image()));
            continue;
        }
        for i in [2u8, 0] {
            stack.push((w.child(i), m.compose(p.v(i))));
        }
    }
    Ok(out)
}

pub fn coverage_count(p: &Parameter, n: usize, eta: &Rational) -> Result<CoverageProfile> {
    if !eta.is_positive() {
        return Err(Error::DomainViolation("η must be positive".into()));
    }
    let images = two_map_images(p, n)?;
    Ok(profile_from_images(&images, n, eta))
}

fn profile_from_images(images: &[(Word, Interval)], n: usize, eta: &Rational) -> CoverageProfile {
    let mut starts: Vec<Rational> = Vec::new();
    let mut ends: Vec<Rational> = Vec::new();
    for (_, iv) in images {
        let a = &iv.lo + eta;
        let b = &iv.hi - eta;
        if a <= b {
            starts.push(a);
            ends.push(b);
        }
    }
    starts.sort();
    ends.sort();
    let mut ys: Vec<Rational> = starts.iter().chain(ends.iter()).cloned().collect();
    ys.sort();
    ys.dedup();
    let steps = ys
        .into_iter()
        .map(|y| {
            let opened = starts.partition_point(|a| a <= &y);
            let closed_before = ends.partition_point(|b| b < &y);
            let closed_through = ends.partition_point(|b| b <= &y);
            ProfileStep { at: opened - closed_before, after: opened - closed_through, y }
        })
        .collect();
    CoverageProfile { n, eta: eta.clone(), steps }
}

/// Largest `n` tried by [`cover_params`].
pub const MAX_COVER_DEPTH: usize = 20;

/// Smallest `n` admitting some `η` with coverage at least `k` on `[ε, 1-ε]`,
/// together with the largest such `η` on a dyadic grid.
pub fn cover_params(p: &Parameter, eps: &Rational, k: usize) -> Result<(Rational, usize)> {
    if !p.derived().in_region_b {
        return Err(Error::Precondition("(y1, y2) is not in region B".into()));
    }
    if !eps.is_positive() || *eps >= rat(1, 2) {
        return Err(Error::EpsilonTooLarge);
    }
    let hi_y = Rational::one() - eps;
    for n in 0..=MAX_COVER_DEPTH {
        let images = two_map_images(p, n)?;
        let feasible = |eta: &Rational| profile_from_images(&images, n, eta).min_on(eps, &hi_y) >= k;
        const GRID: i64 = 48;
        let tiny = pow2(-GRID);
        if !feasible(&tiny) {
            continue;
        }
        // bisection on the integer grid η = j / 2^GRID
        let scale = pow2(GRID);
        let mut lo = num_bigint::BigInt::one();
        let mut hi = (rat(1, 2) * &scale).to_integer();
        while &hi - &lo > num_bigint::BigInt::one() {
            let mid: num_bigint::BigInt = (&lo + &hi) / 2;
            if feasible(&(Rational::from_integer(mid.clone()) / &scale)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok((Rational::from_integer(lo) / scale, n));
    }
    Err(Error::NotFound(format!("no covering of order {k} with n <= {MAX_COVER_DEPTH}")))
}

/// A line `y = slope·x + c` in local coordinates together with the word whose
/// rectangle it was pulled back from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineWitness {
    pub word: Word,
    #[serde(with = "crate::serde_rational")]
    pub slope: Rational,
    /// Heights at `x = 0` and `x = 1`.
    #[serde(with = "pair_serde")]
    pub heights_at_01: (Rational, Rational),
    #[serde(with = "crate::serde_rational")]
    pub epsilon: Rational,
}

mod pair_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::arith::{format_rational, parse_rational, Rational};

    pub fn serialize<S: Serializer>(v: &(Rational, Rational), s: S) -> Result<S::Ok, S::Error> {
        [format_rational(&v.0), format_rational(&v.1)].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(Rational, Rational), D::Error> {
        let [a, b]: [String; 2] = Deserialize::deserialize(d)?;
        let a = parse_rational(&a).map_err(serde::de::Error::custom)?;
        let b = parse_rational(&b).map_err(serde::de::Error::custom)?;
        Ok((a, b))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Line {
    slope: Rational,
    c: Rational,
}

impl Line {
    fn at1(&self) -> Rational {
        &self.slope + &self.c
    }

    /// `P_i^{-1}(L)`: appends letter `i` to the word of the line.
    fn pull_back(&self, p: &Parameter, i: u8) -> Line {
        let (h, v) = (p.h(i), p.v(i));
        Line {
            slope: &self.slope * &h.slope / &v.slope,
            c: (&self.slope * &h.offset + &self.c - &v.offset) / &v.slope,
        }
    }

    // slope in (-1, 0) and crossing the interior of a vertical side of the square
    fn in_family(&self) -> bool {
        let zero = Rational::zero();
        let one = Rational::one();
        let inside = |y: &Rational| &zero < y && y < &one;
        self.slope < zero && self.slope > -one.clone() && (inside(&self.c) || inside(&self.at1()))
    }

    fn transverse(&self, eps: &Rational) -> bool {
        let top = Rational::one() - eps;
        let ok = |y: &Rational| eps <= y && y <= &top;
        ok(&self.c) && ok(&self.at1())
    }

    fn off_centre(&self) -> Rational {
        ((&self.c + self.at1()) / int(2) - rat(1, 2)).abs()
    }
}

/// The pulled-back diagonal `D_ω = P_ω^{-1}(D)`, computed from the composed
/// maps `H_ω`, `V_ω` directly.
pub fn pulled_back_diagonal(p: &Parameter, w: &Word) -> (Rational, Rational) {
    let h = p.h_word(w);
    let v = p.v_word(w);
    (&h.slope / &v.slope, (&h.offset - &v.offset) / &v.slope)
}

const TRANSVERSE_BUDGET: usize = 4096;

/// Finds `ω` such that `D_ω` has slope in `(-slope_bound, 0)` and both heights
/// at `x = 0, 1` in `[ε, 1-ε]`.
pub fn transverse_search(p: &Parameter, eps: &Rational, slope_bound: &Rational) -> Result<LineWitness> {
    if *eps >= rat(1, 2) {
        return Err(Error::EpsilonTooLarge);
    }
    if !eps.is_positive() || !slope_bound.is_positive() {
        return Err(Error::DomainViolation("ε and the slope bound must be positive".into()));
    }
    if !p.derived().hypersensitive {
        return Err(Error::Precondition("transverse search needs λ_min > 1".into()));
    }
    let diagonal = Line { slope: Rational::one(), c: Rational::zero() };
    let mut line = diagonal.pull_back(p, 1);
    let mut word = Word::repeat(1, 1);
    if !line.in_family() {
        return Err(Error::NotFound("D_1 does not cross a vertical side".into()));
    }
    let done = |l: &Line| -l.slope.clone() < *slope_bound && l.transverse(eps);
    let mut steps = 0;
    while !done(&line) {
        steps += 1;
        if steps > TRANSVERSE_BUDGET {
            return Err(Error::BudgetExceeded {
                what: "transverse search steps",
                needed: steps as u128,
                cap: TRANSVERSE_BUDGET as u128,
            });
        }
        let flat = -line.slope.clone() < *slope_bound;
        let letter = if flat {
            // correction: push the line back towards the middle band
            if line.at1() < *eps {
                0
            } else {
                2
            }
        } else {
            let cands: Vec<(u8, Line)> =
                [0u8, 2].iter().map(|&i| (i, line.pull_back(p, i))).filter(|(_, l)| l.in_family()).collect();
            match cands.into_iter().min_by(|a, b| a.1.off_centre().cmp(&b.1.off_centre())) {
                Some((i, _)) => i,
                None => return Err(Error::NotFound("line left the admissible family".into())),
            }
        };
        line = line.pull_back(p, letter);
        word = word.child(letter);
    }
    let heights = (line.c.clone(), line.at1());
    Ok(LineWitness { word, slope: line.slope, heights_at_01: heights, epsilon: eps.clone() })
}

/// Extends a transverse witness by one letter while keeping transversality.
fn extend_witness(p: &Parameter, w: &LineWitness) -> Option<LineWitness> {
    let line = Line { slope: w.slope.clone(), c: w.heights_at_01.0.clone() };
    [0u8, 2]
        .iter()
        .map(|&i| (i, line.pull_back(p, i)))
        .filter(|(_, l)| l.transverse(&w.epsilon))
        .min_by(|a, b| a.1.off_centre().cmp(&b.1.off_centre()))
        .map(|(i, l)| LineWitness {
            word: w.word.child(i),
            heights_at_01: (l.c.clone(), l.at1()),
            slope: l.slope,
            epsilon: w.epsilon.clone(),
        })
}

/// Horseshoe for parameters with `(y1, y2)` in region B: a transverse zoom
/// word `ω` followed by every `σ ∈ {0,2}^n` whose vertical image covers the
/// range of `D_ω` with margin `η`.
pub fn region_b_search(p: &Parameter, k: usize) -> Result<HorseshoeCertificate> {
    let d = p.derived();
    if !(d.hypersensitive && d.in_region_b) {
        return Err(Error::Precondition("region-B search needs λ_min > 1 and (y1, y2) in B".into()));
    }
    let mut last_err = Error::NotFound("no ε tried".into());
    for j in 2..=12 {
        let eps = pow2(-j);
        let (eta_max, n) = match cover_params(p, &eps, k) {
            Ok(r) => r,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        let mut witness = match transverse_search(p, &eps, &(&eta_max * int(2))) {
            Ok(w) => w,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        let images = two_map_images(p, n)?;
        for _attempt in 0..8 {
            let (c0, c1) = &witness.heights_at_01;
            let (a, b) = (c1.clone().min(c0.clone()), c0.clone().max(c1.clone()));
            let y = (&a + &b) / int(2);
            let eta = ((&b - &a) / int(2) + &eta_max) / int(2);
            let window = Interval::spanning(&y - &eta, &y + &eta);
            let words: Vec<Word> = images
                .iter()
                .filter(|(_, iv)| iv.contains_interval(&window))
                .map(|(s, _)| witness.word.concat(s))
                .collect();
            if words.len() >= k {
                let cert = HorseshoeCertificate::new(p.clone(), words);
                if verify(&cert).ok {
                    return Ok(cert);
                }
            }
            match extend_witness(p, &witness) {
                Some(w) => witness = w,
                None => break,
            }
        }
        last_err = Error::NotFound(format!("region-B pipeline failed at ε = {eps}"));
    }
    Err(last_err)
}

/// Exhaustive oracle: for each candidate tile `U = I_u` (shortest words
/// first), the largest antichain of descendants `ω` with `J_ω ⊇ I_u`.
pub fn brute_search(p: &Parameter, k: usize, max_len: usize) -> Option<HorseshoeCertificate> {
    let mut queue: VecDeque<TileCursor> = VecDeque::from([TileCursor::root()]);
    while let Some(u) = queue.pop_front() {
        let target = u.i();
        let (count, words) = best_antichain(p, &u, &target, max_len);
        if count >= k as u64 {
            let mut words = words;
            words.truncate(k.max(1));
            let cert = HorseshoeCertificate::new(p.clone(), words);
            if verify(&cert).ok {
                return Some(cert);
            }
        }
        if u.word.len() < max_len {
            for i in 0..3 {
                queue.push_back(u.child(p, i));
            }
        }
    }
    None
}

// Maximum number of pairwise prefix-free nonempty words below `c` whose J covers `target`.
fn best_antichain(p: &Parameter, c: &TileCursor, target: &Interval, max_len: usize) -> (u64, Vec<Word>) {
    if !c.j().contains_interval(target) {
        return (0, Vec::new());
    }
    let own = if c.word.is_empty() { 0 } else { 1 };
    if c.word.len() >= max_len {
        return (own, if own == 1 { vec![c.word.clone()] } else { Vec::new() });
    }
    let mut total = 0;
    let mut words = Vec::new();
    for i in 0..3 {
        let (n, w) = best_antichain(p, &c.child(p, i), target, max_len);
        total += n;
        words.extend(w);
    }
    if total >= own {
        (total, words)
    } else {
        (own, vec![c.word.clone()])
    }
}

/// Keeps every other word in left-to-right order, so that the kept tiles
/// are pairwise disjoint as closed sets.
pub fn disjointify(cert: &HorseshoeCertificate) -> Result<HorseshoeCertificate> {
    if !verify(cert).ok {
        return Err(Error::Precondition("certificate does not verify".into()));
    }
    if cert.order < 2 {
        return Err(Error::Precondition("need at least two words".into()));
    }
    let sorted = cert.sorted();
    let words: Vec<Word> = sorted.words.iter().skip(1).step_by(2).cloned().collect();
    let out = HorseshoeCertificate::new(cert.parameter.clone(), words);
    let iv = out.intervals();
    if !iv.windows(2).all(|w| w[0].strictly_left_of(&w[1])) {
        return Err(Error::NotFound("kept tiles are not separated".into()));
    }
    Ok(out)
}

/// Picks the constructive search that applies to `p`, falling back to the
/// exhaustive oracle.
pub fn search(p: &Parameter, k: usize) -> Result<HorseshoeCertificate> {
    let d = p.derived();
    if d.symmetric && d.hypersensitive {
        return symmetric_search(p, k);
    }
    if d.in_region_b && d.hypersensitive {
        return region_b_search(p, k);
    }
    brute_search(p, k, 12).ok_or_else(|| Error::NotFound(format!("no horseshoe of order {k} up to length 12")))
}
