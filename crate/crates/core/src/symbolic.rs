//! Orbits with prescribed itineraries, realised total orders, and embeddings
//! of finite maps, all read off a verified horseshoe.
//!
//! Every claim reduces to exact tile relations `T(I_σ) = J_σ`; the checkers
//! re-validate certificates without repeating any search.

use std::collections::{HashMap, VecDeque};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::Rational;
use crate::error::{Error, Result};
use crate::horseshoe::{disjointify, search, verify, HorseshoeCertificate};
use crate::ifs::{Interval, Parameter, TileCursor, Word};

/// Nodes scanned breadth first before switching to the midpoint descent.
pub const REFINE_BFS_NODES: usize = 4096;
/// Longest answer the breadth-first phase is asked to look for.
pub const REFINE_BFS_DEPTH: usize = 12;
pub const REFINE_DEPTH_CAP: usize = 100_000;

/// `τ` with `J_{ωτ}` inside the interior of `K`, so that `T(I_{ωτ}) ⊆ K`.
///
/// Short answers are found breadth first, hence shortest. When no answer of
/// length [`REFINE_BFS_DEPTH`] can exist, or past [`REFINE_BFS_NODES`], the search descends along the children whose `J`
/// contains the midpoint of `K`, taking the shortest such `J`, until
/// `|J| < |K|/2`.
pub fn refine_into(p: &Parameter, omega: &Word, k: &Interval) -> Result<Word> {
    let root = TileCursor::at(p, omega);
    if !root.j().contains_interval(k) {
        return Err(Error::Precondition(format!("K = {k} is not inside J_{omega}")));
    }
    if k.length().is_zero() {
        let cap = REFINE_DEPTH_CAP as u128;
        return Err(Error::BudgetExceeded { what: "refinement depth", needed: cap + 1, cap });
    }
    // work in the coordinates of the current tile, where J is [0,1]
    let units: Vec<Interval> = (0..3).map(|i| p.v(i).unit_image()).collect();
    let pulls: Vec<_> = (0..3).map(|i| p.v(i).inverse()).collect();
    let inside = |kl: &Interval| kl.lo.is_negative() && kl.hi > Rational::one();
    let local = root.v.inverse().image(k);
    // no word of length <= REFINE_BFS_DEPTH fits when |K| < v_min^depth |J_ω|
    let v_min = units.iter().map(|u| u.length()).min().expect("three maps");
    let reachable = local.length() >= num_traits::pow(v_min, REFINE_BFS_DEPTH);
    let mut queue = VecDeque::new();
    if reachable {
        queue.push_back((Vec::<u8>::new(), local.clone()));
    }
    let mut visited = 0usize;
    while let Some((tau, kl)) = queue.pop_front() {
        if inside(&kl) {
            return Ok(Word(tau));
        }
        visited += 1;
        if visited > REFINE_BFS_NODES {
            break;
        }
        for i in 0..3u8 {
            if units[i as usize].interiors_meet(&kl) {
                let mut t = tau.clone();
                t.push(i);
                queue.push_back((t, pulls[i as usize].image(&kl)));
            }
        }
    }
    let by_height: Vec<u8> = {
        let mut v: Vec<u8> = (0..3).collect();
        v.sort_by(|&a, &b| units[a as usize].length().cmp(&units[b as usize].length()));
        v
    };
    let two = Rational::from_integer(2.into());
    let mut tau = Vec::new();
    let mut kl = local;
    for _ in 0..REFINE_DEPTH_CAP {
        if kl.length() > two || inside(&kl) {
            return Ok(Word(tau));
        }
        let mid = kl.midpoint();
        let i = *by_height
            .iter()
            .find(|&&i| units[i as usize].contains(&mid))
            .expect("children of a tile cover its image");
        tau.push(i);
        kl = pulls[i as usize].image(&kl);
    }
    let cap = REFINE_DEPTH_CAP as u128;
    Err(Error::BudgetExceeded { what: "refinement depth", needed: cap + 1, cap })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Itinerary {
    pub certificate: HorseshoeCertificate,
    pub indices: Vec<usize>,
}

/// Nested refinements: `J_{chain[t]} ⊆ I_{chain[t+1]}`, and `chain[t]`
/// extends the horseshoe word visited at time `t`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizationCertificate {
    pub chain: Vec<Word>,
    pub seed: Interval,
}

pub fn realize_itinerary(it: &Itinerary) -> Result<(Interval, RealizationCertificate)> {
    let cert = &it.certificate;
    if !verify(cert).ok {
        return Err(Error::Precondition("horseshoe certificate does not verify".into()));
    }
    if it.indices.is_empty() {
        return Err(Error::Precondition("empty itinerary".into()));
    }
    if let Some(&bad) = it.indices.iter().find(|&&i| i >= cert.order) {
        return Err(Error::Precondition(format!("index {bad} out of range")));
    }
    let p = &cert.parameter;
    let n = it.indices.len();
    let mut chain = vec![Word::empty(); n];
    chain[n - 1] = cert.words[it.indices[n - 1]].clone();
    for t in (0..n - 1).rev() {
        let omega = &cert.words[it.indices[t]];
        let next = p.tile(&chain[t + 1]).0;
        let tau = refine_into(p, omega, &next)?;
        chain[t] = omega.concat(&tau);
    }
    let seed = p.tile(&chain[0]).0;
    Ok((seed.clone(), RealizationCertificate { chain, seed }))
}

/// Re-checks a realization against its itinerary.
pub fn check_realization(it: &Itinerary, r: &RealizationCertificate) -> Result<()> {
    let cert = &it.certificate;
    let p = &cert.parameter;
    if r.chain.len() != it.indices.len() || r.chain.is_empty() {
        return Err(Error::Rejected("chain length differs from the itinerary".into()));
    }
    for (t, (w, &i)) in r.chain.iter().zip(&it.indices).enumerate() {
        let omega = cert.words.get(i).ok_or_else(|| Error::Rejected(format!("index {i} out of range")))?;
        if !omega.is_prefix_of(w) {
            return Err(Error::Rejected(format!("step {t} does not refine word {i}")));
        }
    }
    for t in 0..r.chain.len() - 1 {
        if !p.tile(&r.chain[t + 1]).0.contains_interval(&p.tile(&r.chain[t]).1) {
            return Err(Error::Rejected(format!("T of step {t} leaves step {}", t + 1)));
        }
    }
    if r.seed != p.tile(&r.chain[0]).0 {
        return Err(Error::Rejected("seed is not the first tile".into()));
    }
    Ok(())
}

/// Horseshoe of order `n` whose tiles are pairwise disjoint closed intervals,
/// words sorted left to right.
pub fn disjoint_horseshoe(p: &Parameter, n: usize) -> Result<HorseshoeCertificate> {
    if n == 0 {
        return Err(Error::Precondition("order must be positive".into()));
    }
    let wide = search(p, 2 * n)?;
    let d = disjointify(&wide)?;
    if d.order < n {
        return Err(Error::NotFound(format!("disjoint horseshoe has order {} < {n}", d.order)));
    }
    let words = d.sorted().words[..n].to_vec();
    Ok(HorseshoeCertificate::new(p.clone(), words))
}

/// Symbol `(i, j)`: orbit `i` at time `j`.
pub type Symbol = (usize, usize);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderRealization {
    pub horseshoe: HorseshoeCertificate,
    pub k: usize,
    pub l: usize,
    /// All symbols in increasing order.
    pub order: Vec<Symbol>,
    #[serde(with = "crate::serde_rational::vec")]
    pub points: Vec<Rational>,
    pub chains: Vec<RealizationCertificate>,
}

fn ranks(k: usize, l: usize, order: &[Symbol]) -> Result<HashMap<Symbol, usize>> {
    if order.len() != k * (l + 1) {
        return Err(Error::Precondition(format!("expected {} symbols, got {}", k * (l + 1), order.len())));
    }
    let mut rank = HashMap::new();
    for (r, &s) in order.iter().enumerate() {
        if s.0 >= k || s.1 > l {
            return Err(Error::Precondition(format!("symbol ({}, {}) out of range", s.0, s.1)));
        }
        if rank.insert(s, r).is_some() {
            return Err(Error::Precondition(format!("symbol ({}, {}) repeated", s.0, s.1)));
        }
    }
    Ok(rank)
}

fn itinerary_of(rank: &HashMap<Symbol, usize>, i: usize, l: usize) -> Vec<usize> {
    (0..=l).map(|j| rank[&(i, j)]).collect()
}

/// `k` points whose orbits of length `l + 1` are arranged on the line in the
/// given order: symbol `(i, j)` of global rank `r` is sent to the `r`-th
/// disjoint horseshoe tile from the left.
pub fn realize_order(p: &Parameter, k: usize, l: usize, order: &[Symbol]) -> Result<OrderRealization> {
    ranks(k, l, order)?;
    realize_order_in(disjoint_horseshoe(p, k * (l + 1))?, k, l, order)
}

/// [`realize_order`] over a given horseshoe of `k(l+1)` disjoint tiles sorted
/// left to right, as returned by [`disjoint_horseshoe`].
pub fn realize_order_in(horseshoe: HorseshoeCertificate, k: usize, l: usize, order: &[Symbol]) -> Result<OrderRealization> {
    let rank = ranks(k, l, order)?;
    if horseshoe.order != k * (l + 1) {
        return Err(Error::Precondition(format!("need {} tiles, horseshoe has {}", k * (l + 1), horseshoe.order)));
    }
    let iv = horseshoe.intervals();
    if !iv.windows(2).all(|w| w[0].strictly_left_of(&w[1])) {
        return Err(Error::Precondition("horseshoe tiles are not disjoint and sorted".into()));
    }
    let mut points = Vec::with_capacity(k);
    let mut chains = Vec::with_capacity(k);
    for i in 0..k {
        let it = Itinerary { certificate: horseshoe.clone(), indices: itinerary_of(&rank, i, l) };
        let (seed, r) = realize_itinerary(&it)?;
        points.push(seed.midpoint());
        chains.push(r);
    }
    Ok(OrderRealization { horseshoe, k, l, order: order.to_vec(), points, chains })
}

/// Re-validates an order realization; returns the number of certified
/// pairwise comparisons.
pub fn check_order_realization(o: &OrderRealization) -> Result<usize> {
    if !verify(&o.horseshoe).ok {
        return Err(Error::Rejected("horseshoe does not verify".into()));
    }
    let rank = ranks(o.k, o.l, &o.order).map_err(|e| Error::Rejected(e.to_string()))?;
    let tiles = o.horseshoe.intervals();
    if tiles.len() != o.order.len() {
        return Err(Error::Rejected("horseshoe order differs from the number of symbols".into()));
    }
    if o.points.len() != o.k || o.chains.len() != o.k {
        return Err(Error::Rejected("one point and one chain per orbit expected".into()));
    }
    for i in 0..o.k {
        let it = Itinerary { certificate: o.horseshoe.clone(), indices: itinerary_of(&rank, i, o.l) };
        check_realization(&it, &o.chains[i])?;
        if !o.chains[i].seed.contains(&o.points[i]) {
            return Err(Error::Rejected(format!("point {i} is outside its seed")));
        }
    }
    // s ≺ s' must place the tile of s strictly left of the tile of s'
    let mut certified = 0;
    for a in 0..o.order.len() {
        for b in a + 1..o.order.len() {
            if !tiles[rank[&o.order[a]]].strictly_left_of(&tiles[rank[&o.order[b]]]) {
                return Err(Error::Rejected(format!("comparison {a} < {b} not separated")));
            }
            certified += 1;
        }
    }
    Ok(certified)
}

/// Embedding of a finite map `S` on `{0, …, m-1}`: element `e` is enclosed in
/// the tile `I_{σ_e}`, with `σ_e` refining the `e`-th disjoint horseshoe word
/// and `J_{σ_e} ⊇ I_{σ_{S(e)}}`.
///
/// On a cycle these relations form a closed covering loop, which traps a
/// periodic point; off the cycles they give preimages of points already
/// placed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub horseshoe: HorseshoeCertificate,
    pub map: Vec<usize>,
    pub enclosures: Vec<Word>,
    #[serde(with = "crate::serde_rational")]
    pub width_target: Rational,
}

impl Embedding {
    pub fn intervals(&self) -> Vec<Interval> {
        let p = &self.horseshoe.parameter;
        self.enclosures.iter().map(|w| p.tile(w).0).collect()
    }

    /// Cycles of the map, each listed from its smallest element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        cycles_of(&self.map)
    }
}

pub fn cycles_of(map: &[usize]) -> Vec<Vec<usize>> {
    let m = map.len();
    let mut on_cycle = vec![false; m];
    for start in 0..m {
        // after m steps every orbit is on its cycle
        let mut x = start;
        for _ in 0..m {
            x = map[x];
        }
        on_cycle[x] = true;
    }
    let mut seen = vec![false; m];
    let mut out = Vec::new();
    for s in 0..m {
        if on_cycle[s] && !seen[s] {
            let mut cyc = vec![s];
            seen[s] = true;
            let mut x = map[s];
            while x != s {
                seen[x] = true;
                cyc.push(x);
                x = map[x];
            }
            out.push(cyc);
        }
    }
    out
}

const EMBED_STEP_CAP: usize = 200_000;

pub fn embed(p: &Parameter, map: &[usize], width_target: &Rational) -> Result<Embedding> {
    let m = map.len();
    if m == 0 {
        return Err(Error::Precondition("empty map".into()));
    }
    if let Some(&bad) = map.iter().find(|&&s| s >= m) {
        return Err(Error::Precondition(format!("image {bad} out of range")));
    }
    if !width_target.is_positive() {
        return Err(Error::DomainViolation("width target must be positive".into()));
    }
    let horseshoe = disjoint_horseshoe(p, m)?;
    let mut cur: Vec<TileCursor> = horseshoe.words.iter().map(|w| TileCursor::at(p, w)).collect();
    let mut steps = 0;
    loop {
        if cur.iter().all(|c| c.i().length() <= *width_target) {
            break;
        }
        steps += 1;
        if steps > EMBED_STEP_CAP {
            return Err(Error::BudgetExceeded {
                what: "embedding descent steps",
                needed: steps as u128,
                cap: EMBED_STEP_CAP as u128,
            });
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| cur[b].i().length().cmp(&cur[a].i().length()));
        let mut moved = false;
        for e in order {
            let target = cur[map[e]].i();
            let best = (0..3)
                .map(|i| cur[e].child(p, i))
                .filter(|c| c.j().contains_interval(&target))
                .max_by(|a, b| margin(&a.j(), &target).cmp(&margin(&b.j(), &target)));
            if let Some(c) = best {
                cur[e] = c;
                moved = true;
                break;
            }
        }
        if !moved {
            return Err(Error::NotFound("no enclosure can be refined further".into()));
        }
    }
    let enclosures = cur.into_iter().map(|c| c.word).collect();
    Ok(Embedding { horseshoe, map: map.to_vec(), enclosures, width_target: width_target.clone() })
}

fn margin(outer: &Interval, inner: &Interval) -> Rational {
    (&inner.lo - &outer.lo).min(&outer.hi - &inner.hi)
}

pub fn check_embedding(e: &Embedding) -> Result<()> {
    let h = &e.horseshoe;
    let p = &h.parameter;
    let m = e.map.len();
    if !verify(h).ok {
        return Err(Error::Rejected("horseshoe does not verify".into()));
    }
    if h.order != m || e.enclosures.len() != m {
        return Err(Error::Rejected("one horseshoe word and one enclosure per element expected".into()));
    }
    if e.map.iter().any(|&s| s >= m) {
        return Err(Error::Rejected("map leaves its domain".into()));
    }
    let tiles = h.sorted().intervals();
    if !tiles.windows(2).all(|w| w[0].strictly_left_of(&w[1])) {
        return Err(Error::Rejected("horseshoe tiles are not pairwise disjoint".into()));
    }
    for (x, sigma) in e.enclosures.iter().enumerate() {
        if !h.words[x].is_prefix_of(sigma) {
            return Err(Error::Rejected(format!("enclosure {x} does not refine its horseshoe word")));
        }
        let (i, j) = p.tile(sigma);
        if i.length() > e.width_target {
            return Err(Error::Rejected(format!("enclosure {x} is wider than the target")));
        }
        let image = p.tile(&e.enclosures[e.map[x]]).0;
        if !j.contains_interval(&image) {
            return Err(Error::Rejected(format!("T of enclosure {x} does not cover enclosure {}", e.map[x])));
        }
    }
    Ok(())
}
