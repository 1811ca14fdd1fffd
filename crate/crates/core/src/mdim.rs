//! Lower bounds on the metric mean dimension with respect to the Euclidean
//! metric, from path counts in a certified cell-transition graph.

use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::arith::{int, log_enclosure, Rational, RealEnclosure};
use crate::error::{Error, Result};
use crate::ifs::{Interval, Parameter, TileCursor};
use crate::regularity::hypersensitivity;
use crate::zipper;

/// Cells `[j/k, (j+1)/k]` with `k = ⌊1/(2ε)⌋`, centred cores of length `ε`,
/// and an edge `j → ℓ` whenever the certified inner image of core `j`
/// contains cell `ℓ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionGraph {
    pub cells: Vec<Interval>,
    pub cores: Vec<Interval>,
    /// Sorted successor lists.
    pub adjacency: Vec<Vec<usize>>,
    #[serde(with = "crate::serde_rational")]
    pub epsilon: Rational,
    pub depth: usize,
}

impl TransitionGraph {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn has_edge(&self, j: usize, l: usize) -> bool {
        self.adjacency[j].binary_search(&l).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn min_out_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).min().unwrap_or(0)
    }

    /// Graph built from explicit successor lists, with unit cells.
    pub fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        let k = adjacency.len().max(1);
        let cells: Vec<Interval> =
            (0..adjacency.len()).map(|j| Interval::spanning(Rational::new(j.into(), k.into()), Rational::new((j + 1).into(), k.into()))).collect();
        let mut adjacency = adjacency;
        for a in adjacency.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        TransitionGraph { cores: cells.clone(), cells, adjacency, epsilon: Rational::zero(), depth: 0 }
    }

    /// Adjacency-list text: one line `j: l1 l2 …` per vertex.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (j, succ) in self.adjacency.iter().enumerate() {
            let list: Vec<String> = succ.iter().map(usize::to_string).collect();
            s.push_str(&format!("{j}: {}\n", list.join(" ")));
        }
        s
    }
}

pub fn tile_graph(p: &Parameter, eps: &Rational, depth: usize) -> Result<TransitionGraph> {
    if !eps.is_positive() || *eps >= Rational::new(1.into(), 4.into()) {
        return Err(Error::DomainViolation("ε must lie in (0, 1/4)".into()));
    }
    if !p.derived().hypersensitive {
        return Err(Error::Precondition("the transition graph needs λ_min > 1".into()));
    }
    let k = (Rational::one() / (eps * int(2))).floor().to_integer().to_usize().expect("ε is not tiny");
    let kq = Rational::from_integer(k.into());
    let half_eps = eps / int(2);
    let mut cells = Vec::with_capacity(k);
    let mut cores = Vec::with_capacity(k);
    let mut adjacency = Vec::with_capacity(k);
    for j in 0..k {
        let lo = Rational::from_integer(j.into()) / &kq;
        let hi = Rational::from_integer((j + 1).into()) / &kq;
        let c = (&lo + &hi) / int(2);
        let core = Interval::spanning(&c - &half_eps, &c + &half_eps);
        let succ = match zipper::image(p, &core, depth)?.inner {
            // cells ℓ with ℓ/k >= lo and (ℓ+1)/k <= hi
            Some(inner) => {
                let first = (&inner.lo * &kq).ceil().to_integer();
                let last: num_bigint::BigInt = (&inner.hi * &kq).floor().to_integer() - 1;
                let first = first.to_usize().unwrap_or(0);
                match last.to_i64() {
                    Some(l) if l >= first as i64 => (first..=(l as usize).min(k - 1)).collect(),
                    _ => Vec::new(),
                }
            }
            None => Vec::new(),
        };
        cells.push(Interval::spanning(lo, hi));
        cores.push(core);
        adjacency.push(succ);
    }
    Ok(TransitionGraph { cells, cores, adjacency, epsilon: eps.clone(), depth })
}

/// Re-derives the edge `j → ℓ` without the image routine: `Z` is evaluated
/// exactly at the endpoints of every depth-`depth` tile inside the core, and
/// the hull of those values must contain the cell.
pub fn recheck_edge(p: &Parameter, g: &TransitionGraph, j: usize, l: usize) -> Result<bool> {
    let core = &g.cores[j];
    let cell = &g.cells[l];
    let tol = crate::arith::pow2(-60);
    let mut lo: Option<Rational> = None;
    let mut hi: Option<Rational> = None;
    let mut points = Vec::new();
    p.walk(g.depth, &mut |c: &TileCursor| {
        let i = c.i();
        if !i.intersects(core) {
            return false;
        }
        if c.word.len() == g.depth || core.contains_interval(&i) {
            if core.contains_interval(&i) {
                points.push(i.lo.clone());
                points.push(i.hi.clone());
            }
            return false;
        }
        true
    });
    for x in points {
        // tile endpoints normalise to 0 or 1, so the value comes back exact
        let v = zipper::eval(p, &x, &tol)?;
        if v.length().is_positive() {
            return Err(Error::PrecisionInsufficient(format!("Z({x}) not exact")));
        }
        lo = Some(lo.map_or(v.lo.clone(), |a| a.min(v.lo.clone())));
        hi = Some(hi.map_or(v.hi.clone(), |a| a.max(v.hi.clone())));
    }
    Ok(match (lo, hi) {
        (Some(a), Some(b)) => a <= cell.lo && cell.hi <= b,
        _ => false,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    /// Encloses a number below the logarithmic growth rate of path counts.
    pub lower: RealEnclosure,
    /// Encloses a number above it.
    pub upper: RealEnclosure,
    /// `N_n`, the number of paths through `n` vertices, for `n = 1..=n_max`.
    #[serde(with = "biguint_strings")]
    pub path_counts: Vec<BigUint>,
}

mod biguint_strings {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(BigUint::to_string).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect()
    }
}

const LOG_BITS: u64 = 40;

fn step(adj: &[Vec<usize>], x: &[BigUint]) -> Vec<BigUint> {
    // (A x)_j = Σ_{j→ℓ} x_ℓ
    adj.iter().map(|succ| succ.iter().map(|&l| &x[l]).sum()).collect()
}

fn ratio_log(num: &BigUint, den: &BigUint, n: usize) -> Result<RealEnclosure> {
    let q = Rational::new(num.clone().into(), den.clone().into());
    Ok(log_enclosure(&q, LOG_BITS)?.scale(&Rational::new(1.into(), n.into())))
}

/// Path counts `N_n = 1ᵀ A^(n-1) 1` and a two-sided bound on `lim (1/n) ln N_n`.
///
/// The upper bound is `min_n (1/n) ln N_n`, valid because `N` is
/// submultiplicative. The lower bound is `ln` of a Collatz–Wielandt bound
/// `min_i (A x)_i / x_i <= ρ` with `x = A^n_max 1` on each strongly connected
/// component.
pub fn growth_rate(g: &TransitionGraph, n_max: usize) -> Result<GrowthEstimate> {
    if n_max < 2 {
        return Err(Error::Precondition("n_max must be at least 2".into()));
    }
    let k = g.len();
    let mut x: Vec<BigUint> = vec![BigUint::one(); k];
    let mut counts = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        if n > 1 {
            x = step(&g.adjacency, &x);
        }
        counts.push(x.iter().sum::<BigUint>());
    }
    let zero = RealEnclosure::point(Rational::zero());
    let mut upper: Option<RealEnclosure> = None;
    for (n, c) in counts.iter().enumerate() {
        let e = if c.is_zero() { zero.clone() } else { ratio_log(c, &BigUint::one(), n + 1)? };
        upper = Some(match upper {
            Some(u) if u.hi <= e.hi => u,
            _ => e,
        });
    }
    let mut upper = upper.expect("n_max >= 2");
    if counts.last().is_some_and(Zero::is_zero) {
        upper = zero.clone();
    }
    let lower = collatz_wielandt_log(&g.adjacency, n_max)?.unwrap_or(zero);
    Ok(GrowthEstimate { lower, upper, path_counts: counts })
}

fn collatz_wielandt_log(adj: &[Vec<usize>], iterations: usize) -> Result<Option<RealEnclosure>> {
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..adj.len()).map(|_| graph.add_node(())).collect();
    for (j, succ) in adj.iter().enumerate() {
        for &l in succ {
            graph.add_edge(nodes[j], nodes[l], ());
        }
    }
    let mut best: Option<(BigUint, BigUint)> = None;
    for comp in tarjan_scc(&graph) {
        let members: Vec<usize> = comp.iter().map(|n| n.index()).collect();
        let cyclic = members.len() > 1 || adj[members[0]].contains(&members[0]);
        if !cyclic {
            continue;
        }
        let mut local = vec![usize::MAX; adj.len()];
        for (a, &m) in members.iter().enumerate() {
            local[m] = a;
        }
        let sub: Vec<Vec<usize>> = members
            .iter()
            .map(|&m| adj[m].iter().filter(|&&l| local[l] != usize::MAX).map(|&l| local[l]).collect())
            .collect();
        let mut x = vec![BigUint::one(); members.len()];
        for _ in 0..iterations {
            x = step(&sub, &x);
        }
        let ax = step(&sub, &x);
        // min_i ax_i / x_i
        let (mut num, mut den) = (ax[0].clone(), x[0].clone());
        for i in 1..x.len() {
            if &ax[i] * &den < &num * &x[i] {
                num = ax[i].clone();
                den = x[i].clone();
            }
        }
        best = Some(match best {
            Some((bn, bd)) if &bn * &den >= &num * &bd => (bn, bd),
            _ => (num, den),
        });
    }
    best.map(|(n, d)| ratio_log(&n, &d, 1)).transpose()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdimRow {
    #[serde(with = "crate::serde_rational")]
    pub epsilon: Rational,
    pub cells: usize,
    pub edges: usize,
    pub min_out_degree: usize,
    pub rate_lower: RealEnclosure,
    /// `rate_lower / ln(1/ε)`; its lower end is the certified bound.
    pub ratio: RealEnclosure,
    /// `ln λ_min / |ln h_min|`.
    pub target: RealEnclosure,
    pub hypersensitive: bool,
}

impl MdimRow {
    pub fn ratio_lower_bound(&self) -> &Rational {
        &self.ratio.lo
    }
}

pub fn mdim_target(p: &Parameter) -> Result<RealEnclosure> {
    let d = p.derived();
    if d.lambda_min <= Rational::one() {
        return Ok(RealEnclosure::point(Rational::zero()));
    }
    let r = hypersensitivity(p, LOG_BITS)?;
    Ok(r.beta.add_rational(&-Rational::one()).neg())
}

pub fn mdim_table(p: &Parameter, eps_list: &[Rational], depth: usize, n_max: usize) -> Result<Vec<MdimRow>> {
    if eps_list.is_empty() {
        return Err(Error::Precondition("empty ε list".into()));
    }
    let hyper = p.derived().hypersensitive;
    let target = mdim_target(p)?;
    let zero = RealEnclosure::point(Rational::zero());
    let mut rows = Vec::with_capacity(eps_list.len());
    for eps in eps_list {
        if !hyper {
            rows.push(MdimRow {
                epsilon: eps.clone(),
                cells: 0,
                edges: 0,
                min_out_degree: 0,
                rate_lower: zero.clone(),
                ratio: zero.clone(),
                target: target.clone(),
                hypersensitive: false,
            });
            continue;
        }
        let g = tile_graph(p, eps, depth)?;
        let est = growth_rate(&g, n_max)?;
        let log_inv = log_enclosure(&(Rational::one() / eps), LOG_BITS)?;
        // keep only the certified lower end of the rate
        let rate = RealEnclosure::point(est.lower.lo.clone());
        let ratio = rate.div(&log_inv)?;
        rows.push(MdimRow {
            epsilon: eps.clone(),
            cells: g.len(),
            edges: g.edge_count(),
            min_out_degree: g.min_out_degree(),
            rate_lower: est.lower,
            ratio,
            target: target.clone(),
            hypersensitive: true,
        });
    }
    Ok(rows)
}
