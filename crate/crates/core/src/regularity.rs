//! Certified Hölder exponent and hypersensitivity exponent.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{exp_enclosure, int, log_enclosure, Rational, RealEnclosure};
use crate::error::Result;
use crate::ifs::{check_budget, Parameter, DEFAULT_TILE_CAP};
use crate::pl::PiecewiseLinear;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub alpha_min: RealEnclosure,
    pub hoelder_constant_bound: RealEnclosure,
    pub beta: RealEnclosure,
    pub hypersensitive: bool,
    #[serde(with = "crate::serde_rational")]
    pub c_hyp: Rational,
}

/// `ln a / ln b` for `a, b` in `(0,1)`, width at most `2^-bits`.
fn log_ratio(a: &Rational, b: &Rational, bits: u64) -> Result<RealEnclosure> {
    let mut guard = 8;
    loop {
        let la = log_enclosure(a, bits + guard)?;
        let lb = log_enclosure(b, bits + guard)?;
        let r = la.div(&lb)?;
        if r.is_tight(bits) {
            return Ok(r);
        }
        guard += 8;
    }
}

/// `α_min`, the smallest of the three exponents `ln v_i / ln h_i`, and an
/// enclosure of the Hölder constant bound `(x2 - x1)^(-α_min)`.
pub fn hoelder(p: &Parameter, bits: u64) -> Result<(RealEnclosure, RealEnclosure)> {
    let w = p.widths();
    let h = p.heights();
    let mut alpha: Option<RealEnclosure> = None;
    for i in 0..3 {
        let r = log_ratio(&h[i], &w[i], bits + 1)?;
        alpha = Some(match alpha {
            None => r,
            Some(a) => a.min(&r),
        });
    }
    let alpha = alpha.expect("three exponents");
    let middle = &w[1];
    let mut guard = 4;
    let constant = loop {
        let lw = log_enclosure(middle, bits + guard)?;
        let e = exp_enclosure(&alpha.mul(&lw).neg(), bits + guard);
        if e.is_tight(bits) || guard > 256 {
            break e;
        }
        guard += 8;
    };
    Ok((alpha, constant))
}

pub fn hypersensitivity(p: &Parameter, bits: u64) -> Result<RegularityReport> {
    let d = p.derived();
    let (alpha_min, hoelder_constant_bound) = hoelder(p, bits)?;
    let beta = log_ratio(&d.lambda_min, &d.h_min, bits)?.add_rational(&Rational::one());
    Ok(RegularityReport {
        alpha_min,
        hoelder_constant_bound,
        beta,
        hypersensitive: d.hypersensitive,
        c_hyp: &d.h_min / int(2),
    })
}

/// Checks `|J_ω| >= λ_min^|ω| |I_ω|` exactly for every word of length at
/// most `depth`.
pub fn tile_hypersensitivity_check(p: &Parameter, depth: usize) -> Result<bool> {
    check_budget("tile hypersensitivity check", depth, DEFAULT_TILE_CAP)?;
    let lmin = p.derived().lambda_min;
    let powers: Vec<Rational> = (0..=depth).map(|k| num_traits::pow(lmin.clone(), k)).collect();
    let mut ok = true;
    p.walk(depth, &mut |c| {
        let k = c.word.len();
        if c.j().length() < &powers[k] * c.i().length() {
            ok = false;
        }
        ok
    });
    Ok(ok)
}

/// Outcome of a breakpoint-pair Hölder check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HoelderCheck {
    pub pairs: usize,
    pub decided_trivially: usize,
    /// First pair whose bound could not be certified, as indices into the breakpoints.
    pub failure: Option<(usize, usize)>,
}

impl HoelderCheck {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Checks `|f(x) - f(x')| <= (x2-x1)^(-α) |x - x'|^α` on every pair of
/// breakpoints of `f`, where `α` ranges over the enclosure `alpha`.
///
/// Pairs with `|Δy| <= |Δx|` or `|Δx| >= x2 - x1` pass without logarithms;
/// the rest are decided in the log domain with enclosure arithmetic.
pub fn hoelder_check_breakpoints(p: &Parameter, f: &PiecewiseLinear, alpha: &RealEnclosure) -> Result<HoelderCheck> {
    let pts = f.points();
    let w = &p.widths()[1];
    let mut out = HoelderCheck { pairs: 0, decided_trivially: 0, failure: None };
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            out.pairs += 1;
            let dx = (&pts[b].0 - &pts[a].0).abs();
            let dy = (&pts[b].1 - &pts[a].1).abs();
            if dy.is_zero() || dy <= dx || dx >= *w {
                out.decided_trivially += 1;
                continue;
            }
            if !log_domain_check(&dx, &dy, w, alpha)? {
                out.failure = Some((a, b));
                return Ok(out);
            }
        }
    }
    Ok(out)
}

// ln|Δy| <= α (ln|Δx| - ln w) for every α in the enclosure
fn log_domain_check(dx: &Rational, dy: &Rational, w: &Rational, alpha: &RealEnclosure) -> Result<bool> {
    for bits in [24u64, 48, 96] {
        let ly = log_enclosure(dy, bits)?;
        let rhs = alpha.mul(&log_enclosure(&(dx / w), bits)?);
        if ly.hi <= rhs.lo {
            return Ok(true);
        }
        if ly.lo > rhs.hi {
            return Ok(false);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{parse_rational, pow2, rat};
    use crate::ifs::tests::{p_a, p_s};
    use crate::zipper::approximant;

    fn contains_digits(e: &RealEnclosure, digits: &str) -> bool {
        let v = parse_rational(digits).unwrap();
        let slack = pow2(-110);
        e.lo <= &v + &slack && &v - &slack <= e.hi
    }

    #[test]
    fn alpha_for_the_figure_parameter() {
        let (a, c) = hoelder(&p_a(), 30).unwrap();
        assert!(a.is_tight(30) && c.is_tight(30));
        assert!(contains_digits(&a, "0.06546416910142246040097385022186112602046"));
        // (1/2)^(-α)
        assert!(contains_digits(&c, "1.046421558698541527052515852491488007436"));
    }

    #[test]
    fn alpha_for_the_symmetric_parameter() {
        let (a, _) = hoelder(&p_s(), 30).unwrap();
        assert!(contains_digits(&a, "0.1853393619128634294875314677171608574340"));
    }

    #[test]
    fn refined_enclosures_nest() {
        for p in [p_a(), p_s()] {
            let (a20, _) = hoelder(&p, 20).unwrap();
            let (a30, _) = hoelder(&p, 30).unwrap();
            assert!(a20.contains_enclosure(&a30));
        }
    }

    #[test]
    fn beta_and_flags() {
        let r = hypersensitivity(&p_a(), 30).unwrap();
        assert!(r.hypersensitive);
        assert!(contains_digits(&r.beta, "0.8867172474406216541953270719649821149055"));
        assert_eq!(r.c_hyp, rat(1, 10));
        let s = hypersensitivity(&p_s(), 30).unwrap();
        assert!(contains_digits(&s.beta, "0.663227353100246560866210096202138879912"));
        // λ_1 = (y1-y2)/(x2-x1) = 1 exactly
        let flat = Parameter::new(rat(1, 4), rat(3, 4), rat(3, 4), rat(1, 4)).unwrap();
        let f = hypersensitivity(&flat, 20).unwrap();
        assert!(!f.hypersensitive);
        assert!(f.beta.contains(&rat(1, 1)));
    }

    #[test]
    fn tile_check_small_depths() {
        assert!(tile_hypersensitivity_check(&p_a(), 0).unwrap());
        assert!(tile_hypersensitivity_check(&p_a(), 5).unwrap());
        assert!(tile_hypersensitivity_check(&p_s(), 5).unwrap());
    }

    #[test]
    fn hoelder_bound_on_low_iterates() {
        let p = p_a();
        let (alpha, _) = hoelder(&p, 40).unwrap();
        for k in 0..=3 {
            let (f, _) = approximant(&p, k).unwrap();
            let r = hoelder_check_breakpoints(&p, &f, &alpha).unwrap();
            assert!(r.passed(), "k={k}: {r:?}");
        }
    }

    #[test]
    fn hoelder_check_catches_a_violation() {
        let p = p_a();
        let steep = PiecewiseLinear::new(vec![
            (rat(0, 1), rat(0, 1)),
            (rat(1, 1_000_000), rat(1, 1)),
            (rat(1, 1), rat(1, 1)),
        ])
        .unwrap();
        let (alpha, _) = hoelder(&p, 40).unwrap();
        assert!(!hoelder_check_breakpoints(&p, &steep, &alpha).unwrap().passed());
    }
}
