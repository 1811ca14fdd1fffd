//! The zipper map itself: the rescaling operator, its iterates from the
//! identity, and rigorous enclosures of point values and interval images
//! read off the tiles through `Z(I_ω) = J_ω`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::Rational;
use crate::error::{Error, Result};
use crate::ifs::{Interval, Parameter, TileCursor, Word};
use crate::pl::PiecewiseLinear;

/// Levels scanned past the requested depth when looking for a tile endpoint.
const ENDPOINT_LOOKAHEAD: usize = 32;

/// Default number of tiles `image` may visit.
pub const DEFAULT_IMAGE_CAP: u128 = 2_000_000;

/// Applies the three-piece operator: the graph of the result is the union of
/// the images of the graph of `f` under the planar maps `P_0, P_1, P_2`.
pub fn phi_apply(p: &Parameter, f: &PiecewiseLinear) -> Result<PiecewiseLinear> {
    f.check_fixed_space()?;
    let pieces = (0..3u8).map(|i| {
        let (h, v) = (p.h(i), p.v(i));
        f.points().iter().map(|(x, y)| (h.apply(x), v.apply(y))).collect::<Vec<_>>()
    });
    PiecewiseLinear::from_pieces(pieces)
}

/// `f_k = Φ^k(Id)` and the bound `v_max^k` on `sup |f_k - Z_p|`.
pub fn approximant(p: &Parameter, k: usize) -> Result<(PiecewiseLinear, Rational)> {
    approximant_with_cap(p, k, 3u128.pow(12) + 1)
}

pub fn approximant_with_cap(p: &Parameter, k: usize, cap: u128) -> Result<(PiecewiseLinear, Rational)> {
    let needed = 3u128.checked_pow(k as u32).map(|n| n + 1).unwrap_or(u128::MAX);
    if needed > cap {
        return Err(Error::BudgetExceeded { what: "approximant breakpoints", needed, cap });
    }
    let mut f = PiecewiseLinear::identity();
    for _ in 0..k {
        f = phi_apply(p, &f)?;
    }
    let vmax = p.derived().v_max;
    Ok((f, num_traits::pow(vmax, k)))
}

/// Smallest `ℓ` with `v_max^ℓ <= ε`.
pub fn depth_for_width(p: &Parameter, eps: &Rational) -> usize {
    let vmax = p.derived().v_max;
    let mut w = Rational::one();
    let mut l = 0;
    while w > *eps {
        w *= &vmax;
        l += 1;
    }
    l
}

/// Encloses `Z_p(x)` in an interval of width at most `ε`.
///
/// Tile endpoints `H_ω(0)`, `H_ω(1)` have the exact value `V_ω(0)`, `V_ω(1)`,
/// returned as a degenerate interval when found within the scanned depth.
pub fn eval(p: &Parameter, x: &Rational, eps: &Rational) -> Result<Interval> {
    if *eps <= Rational::zero() {
        return Err(Error::DomainViolation("ε must be positive".into()));
    }
    if *x < Rational::zero() || *x > Rational::one() {
        return Err(Error::DomainViolation(format!("{x} is outside [0,1]")));
    }
    let depth = depth_for_width(p, eps);
    let mut cursor = TileCursor::root();
    let mut xn = x.clone();
    let mut at_depth = None;
    for level in 0..=depth.max(ENDPOINT_LOOKAHEAD) {
        if level == depth {
            at_depth = Some(cursor.j());
        }
        if xn.is_zero() || xn.is_one() {
            return Ok(Interval::point(cursor.v.apply(&xn)));
        }
        if level >= depth && level >= ENDPOINT_LOOKAHEAD {
            break;
        }
        let i = p.letter_of(&xn);
        xn = p.h(i).inverse().apply(&xn);
        cursor = cursor.child(p, i);
    }
    Ok(at_depth.expect("loop always reaches the requested depth"))
}

/// Two-sided bound on an interval image: `inner ⊆ Z(A) ⊆ outer`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageBound {
    pub inner: Option<Interval>,
    pub outer: Interval,
}

/// Bounds `Z_p(A)` using tiles of depth at most `m`.
pub fn image(p: &Parameter, a: &Interval, m: usize) -> Result<ImageBound> {
    image_refined(p, a, DEFAULT_IMAGE_CAP, &mut |c| c.word.len() < m)
}

/// Like [`image`], but keeps splitting a partially covered tile while
/// `refine` says so. Tiles inside `A` are never split: their image is exact.
pub fn image_refined<F: FnMut(&TileCursor) -> bool>(
    p: &Parameter,
    a: &Interval,
    cap: u128,
    refine: &mut F,
) -> Result<ImageBound> {
    if a.lo < Rational::zero() || a.hi > Rational::one() {
        return Err(Error::DomainViolation(format!("{a} is not inside [0,1]")));
    }
    let mut inner: Option<Interval> = None;
    let mut outer: Option<Interval> = None;
    let mut visited: u128 = 0;
    let mut stack = vec![TileCursor::root()];
    while let Some(c) = stack.pop() {
        visited += 1;
        if visited > cap {
            return Err(Error::BudgetExceeded { what: "image tiles", needed: visited, cap });
        }
        let i = c.i();
        if !i.intersects(a) {
            continue;
        }
        let j = c.j();
        if a.contains_interval(&i) {
            inner = Some(match inner {
                Some(u) => u.hull(&j),
                None => j.clone(),
            });
            outer = Some(match outer {
                Some(u) => u.hull(&j),
                None => j,
            });
            continue;
        }
        if refine(&c) {
            for d in (0..3).rev() {
                stack.push(c.child(p, d));
            }
        } else {
            outer = Some(match outer {
                Some(u) => u.hull(&j),
                None => j,
            });
        }
    }
    Ok(ImageBound { inner, outer: outer.expect("A meets at least one tile") })
}

/// Outer enclosures of `x, Z(x), Z²(x), …`.
///
/// Each step maps the previous enclosure through [`image`], and for
/// hypersensitive parameters the widths grow by at least `λ_min` per step, so
/// only the first few entries are informative.
pub fn orbit(p: &Parameter, x: &Rational, steps: usize, eps: &Rational, m: usize) -> Result<Vec<Interval>> {
    let mut out = vec![Interval::point(x.clone())];
    let mut cur = eval(p, x, eps)?;
    for step in 0..steps {
        out.push(cur.clone());
        if step + 1 < steps {
            cur = image(p, &cur, m)?.outer;
        }
    }
    Ok(out)
}

/// Samples `(x, lo, hi)` on the grid `k/n`.
pub fn sample(p: &Parameter, n: usize, eps: &Rational) -> Result<Vec<(Rational, Interval)>> {
    (0..=n)
        .map(|k| {
            let x = Rational::new(k.into(), n.max(1).into());
            eval(p, &x, eps).map(|e| (x, e))
        })
        .collect()
}

/// Word of the tile `eval` reads at depth `ℓ`; exposed for diagnostics.
pub fn eval_word(p: &Parameter, x: &Rational, eps: &Rational) -> Result<Word> {
    p.locate(x, depth_for_width(p, eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use crate::ifs::tests::{p_a, p_s};

    #[test]
    fn phi_of_identity_interpolates_the_points() {
        let f = phi_apply(&p_a(), &PiecewiseLinear::identity()).unwrap();
        let expect = [(0, 1, 0, 1), (3, 10, 7, 10), (4, 5, 1, 10), (1, 1, 1, 1)];
        let pts: Vec<_> = expect.iter().map(|&(a, b, c, d)| (rat(a, b), rat(c, d))).collect();
        assert_eq!(f.points(), &pts[..]);
    }

    #[test]
    fn second_iterate_has_nine_segments() {
        let p = p_a();
        let f = phi_apply(&p, &phi_apply(&p, &PiecewiseLinear::identity()).unwrap()).unwrap();
        assert_eq!(f.len(), 10);
        assert_eq!(f.eval(&rat(9, 100)).unwrap(), rat(49, 100));
    }

    #[test]
    fn symmetric_parameter_gives_symmetric_curve() {
        let f = phi_apply(&p_s(), &PiecewiseLinear::identity()).unwrap();
        for (x, y) in f.points() {
            let mirrored = f.eval(&(rat(1, 1) - x)).unwrap();
            assert_eq!(mirrored, rat(1, 1) - y);
        }
    }

    #[test]
    fn phi_rejects_functions_outside_the_space() {
        let f = PiecewiseLinear::new(vec![(rat(0, 1), rat(1, 2)), (rat(1, 1), rat(1, 1))]).unwrap();
        assert!(matches!(phi_apply(&p_a(), &f), Err(Error::DomainViolation(_))));
    }

    #[test]
    fn approximant_error_bounds() {
        let p = p_a();
        let (f0, e0) = approximant(&p, 0).unwrap();
        assert_eq!(f0, PiecewiseLinear::identity());
        assert_eq!(e0, rat(1, 1));
        assert_eq!(approximant(&p, 1).unwrap().1, rat(9, 10));
        assert!(approximant_with_cap(&p, 10, 100).is_err());
    }

    #[test]
    fn approximants_are_exact_at_tile_endpoints() {
        let p = p_a();
        let k = 4;
        let (f, _) = approximant(&p, k).unwrap();
        p.walk(k, &mut |c| {
            assert_eq!(f.eval(&c.h.apply(&rat(0, 1))).unwrap(), c.v.apply(&rat(0, 1)));
            assert_eq!(f.eval(&c.h.apply(&rat(1, 1))).unwrap(), c.v.apply(&rat(1, 1)));
            true
        });
    }

    #[test]
    fn eval_is_exact_at_endpoints() {
        let p = p_a();
        for eps in [rat(1, 2), rat(1, 1000), rat(5, 1)] {
            assert_eq!(eval(&p, &rat(3, 10), &eps).unwrap(), Interval::point(rat(7, 10)));
            assert_eq!(eval(&p, &rat(9, 100), &eps).unwrap(), Interval::point(rat(49, 100)));
        }
    }

    #[test]
    fn eval_interior_point() {
        let p = p_a();
        let e = eval(&p, &rat(1, 2), &rat(1, 2)).unwrap();
        assert!(e.length() <= rat(1, 2));
        assert!(Interval::new(rat(1, 10), rat(7, 10)).unwrap().contains_interval(&e));
        let (f, err) = approximant(&p, 8).unwrap();
        let y = f.eval(&rat(1, 2)).unwrap();
        assert!(e.lo <= &y + &err && &y - &err <= e.hi);
    }

    #[test]
    fn image_of_tiles_is_exact() {
        let p = p_a();
        let b = image(&p, &Interval::new(rat(0, 1), rat(3, 10)).unwrap(), 1).unwrap();
        let j0 = Interval::new(rat(0, 1), rat(7, 10)).unwrap();
        assert_eq!(b.inner, Some(j0.clone()));
        assert_eq!(b.outer, j0);
        let b = image(&p, &Interval::unit(), 1).unwrap();
        assert_eq!(b.inner, Some(Interval::unit()));
        assert_eq!(b.outer, Interval::unit());
    }

    #[test]
    fn image_refines_monotonically() {
        let p = p_a();
        let a = Interval::new(rat(0, 1), rat(1, 5)).unwrap();
        let mut prev: Option<ImageBound> = None;
        for m in 0..9 {
            let b = image(&p, &a, m).unwrap();
            if let Some(inner) = &b.inner {
                assert!(b.outer.contains_interval(inner));
            }
            if let Some(q) = &prev {
                assert!(q.outer.contains_interval(&b.outer));
                if let Some(qi) = &q.inner {
                    assert!(b.inner.as_ref().unwrap().contains_interval(qi));
                }
            }
            prev = Some(b);
        }
        let slack = |b: &ImageBound| b.outer.length() - b.inner.as_ref().map_or(rat(0, 1), |i| i.length());
        let a = Interval::new(rat(1, 7), rat(2, 7)).unwrap();
        let coarse = slack(&image(&p, &a, 2).unwrap());
        let fine = slack(&image(&p, &a, 10).unwrap());
        assert!(fine < coarse, "{fine} vs {coarse}");
    }

    #[test]
    fn orbit_starts_at_the_point() {
        let p = p_a();
        let o = orbit(&p, &rat(1, 2), 3, &rat(1, 1000), 6).unwrap();
        assert_eq!(o.len(), 4);
        assert_eq!(o[0], Interval::point(rat(1, 2)));
        assert!(o[1].length() <= rat(1, 1000));
    }
}
