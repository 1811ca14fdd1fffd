//! Property tests for the structural invariants of every module.

use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

use zipper_core::arith::{pow2, rat, Rational};
use zipper_core::dyadic::Dyadic;
use zipper_core::horseshoe::{
    coverage_count, pulled_back_diagonal, search, transverse_search, two_map_images, verify, HorseshoeCertificate,
};
use zipper_core::mdim::{growth_rate, tile_graph, TransitionGraph};
use zipper_core::regularity::{hoelder, hoelder_check_breakpoints, hypersensitivity};
use zipper_core::symbolic::{check_realization, disjoint_horseshoe, realize_itinerary, Itinerary};
use zipper_core::vanishing::{build_homeo, four_tile, four_tiles, SequenceSpec};
use zipper_core::zipper::{approximant, eval, image};
use zipper_core::{Interval, Parameter, Word};

fn parameter() -> impl Strategy<Value = Parameter> {
    (6i64..=24)
        .prop_flat_map(|n| (Just(n), 1..n - 1, 1..n - 1))
        .prop_flat_map(|(n, a, c)| (Just(n), Just(a), a + 1..n, Just(c), c + 1..n))
        .prop_map(|(n, a, b, c, d)| Parameter::new(rat(a, n), rat(d, n), rat(b, n), rat(c, n)).unwrap())
}

fn hypersensitive() -> impl Strategy<Value = Parameter> {
    parameter().prop_filter("λ_min > 1", |p| p.derived().hypersensitive)
}

fn word(max: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(0u8..3, 0..=max).prop_map(Word)
}

fn unit_rational() -> impl Strategy<Value = Rational> {
    (1i64..=10_000).prop_flat_map(|d| (0..=d).prop_map(move |n| rat(n, d)))
}

fn p_a() -> Parameter {
    Parameter::parse("3/10,7/10,4/5,1/10").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn children_nest_in_parents(p in parameter(), w in word(6), i in 0u8..3) {
        let (pi, pj) = p.tile(&w);
        let (ci, cj) = p.tile(&w.child(i));
        prop_assert!(pi.contains_interval(&ci));
        prop_assert!(pj.contains_interval(&cj));
    }

    #[test]
    fn tilings_partition_the_interval(p in parameter(), depth in 0usize..=4) {
        let tiles = p.tiling(depth).unwrap();
        let total: Rational = tiles.iter().map(|(_, i)| i.length()).sum();
        prop_assert!(total.is_one());
        for w in tiles.windows(2) {
            prop_assert!(!w[0].1.interiors_meet(&w[1].1));
            prop_assert!(w[0].0 < w[1].0);
        }
    }

    #[test]
    fn diagonal_slopes_grow(p in parameter(), w in word(7)) {
        let (i, j) = p.tile(&w);
        let bound = num_traits::pow(p.derived().lambda_min, w.len());
        prop_assert!(j.length() >= bound * i.length());
    }

    #[test]
    fn locate_is_consistent(p in parameter(), x in unit_rational(), depth in 1usize..6) {
        let w = p.locate(&x, depth).unwrap();
        prop_assert!(p.tile(&w).0.contains(&x));
        let endpoint = p.tiling(depth + 1).unwrap().iter().any(|(_, i)| i.lo == x || i.hi == x);
        if !endpoint {
            prop_assert!(w.is_prefix_of(&p.locate(&x, depth + 1).unwrap()));
        }
    }

    #[test]
    fn evaluators_agree(p in parameter(), x in unit_rational(), k in 1usize..=5) {
        let enc = eval(&p, &x, &pow2(-16)).unwrap();
        let (f, err) = approximant(&p, k).unwrap();
        let y = f.eval(&x).unwrap();
        prop_assert!(err <= num_traits::pow(p.derived().v_max, k));
        prop_assert!(enc.intersects(&Interval::new(&y - &err, &y + &err).unwrap()));
    }

    #[test]
    fn images_tighten_with_depth(p in parameter(), a in unit_rational(), b in unit_rational(), m in 1usize..5) {
        let a = Interval::spanning(a, b);
        let coarse = image(&p, &a, m).unwrap();
        let fine = image(&p, &a, m + 1).unwrap();
        prop_assert!(coarse.outer.contains_interval(&fine.outer));
        if let Some(ci) = &coarse.inner {
            prop_assert!(fine.inner.as_ref().is_some_and(|fi| fi.contains_interval(ci)));
        }
    }

    #[test]
    fn prefix_free_iff_disjoint(p in parameter(), ws in prop::collection::vec(word(4), 2..5)) {
        let mut ws = ws;
        ws.sort();
        ws.dedup();
        for (a, u) in ws.iter().enumerate() {
            for v in &ws[a + 1..] {
                let related = u.is_prefix_of(v) || v.is_prefix_of(u);
                let overlap = p.tile(u).0.interiors_meet(&p.tile(v).0);
                prop_assert_eq!(related, overlap);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hypersensitive_flag_matches(p in parameter()) {
        let r = hypersensitivity(&p, 20).unwrap();
        prop_assert_eq!(r.hypersensitive, p.derived().hypersensitive);
    }

    #[test]
    fn approximants_keep_the_hoelder_bound(p in hypersensitive(), k in 1usize..=4) {
        let (alpha, _) = hoelder(&p, 30).unwrap();
        let (f, _) = approximant(&p, k).unwrap();
        prop_assert!(hoelder_check_breakpoints(&p, &f, &alpha).unwrap().passed());
    }

    #[test]
    fn searched_certificates_verify(p in hypersensitive(), k in 1usize..=3) {
        if let Ok(c) = search(&p, k) {
            prop_assert!(verify(&c).ok);
            prop_assert!(c.order >= k);
        }
    }

    #[test]
    fn coverage_mass_is_exact(p in parameter(), n in 1usize..=6, e in 1i64..40) {
        let eta = rat(e, 400);
        let profile = coverage_count(&p, n, &eta).unwrap();
        let expected: Rational = two_map_images(&p, n)
            .unwrap()
            .iter()
            .map(|(_, iv)| {
                let l = iv.length() - &eta * rat(2, 1);
                if l.is_positive() { l } else { Rational::zero() }
            })
            .sum();
        prop_assert_eq!(profile.mass(), expected);
    }

    #[test]
    fn transverse_witness_recomputes(p in hypersensitive(), e in 1i64..=8) {
        if let Ok(w) = transverse_search(&p, &rat(e, 40), &Rational::one()) {
            let (slope, c) = pulled_back_diagonal(&p, &w.word);
            prop_assert_eq!(&slope, &w.slope);
            prop_assert_eq!(&c, &w.heights_at_01.0);
            prop_assert_eq!(&slope + &c, w.heights_at_01.1.clone());
        }
    }

    #[test]
    fn growth_estimates_are_monotone(adj in prop::collection::vec(prop::collection::vec(0usize..6, 1..4), 6), n in 2usize..8) {
        let g = TransitionGraph::from_adjacency(adj);
        let a = growth_rate(&g, n).unwrap();
        let b = growth_rate(&g, n + 1).unwrap();
        prop_assert!(b.upper.hi <= a.upper.hi);
        prop_assert!(b.lower.lo >= a.lower.lo);
        prop_assert!(b.lower.lo <= b.upper.hi);
    }

    #[test]
    fn homeomorphism_matches_tiles(k in 2usize..=4, w in prop::collection::vec(0u8..4, 1..=3)) {
        let s = SequenceSpec::minimal_gaps(k.max(w.len()));
        let n = s.len();
        let (h, _) = build_homeo(&s, n).unwrap();
        prop_assert!(h.is_strictly_increasing());
        let t = four_tile(&s, &Word(w)).unwrap();
        prop_assert!(h.points.contains(&(t.i.0.clone(), t.j.0.clone())));
        prop_assert!(h.points.contains(&(t.i.1.clone(), t.j.1.clone())));
    }

    #[test]
    fn four_tiles_alternate(k in 1usize..=4, p in 1usize..=4) {
        let s = SequenceSpec::minimal_gaps(k.max(p));
        let tiles = four_tiles(&s, p).unwrap();
        let area = tiles[0].width() * tiles[0].height();
        for (n, t) in tiles.iter().enumerate() {
            prop_assert_eq!(t.vertical, n % 2 == 0);
            prop_assert!(t.aspect_ok);
            prop_assert_eq!(&t.width() * &t.height(), area.clone());
        }
        let total = tiles.iter().fold(Dyadic::zero(), |a, t| &a + &t.width());
        prop_assert_eq!(total, Dyadic::one());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn itineraries_check_out(idx in prop::collection::vec(0usize..3, 1..=2)) {
        let h = disjoint_horseshoe(&p_a(), 3).unwrap();
        let it = Itinerary { certificate: h, indices: idx };
        let (_, r) = realize_itinerary(&it).unwrap();
        prop_assert!(check_realization(&it, &r).is_ok());
    }

    #[test]
    fn deeper_graphs_keep_edges(e in 5i64..=7, depth in 6usize..=8) {
        let p = p_a();
        let eps = pow2(-e);
        let a = tile_graph(&p, &eps, depth).unwrap();
        let b = tile_graph(&p, &eps, depth + 1).unwrap();
        for (j, out) in a.adjacency.iter().enumerate() {
            for &l in out {
                prop_assert!(b.has_edge(j, l));
            }
        }
    }
}

#[test]
fn min_out_degree_below_pinned_scale() {
    // oracle run: out-degree 0 at 2^-5, at least 1 from 2^-6 on
    let p = p_a();
    for e in 6..=8 {
        assert!(tile_graph(&p, &pow2(-e), 10).unwrap().min_out_degree() >= 1);
    }
}

#[test]
fn certificate_json_round_trip() {
    let c = search(&p_a(), 2).unwrap();
    let text = serde_json::to_string(&c).unwrap();
    let back: HorseshoeCertificate = serde_json::from_str(&text).unwrap();
    assert_eq!(back, c);
    assert!(verify(&back).ok);
}
