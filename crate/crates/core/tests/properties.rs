use std::sync::Arc;

use ncorbifold::algebra::{ActionGroupoid, AlgebraElement, GroupAction, HaarConvention};
use ncorbifold::bimodule::check_imprimitivity;
use ncorbifold::bitorsor::{dual_bitorsor, identity_bitorsor, quotient_bitorsor};
use ncorbifold::dirac::{circle_dirac, spectrum};
use ncorbifold::distance::{connes_distance, DistanceQuery};
use ncorbifold::geometry::{DiscreteOrbifold, MetricGraph};
use ncorbifold::linalg::C64;
use ncorbifold::models;
use proptest::prelude::*;

fn haar() -> impl Strategy<Value = HaarConvention> {
    prop_oneof![Just(HaarConvention::Counting), Just(HaarConvention::Normalized)]
}

/// `(n, shift)` with `shift` a divisor of `n` giving a nontrivial rotation group.
fn rotation() -> impl Strategy<Value = (usize, usize)> {
    (3usize..13).prop_flat_map(|n| {
        let divisors: Vec<usize> = (1..n).filter(|d| n % d == 0).collect();
        (Just(n), proptest::sample::select(divisors))
    })
}

fn element(gd: &Arc<ActionGroupoid>, raw: &[(f64, f64)]) -> AlgebraElement {
    let vals = (0..gd.arrow_count()).map(|i| {
        let (re, im) = raw[i % raw.len()];
        C64::new(re, im * (i as f64 + 1.0).sin())
    });
    AlgebraElement::from_values(gd, vals.collect()).unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convolution_is_associative_and_star_antimultiplicative(
        (n, shift) in rotation(), h in haar(), a in coeffs(), b in coeffs(), c in coeffs()
    ) {
        let gd = ActionGroupoid::shared(GroupAction::cyclic_rotation(n, shift).unwrap(), h);
        let (a, b, c) = (element(&gd, &a), element(&gd, &b), element(&gd, &c));
        let l = a.convolve(&b).unwrap().convolve(&c).unwrap();
        let r = a.convolve(&b.convolve(&c).unwrap()).unwrap();
        prop_assert!(l.max_abs_diff(&r) <= 1e-11 * (1.0 + l.max_abs()));
        let lhs = a.convolve(&b).unwrap().involution();
        let rhs = b.involution().convolve(&a.involution()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12 * (1.0 + lhs.max_abs()));
        let one = AlgebraElement::unit(&gd);
        prop_assert!(one.convolve(&a).unwrap().max_abs_diff(&a) <= 1e-12 * (1.0 + a.max_abs()));
    }

    #[test]
    fn orbifold_distance_is_a_metric_on_orbits((n, shift) in rotation(), len in 0.25f64..4.0) {
        let graph = MetricGraph::cycle(n, len).unwrap();
        let action = GroupAction::cyclic_rotation(n, shift).unwrap();
        let orb = DiscreteOrbifold::new(graph.clone(), action.clone()).unwrap();
        let idx = action.orbit_index();
        let d: Vec<Vec<f64>> = (0..n).map(|x| (0..n).map(|y| orb.orbifold_distance(x, y).unwrap()).collect()).collect();
        for x in 0..n {
            for y in 0..n {
                prop_assert_eq!(d[x][y], d[y][x]);
                prop_assert_eq!(d[x][y] == 0.0, idx[x] == idx[y]);
                for g in action.group().elements() {
                    prop_assert!((d[action.act(g, x)][y] - d[x][y]).abs() <= 1e-12);
                }
                for z in 0..n {
                    prop_assert!(d[x][z] <= d[x][y] + d[y][z] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn trivial_group_gives_graph_geodesics(n in 3usize..16, len in 0.1f64..3.0) {
        let graph = MetricGraph::cycle(n, len).unwrap();
        let orb = DiscreteOrbifold::new(graph, GroupAction::trivial(n)).unwrap();
        for x in 0..n {
            for y in 0..n {
                let k = x.abs_diff(y).min(n - x.abs_diff(y));
                prop_assert!((orb.orbifold_distance(x, y).unwrap() - k as f64 * len).abs() <= 1e-12 * n as f64 * len);
            }
        }
    }

    #[test]
    fn circle_dirac_spectrum_matches_fourier_modes(n in 3usize..24, len in 0.5f64..2.0) {
        let d = circle_dirac(&MetricGraph::cycle(n, len).unwrap(), 1).unwrap();
        let mut got = spectrum(d.matrix()).unwrap();
        let mut want: Vec<f64> = (0..n).map(|k| -(std::f64::consts::TAU * k as f64 / n as f64).sin() / len).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-10 / len);
        }
    }

    #[test]
    fn bitorsor_constructions_validate((n, shift) in rotation(), h in haar(), seed in 0u64..1000) {
        let graph = MetricGraph::cycle(n, 1.0).unwrap();
        let action = GroupAction::cyclic_rotation(n, shift).unwrap();
        let orb = DiscreteOrbifold::new(graph, action.clone()).unwrap();
        let gd = ActionGroupoid::shared(action, h);
        let id = identity_bitorsor(&gd);
        prop_assert!(id.validate().passed);
        let q = quotient_bitorsor(&orb, h).unwrap();
        prop_assert!(q.validate().passed);
        let back = dual_bitorsor(&dual_bitorsor(&q));
        prop_assert!(back.is_isomorphic(&q));
        let fibers = q.fiber_cardinalities().unwrap();
        prop_assert!(fibers.0.iter().all(|&c| c == 1));
        prop_assert!(fibers.1.iter().all(|&c| c == n / shift));
        let r = check_imprimitivity(&Arc::new(q), 8, seed).unwrap();
        prop_assert!(r.passed, "{:?}", r.axioms);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn spectral_distance_is_symmetric_and_scales_with_length(half in 4usize..8, x in 0usize..8, y in 0usize..8, scale in 0.5f64..3.0) {
        let n = 2 * half;
        let (x, y) = (x % n, y % n);
        let (_, t1) = models::circle(n, 2, n as f64, HaarConvention::Counting).unwrap();
        let (_, t2) = models::circle(n, 2, scale * n as f64, HaarConvention::Counting).unwrap();
        let d = |t, a, b| connes_distance(t, DistanceQuery::new(a, b, false)).unwrap().lower;
        let dxy = d(&t1, x, y);
        prop_assert!((dxy - d(&t1, y, x)).abs() <= 1e-6 * (1.0 + dxy));
        prop_assert!((d(&t2, x, y) - scale * dxy).abs() <= 1e-6 * (1.0 + scale * dxy));
    }
}
