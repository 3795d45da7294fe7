use ltlab_core::{PointSet, Torus, TorusPoint};
use proptest::prelude::*;

fn torus_and_points(max_side: usize, k: usize) -> impl Strategy<Value = (usize, Vec<(i64, i64)>)> {
    (2..=max_side).prop_flat_map(move |n| (Just(n), prop::collection::vec((0..n as i64, 0..n as i64), k)))
}

proptest! {
    #[test]
    fn distance_is_a_metric((n, pts) in torus_and_points(40, 3)) {
        let t = Torus::new(n).unwrap();
        let [x, y, z] = [t.point(pts[0].0, pts[0].1), t.point(pts[1].0, pts[1].1), t.point(pts[2].0, pts[2].1)];
        prop_assert_eq!(t.distance(x, x), 0.0);
        prop_assert_eq!(t.distance(x, y), t.distance(y, x));
        if x != y {
            prop_assert!(t.distance(x, y) >= 1.0);
        }
        prop_assert!(t.distance(x, z) <= t.distance(x, y) + t.distance(y, z) + 1e-12);
    }

    #[test]
    fn coordinates_stay_reduced(n in 2usize..50, i in -1000i64..1000, j in -1000i64..1000) {
        let t = Torus::new(n).unwrap();
        let p = t.point(i, j);
        prop_assert!((p.i as usize) < n && (p.j as usize) < n);
        prop_assert_eq!(t.point_at(t.index(p)), p);
    }

    #[test]
    fn balls_are_nested(n in 8usize..40, ci in 0i64..40, cj in 0i64..40, a in 0.1f64..1.0, b in 0.1f64..1.0) {
        let t = Torus::new(n).unwrap();
        let c = t.point(ci, cj);
        let half = n as f64 / 2.0;
        let (r1, r2) = (a.min(b) * (half - 0.01), a.max(b) * (half - 0.01));
        let small = t.ball(c, r1).unwrap();
        let large = t.ball(c, r2).unwrap();
        prop_assert!(small.is_subset(&large));
    }

    #[test]
    fn boundary_is_outside_the_region((n, pts) in torus_and_points(20, 6)) {
        let t = Torus::new(n).unwrap();
        let region = PointSet::from_points(t, pts.iter().map(|&(i, j)| t.point(i, j)));
        if region.len() < t.volume() {
            let b = t.boundary(&region).unwrap();
            prop_assert!(b.is_disjoint(&region));
            for y in b.iter() {
                prop_assert!(t.neighbors(*y).iter().any(|x| region.contains(*x)));
            }
        }
    }

    #[test]
    fn ball_size_is_translation_invariant(n in 6usize..40, ci in 0i64..40, cj in 0i64..40, frac in 0.05f64..0.99) {
        let t = Torus::new(n).unwrap();
        let r = frac * (n as f64 / 2.0 - 0.01);
        let at_origin = t.ball(TorusPoint::ORIGIN, r).unwrap();
        let moved = t.ball(t.point(ci, cj), r).unwrap();
        prop_assert_eq!(at_origin.len(), moved.len());
        prop_assert_eq!(t.boundary(&at_origin).unwrap().len(), t.boundary(&moved).unwrap().len());
    }
}

#[test]
fn radius_at_half_side_is_rejected() {
    let t = Torus::new(16).unwrap();
    assert!(t.ball(TorusPoint::ORIGIN, 8.0).is_err());
    assert!(t.ball(TorusPoint::ORIGIN, 7.99).is_ok());
    assert!(t.ball(TorusPoint::ORIGIN, 0.0).is_err());
}
