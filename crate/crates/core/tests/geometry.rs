use hts_rrm::geometry::{
    distance, smallest_enclosing_circle, smallest_enclosing_circle_seeded, Point,
};
use hts_rrm::oracles::{random_point_set, sec_brute_force};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn points() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((-500.0f64..500.0, -500.0f64..500.0), 1..60)
        .prop_map(|v| v.into_iter().map(|(x, y)| Point::new(x, y)).collect())
}

#[test]
fn hundred_random_points_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pts: Vec<Point> = (0..100)
        .map(|_| Point::new(rng.random_range(-80.0..80.0), rng.random_range(-60.0..60.0)))
        .collect();
    let fast = smallest_enclosing_circle(&pts).unwrap();
    let slow = sec_brute_force(&pts).unwrap();
    assert!(distance(fast.center, slow.center) <= 1e-6);
    assert!((fast.radius - slow.radius).abs() <= 1e-6);
}

#[test]
fn mixed_shapes_match_brute_force() {
    for i in 0..300 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
        let pts = random_point_set(&mut rng, 60);
        let fast = smallest_enclosing_circle_seeded(&pts, i).unwrap();
        let slow = sec_brute_force(&pts).unwrap();
        assert!(distance(fast.center, slow.center) <= 1e-6, "instance {i}");
        assert!((fast.radius - slow.radius).abs() <= 1e-6, "instance {i}");
    }
}

#[test]
fn duplicated_points_collapse() {
    let p = Point::new(4.0, -2.0);
    let c = smallest_enclosing_circle(&[p; 17]).unwrap();
    assert_eq!(c.center, p);
    assert_eq!(c.radius, 0.0);
}

#[test]
fn empty_input_is_rejected() {
    assert!(smallest_enclosing_circle(&[]).is_err());
    assert!(sec_brute_force(&[]).is_err());
}

proptest! {
    #[test]
    fn every_point_is_contained(pts in points(), seed in any::<u64>()) {
        let c = smallest_enclosing_circle_seeded(&pts, seed).unwrap();
        for p in &pts {
            prop_assert!(c.contains(p, 1e-9));
        }
    }

    #[test]
    fn radius_is_minimal(pts in points()) {
        let c = smallest_enclosing_circle(&pts).unwrap();
        let oracle = sec_brute_force(&pts).unwrap();
        prop_assert!(c.radius <= oracle.radius + 1e-6);
    }

    #[test]
    fn input_order_does_not_matter(pts in points(), shift in 0usize..60) {
        let a = smallest_enclosing_circle(&pts).unwrap();
        let mut rotated = pts.clone();
        rotated.rotate_left(shift % pts.len());
        rotated.reverse();
        let b = smallest_enclosing_circle(&rotated).unwrap();
        prop_assert!(distance(a.center, b.center) <= 1e-9);
        prop_assert!((a.radius - b.radius).abs() <= 1e-9);
    }
}
