mod common;

use common::{setup, users};
use hts_rrm::geometry::distance;
use hts_rrm::mapping::dominant_mapping;
use hts_rrm::traffic::{largest_remainder_counts, sample_dirichlet, PopulationGrid, ScenarioKind};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn homogeneous_realizations_have_the_configured_totals() {
    let s = setup(ScenarioKind::Ht);
    assert_eq!(s.centers.len(), 6);
    for seed in 0..20 {
        let u = users(&s, seed);
        assert_eq!(u.len(), 272);
        assert_eq!(u.iter().map(|u| u.demand).sum::<f64>(), 6800.0);
        let m = dominant_mapping(&u, &s.centers);
        for (n, &k) in m.beam_of_user.iter().enumerate() {
            assert!(distance(u[n].position, s.centers[k]) <= 50.0 + 1e-9);
        }
    }
}

#[test]
fn hot_spot_beams_carry_more_users_on_average() {
    let s = setup(ScenarioKind::Whs);
    let mut per_beam = [0usize; 6];
    for seed in 0..200 {
        let u = users(&s, seed);
        let m = dominant_mapping(&u, &s.centers);
        for k in m.beam_of_user {
            per_beam[k] += 1;
        }
    }
    // Expected shares 4/12 for the two hot beams, 1/12 for the others.
    let total: usize = per_beam.iter().sum();
    for (k, &c) in per_beam.iter().enumerate() {
        let share = c as f64 / total as f64;
        let expected = if k < 2 { 4.0 / 12.0 } else { 1.0 / 12.0 };
        assert!((share - expected).abs() < 0.03, "beam {k}: {share}");
    }
}

#[test]
fn real_traffic_users_stay_inside_the_region() {
    let s = setup(ScenarioKind::Rt);
    assert_eq!(s.centers.len(), 64);
    let u = users(&s, 3);
    assert_eq!(u.len(), 2897);
    let grid = s.scenario.population.as_ref().unwrap();
    for user in &u {
        assert!(grid.cell_of(user.position).is_some());
    }
}

#[test]
fn population_grid_text_round_trip() {
    let g = PopulationGrid::synthetic_skewed(8, 6, 60.0, 80.0);
    let back = PopulationGrid::parse(&g.to_text()).unwrap();
    assert_eq!(back, g);
}

proptest! {
    #[test]
    fn dirichlet_samples_lie_on_the_simplex(
        alpha in prop::collection::vec(0.05f64..20.0, 1..70),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = sample_dirichlet(&alpha, &mut rng).unwrap();
        prop_assert_eq!(x.len(), alpha.len());
        prop_assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn largest_remainder_hits_the_total(
        shares in prop::collection::vec(0.001f64..1.0, 1..70),
        total in 0usize..5000,
    ) {
        let counts = largest_remainder_counts(&shares, total);
        prop_assert_eq!(counts.iter().sum::<usize>(), total);
        let sum: f64 = shares.iter().sum();
        for (c, s) in counts.iter().zip(&shares) {
            let quota = s / sum * total as f64;
            prop_assert!((*c as f64 - quota).abs() < 1.0 + 1e-9);
        }
    }
}
