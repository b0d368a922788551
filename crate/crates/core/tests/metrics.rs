mod common;

use common::setup;
use hts_rrm::link_budget::shannon_rate;
use hts_rrm::metrics::{empirical_cdf, nqu, nu, uniform_baseline};
use hts_rrm::traffic::{ScenarioKind, User};
use proptest::prelude::*;

#[test]
fn full_satisfaction_gives_zero_metrics() {
    let required = vec![25.0; 272];
    assert_eq!(nqu(&required, &required, 5000.0).unwrap(), 0.0);
    assert_eq!(nu(&required, 6800.0), 0.0);
}

#[test]
fn unmet_fraction_examples() {
    assert_eq!(nu(&[0.0, 0.0], 50.0), 1.0);
    assert_eq!(nu(&[10.0, 15.0], 50.0), 0.5);
    assert!(nu(&[40.0, 40.0], 50.0) < 0.0);
}

#[test]
fn cdf_examples() {
    assert_eq!(empirical_cdf(&[5.0]).unwrap(), vec![(5.0, 1.0)]);
    assert_eq!(
        empirical_cdf(&[1.0, 2.0, 2.0, 4.0]).unwrap(),
        vec![(1.0, 0.25), (2.0, 0.75), (4.0, 1.0)]
    );
    assert!(empirical_cdf(&[]).is_err());
}

#[test]
fn on_axis_balanced_users_recover_total_demand() {
    let s = setup(ScenarioKind::Ht);
    let design = s.params.design_capacity_mbps;
    // 44 users per beam split evenly over 4 carriers.
    let users: Vec<User> = s
        .centers
        .iter()
        .flat_map(|&c| {
            std::iter::repeat_n(
                User {
                    position: c,
                    demand: design / 44.0,
                },
                44,
            )
        })
        .collect();
    let total: f64 = users.iter().map(|u| u.demand).sum();
    let r_uni = uniform_baseline(&users, &s.centers, &s.params).unwrap();
    assert!((r_uni - total).abs() <= 1e-9 * total, "{r_uni} vs {total}");
    let snr = s.params.link.peak_snr();
    assert!((4.0 * shannon_rate(62.5, snr) - design).abs() <= 1e-9 * design);
}

#[test]
fn hot_spot_baseline_falls_short_of_demand() {
    let s = setup(ScenarioKind::Ht);
    let users: Vec<User> = (0..272)
        .map(|i| User {
            position: s.centers[0],
            demand: 25.0 + (i % 3) as f64,
        })
        .collect();
    let total: f64 = users.iter().map(|u| u.demand).sum();
    let r_uni = uniform_baseline(&users, &s.centers, &s.params).unwrap();
    assert!(r_uni < total);
    assert_eq!(
        r_uni,
        uniform_baseline(&users, &s.centers, &s.params).unwrap()
    );
}

proptest! {
    #[test]
    fn nqu_matches_direct_sum(v in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..100), b in 1.0f64..1e4) {
        let (req, off): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        let mut direct = 0.0;
        for i in 0..req.len() {
            direct += (req[i] - off[i]).powi(2);
        }
        let got = nqu(&req, &off, b).unwrap();
        prop_assert!((got - direct / b).abs() <= 1e-12 * (direct / b).max(1.0));
    }

    #[test]
    fn doubling_rates_scales_consistently(v in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..50), b in 1.0f64..1e4) {
        let (req, off): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        let t: f64 = req.iter().sum::<f64>() + 1.0;
        let req2: Vec<f64> = req.iter().map(|x| 2.0 * x).collect();
        let off2: Vec<f64> = off.iter().map(|x| 2.0 * x).collect();
        prop_assert!((nu(&off2, 2.0 * t) - nu(&off, t)).abs() <= 1e-12);
        let a = nqu(&req, &off, b).unwrap();
        let c = nqu(&req2, &off2, b).unwrap();
        prop_assert!((c - 4.0 * a).abs() <= 1e-12 * c.max(1.0));
    }

    #[test]
    fn cdf_is_a_monotone_step_ending_at_one(v in prop::collection::vec(-1e6f64..1e6, 1..300)) {
        let cdf = empirical_cdf(&v).unwrap();
        prop_assert_eq!(cdf.last().unwrap().1, 1.0);
        for w in cdf.windows(2) {
            prop_assert!(w[0].0 < w[1].0);
            prop_assert!(w[0].1 < w[1].1);
        }
        let values: Vec<f64> = cdf.iter().map(|p| p.0).collect();
        let again: Vec<f64> = empirical_cdf(&values).unwrap().iter().map(|p| p.0).collect();
        prop_assert_eq!(values, again);
    }

    #[test]
    fn minimum_rate_bounds_the_mean(v in prop::collection::vec(0.0f64..100.0, 1..100)) {
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = hts_rrm::metrics::mean(&v);
        prop_assert!(min <= mean + 1e-9 && mean <= max + 1e-9);
    }
}
