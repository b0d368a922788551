#![allow(clippy::excessive_precision)]

use hts_rrm::geometry::Point;
use hts_rrm::link_budget::{
    beam_gain, bessel_j, calibrate_carrier_power, linear_to_db, reference_snr, shannon_rate,
    AntennaModel, LinkModel, LinkParams,
};
use hts_rrm::mapping::MAX_BEAM_RADIUS_KM;
use proptest::prelude::*;

// Reference values from a 40-digit Bessel evaluation.
const GAIN_RATIO: [(f64, f64); 6] = [
    (10.0, 0.973_510_585_088_408_96),
    (25.0, 0.844_568_039_623_331_76),
    (50.0, 0.500_000_408_332_786_72),
    (70.962, 0.234_417_395_580_930_86),
    (100.0, 0.042_231_121_127_524_187),
    (150.0, 0.000_119_995_849_454_020_55),
];

const J1: [(f64, f64); 7] = [
    (0.5, 0.242_268_457_674_873_89),
    (2.07123, 0.571_122_626_084_837_71),
    (5.0, -0.327_579_137_591_465_22),
    (11.9, -0.228_983_249_661_924_07),
    (12.1, -0.215_748_973_376_924_78),
    (20.0, 0.066_833_124_175_850_046),
    (40.0, 0.126_038_318_037_584_99),
];

const J3: [(f64, f64); 7] = [
    (0.5, 0.002_563_729_994_587_244_1),
    (2.07123, 0.140_499_684_981_377_44),
    (5.0, 0.364_831_230_613_666_99),
    (11.9, 0.207_627_276_056_981_94),
    (12.1, 0.180_929_878_850_697_91),
    (20.0, -0.098_901_394_560_449_676),
    (40.0, -0.126_144_815_505_820_80),
];

#[test]
fn gain_pattern_matches_reference_values() {
    let a = AntennaModel::default();
    for (d, expected) in GAIN_RATIO {
        let got = beam_gain(d, &a) / a.g_max;
        assert!(
            (got - expected).abs() <= 1e-12 * expected.max(1e-3),
            "d = {d}: {got} vs {expected}"
        );
    }
}

// The power series loses a few digits to cancellation near x = 12; the
// large-argument expansion used from there on is good to about 1e-10.
fn bessel_tolerance(x: f64) -> f64 {
    if x < 12.0 {
        1e-12
    } else {
        1e-9
    }
}

#[test]
fn bessel_values_match_reference() {
    for (n, table) in [(1, J1), (3, J3)] {
        for (x, expected) in table {
            let got = bessel_j(n, x);
            assert!(
                (got - expected).abs() < bessel_tolerance(x),
                "J{n}({x}) = {got}, expected {expected}"
            );
        }
    }
}

#[test]
fn maximum_radius_is_six_point_three_db_down() {
    let a = AntennaModel::default();
    let db = linear_to_db(beam_gain(MAX_BEAM_RADIUS_KM, &a) / a.g_max);
    assert!((db + 6.3001).abs() < 1e-3, "{db}");
}

#[test]
fn peak_gain_is_exact_at_axis() {
    let a = AntennaModel::default();
    assert_eq!(beam_gain(0.0, &a), a.g_max);
}

#[test]
fn gain_never_exceeds_peak_out_to_three_radii() {
    let a = AntennaModel::default();
    let limit = 3.0 * a.beam_radius_km;
    for i in 0..=10_000 {
        let d = limit * i as f64 / 10_000.0;
        let g = beam_gain(d, &a);
        assert!(g <= a.g_max, "gain {g} above peak at d = {d}");
        assert!(g >= 0.0);
    }
}

#[test]
fn shannon_rate_of_one_carrier_at_snr_three() {
    assert_eq!(shannon_rate(62.5, 3.0), 125.0);
}

#[test]
fn calibrated_on_axis_user_offers_design_capacity() {
    let antenna = AntennaModel::default();
    let mut link = LinkParams::default();
    let design = 6800.0 / 6.0;
    link.carrier_tx_power_w = calibrate_carrier_power(&antenna, &link, design, 4);
    let model = LinkModel::new(antenna, link);
    let snr = model.carrier_snr(Point::new(3.0, 4.0), Point::new(3.0, 4.0));
    assert!((4.0 * shannon_rate(62.5, snr) - design).abs() < 1e-9);
    assert!((snr - reference_snr(62.5, design, 4)).abs() < 1e-12 * snr);
}

#[test]
fn power_scale_multiplies_snr() {
    let model = LinkModel::new(AntennaModel::default(), LinkParams::default());
    let scaled = model.with_power_scale(2.5);
    assert!((scaled.snr_at_distance(30.0) / model.snr_at_distance(30.0) - 2.5).abs() < 1e-12);
}

proptest! {
    #[test]
    fn snr_decreases_with_distance_inside_main_lobe(d1 in 0.0f64..120.0, d2 in 0.0f64..120.0) {
        let model = LinkModel::new(AntennaModel::default(), LinkParams::default());
        let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(model.snr_at_distance(near) >= model.snr_at_distance(far));
    }

    #[test]
    fn shannon_rate_is_linear_in_bandwidth(w in 0.0f64..500.0, snr in 0.0f64..1e3, k in 0.0f64..8.0) {
        let a = shannon_rate(k * w, snr);
        let b = k * shannon_rate(w, snr);
        prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
    }
}
