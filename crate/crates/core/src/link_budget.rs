//! Antenna gain, per-carrier SNR and Shannon rate.
//!
//! All decibel quantities are converted to linear scale once, when a
//! [`LinkModel`] is built. The per-carrier SNR does not depend on how much
//! bandwidth a user is given: every carrier is transmitted at the same
//! calibrated power, so a user's rate is linear in its bandwidth share.

use serde::{Deserialize, Serialize};

use crate::geometry::{distance, Point};

/// Boltzmann constant, J/K.
pub const BOLTZMANN_K: f64 = 1.380_649e-23;

/// Argument scale of the Bessel beam pattern: `u = 2.07123 * d / R` puts the
/// 3 dB point at `d = R`.
pub const BESSEL_SCALE: f64 = 2.07123;

// Below this argument the power series is used; above it the Hankel
// asymptotic expansion.
const SERIES_LIMIT: f64 = 12.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaModel {
    /// Peak gain, linear.
    pub g_max: f64,
    /// Beam radius R of the Bessel pattern, km.
    pub beam_radius_km: f64,
    pub bessel_scale: f64,
}

impl AntennaModel {
    pub fn from_dbi(g_max_dbi: f64, beam_radius_km: f64) -> Self {
        Self {
            g_max: db_to_linear(g_max_dbi),
            beam_radius_km,
            bessel_scale: BESSEL_SCALE,
        }
    }
}

impl Default for AntennaModel {
    fn default() -> Self {
        Self::from_dbi(52.0, 50.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// Terminal G/T in dB/K; the clear-sky noise temperature is folded in.
    pub g_over_t_db: f64,
    pub free_space_loss_db: f64,
    pub atmospheric_loss_db: f64,
    pub depointing_loss_db: f64,
    pub carrier_bandwidth_mhz: f64,
    pub carrier_tx_power_w: f64,
    pub boltzmann_k: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            g_over_t_db: 16.25,
            free_space_loss_db: 210.0,
            atmospheric_loss_db: 0.4,
            depointing_loss_db: 0.5,
            carrier_bandwidth_mhz: 62.5,
            carrier_tx_power_w: 1.0,
            boltzmann_k: BOLTZMANN_K,
        }
    }
}

impl LinkParams {
    /// Receive G/T minus all path losses, linear (1/K).
    pub fn path_factor(&self) -> f64 {
        db_to_linear(
            self.g_over_t_db
                - self.free_space_loss_db
                - self.atmospheric_loss_db
                - self.depointing_loss_db,
        )
    }

    /// Noise power spectral density times carrier bandwidth, per kelvin (W/K).
    fn noise_per_kelvin(&self) -> f64 {
        self.boltzmann_k * self.carrier_bandwidth_mhz * 1e6
    }
}

/// Precomputed linear link model used on the hot path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub antenna: AntennaModel,
    pub link: LinkParams,
    // SNR per unit of normalized gain g(d)/g_max.
    snr_at_peak: f64,
}

impl LinkModel {
    pub fn new(antenna: AntennaModel, link: LinkParams) -> Self {
        let snr_at_peak =
            link.carrier_tx_power_w * antenna.g_max * link.path_factor() / link.noise_per_kelvin();
        Self {
            antenna,
            link,
            snr_at_peak,
        }
    }

    /// SNR of a user on the beam axis.
    pub fn peak_snr(&self) -> f64 {
        self.snr_at_peak
    }

    pub fn snr_at_distance(&self, d_km: f64) -> f64 {
        self.snr_at_peak * normalized_gain(d_km, &self.antenna)
    }

    pub fn carrier_snr(&self, user: Point, beam_center: Point) -> f64 {
        self.snr_at_distance(distance(user, beam_center))
    }

    /// Same model with the carrier power scaled by `factor`.
    pub fn with_power_scale(&self, factor: f64) -> Self {
        let mut link = self.link;
        link.carrier_tx_power_w *= factor;
        Self::new(self.antenna, link)
    }
}

/// Beam gain `g(d) = g_max (J1(u)/(2u) + 36 J3(u)/u^3)^2`, `u = 2.07123 d / R`.
pub fn beam_gain(d_km: f64, antenna: &AntennaModel) -> f64 {
    antenna.g_max * normalized_gain(d_km, antenna)
}

fn normalized_gain(d_km: f64, antenna: &AntennaModel) -> f64 {
    if d_km == 0.0 {
        return 1.0;
    }
    let u = antenna.bessel_scale * d_km / antenna.beam_radius_km;
    let f = pattern_amplitude(u);
    f * f
}

/// `J1(u)/(2u) + 36 J3(u)/u^3`, equal to 1 at `u = 0`.
pub fn pattern_amplitude(u: f64) -> f64 {
    let u = u.abs();
    if u < SERIES_LIMIT {
        // Both terms written as series in (u/2)^2 so the u -> 0 limit is exact:
        // J1(u)/(2u) = 1/4 sum (-1)^k t^k / (k! (k+1)!)
        // J3(u)/u^3  = 1/8 sum (-1)^k t^k / (k! (k+3)!)
        let t = u * u / 4.0;
        let s1 = reduced_series(1, t);
        let s3 = reduced_series(3, t);
        0.25 * s1 + 36.0 / 8.0 * s3
    } else {
        bessel_j_asymptotic(1, u) / (2.0 * u) + 36.0 * bessel_j_asymptotic(3, u) / (u * u * u)
    }
}

// sum_k (-1)^k t^k / (k! (k+n)!)
fn reduced_series(n: u32, t: f64) -> f64 {
    let mut term = 1.0 / factorial(n);
    let mut sum = term;
    for k in 1..200u32 {
        term *= -t / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Bessel function of the first kind of integer order.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x.abs() < SERIES_LIMIT {
        let half = x / 2.0;
        half.powi(n as i32) * reduced_series(n, half * half)
    } else {
        let sign = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
        sign * bessel_j_asymptotic(n, x.abs())
    }
}

// Hankel large-argument expansion, enough terms for |x| >= 12.
fn bessel_j_asymptotic(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n as f64) * (n as f64);
    let z = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    for k in 1..12 {
        let kf = k as f64;
        term *= (mu - (2.0 * kf - 1.0).powi(2)) / (kf * z);
        if k % 2 == 1 {
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            q += sign * term;
        } else {
            let sign = if (k / 2) % 2 == 1 { -1.0 } else { 1.0 };
            p += sign * term;
        }
    }
    let chi = x - (n as f64 / 2.0 + 0.25) * std::f64::consts::PI;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Carrier SNR of a user at `user_pos` served by a beam centered at
/// `beam_center`.
pub fn carrier_snr(
    user_pos: Point,
    beam_center: Point,
    antenna: &AntennaModel,
    link: &LinkParams,
) -> f64 {
    LinkModel::new(*antenna, *link).carrier_snr(user_pos, beam_center)
}

/// `bandwidth * log2(1 + snr)`: Mbps for bandwidth in MHz.
pub fn shannon_rate(bandwidth_mhz: f64, snr: f64) -> f64 {
    bandwidth_mhz * (1.0 + snr).log2()
}

/// Spectral efficiency at `snr`, bit/s/Hz.
pub fn spectral_efficiency(snr: f64) -> f64 {
    (1.0 + snr).log2()
}

/// Carrier power (W) that makes an on-axis user reach the SNR at which
/// `carriers_per_beam` carriers offer `design_capacity_mbps`.
pub fn calibrate_carrier_power(
    antenna: &AntennaModel,
    link: &LinkParams,
    design_capacity_mbps: f64,
    carriers_per_beam: usize,
) -> f64 {
    let reference = reference_snr(
        link.carrier_bandwidth_mhz,
        design_capacity_mbps,
        carriers_per_beam,
    );
    reference * link.noise_per_kelvin() / (antenna.g_max * link.path_factor())
}

/// SNR at which `carriers` carriers of `carrier_bandwidth_mhz` offer
/// `capacity_mbps`.
pub fn reference_snr(carrier_bandwidth_mhz: f64, capacity_mbps: f64, carriers: usize) -> f64 {
    (capacity_mbps / (carriers as f64 * carrier_bandwidth_mhz)).exp2() - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_at_axis_is_peak() {
        let a = AntennaModel::default();
        assert_eq!(beam_gain(0.0, &a), a.g_max);
        assert_eq!(pattern_amplitude(0.0), 1.0);
    }

    #[test]
    fn gain_continuous_at_zero() {
        let a = AntennaModel::default();
        let g = beam_gain(1e-9, &a);
        assert!(((g - a.g_max) / a.g_max).abs() < 1e-9);
    }

    #[test]
    fn three_db_at_beam_radius() {
        let a = AntennaModel::default();
        let ratio = beam_gain(a.beam_radius_km, &a) / a.g_max;
        assert!(
            (linear_to_db(ratio) + 3.0).abs() < 0.05,
            "{}",
            linear_to_db(ratio)
        );
    }

    #[test]
    fn series_and_asymptotic_agree_near_switch() {
        // Hankel expansion is accurate to ~1e-9 by x = 12.
        for &x in &[12.0, 12.5, 15.0] {
            let half: f64 = x / 2.0;
            let series = half.powi(3) * reduced_series(3, half * half);
            let asym = bessel_j_asymptotic(3, x);
            assert!((series - asym).abs() < 1e-8, "x={x} {series} {asym}");
        }
    }

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon_rate(62.5, 0.0), 0.0);
        assert_eq!(shannon_rate(62.5, 1.0), 62.5);
        assert_eq!(shannon_rate(62.5, 3.0), 125.0);
    }

    #[test]
    fn zero_power_gives_zero_snr() {
        let link = LinkParams {
            carrier_tx_power_w: 0.0,
            ..LinkParams::default()
        };
        let snr = carrier_snr(
            Point::new(0.0, 0.0),
            Point::new(0.0, 0.0),
            &AntennaModel::default(),
            &link,
        );
        assert_eq!(snr, 0.0);
    }

    #[test]
    fn calibration_reaches_design_capacity() {
        let antenna = AntennaModel::default();
        let mut link = LinkParams::default();
        let design = 6800.0 / 6.0;
        link.carrier_tx_power_w = calibrate_carrier_power(&antenna, &link, design, 4);
        let model = LinkModel::new(antenna, link);
        let offered = 4.0 * shannon_rate(62.5, model.peak_snr());
        assert!((offered - design).abs() < 1e-9 * design);
        // At the beam edge the SNR is scaled by the gain ratio.
        let edge = model.snr_at_distance(antenna.beam_radius_km);
        let ratio = beam_gain(antenna.beam_radius_km, &antenna) / antenna.g_max;
        assert!((edge / model.peak_snr() - ratio).abs() < 1e-12);
    }
}
