//! Carrier assignment inside one beam.
//!
//! Every terminal receives a single carrier and shares it in time with the
//! other users on that carrier. Users are packed longest-processing-time
//! first: largest required time fraction first, each onto the carrier with
//! the most time left.

use serde::{Deserialize, Serialize};

use crate::link_budget::spectral_efficiency;

/// Time share of one user on one carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    /// Index into the scheduled user list.
    pub user: usize,
    /// Fraction of the carrier's time, in `[0, 1]`.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierSchedule {
    /// Slots of each carrier.
    pub carriers: Vec<Vec<Slot>>,
    /// Offered rate of each scheduled user, Mbps.
    pub offered: Vec<f64>,
}

impl CarrierSchedule {
    pub fn total_offered(&self) -> f64 {
        self.offered.iter().sum()
    }

    /// Carrier of each user, if any.
    pub fn carrier_of_user(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.offered.len()];
        for (c, slots) in self.carriers.iter().enumerate() {
            for s in slots {
                out[s.user] = Some(c);
            }
        }
        out
    }
}

/// Required fraction of a full carrier for each user to reach its target.
pub fn required_fractions(targets: &[f64], snr: &[f64], carrier_bandwidth_mhz: f64) -> Vec<f64> {
    targets
        .iter()
        .zip(snr)
        .map(|(&t, &s)| {
            let full = carrier_bandwidth_mhz * spectral_efficiency(s);
            if t <= 0.0 || full <= 0.0 {
                0.0
            } else {
                (t / full).min(1.0)
            }
        })
        .collect()
}

/// Longest-processing-time packing of users with rate `targets` and carrier
/// SNR `snr` onto `carriers` carriers of `carrier_bandwidth_mhz` each.
pub fn schedule_carriers(
    targets: &[f64],
    snr: &[f64],
    carriers: usize,
    carrier_bandwidth_mhz: f64,
) -> CarrierSchedule {
    let f = required_fractions(targets, snr, carrier_bandwidth_mhz);
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
    schedule_in_order(targets, snr, carriers, carrier_bandwidth_mhz, &order)
}

/// Greedy packing with users taken in the given `order`.
pub fn schedule_in_order(
    targets: &[f64],
    snr: &[f64],
    carriers: usize,
    carrier_bandwidth_mhz: f64,
    order: &[usize],
) -> CarrierSchedule {
    assert_eq!(targets.len(), snr.len());
    let f = required_fractions(targets, snr, carrier_bandwidth_mhz);
    let mut residual = vec![1.0f64; carriers];
    let mut slots = vec![Vec::new(); carriers];
    let mut offered = vec![0.0; targets.len()];
    for &n in order {
        if f[n] <= 0.0 || carriers == 0 {
            continue;
        }
        let mut c = 0;
        for j in 1..carriers {
            if residual[j] > residual[c] {
                c = j;
            }
        }
        let share = f[n].min(residual[c]);
        if share <= 0.0 {
            continue;
        }
        residual[c] = (residual[c] - share).max(0.0);
        slots[c].push(Slot { user: n, share });
        offered[n] = if share == f[n] && f[n] < 1.0 {
            targets[n]
        } else {
            share * carrier_bandwidth_mhz * spectral_efficiency(snr[n])
        };
    }
    CarrierSchedule {
        carriers: slots,
        offered,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_user_gets_proportional_share() {
        // snr 3 -> 2 bit/s/Hz, full carrier 125 Mbps.
        let s = schedule_carriers(&[25.0], &[3.0], 1, 62.5);
        assert_eq!(s.carriers[0].len(), 1);
        assert!((s.carriers[0][0].share - 0.2).abs() < 1e-15);
        assert_eq!(s.offered[0], 25.0);
    }

    #[test]
    fn two_identical_users_two_carriers() {
        let s = schedule_carriers(&[25.0, 25.0], &[3.0, 3.0], 2, 62.5);
        assert_eq!(s.carriers[0].len(), 1);
        assert_eq!(s.carriers[1].len(), 1);
        assert_eq!(s.carriers[0][0].share, s.carriers[1][0].share);
    }

    #[test]
    fn no_carriers_offers_nothing() {
        let s = schedule_carriers(&[25.0, 10.0], &[3.0, 3.0], 0, 62.5);
        assert_eq!(s.total_offered(), 0.0);
    }

    #[test]
    fn overloaded_carrier_caps_time() {
        let s = schedule_carriers(&[100.0, 100.0], &[3.0, 3.0], 1, 62.5);
        let used: f64 = s.carriers[0].iter().map(|x| x.share).sum();
        assert!(used <= 1.0 + 1e-15);
        assert!((s.total_offered() - 125.0).abs() < 1e-9);
    }
}
