//! Beam-user mapping, beam recentering and the load-balancing degree.

use serde::{Deserialize, Serialize};

use crate::allocation::AllocationSolution;
use crate::geometry::{distance, smallest_enclosing_circle_seeded, Point};
use crate::traffic::User;

/// Maximum beam radius: the service range at which the SNR has dropped by
/// 6.3 dB from the beam peak, km.
pub const MAX_BEAM_RADIUS_KM: f64 = 70.962;

// Rates closer than this (relative) are treated as equal when choosing a
// serving beam, so that solver round-off cannot flip a tie.
const RATE_TIE_REL: f64 = 1e-9;

// A user whose best relaxed rate is below this is considered unserved by the
// allocation and is mapped geometrically instead, Mbps.
const MIN_SERVING_RATE: f64 = 1e-6;

/// Serving beam of every user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamUserMapping {
    pub beam_of_user: Vec<usize>,
    /// Users mapped to their nearest center because no allocated rate or
    /// feasible beam identified a serving beam.
    pub fallback: Vec<bool>,
}

impl BeamUserMapping {
    pub fn users(&self) -> usize {
        self.beam_of_user.len()
    }

    /// Users served by each of `beams` beams, in user order.
    pub fn users_by_beam(&self, beams: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); beams];
        for (n, &k) in self.beam_of_user.iter().enumerate() {
            out[k].push(n);
        }
        out
    }

    pub fn fallback_count(&self) -> usize {
        self.fallback.iter().filter(|&&f| f).count()
    }

    /// Total demand mapped to each beam.
    pub fn beam_demand(&self, users: &[User], beams: usize) -> Vec<f64> {
        let mut out = vec![0.0; beams];
        for (u, &k) in users.iter().zip(&self.beam_of_user) {
            out[k] += u.demand;
        }
        out
    }
}

/// Geometry and resources of one beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamState {
    pub center: Point,
    pub radius_km: f64,
    pub bandwidth_mhz: f64,
    pub carriers: usize,
}

fn nearest_center(p: Point, centers: &[Point]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, c) in centers.iter().enumerate() {
        let d = distance(p, *c);
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

/// Every user served by the beam with the nearest center (ties to the lower
/// beam index).
pub fn dominant_mapping(users: &[User], centers: &[Point]) -> BeamUserMapping {
    BeamUserMapping {
        beam_of_user: users
            .iter()
            .map(|u| nearest_center(u.position, centers))
            .collect(),
        fallback: vec![false; users.len()],
    }
}

/// Map each user to the candidate beam on which the allocation gives it the
/// highest rate, ties to the lower beam index. Users with no candidate or no
/// allocated rate go to the nearest center and are flagged.
pub fn remap_users(
    solution: &AllocationSolution,
    users: &[User],
    centers: &[Point],
) -> BeamUserMapping {
    let mut beam_of_user = Vec::with_capacity(users.len());
    let mut fallback = Vec::with_capacity(users.len());
    for (n, u) in users.iter().enumerate() {
        match best_rate_beam(solution.user_shares[n].iter().map(|s| (s.beam, s.rate))) {
            Some(k) => {
                beam_of_user.push(k);
                fallback.push(false);
            }
            None => {
                beam_of_user.push(nearest_center(u.position, centers));
                fallback.push(true);
            }
        }
    }
    BeamUserMapping {
        beam_of_user,
        fallback,
    }
}

/// Beam with the largest rate among `(beam, rate)` pairs; near-equal rates go
/// to the lower beam index. `None` when no rate is positive.
pub fn best_rate_beam(rates: impl IntoIterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, r) in rates {
        if r < MIN_SERVING_RATE {
            continue;
        }
        best = match best {
            None => Some((k, r)),
            Some((bk, br)) => {
                let tol = RATE_TIE_REL * br.max(r);
                if r > br + tol || ((r - br).abs() <= tol && k < bk) {
                    Some((k, r))
                } else {
                    Some((bk, br))
                }
            }
        };
    }
    best.map(|(k, _)| k)
}

/// Outcome of recentering beams on their users.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryUpdate {
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
    /// Beams whose enclosing circle exceeded the radius cap.
    pub clamped: Vec<bool>,
}

/// Move every nonempty beam to the smallest circle enclosing its users, with
/// the radius capped at `max_radius_km` (center kept). Empty beams keep their
/// previous center with zero radius.
pub fn update_beam_geometry(
    users: &[User],
    mapping: &BeamUserMapping,
    previous_centers: &[Point],
    max_radius_km: f64,
    seed: u64,
) -> GeometryUpdate {
    let k = previous_centers.len();
    let groups = mapping.users_by_beam(k);
    let mut centers = previous_centers.to_vec();
    let mut radii = vec![0.0; k];
    let mut clamped = vec![false; k];
    let mut pts = Vec::new();
    for (b, members) in groups.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        pts.clear();
        pts.extend(members.iter().map(|&n| users[n].position));
        let circle = smallest_enclosing_circle_seeded(
            &pts,
            seed ^ (b as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        )
        .expect("nonempty finite point set");
        centers[b] = circle.center;
        if circle.radius > max_radius_km {
            radii[b] = max_radius_km;
            clamped[b] = true;
        } else {
            radii[b] = circle.radius;
        }
    }
    GeometryUpdate {
        centers,
        radii,
        clamped,
    }
}

/// `sum_k |R_k - R_design| / R_design` over per-beam demands `R_k`.
pub fn load_balancing_degree(beam_demand: &[f64], design_capacity: f64) -> f64 {
    assert!(design_capacity > 0.0, "design capacity must be positive");
    beam_demand
        .iter()
        .map(|r| (r - design_capacity).abs())
        .sum::<f64>()
        / design_capacity
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(x: f64, y: f64) -> User {
        User {
            position: Point::new(x, y),
            demand: 25.0,
        }
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(load_balancing_degree(&[10.0; 6], 10.0), 0.0);
        assert_eq!(
            load_balancing_degree(&[20.0, 0.0, 10.0, 10.0, 10.0, 10.0], 10.0),
            2.0
        );
    }

    #[test]
    fn best_rate_ties_go_to_lower_beam() {
        assert_eq!(best_rate_beam([(3, 10.0), (1, 10.0)]), Some(1));
        assert_eq!(best_rate_beam([(1, 10.0), (3, 12.0)]), Some(3));
        assert_eq!(best_rate_beam([(1, 0.0)]), None);
    }

    #[test]
    fn geometry_single_and_pair() {
        let users = [user(5.0, 5.0), user(100.0, 0.0), user(140.0, 0.0)];
        let mapping = BeamUserMapping {
            beam_of_user: vec![0, 1, 1],
            fallback: vec![false; 3],
        };
        let prev = [
            Point::new(0.0, 0.0),
            Point::new(100.0, 0.0),
            Point::new(300.0, 0.0),
        ];
        let g = update_beam_geometry(&users, &mapping, &prev, MAX_BEAM_RADIUS_KM, 1);
        assert_eq!(g.centers[0], Point::new(5.0, 5.0));
        assert_eq!(g.radii[0], 0.0);
        assert!((g.centers[1].x - 120.0).abs() < 1e-9);
        assert!((g.radii[1] - 20.0).abs() < 1e-9);
        assert_eq!(g.centers[2], prev[2]);
        assert_eq!(g.radii[2], 0.0);
    }

    #[test]
    fn geometry_clamps_radius() {
        let users = [user(0.0, 0.0), user(200.0, 0.0)];
        let mapping = BeamUserMapping {
            beam_of_user: vec![0, 0],
            fallback: vec![false; 2],
        };
        let g = update_beam_geometry(
            &users,
            &mapping,
            &[Point::new(0.0, 0.0)],
            MAX_BEAM_RADIUS_KM,
            1,
        );
        assert_eq!(g.radii[0], MAX_BEAM_RADIUS_KM);
        assert!(g.clamped[0]);
        assert!((g.centers[0].x - 100.0).abs() < 1e-9);
    }
}
