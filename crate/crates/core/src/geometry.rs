//! Planar geometry on a flat local tangent plane, coordinates in km.
//!
//! The smallest enclosing circle is computed with Welzl's randomized
//! incremental algorithm. The input is shuffled with a seeded generator so
//! results are reproducible for a given input order and seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seed used by [`smallest_enclosing_circle`] when the caller has no run seed.
pub const DEFAULT_SEC_SEED: u64 = 0x5EC0_5EC0;

// Relative slack applied when testing whether a point lies in a candidate
// circle during the incremental construction.
const CONTAINS_REL_EPS: f64 = 1e-12;
const CONTAINS_ABS_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        distance(*self, *other)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub const fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Containment with the small slack used during construction.
    fn contains_loose(&self, p: &Point) -> bool {
        let d = self.center.distance(p);
        d <= self.radius * (1.0 + CONTAINS_REL_EPS) + CONTAINS_ABS_EPS
    }

    pub fn contains(&self, p: &Point, slack: f64) -> bool {
        self.center.distance(p) <= self.radius + slack
    }
}

/// Euclidean distance between two points.
pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Smallest circle enclosing all `points`, using the default shuffle seed.
pub fn smallest_enclosing_circle(points: &[Point]) -> Result<Circle> {
    smallest_enclosing_circle_seeded(points, DEFAULT_SEC_SEED)
}

/// Smallest circle enclosing all `points`. The internal shuffle is keyed by
/// `seed`; the circle itself does not depend on it beyond rounding.
pub fn smallest_enclosing_circle_seeded(points: &[Point], seed: u64) -> Result<Circle> {
    if points.is_empty() {
        return Err(Error::NoPoints);
    }
    if let Some(p) = points.iter().find(|p| !p.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite point ({}, {})",
            p.x, p.y
        )));
    }

    let mut shuffled = points.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let mut circle = Circle::new(shuffled[0], 0.0);
    for i in 1..shuffled.len() {
        let p = shuffled[i];
        if !circle.contains_loose(&p) {
            circle = circle_with_one_boundary(&shuffled[..i], p);
        }
    }
    Ok(circle)
}

// `p` is known to lie on the boundary of the circle enclosing `points` + p.
fn circle_with_one_boundary(points: &[Point], p: Point) -> Circle {
    let mut circle = Circle::new(p, 0.0);
    for (i, &q) in points.iter().enumerate() {
        if !circle.contains_loose(&q) {
            circle = circle_with_two_boundary(&points[..i], p, q);
        }
    }
    circle
}

// `p` and `q` are both on the boundary.
fn circle_with_two_boundary(points: &[Point], p: Point, q: Point) -> Circle {
    let mut circle = diameter_circle(p, q);
    for &r in points {
        if !circle.contains_loose(&r) {
            circle = boundary_circle_three(p, q, r);
        }
    }
    circle
}

// Circle through p, q, r; collinear triples fall back to the diameter circle
// of the extreme pair.
fn boundary_circle_three(p: Point, q: Point, r: Point) -> Circle {
    circumcircle(p, q, r).unwrap_or_else(|| extreme_pair_circle(p, q, r))
}

pub(crate) fn diameter_circle(a: Point, b: Point) -> Circle {
    let center = Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
    let radius = distance(a, center).max(distance(b, center));
    Circle::new(center, radius)
}

/// Circumcircle of three points, or `None` when they are (numerically)
/// collinear.
pub(crate) fn circumcircle(a: Point, b: Point, c: Point) -> Option<Circle> {
    // Translate to the bounding-box origin to limit cancellation.
    let ox = (a.x.min(b.x).min(c.x) + a.x.max(b.x).max(c.x)) / 2.0;
    let oy = (a.y.min(b.y).min(c.y) + a.y.max(b.y).max(c.y)) / 2.0;
    let (ax, ay) = (a.x - ox, a.y - oy);
    let (bx, by) = (b.x - ox, b.y - oy);
    let (cx, cy) = (c.x - ox, c.y - oy);
    let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    let scale = (ax.abs() + bx.abs() + cx.abs() + ay.abs() + by.abs() + cy.abs()).max(1e-300);
    if d.abs() <= 1e-14 * scale * scale {
        return None;
    }
    let a2 = ax * ax + ay * ay;
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let x = ox + (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
    let y = oy + (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
    let center = Point::new(x, y);
    let radius = distance(center, a)
        .max(distance(center, b))
        .max(distance(center, c));
    Some(Circle::new(center, radius))
}

fn extreme_pair_circle(a: Point, b: Point, c: Point) -> Circle {
    let candidates = [(a, b), (a, c), (b, c)];
    let (p, q) = candidates
        .into_iter()
        .max_by(|x, y| distance(x.0, x.1).total_cmp(&distance(y.0, y.1)))
        .expect("three candidate pairs");
    diameter_circle(p, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_identity_and_pythagorean() {
        assert_eq!(distance(Point::new(0.0, 0.0), Point::new(0.0, 0.0)), 0.0);
        assert_eq!(distance(Point::new(0.0, 0.0), Point::new(3.0, 4.0)), 5.0);
    }

    #[test]
    fn sec_single_point() {
        let c = smallest_enclosing_circle(&[Point::new(1.0, 1.0)]).unwrap();
        assert_eq!(c.center, Point::new(1.0, 1.0));
        assert_eq!(c.radius, 0.0);
    }

    #[test]
    fn sec_two_points() {
        let c = smallest_enclosing_circle(&[Point::new(0.0, 0.0), Point::new(2.0, 0.0)]).unwrap();
        assert!((c.center.x - 1.0).abs() < 1e-12 && c.center.y.abs() < 1e-12);
        assert!((c.radius - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sec_empty_is_error() {
        assert!(matches!(
            smallest_enclosing_circle(&[]),
            Err(Error::NoPoints)
        ));
    }

    #[test]
    fn sec_collinear_uses_extreme_pair() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(4.0, 4.0),
            Point::new(2.0, 2.0),
        ];
        let c = smallest_enclosing_circle(&pts).unwrap();
        assert!((c.center.x - 2.0).abs() < 1e-9 && (c.center.y - 2.0).abs() < 1e-9);
        assert!((c.radius - 8f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn sec_duplicate_points() {
        let pts = vec![Point::new(5.0, -3.0); 10];
        let c = smallest_enclosing_circle(&pts).unwrap();
        assert_eq!(c.radius, 0.0);
    }

    #[test]
    fn circumcircle_right_triangle() {
        let c = circumcircle(
            Point::new(0.0, 0.0),
            Point::new(4.0, 0.0),
            Point::new(0.0, 3.0),
        )
        .unwrap();
        assert!((c.radius - 2.5).abs() < 1e-12);
        assert!(circumcircle(
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0)
        )
        .is_none());
    }
}
