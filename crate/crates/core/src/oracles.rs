//! Slow, independent reference implementations used to cross-check the
//! production algorithms.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::allocation::{solve_instance, AllocationSolution, Candidate, QpInstance, QpSettings};
use crate::error::{Error, Result};
use crate::geometry::{smallest_enclosing_circle_seeded, Circle, Point};
use crate::intra_beam::{required_fractions, schedule_carriers, schedule_in_order};
use crate::link_budget::spectral_efficiency;
use crate::mapping::best_rate_beam;

// ---------------------------------------------------------------- circles

fn dist(a: Point, b: Point) -> f64 {
    ((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y)).sqrt()
}

fn pair_circle(a: Point, b: Point) -> Circle {
    Circle::new(
        Point::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)),
        0.5 * dist(a, b),
    )
}

// Minimal circle of three points: the diameter circle of the longest side
// when the triangle is right or obtuse, the circumcircle otherwise.
fn triple_circle(a: Point, b: Point, c: Point) -> Circle {
    let (ab, bc, ca) = (dist(a, b), dist(b, c), dist(c, a));
    let sides = [(ab, a, b, c), (bc, b, c, a), (ca, c, a, b)];
    let &(longest, p, q, r) = sides
        .iter()
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .expect("three sides");
    let others: f64 = sides.iter().map(|s| s.0 * s.0).sum::<f64>() - longest * longest;
    let d = 2.0 * ((q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x));
    if longest * longest >= others || d.abs() <= 1e-12 * longest * longest {
        return pair_circle(p, q);
    }
    // Circumcenter relative to p.
    let (bx, by) = (q.x - p.x, q.y - p.y);
    let (cx, cy) = (r.x - p.x, r.y - p.y);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    let center = Point::new(p.x + ux, p.y + uy);
    Circle::new(center, (ux * ux + uy * uy).sqrt())
}

/// Smallest enclosing circle by exhaustive search: the largest minimal
/// circle over all subsets of at most three points.
pub fn sec_brute_force(points: &[Point]) -> Result<Circle> {
    if points.is_empty() {
        return Err(Error::NoPoints);
    }
    let n = points.len();
    let mut best = Circle::new(points[0], 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let c = pair_circle(points[i], points[j]);
            if c.radius > best.radius {
                best = c;
            }
            for k in j + 1..n {
                let c = triple_circle(points[i], points[j], points[k]);
                if c.radius > best.radius {
                    best = c;
                }
            }
        }
    }
    Ok(best)
}

/// Random point set of 1..=`max_points` points; clustered, uniform or
/// nearly collinear.
pub fn random_point_set(rng: &mut ChaCha8Rng, max_points: usize) -> Vec<Point> {
    let n = rng.random_range(1..=max_points);
    let shape = rng.random_range(0..3);
    let scale = 10f64.powf(rng.random_range(-1.0..3.0));
    (0..n)
        .map(|_| match shape {
            0 => Point::new(
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
            ),
            1 => {
                let t: f64 = rng.random_range(-scale..scale);
                Point::new(t, 0.5 * t + rng.random_range(-1e-3..1e-3) * scale)
            }
            _ => {
                let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let r = scale * rng.random::<f64>().sqrt();
                Point::new(100.0 + r * a.cos(), -40.0 + r * a.sin())
            }
        })
        .collect()
}

// ---------------------------------------------------------------- QP

/// Random small allocation instance with at most `max_beams` beams and
/// `max_users` users; caps are drawn so that constraints are often active.
pub fn random_qp_instance(rng: &mut ChaCha8Rng, max_beams: usize, max_users: usize) -> QpInstance {
    let beams = rng.random_range(1..=max_beams);
    let users = rng.random_range(1..=max_users);
    let paired = rng.random_bool(0.5);
    let beam_group: Vec<usize> = if paired {
        (0..beams).map(|k| k / 2).collect()
    } else {
        (0..beams).collect()
    };
    let groups = beam_group.iter().max().map_or(0, |g| g + 1);
    let group_caps = (0..groups).map(|_| rng.random_range(5.0..250.0)).collect();
    let mut candidates = Vec::with_capacity(users);
    let mut demands = Vec::with_capacity(users);
    for _ in 0..users {
        demands.push(rng.random_range(1.0..80.0));
        let mut cands = Vec::new();
        for beam in 0..beams {
            if rng.random_bool(0.6) {
                cands.push(Candidate {
                    beam,
                    efficiency: rng.random_range(0.3..6.0),
                });
            }
        }
        if cands.is_empty() {
            cands.push(Candidate {
                beam: rng.random_range(0..beams),
                efficiency: rng.random_range(0.3..6.0),
            });
        }
        candidates.push(cands);
    }
    QpInstance {
        beams,
        demands,
        candidates,
        beam_group,
        group_caps,
        user_cap: 62.5,
    }
}

// Euclidean projection onto {x >= 0, sum x <= cap}.
fn project_capped_simplex(v: &mut [f64], cap: f64) {
    for x in v.iter_mut() {
        *x = x.max(0.0);
    }
    if v.iter().sum::<f64>() <= cap {
        return;
    }
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &u) in s.iter().enumerate() {
        acc += u;
        let t = (acc - cap) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

struct Layout {
    user_vars: Vec<Vec<usize>>,
    group_vars: Vec<Vec<usize>>,
}

fn layout(inst: &QpInstance) -> Layout {
    let mut user_vars = Vec::new();
    let mut group_vars = vec![Vec::new(); inst.group_caps.len()];
    let mut j = 0;
    for cands in &inst.candidates {
        let mut v = Vec::new();
        for c in cands {
            v.push(j);
            group_vars[inst.beam_group[c.beam]].push(j);
            j += 1;
        }
        user_vars.push(v);
    }
    Layout {
        user_vars,
        group_vars,
    }
}

fn project_sets(
    x: &mut [f64],
    sets: &[Vec<usize>],
    caps: impl Fn(usize) -> f64,
    buf: &mut Vec<f64>,
) {
    for (i, set) in sets.iter().enumerate() {
        buf.clear();
        buf.extend(set.iter().map(|&j| x[j]));
        project_capped_simplex(buf, caps(i));
        for (&j, &v) in set.iter().zip(buf.iter()) {
            x[j] = v;
        }
    }
}

// Dykstra's alternating projection onto (user caps) ∩ (group caps).
fn project_feasible(inst: &QpInstance, lay: &Layout, v: &[f64], max_rounds: usize) -> Vec<f64> {
    let n = v.len();
    let mut x = v.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut buf = Vec::new();
    for _ in 0..max_rounds {
        let mut y: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        project_sets(&mut y, &lay.user_vars, |_| inst.user_cap, &mut buf);
        for j in 0..n {
            p[j] = x[j] + p[j] - y[j];
        }
        let mut z: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
        project_sets(&mut z, &lay.group_vars, |g| inst.group_caps[g], &mut buf);
        for j in 0..n {
            q[j] = y[j] + q[j] - z[j];
        }
        let change = x
            .iter()
            .zip(&z)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        x = z;
        if change < 1e-13 {
            break;
        }
    }
    // Finish inside both sets.
    project_sets(&mut x, &lay.user_vars, |_| inst.user_cap, &mut buf);
    project_sets(&mut x, &lay.group_vars, |g| inst.group_caps[g], &mut buf);
    x
}

fn flat_objective(inst: &QpInstance, lay: &Layout, x: &[f64]) -> f64 {
    inst.candidates
        .iter()
        .zip(&lay.user_vars)
        .zip(&inst.demands)
        .map(|((c, vars), d)| {
            let r: f64 = c.iter().zip(vars).map(|(c, &j)| c.efficiency * x[j]).sum();
            (d - r) * (d - r)
        })
        .sum()
}

/// Optimal objective by accelerated projected gradient (FISTA with
/// adaptive restart), projections by Dykstra's algorithm.
pub fn qp_first_order(inst: &QpInstance, iterations: usize) -> (Vec<Vec<f64>>, f64) {
    let lay = layout(inst);
    let n: usize = lay.user_vars.iter().map(Vec::len).sum();
    let lip = inst
        .candidates
        .iter()
        .map(|c| 2.0 * c.iter().map(|c| c.efficiency * c.efficiency).sum::<f64>())
        .fold(1e-12, f64::max);
    let mut x = vec![0.0; n];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut fx = flat_objective(inst, &lay, &x);
    let mut grad = vec![0.0; n];
    let mut quiet = 0;
    for _ in 0..iterations {
        for (i, vars) in lay.user_vars.iter().enumerate() {
            let r: f64 = inst.candidates[i]
                .iter()
                .zip(vars)
                .map(|(c, &j)| c.efficiency * y[j])
                .sum();
            for (c, &j) in inst.candidates[i].iter().zip(vars) {
                grad[j] = 2.0 * c.efficiency * (r - inst.demands[i]);
            }
        }
        let step: Vec<f64> = y.iter().zip(&grad).map(|(a, g)| a - g / lip).collect();
        let xn = project_feasible(inst, &lay, &step, 500);
        let fxn = flat_objective(inst, &lay, &xn);
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let moved = xn
            .iter()
            .zip(&x)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if fxn > fx {
            // Restart momentum.
            t = 1.0;
            y = x.clone();
            continue;
        }
        for j in 0..n {
            y[j] = xn[j] + (t - 1.0) / tn * (xn[j] - x[j]);
        }
        x = xn;
        fx = fxn;
        t = tn;
        if moved < 1e-12 {
            quiet += 1;
            if quiet > 50 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    let shaped = lay
        .user_vars
        .iter()
        .map(|v| v.iter().map(|&j| x[j]).collect())
        .collect();
    (shaped, fx)
}

/// `|a - b| / max(|a|, |b|, 1)`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Outcome of checking the production solver on one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpCheck {
    pub objective_gap: f64,
    pub kkt: f64,
    pub violation_mhz: f64,
}

pub fn check_qp_instance(inst: &QpInstance, oracle_iterations: usize) -> Result<QpCheck> {
    let sol: AllocationSolution = solve_instance(inst, &QpSettings::default())?;
    let (_, oracle_obj) = qp_first_order(inst, oracle_iterations);
    Ok(QpCheck {
        objective_gap: relative_gap(sol.objective, oracle_obj),
        kkt: sol.kkt_residuals(inst).max(),
        violation_mhz: sol.max_violation(inst),
    })
}

// ---------------------------------------------------------------- remap

/// Serving beam by exhaustive comparison of all beams' rates, lowest index
/// on ties and `None` if every rate is zero.
pub fn argmax_beam(rates: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &r) in rates.iter().enumerate() {
        if r <= 0.0 {
            continue;
        }
        match best {
            Some(b) if rates[b] >= r => {}
            _ => best = Some(k),
        }
    }
    best
}

// ---------------------------------------------------------------- carriers

/// Best total offered rate over every assignment of users to carriers, with
/// the time of each carrier split optimally (highest full-carrier rate
/// first). Exponential in the number of users.
pub fn best_carrier_assignment(
    targets: &[f64],
    snr: &[f64],
    carriers: usize,
    carrier_bandwidth_mhz: f64,
) -> f64 {
    let n = targets.len();
    if carriers == 0 || n == 0 {
        return 0.0;
    }
    let f = required_fractions(targets, snr, carrier_bandwidth_mhz);
    let full: Vec<f64> = snr
        .iter()
        .map(|&s| carrier_bandwidth_mhz * spectral_efficiency(s))
        .collect();
    let mut assign = vec![0usize; n];
    let mut best = 0.0f64;
    loop {
        let mut total = 0.0;
        for c in 0..carriers {
            let mut members: Vec<usize> = (0..n).filter(|&i| assign[i] == c).collect();
            members.sort_by(|&a, &b| full[b].total_cmp(&full[a]));
            let mut left = 1.0f64;
            for i in members {
                let w = f[i].min(left);
                left -= w;
                total += w * full[i];
            }
        }
        best = best.max(total);
        // Next assignment in mixed radix.
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            assign[i] += 1;
            if assign[i] < carriers {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
    }
}

/// Per-user rate targets whose carrier-time fractions sum to between 60 %
/// and 100 % of the available carriers, as produced by the per-beam
/// water-filling that feeds the scheduler.
pub fn packing_targets(rng: &mut ChaCha8Rng, snr: &[f64], carriers: usize) -> Vec<f64> {
    let raw: Vec<f64> = snr.iter().map(|_| rng.random_range(0.05..1.0)).collect();
    let load = carriers as f64 * rng.random_range(0.6..1.0);
    let sum: f64 = raw.iter().sum();
    raw.iter()
        .zip(snr)
        .map(|(w, &s)| (w / sum * load).min(1.0) * 62.5 * spectral_efficiency(s))
        .collect()
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq)]
pub struct OracleLine {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleReport {
    pub lines: Vec<OracleLine>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(
                f,
                "{} {:<28} {}",
                if l.passed { "PASS" } else { "FAIL" },
                l.name,
                l.detail
            )?;
        }
        Ok(())
    }
}

fn instance_rng(seed: u64, stream: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream);
    rng
}

/// Largest center/radius difference between the incremental and the
/// brute-force enclosing circle over `instances` random point sets.
pub fn sec_max_error(instances: usize, max_points: usize, seed: u64) -> f64 {
    (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, 1, i);
            let pts = random_point_set(&mut rng, max_points);
            let fast = smallest_enclosing_circle_seeded(&pts, i as u64).expect("nonempty");
            let slow = sec_brute_force(&pts).expect("nonempty");
            dist(fast.center, slow.center).max((fast.radius - slow.radius).abs())
        })
        .reduce(|| 0.0, f64::max)
}

/// Worst objective gap, KKT residual and violation over random instances.
pub fn qp_worst_case(instances: usize, seed: u64, oracle_iterations: usize) -> Result<QpCheck> {
    let checks: Vec<Result<QpCheck>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, 2, i);
            let inst = random_qp_instance(&mut rng, 4, 12);
            check_qp_instance(&inst, oracle_iterations)
        })
        .collect();
    let mut worst = QpCheck {
        objective_gap: 0.0,
        kkt: 0.0,
        violation_mhz: 0.0,
    };
    for c in checks {
        let c = c?;
        worst.objective_gap = worst.objective_gap.max(c.objective_gap);
        worst.kkt = worst.kkt.max(c.kkt);
        worst.violation_mhz = worst.violation_mhz.max(c.violation_mhz);
    }
    Ok(worst)
}

/// Run every oracle comparison on `instances` random instances each.
pub fn run_all(instances: usize, seed: u64, jobs: usize) -> Result<OracleReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let mut report = OracleReport::default();

        let sec = sec_max_error(instances, 200, seed);
        report.lines.push(OracleLine {
            name: "enclosing circle",
            passed: sec <= 1e-6,
            detail: format!("max center/radius error {sec:.3e} km"),
        });

        let qp = qp_worst_case(instances, seed, 20_000)?;
        report.lines.push(OracleLine {
            name: "bandwidth allocation",
            passed: qp.objective_gap <= 1e-4 && qp.kkt <= 1e-6 && qp.violation_mhz <= 1e-9,
            detail: format!(
                "objective gap {:.3e}, kkt {:.3e}, violation {:.3e} MHz",
                qp.objective_gap, qp.kkt, qp.violation_mhz
            ),
        });

        let mut mismatches = 0;
        let mut rng = instance_rng(seed, 3, 0);
        for _ in 0..instances {
            let beams = rng.random_range(1..=6);
            let rates: Vec<f64> = (0..beams)
                .map(|_| if rng.random_bool(0.2) { 0.0 } else { (rng.random_range(0..8) as f64) * 3.5 })
                .collect();
            let fast = best_rate_beam(rates.iter().copied().enumerate());
            if fast != argmax_beam(&rates) {
                mismatches += 1;
            }
        }
        report.lines.push(OracleLine {
            name: "best-rate remap",
            passed: mismatches == 0,
            detail: format!("{mismatches} mismatches"),
        });

        let mut over = 0;
        let mut beaten = 0;
        let mut lpt_total = 0.0;
        let mut rnd_total = 0.0;
        let mut opt_total = 0.0;
        for _ in 0..instances.min(500) {
            let n = rng.random_range(1..=8);
            let carriers = rng.random_range(1..=3);
            let snr: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..30.0)).collect();
            let targets = packing_targets(&mut rng, &snr, carriers);
            let lpt = schedule_carriers(&targets, &snr, carriers, 62.5).total_offered();
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let rnd = schedule_in_order(&targets, &snr, carriers, 62.5, &order).total_offered();
            let opt = best_carrier_assignment(&targets, &snr, carriers, 62.5);
            if lpt > opt * (1.0 + 1e-12) + 1e-9 || rnd > opt * (1.0 + 1e-12) + 1e-9 {
                over += 1;
            }
            if lpt < rnd * (1.0 - 1e-12) {
                beaten += 1;
            }
            lpt_total += lpt;
            rnd_total += rnd;
            opt_total += opt;
        }
        report.lines.push(OracleLine {
            name: "carrier packing",
            passed: over == 0 && lpt_total >= rnd_total,
            detail: format!(
                "greedy/optimal {:.4}, random-order/optimal {:.4}, greedy beaten on {beaten} instances",
                lpt_total / opt_total,
                rnd_total / opt_total
            ),
        });
        Ok(report)
    })
}
