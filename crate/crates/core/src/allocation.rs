//! Continuous bandwidth allocation across beams.
//!
//! The problem solved here is
//!
//! ```text
//! min  sum_n (d_n - sum_k e_nk v_nk)^2
//! s.t. v_nk >= 0
//!      sum_k v_nk <= W~                      (per user, one carrier)
//!      sum_{(n,k) in g} v_nk <= B_g          (per budget group)
//! ```
//!
//! where `e_nk = log2(1 + snr_kn)` is the spectral efficiency of user `n`
//! on beam `k` and a budget group is either a TWTA pair sharing the full band
//! (flexible bandwidth) or a single beam with a fixed cap.
//!
//! Users only couple through budget groups, so the instance is split into
//! connected components, each solved by a primal-dual interior-point method.
//! The Newton system is block diagonal per user plus a dense Schur complement
//! of the size of the number of groups in the component, so a step costs
//! `O(users + groups^3)`.

#![allow(clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, Point};
use crate::link_budget::{spectral_efficiency, LinkModel};
use crate::traffic::User;

/// Beams served by the same amplifier, `{2j, 2j+1}` (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwtaPairing {
    pub pairs: Vec<Vec<usize>>,
}

impl TwtaPairing {
    /// Consecutive pairing of `beams` beams; an odd last beam has its own
    /// amplifier.
    pub fn consecutive(beams: usize) -> Self {
        let pairs = (0..beams)
            .step_by(2)
            .map(|k| {
                if k + 1 < beams {
                    vec![k, k + 1]
                } else {
                    vec![k]
                }
            })
            .collect();
        Self { pairs }
    }

    /// Pair index of each beam.
    pub fn pair_of_beam(&self) -> Vec<usize> {
        let n = self.pairs.iter().flatten().max().map_or(0, |m| m + 1);
        let mut out = vec![usize::MAX; n];
        for (j, pair) in self.pairs.iter().enumerate() {
            for &k in pair {
                out[k] = j;
            }
        }
        out
    }
}

/// Which bandwidth constraint couples the beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandwidthMode {
    /// Beams of a TWTA pair share the whole band: `W_a + W_b <= W_total`.
    Flexible,
    /// Every beam keeps its nominal share: `W_k <= M * W~`.
    Fixed,
}

/// Bandwidth budget groups and their caps (MHz).
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthBudget {
    pub beam_group: Vec<usize>,
    pub group_caps: Vec<f64>,
}

impl BandwidthBudget {
    pub fn pairs(pairing: &TwtaPairing, total_mhz: f64) -> Self {
        Self {
            beam_group: pairing.pair_of_beam(),
            group_caps: vec![total_mhz; pairing.pairs.len()],
        }
    }

    pub fn per_beam(caps_mhz: Vec<f64>) -> Self {
        Self {
            beam_group: (0..caps_mhz.len()).collect(),
            group_caps: caps_mhz,
        }
    }

    pub fn for_mode(mode: BandwidthMode, pairing: &TwtaPairing, params: &CarrierPlan) -> Self {
        match mode {
            BandwidthMode::Flexible => Self::pairs(pairing, params.total_bandwidth_mhz),
            BandwidthMode::Fixed => {
                let beams = pairing.pair_of_beam().len();
                Self::per_beam(vec![params.nominal_beam_bandwidth(); beams])
            }
        }
    }
}

/// Carrier plan of the payload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierPlan {
    /// Band amplified by one TWTA, MHz.
    pub total_bandwidth_mhz: f64,
    /// Carriers per color, so the band holds `2M` carriers.
    pub carriers_per_color: usize,
}

impl Default for CarrierPlan {
    fn default() -> Self {
        Self {
            total_bandwidth_mhz: 500.0,
            carriers_per_color: 4,
        }
    }
}

impl CarrierPlan {
    /// Carrier bandwidth `W_total / 2M`.
    pub fn carrier_bandwidth(&self) -> f64 {
        self.total_bandwidth_mhz / (2 * self.carriers_per_color) as f64
    }

    /// Bandwidth of a beam under the uniform plan, `M * W~`.
    pub fn nominal_beam_bandwidth(&self) -> f64 {
        self.carriers_per_color as f64 * self.carrier_bandwidth()
    }

    pub fn carriers_per_pair(&self) -> usize {
        2 * self.carriers_per_color
    }
}

/// Per-carrier SNR of every (beam, user) pair at the current beam centers,
/// with a mask of the pairs the allocation may use.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierSnrMatrix {
    beams: usize,
    users: usize,
    snr: Vec<f64>,
    feasible: Vec<bool>,
}

impl CarrierSnrMatrix {
    /// Evaluate all pairs; a pair is feasible when the user lies within
    /// `max_radius_km` of the beam center.
    pub fn evaluate(
        model: &LinkModel,
        users: &[User],
        centers: &[Point],
        max_radius_km: f64,
    ) -> Self {
        let beams = centers.len();
        let n = users.len();
        let mut snr = Vec::with_capacity(beams * n);
        let mut feasible = Vec::with_capacity(beams * n);
        for c in centers {
            for u in users {
                let d = distance(u.position, *c);
                snr.push(model.snr_at_distance(d));
                feasible.push(d <= max_radius_km);
            }
        }
        Self {
            beams,
            users: n,
            snr,
            feasible,
        }
    }

    pub fn from_parts(
        beams: usize,
        users: usize,
        snr: Vec<f64>,
        feasible: Vec<bool>,
    ) -> Result<Self> {
        if snr.len() != beams * users || feasible.len() != beams * users {
            return Err(Error::InvalidInput("snr matrix dimensions".into()));
        }
        if snr.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidInput(
                "snr entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            beams,
            users,
            snr,
            feasible,
        })
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn snr(&self, beam: usize, user: usize) -> f64 {
        self.snr[beam * self.users + user]
    }

    pub fn is_feasible(&self, beam: usize, user: usize) -> bool {
        self.feasible[beam * self.users + user]
    }

    /// Keep, per user, only the `limit` feasible beams with the highest SNR
    /// (ties to the lower beam index).
    pub fn restrict_to_strongest(&mut self, limit: usize) {
        for n in 0..self.users {
            let mut feas: Vec<usize> = (0..self.beams)
                .filter(|&k| self.is_feasible(k, n))
                .collect();
            if feas.len() <= limit {
                continue;
            }
            feas.sort_by(|&a, &b| self.snr(b, n).total_cmp(&self.snr(a, n)).then(a.cmp(&b)));
            for &k in &feas[limit..] {
                self.feasible[k * self.users + n] = false;
            }
        }
    }

    /// Feasible beams of `user`, in beam order.
    pub fn feasible_beams(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.beams).filter(move |&k| self.is_feasible(k, user))
    }
}

/// One usable (user, beam) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub beam: usize,
    /// Rate per unit bandwidth, Mbps/MHz.
    pub efficiency: f64,
}

/// Self-contained description of an allocation QP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpInstance {
    pub beams: usize,
    pub demands: Vec<f64>,
    pub candidates: Vec<Vec<Candidate>>,
    pub beam_group: Vec<usize>,
    pub group_caps: Vec<f64>,
    /// Per-user bandwidth cap, one carrier, MHz.
    pub user_cap: f64,
}

impl QpInstance {
    pub fn new(
        users: &[User],
        snr: &CarrierSnrMatrix,
        budget: &BandwidthBudget,
        user_cap: f64,
    ) -> Result<Self> {
        if snr.users() != users.len() {
            return Err(Error::InvalidInput(format!(
                "snr matrix has {} users, expected {}",
                snr.users(),
                users.len()
            )));
        }
        if budget.beam_group.len() != snr.beams() {
            return Err(Error::BeamCountMismatch {
                expected: snr.beams(),
                got: budget.beam_group.len(),
            });
        }
        let candidates = (0..users.len())
            .map(|n| {
                snr.feasible_beams(n)
                    .map(|k| Candidate {
                        beam: k,
                        efficiency: spectral_efficiency(snr.snr(k, n)),
                    })
                    .filter(|c| c.efficiency > 0.0)
                    .collect()
            })
            .collect();
        Ok(Self {
            beams: snr.beams(),
            demands: users.iter().map(|u| u.demand).collect(),
            candidates,
            beam_group: budget.beam_group.clone(),
            group_caps: budget.group_caps.clone(),
            user_cap,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.demands.len() != self.candidates.len() {
            return Err(Error::InvalidInput(
                "demand/candidate length mismatch".into(),
            ));
        }
        if self.beam_group.len() != self.beams {
            return Err(Error::InvalidInput(
                "beam_group length must equal beam count".into(),
            ));
        }
        if self.beam_group.iter().any(|&g| g >= self.group_caps.len()) {
            return Err(Error::InvalidInput("beam assigned to unknown group".into()));
        }
        if self.group_caps.iter().any(|c| !c.is_finite() || *c < 0.0)
            || self.user_cap.is_nan()
            || self.user_cap <= 0.0
        {
            return Err(Error::InvalidInput(
                "caps must be finite and nonnegative".into(),
            ));
        }
        for (d, cands) in self.demands.iter().zip(&self.candidates) {
            if !d.is_finite() || *d < 0.0 {
                return Err(Error::InvalidInput(
                    "demands must be finite and nonnegative".into(),
                ));
            }
            for c in cands {
                if c.beam >= self.beams || !c.efficiency.is_finite() || c.efficiency < 0.0 {
                    return Err(Error::InvalidInput("bad candidate".into()));
                }
            }
        }
        Ok(())
    }

    /// Quadratic unmet objective of an allocation given as per-candidate
    /// bandwidths.
    pub fn objective(&self, bandwidth: &[Vec<f64>]) -> f64 {
        self.demands
            .iter()
            .zip(&self.candidates)
            .zip(bandwidth)
            .map(|((d, cands), bw)| {
                let r: f64 = cands.iter().zip(bw).map(|(c, v)| c.efficiency * v).sum();
                (d - r) * (d - r)
            })
            .sum()
    }

    fn gradient_scale(&self) -> f64 {
        self.demands
            .iter()
            .zip(&self.candidates)
            .flat_map(|(d, cands)| cands.iter().map(move |c| 2.0 * d * c.efficiency))
            .fold(1.0, f64::max)
    }
}

/// Bandwidth a user receives from one beam and the resulting rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub beam: usize,
    pub bandwidth: f64,
    pub rate: f64,
}

/// Relative KKT residuals of a solution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

/// Lagrange multipliers in the units of the original problem.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QpDuals {
    pub user_cap: Vec<f64>,
    pub group_cap: Vec<f64>,
    /// Multipliers of `v >= 0`, aligned with the user shares.
    pub bound: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationSolution {
    /// Per user, one share per candidate beam (in candidate order).
    pub user_shares: Vec<Vec<Share>>,
    /// Total rate per user, Mbps.
    pub user_rate: Vec<f64>,
    /// Bandwidth per beam, MHz.
    pub beam_bandwidth: Vec<f64>,
    /// Quadratic unmet objective, Mbps^2.
    pub objective: f64,
    pub duals: QpDuals,
    pub kkt: KktReport,
    pub iterations: usize,
}

impl AllocationSolution {
    /// Bandwidth of user `n` on beam `k` (zero if not a candidate).
    pub fn bandwidth(&self, user: usize, beam: usize) -> f64 {
        self.user_shares[user]
            .iter()
            .find(|s| s.beam == beam)
            .map_or(0.0, |s| s.bandwidth)
    }

    /// Relaxed offered rate of user `n` on beam `k`.
    pub fn rate(&self, user: usize, beam: usize) -> f64 {
        self.user_shares[user]
            .iter()
            .find(|s| s.beam == beam)
            .map_or(0.0, |s| s.rate)
    }

    /// The (up to) two beams giving user `n` the highest relaxed rate.
    pub fn best_two(&self, user: usize) -> Vec<Share> {
        let mut shares = self.user_shares[user].clone();
        shares.sort_by(|a, b| b.rate.total_cmp(&a.rate).then(a.beam.cmp(&b.beam)));
        shares.truncate(2);
        shares
    }

    /// Largest constraint violation in MHz.
    pub fn max_violation(&self, instance: &QpInstance) -> f64 {
        let mut worst: f64 = 0.0;
        for shares in &self.user_shares {
            let total: f64 = shares.iter().map(|s| s.bandwidth).sum();
            worst = worst.max(total - instance.user_cap);
            for s in shares {
                worst = worst.max(-s.bandwidth);
            }
        }
        let mut group_use = vec![0.0; instance.group_caps.len()];
        for (k, w) in self.beam_bandwidth.iter().enumerate() {
            group_use[instance.beam_group[k]] += w;
        }
        for (u, cap) in group_use.iter().zip(&instance.group_caps) {
            worst = worst.max(u - cap);
        }
        worst.max(0.0)
    }

    /// KKT residuals of the pure quadratic unmet problem, recomputed from the
    /// primal and dual values. Stationarity and dual signs are relative to
    /// the largest gradient entry at zero allocation, primal violations to
    /// the largest cap, and complementarity is the natural residual
    /// `min(slack, multiplier)` in the same units.
    pub fn kkt_residuals(&self, instance: &QpInstance) -> KktReport {
        let gscale = instance.gradient_scale();
        let bscale = instance
            .group_caps
            .iter()
            .copied()
            .fold(instance.user_cap, f64::max)
            .max(1e-12);
        let natural = |slack: f64, mult: f64| (slack.abs() / bscale).min(mult.abs() / gscale);
        let mut report = KktReport::default();
        let mut group_use = vec![0.0; instance.group_caps.len()];
        for (n, cands) in instance.candidates.iter().enumerate() {
            let shares = &self.user_shares[n];
            let rate: f64 = cands
                .iter()
                .zip(shares)
                .map(|(c, s)| c.efficiency * s.bandwidth)
                .sum();
            let yu = self.duals.user_cap[n];
            let used: f64 = shares.iter().map(|s| s.bandwidth).sum();
            report.primal = report
                .primal
                .max((used - instance.user_cap).max(0.0) / bscale);
            report.complementarity = report
                .complementarity
                .max(natural(instance.user_cap - used, yu));
            report.dual = report.dual.max((-yu).max(0.0) / gscale);
            for (j, (c, s)) in cands.iter().zip(shares).enumerate() {
                let g = instance.beam_group[c.beam];
                group_use[g] += s.bandwidth;
                let z = self.duals.bound[n][j];
                let grad = 2.0 * c.efficiency * (rate - instance.demands[n]);
                let r = grad + yu + self.duals.group_cap[g] - z;
                report.stationarity = report.stationarity.max(r.abs() / gscale);
                report.primal = report.primal.max((-s.bandwidth).max(0.0) / bscale);
                report.dual = report.dual.max((-z).max(0.0) / gscale);
                report.complementarity = report.complementarity.max(natural(s.bandwidth, z));
            }
        }
        for (g, (u, cap)) in group_use.iter().zip(&instance.group_caps).enumerate() {
            let y = self.duals.group_cap[g];
            report.primal = report.primal.max((u - cap).max(0.0) / bscale);
            report.complementarity = report.complementarity.max(natural(cap - u, y));
            report.dual = report.dual.max((-y).max(0.0) / gscale);
        }
        report
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpSettings {
    /// Convergence threshold on the relative KKT residuals.
    pub kkt_tolerance: f64,
    pub max_iterations: usize,
    /// Linear bandwidth cost, relative to the gradient scale, that selects the
    /// most spectrally efficient split when the rate optimum is not unique.
    pub tie_break: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            kkt_tolerance: 1e-6,
            max_iterations: 200,
            tie_break: 1e-7,
        }
    }
}

/// Solve the allocation QP for the given bandwidth mode.
pub fn solve_qp(
    users: &[User],
    snr: &CarrierSnrMatrix,
    pairing: &TwtaPairing,
    mode: BandwidthMode,
    plan: &CarrierPlan,
    settings: &QpSettings,
) -> Result<AllocationSolution> {
    let budget = BandwidthBudget::for_mode(mode, pairing, plan);
    let instance = QpInstance::new(users, snr, &budget, plan.carrier_bandwidth())?;
    solve_instance(&instance, settings)
}

/// Solve a prepared instance.
pub fn solve_instance(instance: &QpInstance, settings: &QpSettings) -> Result<AllocationSolution> {
    instance.validate()?;
    let n_users = instance.demands.len();
    let n_groups = instance.group_caps.len();

    let mut sol = AllocationSolution {
        user_shares: instance
            .candidates
            .iter()
            .map(|cands| {
                cands
                    .iter()
                    .map(|c| Share {
                        beam: c.beam,
                        bandwidth: 0.0,
                        rate: 0.0,
                    })
                    .collect()
            })
            .collect(),
        user_rate: vec![0.0; n_users],
        beam_bandwidth: vec![0.0; instance.beams],
        objective: 0.0,
        duals: QpDuals {
            user_cap: vec![0.0; n_users],
            group_cap: vec![0.0; n_groups],
            bound: instance
                .candidates
                .iter()
                .map(|c| vec![0.0; c.len()])
                .collect(),
        },
        kkt: KktReport::default(),
        iterations: 0,
    };

    let mut failure: Option<(usize, f64)> = None;
    for component in components(instance) {
        let block = ComponentProblem::build(instance, &component, settings.tie_break);
        let out = block.solve(settings);
        sol.iterations = sol.iterations.max(out.iterations);
        block.write_back(instance, &out, &mut sol);
        if !out.converged {
            let prev = failure.map_or(0.0, |f| f.1);
            failure = Some((out.iterations, prev.max(out.residual)));
        }
    }

    repair_feasibility(instance, &mut sol);
    for (n, shares) in sol.user_shares.iter_mut().enumerate() {
        let mut total = 0.0;
        for (s, c) in shares.iter_mut().zip(&instance.candidates[n]) {
            s.rate = s.bandwidth * c.efficiency;
            total += s.rate;
        }
        sol.user_rate[n] = total;
    }
    sol.beam_bandwidth = vec![0.0; instance.beams];
    for shares in &sol.user_shares {
        for s in shares {
            sol.beam_bandwidth[s.beam] += s.bandwidth;
        }
    }
    sol.objective = instance
        .demands
        .iter()
        .zip(&sol.user_rate)
        .map(|(d, r)| (d - r) * (d - r))
        .sum();
    sol.kkt = sol.kkt_residuals(instance);

    if sol.kkt.max() > settings.kkt_tolerance {
        let (iterations, _) = failure.unwrap_or((sol.iterations, 0.0));
        return Err(Error::NotConverged {
            iterations,
            residual: sol.kkt.max(),
            best: Box::new(sol),
        });
    }
    Ok(sol)
}

// Scale bandwidths down where rounding left a constraint violated by a few
// ulps, so that returned solutions are feasible to machine precision.
fn repair_feasibility(instance: &QpInstance, sol: &mut AllocationSolution) {
    for shares in sol.user_shares.iter_mut() {
        for s in shares.iter_mut() {
            s.bandwidth = s.bandwidth.max(0.0);
        }
        let total: f64 = shares.iter().map(|s| s.bandwidth).sum();
        if total > instance.user_cap {
            let f = instance.user_cap / total;
            shares.iter_mut().for_each(|s| s.bandwidth *= f);
        }
    }
    let mut group_use = vec![0.0; instance.group_caps.len()];
    for shares in &sol.user_shares {
        for s in shares {
            group_use[instance.beam_group[s.beam]] += s.bandwidth;
        }
    }
    let factors: Vec<f64> = group_use
        .iter()
        .zip(&instance.group_caps)
        .map(|(u, cap)| {
            if *u > *cap {
                cap / u * (1.0 - 1e-15)
            } else {
                1.0
            }
        })
        .collect();
    if factors.iter().any(|&f| f < 1.0) {
        for shares in sol.user_shares.iter_mut() {
            for s in shares.iter_mut() {
                s.bandwidth *= factors[instance.beam_group[s.beam]];
            }
        }
    }
}

/// Users and groups of one connected component.
struct Component {
    users: Vec<usize>,
    groups: Vec<usize>,
}

fn components(instance: &QpInstance) -> Vec<Component> {
    let g = instance.group_caps.len();
    let mut parent: Vec<usize> = (0..g).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for cands in &instance.candidates {
        let mut it = cands.iter().map(|c| instance.beam_group[c.beam]);
        if let Some(first) = it.next() {
            for other in it {
                let (a, b) = (find(&mut parent, first), find(&mut parent, other));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut by_root: Vec<Option<usize>> = vec![None; g];
    let mut out: Vec<Component> = Vec::new();
    for grp in 0..g {
        let r = find(&mut parent, grp);
        let idx = *by_root[r].get_or_insert_with(|| {
            out.push(Component {
                users: Vec::new(),
                groups: Vec::new(),
            });
            out.len() - 1
        });
        out[idx].groups.push(grp);
    }
    for (n, cands) in instance.candidates.iter().enumerate() {
        if let Some(c) = cands.first() {
            let r = find(&mut parent, instance.beam_group[c.beam]);
            out[by_root[r].expect("root registered")].users.push(n);
        }
    }
    out.retain(|c| !c.users.is_empty());
    out
}

/// One component in scaled units: bandwidth in carriers, rate in units of
/// the largest demand.
struct ComponentProblem {
    users: Vec<usize>,
    groups: Vec<usize>,
    // Block layout: variables of user i are offsets[i]..offsets[i+1].
    offsets: Vec<usize>,
    demand: Vec<f64>,
    eff: Vec<f64>,
    var_group: Vec<usize>,
    group_cap: Vec<f64>,
    // Tie-break cost per variable: zero on each user's most efficient
    // candidate, a small constant on the others.
    tie: Vec<f64>,
    bw_unit: f64,
    rate_unit: f64,
}

struct IpmOutput {
    x: Vec<f64>,
    z: Vec<f64>,
    y_user: Vec<f64>,
    y_group: Vec<f64>,
    iterations: usize,
    converged: bool,
    residual: f64,
}

impl ComponentProblem {
    fn build(instance: &QpInstance, comp: &Component, tie_break: f64) -> Self {
        let bw_unit = instance.user_cap;
        let rate_unit = comp
            .users
            .iter()
            .map(|&n| instance.demands[n])
            .fold(0.0, f64::max)
            .max(1e-12);
        let mut local_group = vec![usize::MAX; instance.group_caps.len()];
        for (i, &g) in comp.groups.iter().enumerate() {
            local_group[g] = i;
        }
        let mut offsets = vec![0];
        let mut eff = Vec::new();
        let mut var_group = Vec::new();
        let mut demand = Vec::new();
        for &n in &comp.users {
            demand.push(instance.demands[n] / rate_unit);
            for c in &instance.candidates[n] {
                eff.push(c.efficiency * bw_unit / rate_unit);
                var_group.push(local_group[instance.beam_group[c.beam]]);
            }
            offsets.push(eff.len());
        }
        let group_cap = comp
            .groups
            .iter()
            .map(|&g| instance.group_caps[g] / bw_unit)
            .collect();
        let mut gmax: f64 = 0.0;
        for i in 0..demand.len() {
            for j in offsets[i]..offsets[i + 1] {
                gmax = gmax.max(2.0 * demand[i] * eff[j]);
            }
        }
        let unit_tie = tie_break * gmax.max(1.0);
        let mut tie = vec![unit_tie; eff.len()];
        for i in 0..demand.len() {
            let r = offsets[i]..offsets[i + 1];
            let best = r
                .clone()
                .reduce(|a, b| if eff[b] > eff[a] { b } else { a })
                .expect("component users have candidates");
            tie[best] = 0.0;
        }
        Self {
            users: comp.users.clone(),
            groups: comp.groups.clone(),
            offsets,
            demand,
            eff,
            var_group,
            group_cap,
            tie,
            bw_unit,
            rate_unit,
        }
    }

    fn write_back(&self, instance: &QpInstance, out: &IpmOutput, sol: &mut AllocationSolution) {
        let dual_unit = self.rate_unit * self.rate_unit / self.bw_unit;
        for (i, &n) in self.users.iter().enumerate() {
            for (j, v) in (self.offsets[i]..self.offsets[i + 1]).enumerate() {
                sol.user_shares[n][j].bandwidth = out.x[v] * self.bw_unit;
                // The tie-break cost is not part of the reported problem; it
                // is folded into the bound multiplier where that keeps it
                // nonnegative.
                let z = out.z[v] * dual_unit;
                let tie = self.tie[v] * dual_unit;
                sol.duals.bound[n][j] = if z >= tie { z - tie } else { z };
            }
            sol.duals.user_cap[n] = out.y_user[i] * dual_unit;
        }
        for (i, &g) in self.groups.iter().enumerate() {
            sol.duals.group_cap[g] = out.y_group[i] * dual_unit;
        }
        debug_assert_eq!(instance.candidates.len(), sol.user_shares.len());
    }

    fn nvars(&self) -> usize {
        self.eff.len()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.users.len() {
            let r = self.offsets[i]..self.offsets[i + 1];
            let rate: f64 = r.clone().map(|j| self.eff[j] * x[j]).sum();
            for j in r {
                out[j] = 2.0 * self.eff[j] * (rate - self.demand[i]) + self.tie[j];
            }
        }
    }

    fn solve(&self, settings: &QpSettings) -> IpmOutput {
        let nv = self.nvars();
        let nu = self.users.len();
        let ng = self.groups.len();
        let ncomp = (nv + nu + ng) as f64;

        // Interior starting point.
        let mut group_size = vec![0usize; ng];
        for &g in &self.var_group {
            group_size[g] += 1;
        }
        let mut x = vec![0.0; nv];
        for i in 0..nu {
            let m = (self.offsets[i + 1] - self.offsets[i]) as f64;
            for j in self.offsets[i]..self.offsets[i + 1] {
                let g = self.var_group[j];
                let share = (self.group_cap[g] / group_size[g] as f64).min(1.0 / m);
                x[j] = 0.5 * share.max(1e-6);
            }
        }
        let mut s_u = vec![0.0; nu];
        let mut s_g = vec![0.0; ng];
        self.slacks(&x, &mut s_u, &mut s_g);
        s_u.iter_mut().for_each(|s| *s = s.max(0.1));
        s_g.iter_mut().for_each(|s| *s = s.max(0.1));
        let mut z = vec![1.0; nv];
        let mut y_u = vec![1.0; nu];
        let mut y_g = vec![1.0; ng];

        let mut grad = vec![0.0; nv];
        let mut rd = vec![0.0; nv];
        let mut rpu = vec![0.0; nu];
        let mut rpg = vec![0.0; ng];
        let mut sys = NewtonSystem::new(self);

        let cscale = self.demand.iter().fold(1.0f64, |m, d| m.max(2.0 * d))
            * self.eff.iter().fold(1.0f64, |m, e| m.max(*e));
        let bscale = self.group_cap.iter().fold(1.0f64, |m, b| m.max(*b));

        let mut iterations = 0;
        let mut converged = false;
        let mut best: Option<(f64, [Vec<f64>; 4])> = None;
        let mut stall = 0;
        while iterations < settings.max_iterations {
            // Residuals.
            self.gradient(&x, &mut grad);
            for j in 0..nv {
                let i = self.user_of_var(j);
                rd[j] = grad[j] + y_u[i] + y_g[self.var_group[j]] - z[j];
            }
            self.primal_residuals(&x, &s_u, &s_g, &mut rpu, &mut rpg);
            let mu = (dot(&x, &z) + dot(&s_u, &y_u) + dot(&s_g, &y_g)) / ncomp;
            let rd_norm = inf_norm(&rd) / cscale;
            let rp_norm = inf_norm(&rpu).max(inf_norm(&rpg)) / bscale;
            let merit = rd_norm.max(rp_norm).max(mu);
            if best.as_ref().is_none_or(|b| merit < b.0) {
                best = Some((merit, [x.clone(), z.clone(), y_u.clone(), y_g.clone()]));
                stall = 0;
            } else {
                // Near the optimum the reduced system becomes ill-conditioned
                // and iterates can drift; keep the best one seen.
                stall += 1;
                if stall >= 5 {
                    break;
                }
            }
            if rd_norm <= 1e-10 && rp_norm <= 1e-12 && mu <= 1e-13 {
                converged = true;
                break;
            }
            iterations += 1;

            sys.factor(self, &x, &z, &s_u, &y_u, &s_g, &y_g);

            // Predictor.
            let rxz: Vec<f64> = x.iter().zip(&z).map(|(a, b)| -a * b).collect();
            let rsu: Vec<f64> = s_u.iter().zip(&y_u).map(|(a, b)| -a * b).collect();
            let rsg: Vec<f64> = s_g.iter().zip(&y_g).map(|(a, b)| -a * b).collect();
            let aff = sys.solve(
                self, &x, &z, &s_u, &y_u, &s_g, &y_g, &rd, &rpu, &rpg, &rxz, &rsu, &rsg,
            );
            let a_p = max_step(&x, &aff.dx)
                .min(max_step(&s_u, &aff.dsu))
                .min(max_step(&s_g, &aff.dsg));
            let a_d = max_step(&z, &aff.dz)
                .min(max_step(&y_u, &aff.dyu))
                .min(max_step(&y_g, &aff.dyg));
            let a_aff = a_p.min(a_d);
            let mu_aff = (shifted_dot(&x, &aff.dx, &z, &aff.dz, a_aff)
                + shifted_dot(&s_u, &aff.dsu, &y_u, &aff.dyu, a_aff)
                + shifted_dot(&s_g, &aff.dsg, &y_g, &aff.dyg, a_aff))
                / ncomp;
            let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
            let target = sigma * mu;

            // Corrector.
            let rxz: Vec<f64> = (0..nv)
                .map(|j| target - x[j] * z[j] - aff.dx[j] * aff.dz[j])
                .collect();
            let rsu: Vec<f64> = (0..nu)
                .map(|i| target - s_u[i] * y_u[i] - aff.dsu[i] * aff.dyu[i])
                .collect();
            let rsg: Vec<f64> = (0..ng)
                .map(|g| target - s_g[g] * y_g[g] - aff.dsg[g] * aff.dyg[g])
                .collect();
            let dir = sys.solve(
                self, &x, &z, &s_u, &y_u, &s_g, &y_g, &rd, &rpu, &rpg, &rxz, &rsu, &rsg,
            );
            let a_p = max_step(&x, &dir.dx)
                .min(max_step(&s_u, &dir.dsu))
                .min(max_step(&s_g, &dir.dsg));
            let a_d = max_step(&z, &dir.dz)
                .min(max_step(&y_u, &dir.dyu))
                .min(max_step(&y_g, &dir.dyg));
            let alpha = (0.995 * a_p.min(a_d)).min(1.0);
            if alpha < 1e-14 {
                break;
            }
            axpy(&mut x, alpha, &dir.dx);
            axpy(&mut z, alpha, &dir.dz);
            axpy(&mut s_u, alpha, &dir.dsu);
            axpy(&mut y_u, alpha, &dir.dyu);
            axpy(&mut s_g, alpha, &dir.dsg);
            axpy(&mut y_g, alpha, &dir.dyg);
        }
        let (residual, [x, z, y_u, y_g]) = best.expect("at least one iterate evaluated");
        if !converged {
            // Accept a stalled run when it is already accurate.
            converged = residual <= 1e-8;
        }
        IpmOutput {
            x,
            z,
            y_user: y_u,
            y_group: y_g,
            iterations,
            converged,
            residual,
        }
    }

    fn user_of_var(&self, j: usize) -> usize {
        self.offsets.partition_point(|&o| o <= j) - 1
    }

    fn slacks(&self, x: &[f64], s_u: &mut [f64], s_g: &mut [f64]) {
        for i in 0..self.users.len() {
            s_u[i] = 1.0 - x[self.offsets[i]..self.offsets[i + 1]].iter().sum::<f64>();
        }
        s_g.copy_from_slice(&self.group_cap);
        for (j, &g) in self.var_group.iter().enumerate() {
            s_g[g] -= x[j];
        }
    }

    fn primal_residuals(
        &self,
        x: &[f64],
        s_u: &[f64],
        s_g: &[f64],
        rpu: &mut [f64],
        rpg: &mut [f64],
    ) {
        for i in 0..self.users.len() {
            rpu[i] = x[self.offsets[i]..self.offsets[i + 1]].iter().sum::<f64>() + s_u[i] - 1.0;
        }
        for g in 0..self.groups.len() {
            rpg[g] = s_g[g] - self.group_cap[g];
        }
        for (j, &g) in self.var_group.iter().enumerate() {
            rpg[g] += x[j];
        }
    }
}

struct Direction {
    dx: Vec<f64>,
    dz: Vec<f64>,
    dsu: Vec<f64>,
    dyu: Vec<f64>,
    dsg: Vec<f64>,
    dyg: Vec<f64>,
}

/// Factorized Newton system. Per user, the bounds and the single-carrier
/// row form a small augmented block
///
/// ```text
/// B_n = [ Q_n + Z_n/X_n   1          ]
///       [ 1^T            -s_u / y_u  ]
/// ```
///
/// factorized by LU with partial pivoting; the budget-group rows are
/// eliminated through the Schur complement `A_g B^-1 A_g^T + S_g/Y_g`.
/// Keeping the rows in augmented form avoids dividing by vanishing slacks.
struct NewtonSystem {
    block_lu: Vec<f64>,
    block_piv: Vec<usize>,
    block_start: Vec<usize>,
    schur: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    schur_lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    ng: usize,
}

impl NewtonSystem {
    fn new(p: &ComponentProblem) -> Self {
        let mut block_start = Vec::with_capacity(p.users.len() + 1);
        let mut acc = 0;
        for i in 0..p.users.len() {
            block_start.push(acc);
            let m = p.offsets[i + 1] - p.offsets[i] + 1;
            acc += m * m;
        }
        block_start.push(acc);
        Self {
            block_lu: vec![0.0; acc],
            block_piv: vec![0; p.nvars() + p.users.len()],
            block_start,
            schur: None,
            schur_lu: None,
            ng: p.groups.len(),
        }
    }

    fn block(&self, p: &ComponentProblem, i: usize) -> (&[f64], &[usize], usize) {
        let m = p.offsets[i + 1] - p.offsets[i] + 1;
        let piv0 = p.offsets[i] + i;
        (
            &self.block_lu[self.block_start[i]..self.block_start[i + 1]],
            &self.block_piv[piv0..piv0 + m],
            m,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn factor(
        &mut self,
        p: &ComponentProblem,
        x: &[f64],
        z: &[f64],
        s_u: &[f64],
        y_u: &[f64],
        s_g: &[f64],
        y_g: &[f64],
    ) {
        let ng = self.ng;
        let mut schur = DMatrix::<f64>::zeros(ng, ng);
        for g in 0..ng {
            schur[(g, g)] = s_g[g] / y_g[g];
        }
        let mut col = Vec::new();
        for i in 0..p.users.len() {
            let o = p.offsets[i];
            let mv = p.offsets[i + 1] - o;
            let m = mv + 1;
            let piv0 = o + i;
            {
                let blk = &mut self.block_lu[self.block_start[i]..self.block_start[i + 1]];
                for a in 0..mv {
                    for b in 0..mv {
                        let mut v = 2.0 * p.eff[o + a] * p.eff[o + b];
                        if a == b {
                            v += z[o + a] / x[o + a];
                        }
                        blk[a * m + b] = v;
                    }
                    blk[a * m + mv] = 1.0;
                    blk[mv * m + a] = 1.0;
                }
                blk[mv * m + mv] = -s_u[i] / y_u[i];
                lu_in_place(blk, &mut self.block_piv[piv0..piv0 + m], m);
            }
            let (blk, piv, _) = self.block(p, i);
            for a in 0..mv {
                let ga = p.var_group[o + a];
                if (0..a).any(|b| p.var_group[o + b] == ga) {
                    continue;
                }
                col.clear();
                col.resize(m, 0.0);
                for b in 0..mv {
                    if p.var_group[o + b] == ga {
                        col[b] = 1.0;
                    }
                }
                lu_solve(blk, piv, m, &mut col);
                for b in 0..mv {
                    schur[(p.var_group[o + b], ga)] += col[b];
                }
            }
        }
        let lu_backup = schur.clone();
        self.schur = schur.cholesky();
        self.schur_lu = if self.schur.is_none() {
            Some(lu_backup.lu())
        } else {
            None
        };
    }

    // Solve B [dx; dy_u] = [r1; r2] in place, block by block.
    fn apply_block_inverse(&self, p: &ComponentProblem, r1: &mut [f64], r2: &mut [f64]) {
        let mut buf = Vec::new();
        for i in 0..p.users.len() {
            let o = p.offsets[i];
            let (blk, piv, m) = self.block(p, i);
            buf.clear();
            buf.extend_from_slice(&r1[o..o + m - 1]);
            buf.push(r2[i]);
            lu_solve(blk, piv, m, &mut buf);
            r1[o..o + m - 1].copy_from_slice(&buf[..m - 1]);
            r2[i] = buf[m - 1];
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        p: &ComponentProblem,
        x: &[f64],
        z: &[f64],
        s_u: &[f64],
        y_u: &[f64],
        s_g: &[f64],
        y_g: &[f64],
        rd: &[f64],
        rpu: &[f64],
        rpg: &[f64],
        rxz: &[f64],
        rsu: &[f64],
        rsg: &[f64],
    ) -> Direction {
        let nv = x.len();
        let nu = s_u.len();
        let ng = s_g.len();
        // Right-hand sides of the augmented system.
        let r1: Vec<f64> = (0..nv).map(|j| -rd[j] + rxz[j] / x[j]).collect();
        let r2u: Vec<f64> = (0..nu).map(|i| -rpu[i] - rsu[i] / y_u[i]).collect();
        let r2g: Vec<f64> = (0..ng).map(|g| -rpg[g] - rsg[g] / y_g[g]).collect();

        let (mut dx, mut dyu, mut dyg) = self.solve_reduced(p, r1.clone(), r2u.clone(), &r2g);
        // Iterative refinement against the unfactorized system; the
        // factorization loses accuracy as complementary pairs separate.
        let rhs_norm = inf_norm(&r1)
            .max(inf_norm(&r2u))
            .max(inf_norm(&r2g))
            .max(1e-300);
        for _ in 0..3 {
            let (e1, e2u, e2g) = self.reduced_residual(
                p, x, z, s_u, y_u, s_g, y_g, &dx, &dyu, &dyg, &r1, &r2u, &r2g,
            );
            let err = inf_norm(&e1).max(inf_norm(&e2u)).max(inf_norm(&e2g));
            if err <= 1e-15 * rhs_norm {
                break;
            }
            let (cx, cu, cg) = self.solve_reduced(p, e1, e2u, &e2g);
            axpy(&mut dx, 1.0, &cx);
            axpy(&mut dyu, 1.0, &cu);
            axpy(&mut dyg, 1.0, &cg);
        }

        let dsu: Vec<f64> = (0..nu)
            .map(|i| (rsu[i] - s_u[i] * dyu[i]) / y_u[i])
            .collect();
        let dsg: Vec<f64> = (0..ng)
            .map(|g| (rsg[g] - s_g[g] * dyg[g]) / y_g[g])
            .collect();
        let dz: Vec<f64> = (0..nv).map(|j| (rxz[j] - z[j] * dx[j]) / x[j]).collect();
        Direction {
            dx,
            dz,
            dsu,
            dyu,
            dsg,
            dyg,
        }
    }

    // One solve of
    //   (Q + Z/X) dx + A_u^T dy_u + A_g^T dy_g = r1
    //   A_u dx - (S_u/Y_u) dy_u              = r2u
    //   A_g dx - (S_g/Y_g) dy_g              = r2g
    fn solve_reduced(
        &self,
        p: &ComponentProblem,
        r1: Vec<f64>,
        r2u: Vec<f64>,
        r2g: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let nv = r1.len();
        let ng = r2g.len();
        let mut t1 = r1.clone();
        let mut t2 = r2u.clone();
        self.apply_block_inverse(p, &mut t1, &mut t2);
        let mut rhs_g = DVector::<f64>::zeros(ng);
        for j in 0..nv {
            rhs_g[p.var_group[j]] += t1[j];
        }
        for g in 0..ng {
            rhs_g[g] -= r2g[g];
        }
        let dyg = match (&self.schur, &self.schur_lu) {
            (Some(ch), _) => ch.solve(&rhs_g),
            (None, Some(lu)) => lu.solve(&rhs_g).unwrap_or_else(|| DVector::zeros(ng)),
            _ => DVector::zeros(ng),
        };
        let dyg: Vec<f64> = dyg.iter().copied().collect();
        let mut dx = r1;
        for j in 0..nv {
            dx[j] -= dyg[p.var_group[j]];
        }
        let mut dyu = r2u;
        self.apply_block_inverse(p, &mut dx, &mut dyu);
        (dx, dyu, dyg)
    }

    #[allow(clippy::too_many_arguments)]
    fn reduced_residual(
        &self,
        p: &ComponentProblem,
        x: &[f64],
        z: &[f64],
        s_u: &[f64],
        y_u: &[f64],
        s_g: &[f64],
        y_g: &[f64],
        dx: &[f64],
        dyu: &[f64],
        dyg: &[f64],
        r1: &[f64],
        r2u: &[f64],
        r2g: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut e1 = r1.to_vec();
        let mut e2u = r2u.to_vec();
        let mut e2g: Vec<f64> = r2g
            .iter()
            .zip(s_g.iter().zip(y_g))
            .zip(dyg)
            .map(|((r, (s, y)), d)| r + s / y * d)
            .collect();
        for i in 0..p.users.len() {
            let range = p.offsets[i]..p.offsets[i + 1];
            let rate: f64 = range.clone().map(|j| p.eff[j] * dx[j]).sum();
            let mut sum = 0.0;
            for j in range {
                e1[j] -= 2.0 * p.eff[j] * rate + z[j] / x[j] * dx[j] + dyu[i] + dyg[p.var_group[j]];
                sum += dx[j];
                e2g[p.var_group[j]] -= dx[j];
            }
            e2u[i] -= sum - s_u[i] / y_u[i] * dyu[i];
        }
        (e1, e2u, e2g)
    }
}

// LU with partial pivoting of a small dense matrix stored row-major.
fn lu_in_place(a: &mut [f64], piv: &mut [usize], m: usize) {
    for k in 0..m {
        let p = (k..m)
            .max_by(|&i, &j| a[i * m + k].abs().total_cmp(&a[j * m + k].abs()))
            .expect("nonempty range");
        piv[k] = p;
        if p != k {
            for c in 0..m {
                a.swap(k * m + c, p * m + c);
            }
        }
        let d = a[k * m + k];
        let d = if d.abs() < 1e-300 { 1e-300 } else { d };
        a[k * m + k] = d;
        for i in k + 1..m {
            let f = a[i * m + k] / d;
            a[i * m + k] = f;
            for c in k + 1..m {
                a[i * m + c] -= f * a[k * m + c];
            }
        }
    }
}

fn lu_solve(lu: &[f64], piv: &[usize], m: usize, b: &mut [f64]) {
    for k in 0..m {
        b.swap(k, piv[k]);
    }
    for i in 0..m {
        let mut v = b[i];
        for k in 0..i {
            v -= lu[i * m + k] * b[k];
        }
        b[i] = v;
    }
    for i in (0..m).rev() {
        let mut v = b[i];
        for k in i + 1..m {
            v -= lu[i * m + k] * b[k];
        }
        b[i] = v / lu[i * m + i];
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1.0, f64::min)
}

fn shifted_dot(a: &[f64], da: &[f64], b: &[f64], db: &[f64], alpha: f64) -> f64 {
    a.iter()
        .zip(da)
        .zip(b.iter().zip(db))
        .map(|((x, dx), (y, dy))| (x + alpha * dx) * (y + alpha * dy))
        .sum()
}

/// Closed-form allocation for users served by a single beam with bandwidth
/// cap `beam_cap` (MHz): `v_n = clamp(d_n/e_n - lambda/(2 e_n^2), 0, W~)`
/// with the price `lambda >= 0` found by walking the sorted breakpoints.
/// Returns per-user bandwidth.
pub fn solve_single_beam(
    demands: &[f64],
    efficiencies: &[f64],
    beam_cap: f64,
    user_cap: f64,
) -> Vec<f64> {
    assert_eq!(demands.len(), efficiencies.len());
    let alloc = |lambda: f64| -> Vec<f64> {
        demands
            .iter()
            .zip(efficiencies)
            .map(|(&d, &e)| {
                if e <= 0.0 {
                    0.0
                } else {
                    (d / e - lambda / (2.0 * e * e)).clamp(0.0, user_cap)
                }
            })
            .collect()
    };
    let free = alloc(0.0);
    if free.iter().sum::<f64>() <= beam_cap {
        return free;
    }
    // Breakpoints where a user leaves the upper bound or reaches zero.
    let mut bps: Vec<f64> = Vec::with_capacity(2 * demands.len());
    for (&d, &e) in demands.iter().zip(efficiencies) {
        if e > 0.0 {
            bps.push((2.0 * e * (d - e * user_cap)).max(0.0));
            bps.push(2.0 * e * d);
        }
    }
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let total = |lambda: f64| alloc(lambda).iter().sum::<f64>();
    // total(lambda) is continuous, piecewise linear and nonincreasing.
    let mut lo = 0.0;
    let mut hi = *bps.last().unwrap_or(&0.0);
    for &b in &bps {
        if total(b) <= beam_cap {
            hi = b;
            break;
        }
        lo = b;
    }
    let (t_lo, t_hi) = (total(lo), total(hi));
    let lambda = if (t_lo - t_hi).abs() < f64::MIN_POSITIVE {
        hi
    } else {
        lo + (t_lo - beam_cap) / (t_lo - t_hi) * (hi - lo)
    };
    let mut v = alloc(lambda);
    let sum: f64 = v.iter().sum();
    if sum > beam_cap {
        let f = beam_cap / sum;
        v.iter_mut().for_each(|x| *x *= f);
    }
    v
}

/// `M_k = floor(W_k / W~)`.
pub fn discretize_carriers(beam_bandwidth: &[f64], carrier_bandwidth: f64) -> Vec<usize> {
    beam_bandwidth
        .iter()
        .map(|&w| {
            let q = w.max(0.0) / carrier_bandwidth;
            // Absorb rounding noise such as 249.99999999 / 62.5.
            (q + 1e-9).floor() as usize
        })
        .collect()
}

/// Carrier counts per beam that use the whole band of each TWTA pair:
/// floor counts are topped up by largest remainder until the pair holds
/// `carriers_per_pair` carriers.
pub fn pair_carriers(
    beam_bandwidth: &[f64],
    pairing: &TwtaPairing,
    plan: &CarrierPlan,
) -> Vec<usize> {
    let wc = plan.carrier_bandwidth();
    let mut counts = discretize_carriers(beam_bandwidth, wc);
    for pair in &pairing.pairs {
        let cap = plan.carriers_per_pair();
        let mut used: usize = pair.iter().map(|&k| counts[k]).sum();
        while used > cap {
            // Only reachable with bandwidths that violate the pair budget.
            let k = *pair
                .iter()
                .max_by_key(|&&k| counts[k])
                .expect("nonempty pair");
            counts[k] -= 1;
            used -= 1;
        }
        let mut order: Vec<usize> = pair.clone();
        order.sort_by(|&a, &b| {
            let ra = beam_bandwidth[a] / wc - counts[a] as f64;
            let rb = beam_bandwidth[b] / wc - counts[b] as f64;
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &k in order.iter().cycle().take(cap - used) {
            counts[k] += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(demands: &[f64], effs: &[f64], cap: f64) -> QpInstance {
        QpInstance {
            beams: 1,
            demands: demands.to_vec(),
            candidates: effs
                .iter()
                .map(|&e| {
                    vec![Candidate {
                        beam: 0,
                        efficiency: e,
                    }]
                })
                .collect(),
            beam_group: vec![0],
            group_caps: vec![cap],
            user_cap: 62.5,
        }
    }

    #[test]
    fn one_user_below_cap_is_fully_served() {
        let inst = single(&[25.0], &[4.0], 250.0);
        let sol = solve_instance(&inst, &QpSettings::default()).unwrap();
        assert!((sol.user_shares[0][0].bandwidth - 6.25).abs() < 1e-6);
        assert!(sol.objective < 1e-9);
    }

    #[test]
    fn two_identical_users_split_equally() {
        let inst = single(&[200.0, 200.0], &[3.0, 3.0], 62.5);
        let sol = solve_instance(&inst, &QpSettings::default()).unwrap();
        let a = sol.user_shares[0][0].bandwidth;
        let b = sol.user_shares[1][0].bandwidth;
        assert!((a - b).abs() < 1e-7, "{a} {b}");
        assert!((a + b - 62.5).abs() < 1e-7);
    }

    #[test]
    fn single_beam_closed_form_matches_ipm() {
        let demands = [25.0, 25.0, 40.0, 10.0, 25.0, 60.0];
        let effs = [4.5, 3.9, 2.0, 4.1, 0.8, 3.3];
        for cap in [10.0, 30.0, 62.5, 500.0] {
            let inst = single(&demands, &effs, cap);
            let sol = solve_instance(&inst, &QpSettings::default()).unwrap();
            let closed = solve_single_beam(&demands, &effs, cap, 62.5);
            for (n, v) in closed.iter().enumerate() {
                assert!(
                    (v - sol.user_shares[n][0].bandwidth).abs() < 1e-6,
                    "cap {cap} user {n} closed {closed:?} ipm {:?} obj {}",
                    sol.user_shares
                        .iter()
                        .map(|s| s[0].bandwidth)
                        .collect::<Vec<_>>(),
                    sol.objective
                );
            }
        }
    }

    #[test]
    fn discretize_examples() {
        assert_eq!(
            discretize_carriers(&[130.0, 0.0, 500.0], 62.5),
            vec![2, 0, 8]
        );
    }

    #[test]
    fn pair_carriers_fill_band() {
        let pairing = TwtaPairing::consecutive(4);
        let plan = CarrierPlan::default();
        let c = pair_carriers(&[130.0, 370.0, 0.0, 0.0], &pairing, &plan);
        assert_eq!(c[0] + c[1], 8);
        assert_eq!(c, vec![2, 6, 4, 4]);
    }

    #[test]
    fn pairing_consecutive() {
        let p = TwtaPairing::consecutive(5);
        assert_eq!(p.pairs, vec![vec![0, 1], vec![2, 3], vec![4]]);
        assert_eq!(p.pair_of_beam(), vec![0, 0, 1, 1, 2]);
    }
}
