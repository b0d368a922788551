//! End-to-end resource management strategies.
//!
//! | strategy | mapping | bandwidth | beam geometry | power |
//! |----------|---------|-----------|---------------|-------|
//! | `BW-POW` | nearest | pair-flexible | fixed | flexible |
//! | `MAP`    | flexible | fixed    | fixed         | fixed |
//! | `BW-MAP` | flexible | pair-flexible | fixed   | fixed |
//! | `SR`     | flexible | fixed    | recentered    | fixed |
//! | `BW-SR`  | flexible | pair-flexible | recentered | fixed |
//!
//! The flexible-mapping strategies share one loop: allocate bandwidth over
//! each user's strongest beams, move every user to the beam that gives it the
//! best rate, recenter beams on their users, and keep going while the
//! load-balancing degree decreases.

pub mod genetic;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::allocation::{
    discretize_carriers, pair_carriers, solve_instance, solve_single_beam, BandwidthBudget,
    BandwidthMode, CarrierPlan, CarrierSnrMatrix, QpInstance, QpSettings, TwtaPairing,
};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::intra_beam::{schedule_carriers, CarrierSchedule};
use crate::link_budget::{spectral_efficiency, LinkModel};
use crate::mapping::{
    dominant_mapping, load_balancing_degree, remap_users, update_beam_geometry, BeamState,
    BeamUserMapping, MAX_BEAM_RADIUS_KM,
};
use crate::traffic::User;

pub use genetic::{GaParams, Genome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "BW-POW")]
    BwPow,
    #[serde(rename = "MAP")]
    Map,
    #[serde(rename = "BW-MAP")]
    BwMap,
    #[serde(rename = "SR")]
    Sr,
    #[serde(rename = "BW-SR")]
    BwSr,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::BwPow,
        Strategy::Map,
        Strategy::BwMap,
        Strategy::Sr,
        Strategy::BwSr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::BwPow => "BW-POW",
            Strategy::Map => "MAP",
            Strategy::BwMap => "BW-MAP",
            Strategy::Sr => "SR",
            Strategy::BwSr => "BW-SR",
        }
    }

    pub fn bandwidth_mode(self) -> BandwidthMode {
        match self {
            Strategy::Map | Strategy::Sr => BandwidthMode::Fixed,
            Strategy::BwPow | Strategy::BwMap | Strategy::BwSr => BandwidthMode::Flexible,
        }
    }

    pub fn moves_beams(self) -> bool {
        matches!(self, Strategy::Sr | Strategy::BwSr)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

/// Everything a strategy needs besides the users and the initial beams.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyParams {
    /// Link model with the calibrated carrier power.
    pub link: LinkModel,
    pub plan: CarrierPlan,
    pub pairing: TwtaPairing,
    pub max_beam_radius_km: f64,
    /// Per-beam design capacity `T / K`, Mbps.
    pub design_capacity_mbps: f64,
    /// Beams per user offered to the allocation (strongest first).
    pub candidate_beams: usize,
    pub max_iterations: usize,
    /// Repeat the remap pass of MAP/BW-MAP while the load-balancing degree
    /// decreases, instead of a single pass.
    pub map_iterative: bool,
    /// Top up floor carrier counts so each amplifier pair keeps its full
    /// carrier complement.
    pub reconcile_pair_carriers: bool,
    pub qp: QpSettings,
    pub ga: GaParams,
}

impl StrategyParams {
    pub fn new(
        link: LinkModel,
        plan: CarrierPlan,
        beams: usize,
        design_capacity_mbps: f64,
    ) -> Self {
        Self {
            link,
            plan,
            pairing: TwtaPairing::consecutive(beams),
            max_beam_radius_km: MAX_BEAM_RADIUS_KM,
            design_capacity_mbps,
            candidate_beams: 2,
            max_iterations: 50,
            map_iterative: true,
            reconcile_pair_carriers: true,
            qp: QpSettings::default(),
            ga: GaParams::default(),
        }
    }

    fn beams(&self) -> usize {
        self.pairing.pair_of_beam().len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    pub mapping: BeamUserMapping,
    pub beams: Vec<BeamState>,
    /// Carrier power multiplier per beam (1 unless power is flexible).
    pub power_scale: Vec<f64>,
    /// Per-user rate of the continuous allocation, Mbps.
    pub offered_relaxed: Vec<f64>,
    /// Per-user rate after carrier scheduling, Mbps.
    pub offered_scheduled: Vec<f64>,
    pub schedules: Vec<CarrierSchedule>,
    pub iterations: usize,
    pub kappa_trace: Vec<f64>,
    /// Beams whose enclosing circle was capped at the maximum radius in the
    /// final state.
    pub clamped_beams: usize,
}

impl StrategyOutcome {
    pub fn total_offered(&self) -> f64 {
        self.offered_scheduled.iter().sum()
    }
}

/// Run `strategy` from the initial beam `centers` (uniform radius).
pub fn run_strategy(
    strategy: Strategy,
    users: &[User],
    centers: &[Point],
    params: &StrategyParams,
    seed: u64,
) -> Result<StrategyOutcome> {
    match strategy {
        Strategy::Sr => run_sr(users, centers, params, seed),
        Strategy::BwSr => run_bw_sr(users, centers, params, seed),
        Strategy::Map => run_map(users, centers, params, seed),
        Strategy::BwMap => run_bw_map(users, centers, params, seed),
        Strategy::BwPow => run_bw_pow(users, centers, params, seed),
    }
}

pub fn run_sr(
    users: &[User],
    centers: &[Point],
    params: &StrategyParams,
    seed: u64,
) -> Result<StrategyOutcome> {
    mapping_loop(Strategy::Sr, users, centers, params, seed)
}

pub fn run_bw_sr(
    users: &[User],
    centers: &[Point],
    params: &StrategyParams,
    seed: u64,
) -> Result<StrategyOutcome> {
    mapping_loop(Strategy::BwSr, users, centers, params, seed)
}

pub fn run_map(
    users: &[User],
    centers: &[Point],
    params: &StrategyParams,
    seed: u64,
) -> Result<StrategyOutcome> {
    mapping_loop(Strategy::Map, users, centers, params, seed)
}

pub fn run_bw_map(
    users: &[User],
    centers: &[Point],
    params: &StrategyParams,
    seed: u64,
) -> Result<StrategyOutcome> {
    mapping_loop(Strategy::BwMap, users, centers, params, seed)
}

pub fn run_bw_pow(
    users: &[User],
    centers: &[Point],
    params: &StrategyParams,
    seed: u64,
) -> Result<StrategyOutcome> {
    genetic::run(users, centers, params, seed)
}

/// Uniform system: fixed beams, nearest-beam mapping, `M` carriers per beam
/// at nominal power.
pub fn uniform_outcome(
    users: &[User],
    centers: &[Point],
    params: &StrategyParams,
) -> Result<StrategyOutcome> {
    let k = centers.len();
    check_beams(params, k)?;
    let mapping = dominant_mapping(users, centers);
    let radius = params.link.antenna.beam_radius_km;
    let carriers = vec![params.plan.carriers_per_color; k];
    let power = vec![1.0; k];
    let kappa = load_balancing_degree(&mapping.beam_demand(users, k), params.design_capacity_mbps);
    let eval = evaluate_plan(users, &mapping, centers, &carriers, &power, params);
    Ok(eval.into_outcome(
        Strategy::Map,
        mapping,
        centers,
        &vec![radius; k],
        power,
        0,
        vec![kappa],
        0,
    ))
}

fn check_beams(params: &StrategyParams, k: usize) -> Result<()> {
    if params.beams() != k {
        return Err(Error::BeamCountMismatch {
            expected: params.beams(),
            got: k,
        });
    }
    Ok(())
}

struct LoopState {
    centers: Vec<Point>,
    radii: Vec<f64>,
    clamped: Vec<bool>,
    mapping: BeamUserMapping,
    kappa: f64,
}

fn mapping_loop(
    strategy: Strategy,
    users: &[User],
    initial_centers: &[Point],
    params: &StrategyParams,
    seed: u64,
) -> Result<StrategyOutcome> {
    let k = initial_centers.len();
    check_beams(params, k)?;
    let mode = strategy.bandwidth_mode();
    let budget = BandwidthBudget::for_mode(mode, &params.pairing, &params.plan);
    let design = params.design_capacity_mbps;

    let mapping = dominant_mapping(users, initial_centers);
    let mut state = LoopState {
        centers: initial_centers.to_vec(),
        radii: vec![params.link.antenna.beam_radius_km; k],
        clamped: vec![false; k],
        kappa: load_balancing_degree(&mapping.beam_demand(users, k), design),
        mapping,
    };
    let mut trace = vec![state.kappa];
    let mut iterations = 0;
    let max_iterations = if strategy.moves_beams() || params.map_iterative {
        params.max_iterations
    } else {
        1
    };

    while iterations < max_iterations {
        iterations += 1;
        let mut snr = CarrierSnrMatrix::evaluate(
            &params.link,
            users,
            &state.centers,
            params.max_beam_radius_km,
        );
        snr.restrict_to_strongest(params.candidate_beams);
        let instance = QpInstance::new(users, &snr, &budget, params.plan.carrier_bandwidth())?;
        let solution = solve_instance(&instance, &params.qp)?;
        let mapping = remap_users(&solution, users, &state.centers);
        let kappa = load_balancing_degree(&mapping.beam_demand(users, k), design);
        trace.push(kappa);
        if kappa.is_nan() || kappa >= state.kappa {
            break;
        }
        let next = if strategy.moves_beams() {
            let geom = update_beam_geometry(
                users,
                &mapping,
                &state.centers,
                params.max_beam_radius_km,
                seed,
            );
            LoopState {
                centers: geom.centers,
                radii: geom.radii,
                clamped: geom.clamped,
                mapping,
                kappa,
            }
        } else {
            LoopState {
                mapping,
                kappa,
                ..state
            }
        };
        state = next;
    }

    let carriers = match mode {
        BandwidthMode::Fixed => vec![params.plan.carriers_per_color; k],
        BandwidthMode::Flexible => mapped_carriers(users, &state.mapping, &state.centers, params)?,
    };
    let power = vec![1.0; k];
    let eval = evaluate_plan(
        users,
        &state.mapping,
        &state.centers,
        &carriers,
        &power,
        params,
    );
    let clamped = state.clamped.iter().filter(|&&c| c).count();
    Ok(eval.into_outcome(
        strategy,
        state.mapping,
        &state.centers,
        &state.radii,
        power,
        iterations,
        trace,
        clamped,
    ))
}

/// Carrier counts from the pair-flexible allocation restricted to the given
/// mapping.
fn mapped_carriers(
    users: &[User],
    mapping: &BeamUserMapping,
    centers: &[Point],
    params: &StrategyParams,
) -> Result<Vec<usize>> {
    let k = centers.len();
    let mut snr = Vec::with_capacity(k * users.len());
    let mut feasible = Vec::with_capacity(k * users.len());
    for (b, c) in centers.iter().enumerate() {
        for (u, &m) in users.iter().zip(&mapping.beam_of_user) {
            snr.push(params.link.carrier_snr(u.position, *c));
            feasible.push(m == b);
        }
    }
    let snr = CarrierSnrMatrix::from_parts(k, users.len(), snr, feasible)?;
    let budget = BandwidthBudget::pairs(&params.pairing, params.plan.total_bandwidth_mhz);
    let instance = QpInstance::new(users, &snr, &budget, params.plan.carrier_bandwidth())?;
    let solution = solve_instance(&instance, &params.qp)?;
    Ok(carriers_from_bandwidth(&solution.beam_bandwidth, params))
}

fn carriers_from_bandwidth(bandwidth: &[f64], params: &StrategyParams) -> Vec<usize> {
    if params.reconcile_pair_carriers {
        pair_carriers(bandwidth, &params.pairing, &params.plan)
    } else {
        discretize_carriers(bandwidth, params.plan.carrier_bandwidth())
    }
}

/// Per-beam evaluation of a fixed plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanEvaluation {
    pub offered_relaxed: Vec<f64>,
    pub offered_scheduled: Vec<f64>,
    pub schedules: Vec<CarrierSchedule>,
    pub beam_bandwidth: Vec<f64>,
    pub carriers: Vec<usize>,
}

impl PlanEvaluation {
    #[allow(clippy::too_many_arguments)]
    fn into_outcome(
        self,
        strategy: Strategy,
        mapping: BeamUserMapping,
        centers: &[Point],
        radii: &[f64],
        power_scale: Vec<f64>,
        iterations: usize,
        kappa_trace: Vec<f64>,
        clamped_beams: usize,
    ) -> StrategyOutcome {
        let wc = self.beam_bandwidth.len();
        let beams = (0..wc)
            .map(|b| BeamState {
                center: centers[b],
                radius_km: radii[b],
                bandwidth_mhz: self.beam_bandwidth[b],
                carriers: self.carriers[b],
            })
            .collect();
        StrategyOutcome {
            strategy,
            mapping,
            beams,
            power_scale,
            offered_relaxed: self.offered_relaxed,
            offered_scheduled: self.offered_scheduled,
            schedules: self.schedules,
            iterations,
            kappa_trace,
            clamped_beams,
        }
    }
}

/// Serve the mapped users of each beam with `carriers[k]` carriers at power
/// multiplier `power_scale[k]`: the rate-optimal continuous split inside the
/// beam sets each user's target, then the targets are packed onto carriers.
pub fn evaluate_plan(
    users: &[User],
    mapping: &BeamUserMapping,
    centers: &[Point],
    carriers: &[usize],
    power_scale: &[f64],
    params: &StrategyParams,
) -> PlanEvaluation {
    let k = centers.len();
    let wc = params.plan.carrier_bandwidth();
    let by_beam = mapping.users_by_beam(k);
    let mut offered_relaxed = vec![0.0; users.len()];
    let mut offered_scheduled = vec![0.0; users.len()];
    let mut schedules = Vec::with_capacity(k);
    let mut beam_bandwidth = vec![0.0; k];
    for b in 0..k {
        let model = params.link.with_power_scale(power_scale[b]);
        let members = &by_beam[b];
        let demands: Vec<f64> = members.iter().map(|&n| users[n].demand).collect();
        let snr: Vec<f64> = members
            .iter()
            .map(|&n| model.carrier_snr(users[n].position, centers[b]))
            .collect();
        let eff: Vec<f64> = snr.iter().map(|&s| spectral_efficiency(s)).collect();
        let cap = carriers[b] as f64 * wc;
        let bw = solve_single_beam(&demands, &eff, cap, wc);
        let targets: Vec<f64> = bw.iter().zip(&eff).map(|(v, e)| v * e).collect();
        let schedule = schedule_carriers(&targets, &snr, carriers[b], wc);
        for (i, &n) in members.iter().enumerate() {
            offered_relaxed[n] = targets[i];
            offered_scheduled[n] = schedule.offered[i];
        }
        beam_bandwidth[b] = cap;
        schedules.push(schedule);
    }
    PlanEvaluation {
        offered_relaxed,
        offered_scheduled,
        schedules,
        beam_bandwidth,
        carriers: carriers.to_vec(),
    }
}

/// Quadratic unmet demand of the continuous per-beam allocation of a plan.
pub(crate) fn plan_unmet(
    users: &[User],
    by_beam: &[Vec<usize>],
    base_snr: &[Vec<f64>],
    carriers: &[usize],
    power_scale: &[f64],
    carrier_bandwidth: f64,
) -> f64 {
    let mut total = 0.0;
    for (b, members) in by_beam.iter().enumerate() {
        let demands: Vec<f64> = members.iter().map(|&n| users[n].demand).collect();
        let eff: Vec<f64> = base_snr[b]
            .iter()
            .map(|&s| spectral_efficiency(s * power_scale[b]))
            .collect();
        let bw = solve_single_beam(
            &demands,
            &eff,
            carriers[b] as f64 * carrier_bandwidth,
            carrier_bandwidth,
        );
        total += demands
            .iter()
            .zip(bw.iter().zip(&eff))
            .map(|(d, (v, e))| (d - v * e).powi(2))
            .sum::<f64>();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("BW-FOO".parse::<Strategy>().is_err());
        assert_eq!("bw_sr".parse::<Strategy>().unwrap(), Strategy::BwSr);
    }
}
