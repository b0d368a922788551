#![allow(dead_code)]

use hts_rrm::geometry::Point;
use hts_rrm::harness::ExperimentConfig;
use hts_rrm::strategies::StrategyParams;
use hts_rrm::traffic::{generate_users, ScenarioKind, TrafficScenario, User};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Setup {
    pub scenario: TrafficScenario,
    pub centers: Vec<Point>,
    pub params: StrategyParams,
}

pub fn setup(kind: ScenarioKind) -> Setup {
    let cfg = ExperimentConfig::for_scenario(kind);
    let scenario = cfg.scenario().expect("default scenario");
    let params = cfg.strategy_params(&scenario);
    Setup {
        centers: scenario.beam_centers(),
        scenario,
        params,
    }
}

pub fn users(setup: &Setup, seed: u64) -> Vec<User> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_users(&setup.scenario, &setup.centers, &mut rng).expect("users")
}

/// Same scenario with `count` users instead of the default.
pub fn users_with_count(setup: &Setup, count: usize, seed: u64) -> Vec<User> {
    let mut scenario = setup.scenario.clone();
    scenario.user_count = count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_users(&scenario, &setup.centers, &mut rng).expect("users")
}
