//! Genetic search over per-beam carrier power and carrier count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_beams, evaluate_plan, plan_unmet, Strategy, StrategyOutcome, StrategyParams};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mapping::{dominant_mapping, load_balancing_degree};
use crate::traffic::User;

// Keeps the GA stream apart from other consumers of the run seed.
const GA_STREAM_SALT: u64 = 0x6761_5f70_6f77_0001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    /// Bounds of the per-beam carrier power multiplier.
    pub min_power: f64,
    pub max_power: f64,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population: 50,
            generations: 100,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            elitism: 2,
            min_power: 0.25,
            max_power: 4.0,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || self.elitism >= self.population {
            return Err(Error::Config(
                "ga.population must be >= 2 and exceed ga.elitism".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate)
        {
            return Err(Error::Config("ga rates must lie in [0, 1]".into()));
        }
        if !(self.min_power > 0.0 && self.min_power <= 1.0 && self.max_power >= 1.0) {
            return Err(Error::Config(
                "ga power bounds must satisfy 0 < min <= 1 <= max".into(),
            ));
        }
        Ok(())
    }
}

/// Power multiplier and carrier count of every beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub power: Vec<f64>,
    pub carriers: Vec<usize>,
}

/// Best genome and the best fitness after each generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    pub best: Genome,
    pub fitness: f64,
    pub history: Vec<f64>,
}

struct Problem<'a> {
    users: &'a [User],
    by_beam: Vec<Vec<usize>>,
    base_snr: Vec<Vec<f64>>,
    params: &'a StrategyParams,
    power_budget: f64,
}

impl Problem<'_> {
    fn fitness(&self, g: &Genome) -> f64 {
        plan_unmet(
            self.users,
            &self.by_beam,
            &self.base_snr,
            &g.carriers,
            &g.power,
            self.params.plan.carrier_bandwidth(),
        )
    }

    /// Enforce the pair carrier limit and the total power budget
    /// `sum_k carriers_k * power_k <= K * M`.
    fn repair(&self, g: &mut Genome) {
        let ga = &self.params.ga;
        let per_pair = self.params.plan.carriers_per_pair();
        for p in g.power.iter_mut() {
            *p = p.clamp(ga.min_power, ga.max_power);
        }
        for pair in &self.params.pairing.pairs {
            for &k in pair {
                g.carriers[k] = g.carriers[k].min(per_pair);
            }
            while pair.iter().map(|&k| g.carriers[k]).sum::<usize>() > per_pair {
                let k = *pair
                    .iter()
                    .rev()
                    .max_by_key(|&&k| g.carriers[k])
                    .expect("nonempty pair");
                g.carriers[k] -= 1;
            }
        }
        let used: f64 = g
            .carriers
            .iter()
            .zip(&g.power)
            .map(|(&c, p)| c as f64 * p)
            .sum();
        if used > self.power_budget {
            // Shrink the part above the minimum so the bounds stay satisfied.
            let floor: f64 = g.carriers.iter().map(|&c| c as f64 * ga.min_power).sum();
            let excess = used - floor;
            let f = ((self.power_budget - floor) / excess).clamp(0.0, 1.0);
            for p in g.power.iter_mut() {
                *p = ga.min_power + (*p - ga.min_power) * f;
            }
        }
    }

    fn random_genome(&self, rng: &mut ChaCha8Rng) -> Genome {
        let ga = &self.params.ga;
        let k = self.by_beam.len();
        let mut g = Genome {
            power: (0..k)
                .map(|_| rng.random_range(ga.min_power..=ga.max_power))
                .collect(),
            carriers: (0..k)
                .map(|_| rng.random_range(0..=self.params.plan.carriers_per_pair()))
                .collect(),
        };
        self.repair(&mut g);
        g
    }

    fn tournament<'g>(&self, pop: &'g [Genome], fit: &[f64], rng: &mut ChaCha8Rng) -> &'g Genome {
        let a = rng.random_range(0..pop.len());
        let b = rng.random_range(0..pop.len());
        if fit[b] < fit[a] || (fit[b] == fit[a] && b < a) {
            &pop[b]
        } else {
            &pop[a]
        }
    }

    fn mutate(&self, g: &mut Genome, rng: &mut ChaCha8Rng) {
        let ga = &self.params.ga;
        let span = ga.max_power - ga.min_power;
        for k in 0..g.power.len() {
            if rng.random_bool(ga.mutation_rate) {
                g.power[k] += rng.random_range(-0.1..=0.1) * span;
            }
            if rng.random_bool(ga.mutation_rate) {
                if rng.random_bool(0.5) {
                    g.carriers[k] += 1;
                } else {
                    g.carriers[k] = g.carriers[k].saturating_sub(1);
                }
            }
        }
        self.repair(g);
    }
}

/// Run the genetic search on the nearest-beam mapping of fixed beams.
pub fn search(
    users: &[User],
    centers: &[Point],
    params: &StrategyParams,
    seed: u64,
) -> Result<GaResult> {
    params.ga.validate()?;
    let k = centers.len();
    check_beams(params, k)?;
    let mapping = dominant_mapping(users, centers);
    let by_beam = mapping.users_by_beam(k);
    let base_snr = by_beam
        .iter()
        .enumerate()
        .map(|(b, members)| {
            members
                .iter()
                .map(|&n| params.link.carrier_snr(users[n].position, centers[b]))
                .collect()
        })
        .collect();
    let problem = Problem {
        users,
        by_beam,
        base_snr,
        params,
        power_budget: (k * params.plan.carriers_per_color) as f64,
    };

    let ga = &params.ga;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ GA_STREAM_SALT);
    let uniform = Genome {
        power: vec![1.0; k],
        carriers: vec![params.plan.carriers_per_color; k],
    };
    let mut pop = vec![uniform];
    while pop.len() < ga.population {
        pop.push(problem.random_genome(&mut rng));
    }
    let mut fit: Vec<f64> = pop.iter().map(|g| problem.fitness(g)).collect();
    let mut history = Vec::with_capacity(ga.generations);

    for _ in 0..ga.generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]).then(a.cmp(&b)));
        let mut next: Vec<Genome> = order[..ga.elitism]
            .iter()
            .map(|&i| pop[i].clone())
            .collect();
        let mut next_fit: Vec<f64> = order[..ga.elitism].iter().map(|&i| fit[i]).collect();
        while next.len() < ga.population {
            let a = problem.tournament(&pop, &fit, &mut rng);
            let b = problem.tournament(&pop, &fit, &mut rng);
            let mut child = a.clone();
            if rng.random_bool(ga.crossover_rate) {
                for j in 0..k {
                    if rng.random_bool(0.5) {
                        child.power[j] = b.power[j];
                    }
                    if rng.random_bool(0.5) {
                        child.carriers[j] = b.carriers[j];
                    }
                }
            }
            problem.mutate(&mut child, &mut rng);
            next_fit.push(problem.fitness(&child));
            next.push(child);
        }
        pop = next;
        fit = next_fit;
        history.push(fit.iter().copied().fold(f64::INFINITY, f64::min));
    }

    let best = (0..pop.len())
        .min_by(|&a, &b| fit[a].total_cmp(&fit[b]).then(a.cmp(&b)))
        .expect("nonempty population");
    Ok(GaResult {
        best: pop[best].clone(),
        fitness: fit[best],
        history,
    })
}

pub(super) fn run(
    users: &[User],
    centers: &[Point],
    params: &StrategyParams,
    seed: u64,
) -> Result<StrategyOutcome> {
    let result = search(users, centers, params, seed)?;
    let k = centers.len();
    let mapping = dominant_mapping(users, centers);
    let kappa = load_balancing_degree(&mapping.beam_demand(users, k), params.design_capacity_mbps);
    let eval = evaluate_plan(
        users,
        &mapping,
        centers,
        &result.best.carriers,
        &result.best.power,
        params,
    );
    let radius = params.link.antenna.beam_radius_km;
    Ok(eval.into_outcome(
        Strategy::BwPow,
        mapping,
        centers,
        &vec![radius; k],
        result.best.power,
        params.ga.generations,
        vec![kappa],
        0,
    ))
}
