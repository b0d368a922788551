//! Monte-Carlo experiment driver and result files.
//!
//! Each realization draws its own random stream from the master seed and
//! its run index, so runs can execute in any order or in parallel and still
//! produce the same records.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::BeamState;
use crate::metrics::{empirical_cdf, mean, uniform_baseline, RunMetrics};
use crate::strategies::{run_strategy, Strategy, StrategyParams};
use crate::traffic::{generate_users, TrafficScenario};

pub use config::ExperimentConfig;

/// Metric names accepted by [`emit_plot_data`].
pub const METRICS: [&str; 5] = ["nqu", "nu", "offered", "min_rate", "iterations"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRecord {
    pub strategy: Strategy,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
    pub kappa_trace: Vec<f64>,
    pub beams: Vec<BeamState>,
    pub power_scale: Vec<f64>,
    /// Users mapped to their nearest beam because no beam was in range.
    pub fallback_users: usize,
    pub clamped_beams: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config_digest: String,
    pub run_index: usize,
    pub seed: u64,
    pub total_demand: f64,
    /// Total offered rate of the uniform system, the NQU normalization.
    pub uniform_offered: f64,
    pub strategies: Vec<StrategyRecord>,
}

impl RunResult {
    pub fn record(&self, strategy: Strategy) -> Option<&StrategyRecord> {
        self.strategies.iter().find(|r| r.strategy == strategy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub strategies: Vec<Strategy>,
    pub runs: Vec<RunResult>,
}

/// Per-strategy means over successful runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub runs: usize,
    pub failures: usize,
    pub nqu: f64,
    pub nu: f64,
    pub offered: f64,
    pub offered_relaxed: f64,
    pub min_rate: f64,
    pub iterations: f64,
}

/// Seed of realization `run_index`: the first draw of stream `run_index`
/// of the master generator.
pub fn run_seed(master_seed: u64, run_index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run_index as u64);
    rng.next_u64()
}

/// Execute one realization of every configured strategy.
pub fn run_single(
    cfg: &ExperimentConfig,
    scenario: &TrafficScenario,
    params: &StrategyParams,
    strategies: &[Strategy],
    digest: &str,
    run_index: usize,
) -> Result<RunResult> {
    let seed = run_seed(cfg.experiment.seed, run_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = scenario.beam_centers();
    let users = generate_users(scenario, &centers, &mut rng)?;
    let uniform_offered = uniform_baseline(&users, &centers, params)?;
    let mut records = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        let start = Instant::now();
        let outcome = run_strategy(strategy, &users, &centers, params, seed);
        let elapsed = start.elapsed().as_secs_f64();
        let record = match outcome
            .and_then(|o| RunMetrics::from_outcome(&o, &users, uniform_offered).map(|m| (o, m)))
        {
            Ok((o, mut m)) => {
                m.wall_time_s = elapsed;
                StrategyRecord {
                    strategy,
                    metrics: Some(m),
                    error: None,
                    kappa_trace: o.kappa_trace,
                    fallback_users: o.mapping.fallback_count(),
                    beams: o.beams,
                    power_scale: o.power_scale,
                    clamped_beams: o.clamped_beams,
                }
            }
            Err(e) => StrategyRecord {
                strategy,
                metrics: None,
                error: Some(e.to_string()),
                kappa_trace: Vec::new(),
                beams: Vec::new(),
                power_scale: Vec::new(),
                fallback_users: 0,
                clamped_beams: 0,
            },
        };
        records.push(record);
    }
    Ok(RunResult {
        config_digest: digest.to_string(),
        run_index,
        seed,
        total_demand: scenario.total_demand(),
        uniform_offered,
        strategies: records,
    })
}

/// Run all realizations on a pool of `jobs` worker threads (0 = all cores).
/// Results are returned in run order.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentResults> {
    cfg.validate()?;
    let strategies = cfg.strategy_list()?;
    let scenario = cfg.scenario()?;
    let params = cfg.strategy_params(&scenario);
    let digest = cfg.digest();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs: Vec<Result<RunResult>> = pool.install(|| {
        (0..cfg.experiment.runs)
            .into_par_iter()
            .map(|r| run_single(cfg, &scenario, &params, &strategies, &digest, r))
            .collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResults {
        config: cfg.clone(),
        strategies,
        runs,
    })
}

impl ExperimentResults {
    pub fn summary(&self) -> Vec<SummaryRow> {
        self.strategies
            .iter()
            .map(|&s| {
                let ok: Vec<&RunMetrics> = self
                    .runs
                    .iter()
                    .filter_map(|r| r.record(s).and_then(|x| x.metrics.as_ref()))
                    .collect();
                let col =
                    |f: fn(&RunMetrics) -> f64| mean(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
                SummaryRow {
                    strategy: s,
                    runs: ok.len(),
                    failures: self.runs.len() - ok.len(),
                    nqu: col(|m| m.nqu),
                    nu: col(|m| m.nu),
                    offered: col(|m| m.total_offered),
                    offered_relaxed: col(|m| m.total_offered_relaxed),
                    min_rate: col(|m| m.min_user_rate),
                    iterations: col(|m| m.iterations as f64),
                }
            })
            .collect()
    }

    /// Per-run values of `metric` for `strategy`.
    pub fn metric_samples(&self, strategy: Strategy, metric: &str) -> Result<Vec<f64>> {
        let pick: fn(&RunMetrics) -> f64 = match metric {
            "nqu" => |m| m.nqu,
            "nu" => |m| m.nu,
            "offered" => |m| m.total_offered,
            "min_rate" => |m| m.min_user_rate,
            "iterations" => |m| m.iterations as f64,
            other => return Err(Error::UnknownMetric(other.to_string())),
        };
        Ok(self
            .runs
            .iter()
            .filter_map(|r| r.record(strategy).and_then(|x| x.metrics.as_ref()))
            .map(pick)
            .collect())
    }

    /// True when every strategy failed in every run.
    pub fn all_failed(&self) -> bool {
        self.runs
            .iter()
            .all(|r| r.strategies.iter().all(|s| s.metrics.is_none()))
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("strategy,runs,failures,nqu,nu,offered_mbps,offered_relaxed_mbps,min_rate_mbps,iterations\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.strategy,
            r.runs,
            r.failures,
            r.nqu,
            r.nu,
            r.offered,
            r.offered_relaxed,
            r.min_rate,
            r.iterations
        );
    }
    out
}

/// Write one CDF file per strategy for `metric`; returns the paths.
pub fn emit_plot_data(
    results: &ExperimentResults,
    metric: &str,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if !METRICS.contains(&metric) {
        return Err(Error::UnknownMetric(metric.to_string()));
    }
    if results.runs.is_empty() {
        return Err(Error::Empty("experiment results"));
    }
    let mut paths = Vec::new();
    for &s in &results.strategies {
        let samples = results.metric_samples(s, metric)?;
        if samples.is_empty() {
            continue;
        }
        let mut text = String::new();
        for (v, p) in empirical_cdf(&samples)? {
            let _ = writeln!(text, "{v} {p}");
        }
        let path = dir.join(format!("cdf_{metric}_{}.txt", s.name()));
        fs::write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Write `runs.jsonl`, `summary.csv`, the CDF files and `timing.csv` into
/// `dir`. Only `timing.csv` depends on the machine.
pub fn write_outputs(results: &ExperimentResults, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut jsonl = String::new();
    for r in &results.runs {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    fs::write(dir.join("runs.jsonl"), jsonl)?;
    fs::write(dir.join("summary.csv"), summary_csv(&results.summary()))?;
    for metric in METRICS {
        emit_plot_data(results, metric, dir)?;
    }
    let mut timing = String::from("run,strategy,wall_time_s\n");
    for r in &results.runs {
        for s in &r.strategies {
            if let Some(m) = &s.metrics {
                let _ = writeln!(timing, "{},{},{}", r.run_index, s.strategy, m.wall_time_s);
            }
        }
    }
    fs::write(dir.join("timing.csv"), timing)?;
    Ok(())
}
