//! Evaluation metrics: normalized quadratic unmet (NQU), normalized unmet
//! (NU), offered and minimum rates, and empirical CDFs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::strategies::{uniform_outcome, StrategyOutcome, StrategyParams};
use crate::traffic::User;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub nqu: f64,
    pub nu: f64,
    /// Total scheduled offered rate, Mbps.
    pub total_offered: f64,
    /// Total offered rate of the continuous allocation, Mbps.
    pub total_offered_relaxed: f64,
    pub min_user_rate: f64,
    pub per_user_rates: Vec<f64>,
    pub iterations: usize,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl RunMetrics {
    /// Metrics of a strategy outcome; `uniform_offered` is the total offered
    /// rate of the uniform system on the same users.
    pub fn from_outcome(
        outcome: &StrategyOutcome,
        users: &[User],
        uniform_offered: f64,
    ) -> Result<Self> {
        let required: Vec<f64> = users.iter().map(|u| u.demand).collect();
        let offered = &outcome.offered_scheduled;
        let total_demand: f64 = required.iter().sum();
        Ok(Self {
            nqu: nqu(&required, offered, uniform_offered)?,
            nu: nu(offered, total_demand),
            total_offered: offered.iter().sum(),
            total_offered_relaxed: outcome.offered_relaxed.iter().sum(),
            min_user_rate: offered.iter().copied().fold(f64::INFINITY, f64::min),
            per_user_rates: offered.clone(),
            iterations: outcome.iterations,
            wall_time_s: 0.0,
        })
    }
}

/// `sum_n (required_n - offered_n)^2 / uniform_offered`.
pub fn nqu(required: &[f64], offered: &[f64], uniform_offered: f64) -> Result<f64> {
    if uniform_offered.is_nan() || uniform_offered <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "uniform offered rate must be positive, got {uniform_offered}"
        )));
    }
    if required.len() != offered.len() {
        return Err(Error::InvalidInput(
            "required and offered lengths differ".into(),
        ));
    }
    let sq: f64 = required
        .iter()
        .zip(offered)
        .map(|(r, o)| (r - o) * (r - o))
        .sum();
    Ok(sq / uniform_offered)
}

/// `(T - sum_n offered_n) / T`, not clamped.
pub fn nu(offered: &[f64], total_demand: f64) -> f64 {
    (total_demand - offered.iter().sum::<f64>()) / total_demand
}

/// Total offered rate of the uniform system: fixed beams, nearest-beam
/// mapping, `M` carriers per beam and carrier scheduling.
pub fn uniform_baseline(users: &[User], centers: &[Point], params: &StrategyParams) -> Result<f64> {
    Ok(uniform_outcome(users, centers, params)?.total_offered())
}

/// Step CDF of `samples`: distinct values in increasing order with the
/// fraction of samples at or below each.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::Empty("cdf samples"));
    }
    if samples.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("cdf samples contain NaN".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let p = if i + 1 == n {
            1.0
        } else {
            (i + 1) as f64 / n as f64
        };
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = p,
            _ => out.push((v, p)),
        }
    }
    Ok(out)
}

/// Arithmetic mean; `NaN` for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nqu_examples() {
        assert_eq!(nqu(&[25.0, 25.0], &[25.0, 25.0], 50.0).unwrap(), 0.0);
        assert_eq!(nqu(&[10.0], &[7.0], 3.0).unwrap(), 3.0);
        assert!(nqu(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn nu_examples() {
        assert_eq!(nu(&[50.0, 50.0], 100.0), 0.0);
        assert_eq!(nu(&[0.0, 0.0], 100.0), 1.0);
        assert_eq!(nu(&[25.0, 25.0], 100.0), 0.5);
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(empirical_cdf(&[5.0]).unwrap(), vec![(5.0, 1.0)]);
        assert_eq!(
            empirical_cdf(&[1.0, 2.0, 2.0, 4.0]).unwrap(),
            vec![(1.0, 0.25), (2.0, 0.75), (4.0, 1.0)]
        );
        assert!(empirical_cdf(&[]).is_err());
    }
}
