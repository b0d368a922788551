//! Experiment configuration, read from TOML. Every field has a default, so
//! an empty file describes the homogeneous scenario with all five
//! strategies.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::allocation::{CarrierPlan, QpSettings};
use crate::error::{Error, Result};
use crate::link_budget::{calibrate_carrier_power, AntennaModel, LinkModel, LinkParams};
use crate::mapping::MAX_BEAM_RADIUS_KM;
use crate::strategies::{GaParams, Strategy, StrategyParams};
use crate::traffic::{load_population_grid, PopulationGrid, ScenarioKind, TrafficScenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    /// Dirichlet concentration per beam; defaults by scenario kind.
    pub alpha: Option<Vec<f64>>,
    pub grid_cols: Option<usize>,
    pub grid_rows: Option<usize>,
    pub user_count: Option<usize>,
    pub demand_per_user_mbps: f64,
    /// Population raster for RT; a synthetic raster is used when absent.
    pub population_grid: Option<PathBuf>,
    /// Size of the synthetic RT raster, km.
    pub region_width_km: f64,
    pub region_height_km: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::Ht,
            alpha: None,
            grid_cols: None,
            grid_rows: None,
            user_count: None,
            demand_per_user_mbps: 25.0,
            population_grid: None,
            region_width_km: 690.0,
            region_height_km: 800.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub g_max_dbi: f64,
    pub beam_radius_km: f64,
    pub g_over_t_db: f64,
    pub free_space_loss_db: f64,
    pub atmospheric_loss_db: f64,
    pub depointing_loss_db: f64,
    /// Carrier power, W; calibrated to the design capacity when absent.
    pub carrier_tx_power_w: Option<f64>,
}

impl Default for LinkSection {
    fn default() -> Self {
        let l = LinkParams::default();
        Self {
            g_max_dbi: 52.0,
            beam_radius_km: 50.0,
            g_over_t_db: l.g_over_t_db,
            free_space_loss_db: l.free_space_loss_db,
            atmospheric_loss_db: l.atmospheric_loss_db,
            depointing_loss_db: l.depointing_loss_db,
            carrier_tx_power_w: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationSection {
    pub total_bandwidth_mhz: f64,
    pub carriers_per_color: usize,
    pub kkt_tolerance: f64,
    pub max_qp_iterations: usize,
    pub tie_break: f64,
    pub reconcile_pair_carriers: bool,
}

impl Default for AllocationSection {
    fn default() -> Self {
        let q = QpSettings::default();
        let p = CarrierPlan::default();
        Self {
            total_bandwidth_mhz: p.total_bandwidth_mhz,
            carriers_per_color: p.carriers_per_color,
            kkt_tolerance: q.kkt_tolerance,
            max_qp_iterations: q.max_iterations,
            tie_break: q.tie_break,
            reconcile_pair_carriers: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingSection {
    pub max_beam_radius_km: f64,
    pub candidate_beams: usize,
}

impl Default for MappingSection {
    fn default() -> Self {
        Self {
            max_beam_radius_km: MAX_BEAM_RADIUS_KM,
            candidate_beams: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategiesSection {
    pub list: Vec<String>,
    pub max_iterations: usize,
    pub map_iterative: bool,
}

impl Default for StrategiesSection {
    fn default() -> Self {
        Self {
            list: Strategy::ALL.iter().map(|s| s.name().to_string()).collect(),
            max_iterations: 50,
            map_iterative: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub runs: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            runs: 200,
            seed: 2024,
            output_dir: PathBuf::from("results"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSection,
    pub link: LinkSection,
    pub allocation: AllocationSection,
    pub mapping: MappingSection,
    pub strategies: StrategiesSection,
    pub ga: GaParams,
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Defaults for a scenario kind.
    pub fn for_scenario(kind: ScenarioKind) -> Self {
        let mut cfg = Self::default();
        cfg.scenario.kind = kind;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.runs == 0 {
            return Err(Error::Config("experiment.runs must be at least 1".into()));
        }
        self.strategy_list()?;
        self.ga.validate()?;
        if self.allocation.carriers_per_color == 0 {
            return Err(Error::Config(
                "allocation.carriers_per_color must be positive".into(),
            ));
        }
        if self.mapping.candidate_beams == 0 {
            return Err(Error::Config(
                "mapping.candidate_beams must be positive".into(),
            ));
        }
        if let Some(alpha) = &self.scenario.alpha {
            let (cols, rows) = self.grid();
            if alpha.len() != cols * rows {
                return Err(Error::Config(format!(
                    "scenario.alpha has {} entries for {} beams",
                    alpha.len(),
                    cols * rows
                )));
            }
        }
        Ok(())
    }

    pub fn strategy_list(&self) -> Result<Vec<Strategy>> {
        if self.strategies.list.is_empty() {
            return Err(Error::Config("strategies.list must not be empty".into()));
        }
        self.strategies
            .list
            .iter()
            .map(|s| {
                s.parse::<Strategy>()
                    .map_err(|_| Error::Config(format!("strategies.list: unknown strategy `{s}`")))
            })
            .collect()
    }

    fn grid(&self) -> (usize, usize) {
        let (c, r) = match self.scenario.kind {
            ScenarioKind::Rt => (8, 8),
            _ => (2, 3),
        };
        (
            self.scenario.grid_cols.unwrap_or(c),
            self.scenario.grid_rows.unwrap_or(r),
        )
    }

    /// The traffic scenario described by the configuration.
    pub fn scenario(&self) -> Result<TrafficScenario> {
        let s = &self.scenario;
        let mut scenario = match s.kind {
            ScenarioKind::Ht => TrafficScenario::homogeneous(),
            ScenarioKind::Whs => TrafficScenario::wide_hot_spot(),
            ScenarioKind::Rt => {
                let grid = match &s.population_grid {
                    Some(path) => load_population_grid(path)?,
                    None => PopulationGrid::synthetic_skewed(
                        80,
                        69,
                        s.region_width_km,
                        s.region_height_km,
                    ),
                };
                TrafficScenario::real_traffic(grid)
            }
        };
        let (cols, rows) = self.grid();
        scenario.grid_cols = cols;
        scenario.grid_rows = rows;
        scenario.beam_radius_km = self.link.beam_radius_km;
        scenario.demand_per_user = s.demand_per_user_mbps;
        if let Some(n) = s.user_count {
            scenario.user_count = n;
        }
        if let Some(alpha) = &s.alpha {
            scenario.alpha = alpha.clone();
        } else if s.kind != ScenarioKind::Rt && scenario.alpha.len() != cols * rows {
            scenario.alpha = vec![1.0; cols * rows];
        }
        Ok(scenario)
    }

    pub fn antenna(&self) -> AntennaModel {
        AntennaModel::from_dbi(self.link.g_max_dbi, self.link.beam_radius_km)
    }

    pub fn carrier_plan(&self) -> CarrierPlan {
        CarrierPlan {
            total_bandwidth_mhz: self.allocation.total_bandwidth_mhz,
            carriers_per_color: self.allocation.carriers_per_color,
        }
    }

    /// Link parameters with the carrier power either configured or
    /// calibrated so that an on-axis user with `M` carriers reaches the
    /// design capacity `T / K`.
    pub fn link_params(&self, scenario: &TrafficScenario) -> LinkParams {
        let plan = self.carrier_plan();
        let mut link = LinkParams {
            g_over_t_db: self.link.g_over_t_db,
            free_space_loss_db: self.link.free_space_loss_db,
            atmospheric_loss_db: self.link.atmospheric_loss_db,
            depointing_loss_db: self.link.depointing_loss_db,
            carrier_bandwidth_mhz: plan.carrier_bandwidth(),
            ..LinkParams::default()
        };
        link.carrier_tx_power_w = match self.link.carrier_tx_power_w {
            Some(p) => p,
            None => calibrate_carrier_power(
                &self.antenna(),
                &link,
                design_capacity(scenario),
                plan.carriers_per_color,
            ),
        };
        link
    }

    pub fn strategy_params(&self, scenario: &TrafficScenario) -> StrategyParams {
        let link = LinkModel::new(self.antenna(), self.link_params(scenario));
        let mut p = StrategyParams::new(
            link,
            self.carrier_plan(),
            scenario.beam_count(),
            design_capacity(scenario),
        );
        p.max_beam_radius_km = self.mapping.max_beam_radius_km;
        p.candidate_beams = self.mapping.candidate_beams;
        p.max_iterations = self.strategies.max_iterations;
        p.map_iterative = self.strategies.map_iterative;
        p.reconcile_pair_carriers = self.allocation.reconcile_pair_carriers;
        p.qp = QpSettings {
            kkt_tolerance: self.allocation.kkt_tolerance,
            max_iterations: self.allocation.max_qp_iterations,
            tie_break: self.allocation.tie_break,
        };
        p.ga = self.ga;
        p
    }

    /// SHA-256 of the canonical JSON form of the configuration, hex. The
    /// output directory is excluded.
    pub fn digest(&self) -> String {
        let mut cfg = self.clone();
        cfg.experiment.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&cfg).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Per-beam design capacity `T / K`.
pub fn design_capacity(scenario: &TrafficScenario) -> f64 {
    scenario.total_demand() / scenario.beam_count() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.strategy_list().unwrap(), Strategy::ALL.to_vec());
    }

    #[test]
    fn unknown_strategy_names_field() {
        let err =
            ExperimentConfig::from_toml("[strategies]\nlist = [\"SR\", \"XYZ\"]\n").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("strategies.list") && msg.contains("XYZ"),
            "{msg}"
        );
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(ExperimentConfig::from_toml("[experiment]\nrunz = 3\n").is_err());
    }

    #[test]
    fn zero_runs_rejected() {
        assert!(ExperimentConfig::from_toml("[experiment]\nruns = 0\n").is_err());
    }

    #[test]
    fn whs_defaults() {
        let cfg = ExperimentConfig::from_toml("[scenario]\nkind = \"WHS\"\n").unwrap();
        let s = cfg.scenario().unwrap();
        assert_eq!(s.alpha, vec![4.0, 4.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(s.beam_count(), 6);
    }
}
