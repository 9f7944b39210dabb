//! Scenario files: one TOML document with a section per subsystem. Every
//! key has a default, so an empty file is a valid scenario.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cost::{neighbour_factor, CostParams};
use crate::demand::DemandConfig;
use crate::error::{Error, Result};
use crate::geometry::{average_rate, GeometryConfig, RateModel};
use crate::sim::SimulationConfig;
use crate::solver::{ContentProblem, Grid, InitialState, SolverConfig};

/// Metric tables the experiment commands know how to write.
pub const TABLES: &[&str] = &[
    "solution",
    "residuals",
    "control_trajectory",
    "density_heatmap",
    "iterations_vs_lambda_b",
    "lra_trajectory",
    "overlap_per_storage",
    "lra_lambda_u",
    "summary",
    "ipi_increment",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    /// Subset of [`TABLES`] to write.
    pub tables: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "out".into(),
            tables: TABLES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl OutputConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tables.iter().find(|t| !TABLES.contains(&t.as_str())) {
            return Err(Error::validation(
                "output.tables",
                format!("unknown table `{t}`; known: {}", TABLES.join(", ")),
            ));
        }
        Ok(())
    }

    pub fn wants(&self, table: &str) -> bool {
        self.tables.iter().any(|t| t == table)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: GeometryConfig,
    pub demand: DemandConfig,
    pub costs: CostParams,
    pub initial: InitialState,
    pub solver: SolverConfig,
    pub simulation: SimulationConfig,
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.demand.validate()?;
        self.costs.validate()?;
        self.initial.validate(self.costs.storage)?;
        self.solver.validate()?;
        self.simulation.validate(self.demand.period)?;
        self.output.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// SHA-256 of the canonical TOML rendering, as lowercase hex.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Average rate per unit bandwidth of the configured network.
    pub fn rate(&self) -> Result<f64> {
        let model = RateModel::from_config(&self.geometry)?;
        average_rate(&model, &self.geometry)
    }

    /// SBSs in the request region: the fixed population when one is
    /// configured, otherwise the mean Poisson count.
    pub fn request_region_count(&self) -> usize {
        self.simulation
            .sbs_count
            .unwrap_or_else(|| self.geometry.request_region_count())
    }

    /// Equilibrium problem of a content with long-term mean `mu`.
    pub fn content_problem(&self, mu: f64) -> Result<ContentProblem> {
        let problem = ContentProblem {
            mu,
            reversion_rate: self.demand.reversion_rate,
            volatility: self.demand.volatility,
            rate: self.rate()?,
            costs: self.costs.clone(),
            neighbours: neighbour_factor(self.request_region_count()),
            floor_eps: self.demand.ipi.floor_eps,
            horizon: self.simulation.horizon,
            initial: self.initial,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn grid(&self, problem: &ContentProblem) -> Result<Grid> {
        problem.grid(self.solver.nt, self.solver.nx, self.solver.nq)
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_toml(&text)
}
