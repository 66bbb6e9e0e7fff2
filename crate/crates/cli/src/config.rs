//! Pipeline configuration file and the derived provenance stamp.

use std::path::Path;

use arplace::evalharness::{SweepSpec, TwoCupScenario};
use arplace::pipeline::TrainConfig;
use arplace::planner::{PlannerConfig, TimeModel};
use arplace::provenance::Provenance;
use arplace::simworld::{object_grid, WorldConfig};
use arplace::ObjectFeatures;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub object_dx: [f64; 2],
    pub object_dpsi: [f64; 2],
    /// Object grid size as `[n_dx, n_dpsi]`.
    pub object_counts: [usize; 2],
    /// Robot grid size as `[n_dx, n_dy]`.
    pub robot_counts: [usize; 2],
    pub capability_filter: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { object_dx: [0.05, 0.25], object_dpsi: [1.7, 2.6], object_counts: [4, 4], robot_counts: [11, 17], capability_filter: true }
    }
}

impl DataConfig {
    pub fn objects(&self) -> Vec<ObjectFeatures> {
        object_grid(
            (self.object_dx[0], self.object_dx[1]),
            (self.object_dpsi[0], self.object_dpsi[1]),
            self.object_counts[0],
            self.object_counts[1],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub n_samples: usize,
    pub cell_size: f64,
    /// Robot position standard deviation used to condition maps.
    pub robot_sigma: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { n_samples: 100, cell_size: 0.025, robot_sigma: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccuracyConfig {
    pub sizes: Vec<usize>,
    /// Object pose as `[dx_obj, dpsi_obj]`.
    pub object: [f64; 2],
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        Self { sizes: vec![10, 25, 50, 100, 150, 200, 300, 400], object: [0.15, 2.15] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformConfig {
    pub distances: Vec<f64>,
    /// Use the calibrated time model instead of `[time_model]`.
    pub calibrated: bool,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self { distances: arplace::evalharness::default_distances(), calibrated: true }
    }
}

/// Everything a run depends on besides the seed and input files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub world: WorldConfig,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub map: MapConfig,
    pub planner: PlannerConfig,
    pub time_model: TimeModel,
    pub scenario: TwoCupScenario,
    pub robustness: SweepSpec,
    pub accuracy: AccuracyConfig,
    pub transform: TransformConfig,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg: Self = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::missing(p, e))?;
                toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
            }
        };
        cfg.world.validate().map_err(|e| CliError::config(e.to_string()))?;
        cfg.robustness.validate().map_err(|e| CliError::config(e.to_string()))?;
        Ok(cfg)
    }

    /// Short hash of the effective configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn provenance(&self, seed: u64) -> Provenance {
        Provenance::new(seed, self.hash())
    }
}
