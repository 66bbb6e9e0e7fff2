//! Training pipeline from labeled trials to a generalized success model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{extract_dense_contour, labeled_sets, train_all, ClassifierError, ContourError, GridSpec, SvmModel, SvmParams};
use crate::shapemodel::{build_gsm, GraspType, GsmModel, GsmReport, LandmarkOptions, ShapeError};
use crate::simworld::{Dataset, WorldConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("object pose {index}: {source}")]
    Contour { index: usize, source: ContourError },
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Hyperparameters of the training stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub kernel_sigma: f64,
    pub cost_c: f64,
    pub class_weight: f64,
    pub svm_tolerance: f64,
    pub n_landmarks: usize,
    /// Contour extraction lattice spacing, also the landmark move unit.
    pub extraction_cell: f64,
    pub energy_threshold: f64,
    pub max_sweeps: usize,
    pub grasp_type: GraspType,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kernel_sigma: 0.1,
            cost_c: 40.0,
            class_weight: 2.0,
            svm_tolerance: 1e-3,
            n_landmarks: 20,
            extraction_cell: 0.01,
            energy_threshold: 0.95,
            max_sweeps: 30,
            grasp_type: GraspType::Side,
        }
    }
}

impl TrainConfig {
    pub fn svm_params(&self) -> SvmParams<f64> {
        SvmParams {
            kernel_sigma: self.kernel_sigma,
            cost_c: self.cost_c,
            positive_class_weight: self.class_weight,
            tolerance: self.svm_tolerance,
            ..SvmParams::default()
        }
    }

    pub fn landmark_options(&self) -> LandmarkOptions<f64> {
        LandmarkOptions { step: self.extraction_cell, energy_threshold: self.energy_threshold, max_sweeps: self.max_sweeps, ..LandmarkOptions::default() }
    }

    /// Extraction lattice over the candidate base rectangle.
    pub fn extraction_grid(&self, world: &WorldConfig) -> GridSpec<f64> {
        let b = world.robot_bounds;
        GridSpec { x_min: b.dx_min, x_max: b.dx_max, y_min: b.dy_min, y_max: b.dy_max, cell: self.extraction_cell }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub svms: Vec<SvmModel<f64>>,
    pub gsm: GsmModel<f64>,
    pub report: GsmReport<f64>,
}

pub fn train_svms(ds: &Dataset, cfg: &TrainConfig) -> Result<Vec<SvmModel<f64>>, PipelineError> {
    Ok(train_all(&labeled_sets(ds), &cfg.svm_params())?)
}

pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutput, PipelineError> {
    let svms = train_svms(ds, cfg)?;
    let gsm_and_report = gsm_from_svms(&svms, ds, cfg)?;
    Ok(TrainOutput { svms, gsm: gsm_and_report.0, report: gsm_and_report.1 })
}

pub fn gsm_from_svms(svms: &[SvmModel<f64>], ds: &Dataset, cfg: &TrainConfig) -> Result<(GsmModel<f64>, GsmReport<f64>), PipelineError> {
    let grid = cfg.extraction_grid(&ds.world);
    let contours = svms
        .iter()
        .enumerate()
        .map(|(index, m)| extract_dense_contour(m, &grid).map_err(|source| PipelineError::Contour { index, source }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(build_gsm(&contours, &ds.object_grid, cfg.n_landmarks, cfg.grasp_type, &cfg.landmark_options())?)
}
