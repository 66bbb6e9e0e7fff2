//! Generalization of per-pose boundaries: landmark placement, point distribution
//! model and the regression from object features to shape deformation.

pub mod gsm;
pub mod landmarks;
pub mod pdm;
pub mod regression;

use thiserror::Error;

use crate::linalg::LinalgError;

pub use gsm::{build_gsm, Deformation, GraspType, GsmModel, GsmReport, TrainingBounds};
pub use landmarks::{landmark_cost, optimize_landmarks, uniform_params, LandmarkOptions, LandmarkResult};
pub use pdm::{assemble_h, fit_pdm, BoundaryMatrix, Pdm};
pub use regression::{fit_regression, QuadForm, RegressionModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("no boundaries")]
    Empty,
    #[error("{0} boundaries but {1} object poses")]
    PoseCount(usize, usize),
    #[error("landmark count mismatch: expected {0}, found {1}")]
    LandmarkCount(usize, usize),
    #[error("need at least two shapes (six for regression), got {0}")]
    TooFewShapes(usize),
    #[error("need at least 4 landmarks, got {0}")]
    TooFewLandmarks(usize),
    #[error("mode count {d} outside 1..={max}")]
    BadModeCount { d: usize, max: usize },
    #[error("expected {0} mode values, got {1}")]
    ModeCount(usize, usize),
    #[error("no variation")]
    NoVariation,
    #[error("degenerate contour")]
    DegenerateContour,
    #[error("energy threshold not reached (best energy {best})")]
    EnergyNotReached { best: f64 },
    #[error("shapes need {d} modes (energy {energy}); the success model uses two")]
    TooManyModes { d: usize, energy: f64 },
    #[error("rank-deficient design matrix")]
    RankDeficientDesign,
    #[error("model format: {0}")]
    Format(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
