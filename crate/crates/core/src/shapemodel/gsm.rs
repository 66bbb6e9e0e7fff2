//! The generalized success model: PDM plus regression, queried per object pose.

use serde::{Deserialize, Serialize};

use super::landmarks::{optimize_landmarks, LandmarkOptions};
use super::pdm::{assemble_h, fit_pdm, Pdm};
use super::regression::{fit_regression, RegressionModel};
use super::ShapeError;
use crate::classifier::Boundary;
use crate::geometry::{ObjectFeatures, Point2, RobotOffset};
use crate::scalar::Real;

pub const GSM_FORMAT: &str = "arplace-gsm";
pub const GSM_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspType {
    Side,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct TrainingBounds<F> {
    pub dx_min: F,
    pub dx_max: F,
    pub dpsi_min: F,
    pub dpsi_max: F,
}

impl<F: Real> TrainingBounds<F> {
    pub fn of(poses: &[ObjectFeatures<F>]) -> Self {
        let mut b = Self { dx_min: F::infinity(), dx_max: F::neg_infinity(), dpsi_min: F::infinity(), dpsi_max: F::neg_infinity() };
        for p in poses {
            b.dx_min = b.dx_min.min(p.dx_obj);
            b.dx_max = b.dx_max.max(p.dx_obj);
            b.dpsi_min = b.dpsi_min.min(p.dpsi_obj);
            b.dpsi_max = b.dpsi_max.max(p.dpsi_obj);
        }
        b
    }

    pub fn contains(&self, f: &ObjectFeatures<F>) -> bool {
        f.dx_obj >= self.dx_min && f.dx_obj <= self.dx_max && f.dpsi_obj >= self.dpsi_min && f.dpsi_obj <= self.dpsi_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct GsmModel<F> {
    pub format: String,
    pub version: u32,
    pub m: usize,
    pub d: usize,
    pub pdm: Pdm<F>,
    pub regression: RegressionModel<F>,
    pub grasp_type: GraspType,
    pub training_bounds: TrainingBounds<F>,
}

/// Mode values for an object pose and whether the pose lies outside the training range.
#[derive(Debug, Clone, PartialEq)]
pub struct Deformation<F> {
    pub b: Vec<F>,
    pub extrapolated: bool,
}

impl<F: Real> GsmModel<F> {
    pub fn deformation_for(&self, f: &ObjectFeatures<F>) -> Deformation<F> {
        Deformation { b: self.regression.predict(f), extrapolated: !self.training_bounds.contains(f) }
    }

    pub fn boundary_for(&self, f: &ObjectFeatures<F>) -> Boundary<F> {
        let b = self.regression.predict(f);
        super::pdm::column_to_boundary(&self.pdm.reconstruct_column(&b), self.m)
    }

    pub fn predict_success(&self, robot: &RobotOffset<F>, f: &ObjectFeatures<F>) -> bool {
        self.boundary_for(f).contains(robot.as_point())
    }

    pub fn validate(&self) -> Result<(), ShapeError> {
        if self.format != GSM_FORMAT || self.version != GSM_VERSION {
            return Err(ShapeError::Format(format!("{} v{}", self.format, self.version)));
        }
        let rows = 2 * self.m;
        let ok = self.d == 2
            && self.pdm.d == self.d
            && self.pdm.m == self.m
            && self.pdm.mean.len() == rows
            && self.pdm.modes.len() == self.d
            && self.pdm.modes.iter().all(|p| p.len() == rows)
            && self.regression.modes.len() == self.d;
        if ok {
            Ok(())
        } else {
            Err(ShapeError::Format("inconsistent dimensions".into()))
        }
    }
}

/// Diagnostics of a GSM build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct GsmReport<F> {
    /// Mode count found by landmark optimization.
    pub landmark_d: usize,
    pub energy: F,
    pub mean_landmark_error: F,
    pub r_squared: Vec<F>,
    pub training_modes: Vec<Vec<F>>,
    pub boundaries: Vec<Boundary<F>>,
}

/// Landmark optimization, two-mode PDM and regression over dense training contours.
pub fn build_gsm<F: Real>(
    contours: &[Vec<Point2<F>>],
    poses: &[ObjectFeatures<F>],
    m: usize,
    grasp_type: GraspType,
    opts: &LandmarkOptions<F>,
) -> Result<(GsmModel<F>, GsmReport<F>), ShapeError> {
    if contours.len() != poses.len() {
        return Err(ShapeError::PoseCount(contours.len(), poses.len()));
    }
    let lm = optimize_landmarks(contours, m, opts)?;
    if lm.d > 2 {
        return Err(ShapeError::TooManyModes { d: lm.d, energy: lm.energy.as_f64() });
    }
    let h = assemble_h(&lm.boundaries, poses)?;
    let pdm = fit_pdm(&h, 2)?;
    let energy = pdm.energy(2);
    if energy < opts.energy_threshold {
        return Err(ShapeError::TooManyModes { d: 3, energy: energy.as_f64() });
    }
    let b: Vec<Vec<F>> = h.columns.iter().map(|c| pdm.project(c)).collect();
    let regression = fit_regression(&b, poses)?;
    let mean_landmark_error = h.columns.iter().map(|c| pdm.mean_landmark_error(c)).sum::<F>() / F::count(h.n());
    let report = GsmReport {
        landmark_d: lm.d,
        energy,
        mean_landmark_error,
        r_squared: regression.r_squared.clone(),
        training_modes: b,
        boundaries: lm.boundaries,
    };
    let model = GsmModel {
        format: GSM_FORMAT.into(),
        version: GSM_VERSION,
        m,
        d: 2,
        pdm,
        regression,
        grasp_type,
        training_bounds: TrainingBounds::of(poses),
    };
    Ok((model, report))
}
