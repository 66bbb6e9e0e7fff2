//! Per-object-pose success classifiers and their closed decision boundaries.

pub mod contour;
pub mod svm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{is_simple_polygon, signed_area, ObjectFeatures, Point2};
use crate::scalar::Real;
use crate::simworld::Dataset;

pub use contour::{ContourError, GridSpec, SampledField};
pub use svm::{train_svm, LabeledSet, SvmError, SvmModel, SvmParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error("object pose {index}: {source}")]
    Pose { index: usize, source: Box<ClassifierError> },
}

/// Closed landmark polygon in the feature frame, counterclockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Boundary<F> {
    pub landmarks: Vec<Point2<F>>,
}

impl<F: Real> Boundary<F> {
    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn contains(&self, p: Point2<F>) -> bool {
        crate::geometry::point_in_polygon(p, &self.landmarks)
    }

    pub fn area(&self) -> F {
        signed_area(&self.landmarks)
    }

    pub fn is_simple(&self) -> bool {
        is_simple_polygon(&self.landmarks)
    }
}

/// Dense outline of the model's largest positive region, starting at its vertex of
/// maximal dx_rob and running counterclockwise.
pub fn extract_dense_contour<F: Real>(model: &SvmModel<F>, grid: &GridSpec<F>) -> Result<Vec<Point2<F>>, ContourError> {
    let field = SampledField::sample(*grid, |p| model.decide(&p.into()))?;
    let c = contour::extract_contour(&field)?;
    Ok(contour::canonical_start(&c))
}

pub fn extract_boundary<F: Real>(model: &SvmModel<F>, grid: &GridSpec<F>, n_landmarks: usize) -> Result<Boundary<F>, ContourError> {
    let dense = extract_dense_contour(model, grid)?;
    Ok(Boundary { landmarks: contour::resample_closed(&dense, n_landmarks)? })
}

/// Splits a dataset into one labeled set per object pose.
pub fn labeled_sets(ds: &Dataset) -> Vec<LabeledSet<f64>> {
    (0..ds.n_objects())
        .map(|j| {
            let slice = ds.slice(j);
            LabeledSet {
                points: slice.iter().map(|r| r.robot).collect(),
                labels: slice.iter().map(|r| r.label.sign()).collect(),
                object: ds.object_grid[j],
            }
        })
        .collect()
}

/// Trains the per-pose classifiers in parallel, preserving pose order.
pub fn train_all<F: Real>(sets: &[LabeledSet<F>], params: &SvmParams<F>) -> Result<Vec<SvmModel<F>>, ClassifierError> {
    sets.par_iter()
        .enumerate()
        .map(|(index, s)| train_svm(s, params).map_err(|e| ClassifierError::Pose { index, source: Box::new(e.into()) }))
        .collect()
}

/// One trained classifier together with its object pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct PoseModel<F> {
    pub object: ObjectFeatures<F>,
    pub model: SvmModel<F>,
}
