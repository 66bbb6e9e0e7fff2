//! Probabilistic base placement for mobile manipulation: learned success regions
//! in an edge-relative frame, a generalized success model over object poses, Monte
//! Carlo place maps under pose uncertainty, and plan transformations that use them.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arplace;
pub mod classifier;
pub mod evalharness;
pub mod geometry;
pub mod linalg;
pub mod pipeline;
pub mod planner;
pub mod provenance;
pub mod scalar;
pub mod shapemodel;
pub mod simworld;

pub use scalar::Real;

pub type Point2 = geometry::Point2<f64>;
pub type Pose2 = geometry::Pose2<f64>;
pub type TableEdge = geometry::TableEdge<f64>;
pub type ObjectFeatures = geometry::ObjectFeatures<f64>;
pub type RobotOffset = geometry::RobotOffset<f64>;
pub type FrameTransform = geometry::FrameTransform<f64>;
