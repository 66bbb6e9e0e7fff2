//! Place maps: Monte Carlo success probabilities over base positions, their
//! conditioning on robot pose uncertainty, and map algebra.

pub mod belief;
pub mod grid;
pub mod maps;

use thiserror::Error;

pub use belief::{GaussianBelief, ParticleSet, PoseSampler};
pub use grid::{cost_map, merge, union_edges, ArplaceGrid, CellChoice, CostGrid, Frame, GridGeometry};
pub use maps::{apply_robot_uncertainty, compute_map, compute_world_map, map_from_samples, sample_boundaries, SampledBoundary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("invalid covariance: {0}")]
    BadCovariance(String),
    #[error("invalid grid: {0}")]
    BadGeometry(String),
    #[error("grids differ in geometry")]
    GeometryMismatch,
    #[error("grids are in different frames")]
    FrameMismatch,
    #[error("no maps to combine")]
    NoMaps,
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
    #[error("map file: {0}")]
    Parse(String),
}

impl From<std::io::Error> for MapError {
    fn from(e: std::io::Error) -> Self {
        MapError::Parse(e.to_string())
    }
}
