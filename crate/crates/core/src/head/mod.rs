//! Centroid votes, instance aggregation, proposals and training of the detector.

pub mod assign;
pub mod detector;
pub mod proposal;
pub mod train;

use thiserror::Error;

pub use assign::{assign_membership, ContextConfig, ContextMode};
pub use detector::{
    aggregate_instances, predict_and_shift, AggregationConfig, Detector, DetectorConfig, Forward,
    LayerConfig, SceneCache, VoteSet,
};
pub use proposal::{
    format_detections, generate_proposals, parse_detections, postprocess, DetectionRecord, Proposal,
};
pub use train::{load_detector, save_detector, StepRecord, TrainConfig, Trainer};

use crate::dataio::DataError;
use crate::geometry::GeometryError;
use crate::neighborhood::NeighborError;
use crate::nn::NnError;
use crate::sampling::SamplingError;

#[derive(Debug, Error)]
pub enum HeadError {
    #[error("invalid detector config: {0}")]
    Config(String),
    #[error("scene has no points")]
    EmptyScene,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Neighbor(#[from] NeighborError),
    #[error(transparent)]
    Data(#[from] DataError),
}
