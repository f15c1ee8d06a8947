//! Scene ingestion, label formats, synthetic scenes and augmentation.

mod augment;
mod bin;
mod kitti;
mod labels;
mod synth;

use std::collections::HashSet;
use std::path::PathBuf;

use thiserror::Error;

pub use augment::{augment, build_bank, AugmentConfig, AugmentReport, BankInstance};
pub use bin::{read_point_bin, write_point_bin, POINT_RECORD_BYTES};
pub use kitti::{
    convert_kitti_frame, parse_calibration, parse_kitti_labels, Calibration, KittiObject,
};
pub use labels::{
    format_scene_labels, parse_scene_labels, read_scene_labels, write_scene_labels, ClassCatalog,
};
pub use synth::{generate_scene, ClassGen, SceneGenSpec};

use crate::geometry::{Box7, GeometryError};
use crate::sampling::{PointCloud, SamplingError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: length {len} is not a multiple of {record} bytes")]
    Truncated {
        path: PathBuf,
        len: u64,
        record: usize,
    },
    #[error("{path}: non-finite value in record {record} (byte offset {offset})")]
    NonFinite {
        path: PathBuf,
        record: usize,
        offset: usize,
    },
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("{origin}:{line}: unknown class '{name}'")]
    UnknownClass {
        origin: String,
        line: usize,
        name: String,
    },
    #[error("duplicate instance id {0} in scene")]
    DuplicateInstance(u32),
    #[error("invalid scene generation spec: {0}")]
    InvalidSpec(String),
    #[error("could not place instance {instance} of class {class} after {retries} attempts")]
    Infeasible {
        class: usize,
        instance: usize,
        retries: usize,
    },
    #[error("missing calibration key '{0}'")]
    MissingCalibration(String),
    #[error("unusable calibration: {0}")]
    Calibration(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A point cloud with its ground-truth boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScene {
    pub frame_id: String,
    pub cloud: PointCloud,
    pub boxes: Vec<Box7>,
}

impl LabeledScene {
    /// Rejects duplicate instance ids.
    pub fn new(
        frame_id: impl Into<String>,
        cloud: PointCloud,
        boxes: Vec<Box7>,
    ) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        for b in &boxes {
            if let Some(id) = b.instance_id() {
                if !seen.insert(id) {
                    return Err(DataError::DuplicateInstance(id));
                }
            }
        }
        Ok(Self {
            frame_id: frame_id.into(),
            cloud,
            boxes,
        })
    }

    /// Boxes with missing instance ids get fresh ones.
    pub fn with_instance_ids(mut self) -> Self {
        let mut next = self
            .boxes
            .iter()
            .filter_map(|b| b.instance_id())
            .max()
            .map_or(0, |m| m + 1);
        for b in &mut self.boxes {
            if b.instance_id().is_none() {
                *b = b.with_instance(next);
                next += 1;
            }
        }
        self
    }
}
