//! Point-based single-stage 3D object detection on LiDAR point clouds.

pub mod dataio;
pub mod eval;
pub mod geometry;
pub mod head;
pub mod neighborhood;
pub mod nn;
pub mod sampling;
