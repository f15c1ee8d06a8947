//! Raw LiDAR sweeps: consecutive little-endian `f32` quadruples `(x, y, z, intensity)`.

use std::fs;
use std::path::Path;

use super::{io_err, DataError};
use crate::geometry::Point;
use crate::sampling::PointCloud;

pub const POINT_RECORD_BYTES: usize = 16;

pub fn read_point_bin(path: impl AsRef<Path>) -> Result<PointCloud, DataError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() % POINT_RECORD_BYTES != 0 {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            len: bytes.len() as u64,
            record: POINT_RECORD_BYTES,
        });
    }
    let n = bytes.len() / POINT_RECORD_BYTES;
    let mut points = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for (record, chunk) in bytes.chunks_exact(POINT_RECORD_BYTES).enumerate() {
        let mut v = [0f32; 4];
        for (j, slot) in v.iter_mut().enumerate() {
            *slot = f32::from_le_bytes(chunk[4 * j..4 * j + 4].try_into().unwrap());
            if !slot.is_finite() {
                return Err(DataError::NonFinite {
                    path: path.to_path_buf(),
                    record,
                    offset: record * POINT_RECORD_BYTES + 4 * j,
                });
            }
        }
        points.push(Point::new(v[0] as f64, v[1] as f64, v[2] as f64));
        intensity.push(v[3] as f64);
    }
    Ok(PointCloud::new(points)?.with_intensity(intensity)?)
}

/// Writes `f32` records; a cloud without intensity is written with intensity 0.
pub fn write_point_bin(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(cloud.len() * POINT_RECORD_BYTES);
    for (i, p) in cloud.points().iter().enumerate() {
        let it = cloud.intensity().map_or(0.0, |v| v[i]);
        for v in [p.x, p.y, p.z, it] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(io_err(path))
}
