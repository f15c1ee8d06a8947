//! Box target encoding for the 30-wide regression head and its inverse.
//!
//! Head layout: `[0..3)` center residual from the centroid, `[3..6)` size
//! residual relative to the class mean, `[6..18)` angle-bin logits,
//! `[18..30)` normalized in-bin residual per bin.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::NnError;
use crate::geometry::{Box7, Point};

pub const N_BINS: usize = 12;
pub const HEAD_WIDTH: usize = 3 + 3 + 2 * N_BINS;
pub const LOC: std::ops::Range<usize> = 0..3;
pub const SIZE: std::ops::Range<usize> = 3..6;
pub const BIN: std::ops::Range<usize> = 6..6 + N_BINS;
pub const RES: std::ops::Range<usize> = 6 + N_BINS..HEAD_WIDTH;

/// Smallest decoded size as a fraction of the class mean.
const MIN_SIZE_FRACTION: f64 = 1e-3;

pub fn bin_width() -> f64 {
    2.0 * PI / N_BINS as f64
}

pub fn bin_center(bin: usize) -> f64 {
    bin as f64 * bin_width()
}

/// Bin `k` is centered at `k * w` and spans `(k*w - w/2, k*w + w/2]`, so a
/// yaw on an edge between two bins goes to the lower one. The residual is
/// the offset from the bin center in units of `w / 2`.
pub fn angle_to_bin(yaw: f64) -> (usize, f64) {
    let w = bin_width();
    let t = yaw.rem_euclid(2.0 * PI);
    let k = (t / w - 0.5).ceil();
    let res = (t - k * w) / (0.5 * w);
    ((k as usize) % N_BINS, res)
}

pub fn bin_to_angle(bin: usize, residual: f64) -> f64 {
    bin_center(bin) + residual * 0.5 * bin_width()
}

/// Regression targets for one positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodedBox {
    pub loc: [f64; 3],
    pub size: [f64; 3],
    pub bin: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCoder {
    /// `(l, w, h)` per class id.
    pub mean_sizes: Vec<[f64; 3]>,
}

impl BoxCoder {
    pub fn new(mean_sizes: Vec<[f64; 3]>) -> Result<Self, NnError> {
        if mean_sizes.is_empty()
            || mean_sizes
                .iter()
                .flatten()
                .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(NnError::InvalidSpec(format!(
                "class mean sizes must be positive: {mean_sizes:?}"
            )));
        }
        Ok(Self { mean_sizes })
    }

    /// Per-class means of the labelled sizes; classes without labels keep `fallback`.
    pub fn from_boxes<'a>(
        boxes: impl IntoIterator<Item = &'a Box7>,
        fallback: &[[f64; 3]],
    ) -> Result<Self, NnError> {
        let mut sums = vec![[0.0; 3]; fallback.len()];
        let mut counts = vec![0usize; fallback.len()];
        for b in boxes {
            if let Some(s) = sums.get_mut(b.class_id()) {
                for (a, v) in s.iter_mut().zip(b.size()) {
                    *a += v;
                }
                counts[b.class_id()] += 1;
            }
        }
        let means = sums
            .iter()
            .zip(&counts)
            .zip(fallback)
            .map(|((s, &n), f)| if n == 0 { *f } else { s.map(|v| v / n as f64) })
            .collect();
        Self::new(means)
    }

    pub fn n_classes(&self) -> usize {
        self.mean_sizes.len()
    }

    pub fn mean_size(&self, class_id: usize) -> Result<[f64; 3], NnError> {
        self.mean_sizes
            .get(class_id)
            .copied()
            .ok_or_else(|| NnError::InvalidSpec(format!("no mean size for class {class_id}")))
    }

    pub fn encode(&self, target: &Box7, centroid: Point) -> Result<EncodedBox, NnError> {
        let mean = self.mean_size(target.class_id())?;
        let d = target.center() - centroid;
        let size = target.size();
        let (bin, residual) = angle_to_bin(target.yaw());
        Ok(EncodedBox {
            loc: d.to_array(),
            size: std::array::from_fn(|i| (size[i] - mean[i]) / mean[i]),
            bin,
            residual,
        })
    }

    /// Writes the encoding as a head row with a one-hot bin logit of `confidence`.
    pub fn to_head_row(e: &EncodedBox, confidence: f64) -> [f64; HEAD_WIDTH] {
        let mut row = [0.0; HEAD_WIDTH];
        row[LOC].copy_from_slice(&e.loc);
        row[SIZE].copy_from_slice(&e.size);
        row[BIN.start + e.bin] = confidence;
        row[RES.start + e.bin] = e.residual;
        row
    }

    /// Inverts [`BoxCoder::encode`] using the highest-scoring bin (lowest index on ties).
    pub fn decode(&self, row: &[f64], centroid: Point, class_id: usize) -> Result<Box7, NnError> {
        if row.len() != HEAD_WIDTH {
            return Err(NnError::shape(
                "decode",
                HEAD_WIDTH.to_string(),
                row.len().to_string(),
            ));
        }
        let mean = self.mean_size(class_id)?;
        let center = centroid + Point::new(row[0], row[1], row[2]);
        let size = std::array::from_fn(|i| {
            (mean[i] * (1.0 + row[SIZE.start + i])).max(MIN_SIZE_FRACTION * mean[i])
        });
        let bin = argmax(&row[BIN]);
        let yaw = bin_to_angle(bin, row[RES.start + bin]);
        Box7::new(center, size, yaw, class_id).map_err(|e| NnError::InvalidSpec(e.to_string()))
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bins_and_edges() {
        let w = bin_width();
        assert_eq!(angle_to_bin(0.0), (0, 0.0));
        let (b, r) = angle_to_bin(3.0 * w);
        assert_eq!(b, 3);
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-12);
        // an edge between bins 2 and 3 goes to the lower bin
        let (b, r) = angle_to_bin(2.5 * w);
        assert_eq!(b, 2);
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
        let (b, r) = angle_to_bin(-0.25 * w);
        assert_eq!(b, 0);
        assert_abs_diff_eq!(r, -0.5, epsilon = 1e-12);
        let (b, _) = angle_to_bin(2.0 * PI - 0.1 * w);
        assert_eq!(b, 0);
    }

    #[test]
    fn zero_head_decodes_to_mean_box() {
        let coder = BoxCoder::new(vec![[3.9, 1.6, 1.56], [0.8, 0.6, 1.73]]).unwrap();
        let c = Point::new(1.0, 2.0, 0.5);
        let b = coder.decode(&[0.0; HEAD_WIDTH], c, 1).unwrap();
        assert_eq!(b.center(), c);
        assert_eq!(b.size(), [0.8, 0.6, 1.73]);
        assert_eq!(b.yaw(), 0.0);
    }
}
