//! Conversion of KITTI camera-frame object labels into LiDAR-frame boxes.
//!
//! A KITTI label gives the bottom-center `location` of an object in the
//! rectified camera frame (x right, y down, z forward), its dimensions as
//! `(h, w, l)` and a heading `rotation_y` about the camera y-axis. The
//! conversion
//!
//! 1. lifts the location by `h / 2` along camera `-y` to the box center,
//! 2. maps it through `R0_rect^-1` and then `Tr_velo_to_cam^-1`,
//! 3. maps the heading direction `(cos ry, 0, -sin ry)` through the same
//!    rotations and takes its LiDAR-frame azimuth as the yaw,
//! 4. reorders the dimensions to `(l, w, h)`.
//!
//! The calibration must map LiDAR `+z` onto camera "up" (`-y`). With the
//! nominal axis permutation (LiDAR x forward, y left, z up) and no
//! translation, a label passes through as center `(z, -x, -y + h/2)` and
//! yaw `-ry - pi/2`.

use super::{ClassCatalog, DataError};
use crate::geometry::{Box7, Point};

type Mat3 = [[f64; 3]; 3];

/// One object line of a KITTI label file.
#[derive(Debug, Clone, PartialEq)]
pub struct KittiObject {
    pub kind: String,
    /// `(h, w, l)` in meters.
    pub dims_hwl: [f64; 3],
    /// Bottom center in rectified camera coordinates.
    pub location: [f64; 3],
    pub rotation_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub r0_rect: Mat3,
    /// LiDAR to reference camera, `[R | t]`.
    pub tr_velo_to_cam: [[f64; 4]; 3],
}

fn parse_values(origin: &str, line: usize, s: &str, n: usize) -> Result<Vec<f64>, DataError> {
    let v: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| DataError::Parse {
            origin: origin.into(),
            line,
            message: e.to_string(),
        })?;
    if v.len() != n {
        return Err(DataError::Parse {
            origin: origin.into(),
            line,
            message: format!("expected {n} values, found {}", v.len()),
        });
    }
    Ok(v)
}

pub fn parse_calibration(text: &str, origin: &str) -> Result<Calibration, DataError> {
    let mut r0 = None;
    let mut tr = None;
    for (i, line) in text.lines().enumerate() {
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        match key.trim() {
            "R0_rect" | "R_rect" => r0 = Some(parse_values(origin, i + 1, rest, 9)?),
            "Tr_velo_to_cam" | "Tr_velo_cam" => tr = Some(parse_values(origin, i + 1, rest, 12)?),
            _ => {}
        }
    }
    let r0 = r0.ok_or_else(|| DataError::MissingCalibration("R0_rect".into()))?;
    let tr = tr.ok_or_else(|| DataError::MissingCalibration("Tr_velo_to_cam".into()))?;
    Ok(Calibration {
        r0_rect: std::array::from_fn(|r| std::array::from_fn(|c| r0[3 * r + c])),
        tr_velo_to_cam: std::array::from_fn(|r| std::array::from_fn(|c| tr[4 * r + c])),
    })
}

/// Parses object lines; `DontCare` entries are dropped.
pub fn parse_kitti_labels(text: &str, origin: &str) -> Result<Vec<KittiObject>, DataError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 15 && fields.len() != 16 {
            return Err(DataError::Parse {
                origin: origin.into(),
                line: i + 1,
                message: format!("expected 15 or 16 fields, found {}", fields.len()),
            });
        }
        if fields[0] == "DontCare" {
            continue;
        }
        let v = parse_values(origin, i + 1, &fields[8..15].join(" "), 7)?;
        out.push(KittiObject {
            kind: fields[0].to_string(),
            dims_hwl: [v[0], v[1], v[2]],
            location: [v[3], v[4], v[5]],
            rotation_y: v[6],
        });
    }
    Ok(out)
}

fn mat_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
}

fn inverse(m: &Mat3) -> Option<Mat3> {
    let c =
        |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let cof = [
        [c(1, 1, 2, 2), -c(1, 0, 2, 2), c(1, 0, 2, 1)],
        [-c(0, 1, 2, 2), c(0, 0, 2, 2), -c(0, 0, 2, 1)],
        [c(0, 1, 1, 2), -c(0, 0, 1, 2), c(0, 0, 1, 1)],
    ];
    let det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2];
    if det.abs() < 1e-12 {
        return None;
    }
    Some(std::array::from_fn(|r| {
        std::array::from_fn(|col| cof[col][r] / det)
    }))
}

impl Calibration {
    fn inverses(&self) -> Result<(Mat3, Mat3, [f64; 3]), DataError> {
        let r0_inv = inverse(&self.r0_rect)
            .ok_or_else(|| DataError::Calibration("R0_rect is singular".into()))?;
        let rot: Mat3 = std::array::from_fn(|r| std::array::from_fn(|c| self.tr_velo_to_cam[r][c]));
        let rot_inv = inverse(&rot)
            .ok_or_else(|| DataError::Calibration("Tr_velo_to_cam rotation is singular".into()))?;
        let t = [
            self.tr_velo_to_cam[0][3],
            self.tr_velo_to_cam[1][3],
            self.tr_velo_to_cam[2][3],
        ];
        Ok((r0_inv, rot_inv, t))
    }

    /// Rectified camera coordinates to LiDAR coordinates.
    pub fn rect_to_lidar(&self, p: [f64; 3]) -> Result<[f64; 3], DataError> {
        let (r0_inv, rot_inv, t) = self.inverses()?;
        let reference = mat_vec(&r0_inv, p);
        Ok(mat_vec(
            &rot_inv,
            [
                reference[0] - t[0],
                reference[1] - t[1],
                reference[2] - t[2],
            ],
        ))
    }

    fn rect_dir_to_lidar(&self, d: [f64; 3]) -> Result<[f64; 3], DataError> {
        let (r0_inv, rot_inv, _) = self.inverses()?;
        Ok(mat_vec(&rot_inv, mat_vec(&r0_inv, d)))
    }

    pub fn object_to_box(&self, obj: &KittiObject, class_id: usize) -> Result<Box7, DataError> {
        let up = self.rect_dir_to_lidar([0.0, -1.0, 0.0])?;
        let up_norm = (up[0] * up[0] + up[1] * up[1] + up[2] * up[2]).sqrt();
        if up[2] / up_norm < 0.9 {
            return Err(DataError::Calibration(format!(
                "camera up maps to {up:?}, not LiDAR +z"
            )));
        }
        let [h, w, l] = obj.dims_hwl;
        let [x, y, z] = obj.location;
        let c = self.rect_to_lidar([x, y - 0.5 * h, z])?;
        let (s, co) = obj.rotation_y.sin_cos();
        let d = self.rect_dir_to_lidar([co, 0.0, -s])?;
        let yaw = d[1].atan2(d[0]);
        Ok(Box7::new(
            Point::new(c[0], c[1], c[2]),
            [l, w, h],
            yaw,
            class_id,
        )?)
    }
}

/// Converts one frame; object types missing from `catalog` are skipped.
pub fn convert_kitti_frame(
    labels: &str,
    calib: &str,
    catalog: &ClassCatalog,
    origin: &str,
) -> Result<Vec<Box7>, DataError> {
    let calib = parse_calibration(calib, origin)?;
    let mut boxes = Vec::new();
    for obj in parse_kitti_labels(labels, origin)? {
        if let Some(class_id) = catalog.id(&obj.kind) {
            let b = calib
                .object_to_box(&obj, class_id)?
                .with_instance(boxes.len() as u32);
            boxes.push(b);
        }
    }
    Ok(boxes)
}
