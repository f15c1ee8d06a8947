//! Oriented 3D box mathematics.
//!
//! Boxes are 7-DOF: a center, a size `(l, w, h)` along the box's own
//! `(x, y, z)` axes and a yaw about the world z-axis. The box frame has
//! `x` along the length, `y` along the width and `z` up.
//!
//! Everything here is a pure function of its inputs.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Intersections with a smaller BEV area are treated as empty.
pub const AREA_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("expansion amount must be positive, got {0}")]
    NonPositiveAmount(f64),
    #[error("IoU threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("non-finite score {0}")]
    NonFiniteScore(f64),
}

/// A point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point {
    pub const ORIGIN: Point = Point {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        (self - other).norm_sq()
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn l1(self) -> f64 {
        self.x.abs() + self.y.abs() + self.z.abs()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rotates about the z-axis through the origin.
    pub fn rotate_z(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }
}

impl From<[f64; 3]> for Point {
    fn from(v: [f64; 3]) -> Self {
        Point::new(v[0], v[1], v[2])
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Maps any finite angle into `(-pi, pi]`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let mut a = yaw.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    // rem_euclid can return exactly 2*pi for tiny negative inputs
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

#[derive(Deserialize)]
struct RawBox {
    center: Point,
    size: [f64; 3],
    yaw: f64,
    class_id: usize,
    #[serde(default)]
    instance_id: Option<u32>,
}

/// A 7-DOF oriented box with a class label.
///
/// Constructed only through [`Box7::new`], which rejects non-positive or
/// non-finite sizes and normalizes the yaw into `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct Box7 {
    center: Point,
    size: [f64; 3],
    yaw: f64,
    class_id: usize,
    instance_id: Option<u32>,
}

impl TryFrom<RawBox> for Box7 {
    type Error = GeometryError;
    fn try_from(r: RawBox) -> Result<Self, Self::Error> {
        let b = Box7::new(r.center, r.size, r.yaw, r.class_id)?;
        Ok(match r.instance_id {
            Some(id) => b.with_instance(id),
            None => b,
        })
    }
}

impl Box7 {
    pub fn new(
        center: Point,
        size: [f64; 3],
        yaw: f64,
        class_id: usize,
    ) -> Result<Self, GeometryError> {
        if !center.is_finite() {
            return Err(GeometryError::InvalidBox(format!(
                "non-finite center {center:?}"
            )));
        }
        if size.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(GeometryError::InvalidBox(format!(
                "size must be positive, got {size:?}"
            )));
        }
        if !yaw.is_finite() {
            return Err(GeometryError::InvalidBox(format!("non-finite yaw {yaw}")));
        }
        Ok(Self {
            center,
            size,
            yaw: normalize_yaw(yaw),
            class_id,
            instance_id: None,
        })
    }

    pub fn with_instance(mut self, id: u32) -> Self {
        self.instance_id = Some(id);
        self
    }

    pub fn without_instance(mut self) -> Self {
        self.instance_id = None;
        self
    }

    pub fn with_class(mut self, class_id: usize) -> Self {
        self.class_id = class_id;
        self
    }

    pub fn center(&self) -> Point {
        self.center
    }

    /// `(l, w, h)`.
    pub fn size(&self) -> [f64; 3] {
        self.size
    }

    pub fn l(&self) -> f64 {
        self.size[0]
    }

    pub fn w(&self) -> f64 {
        self.size[1]
    }

    pub fn h(&self) -> f64 {
        self.size[2]
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn instance_id(&self) -> Option<u32> {
        self.instance_id
    }

    pub fn volume(&self) -> f64 {
        self.size[0] * self.size[1] * self.size[2]
    }

    /// Radius of the smallest circle around the center containing the BEV footprint.
    pub fn bev_radius(&self) -> f64 {
        0.5 * (self.size[0] * self.size[0] + self.size[1] * self.size[1]).sqrt()
    }

    pub fn z_min(&self) -> f64 {
        self.center.z - 0.5 * self.size[2]
    }

    pub fn z_max(&self) -> f64 {
        self.center.z + 0.5 * self.size[2]
    }

    pub fn translated(&self, t: Point) -> Box7 {
        Box7 {
            center: self.center + t,
            ..*self
        }
    }

    /// Rotates the box (center and heading) about the world z-axis.
    pub fn rotated_z(&self, angle: f64) -> Box7 {
        Box7 {
            center: self.center.rotate_z(angle),
            yaw: normalize_yaw(self.yaw + angle),
            ..*self
        }
    }

    /// Mirrors across the xz-plane (negates y and yaw).
    pub fn mirrored_y(&self) -> Box7 {
        Box7 {
            center: Point::new(self.center.x, -self.center.y, self.center.z),
            yaw: normalize_yaw(-self.yaw),
            ..*self
        }
    }

    /// Scales center and size about the world origin.
    pub fn scaled(&self, factor: f64) -> Result<Box7, GeometryError> {
        let s = self.size;
        let b = Box7::new(
            self.center * factor,
            [s[0] * factor, s[1] * factor, s[2] * factor],
            self.yaw,
            self.class_id,
        )?;
        Ok(Box7 {
            instance_id: self.instance_id,
            ..b
        })
    }

    /// BEV footprint, counter-clockwise.
    pub fn bev_polygon(&self) -> [[f64; 2]; 4] {
        let (hl, hw) = (0.5 * self.size[0], 0.5 * self.size[1]);
        let (s, c) = self.yaw.sin_cos();
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        local.map(|[x, y]| [self.center.x + c * x - s * y, self.center.y + s * x + c * y])
    }
}

/// Distances of a point to the six faces of a box, in meters.
///
/// For interior points `f + b = l`, `l + r = w` and `u + d = h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceDistances {
    pub front: f64,
    pub back: f64,
    pub left: f64,
    pub right: f64,
    pub up: f64,
    pub down: f64,
}

impl SurfaceDistances {
    pub fn of(b: &Box7, p: Point) -> Self {
        let q = to_box_frame(p, b);
        let [l, w, h] = b.size();
        SurfaceDistances {
            front: 0.5 * l - q.x,
            back: 0.5 * l + q.x,
            left: 0.5 * w - q.y,
            right: 0.5 * w + q.y,
            up: 0.5 * h - q.z,
            down: 0.5 * h + q.z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub bbox: Box7,
    pub score: f64,
}

impl ScoredBox {
    pub fn new(bbox: Box7, score: f64) -> Self {
        Self { bbox, score }
    }
}

/// Expresses `p` in the frame of `b`: translate by `-center`, rotate by `-yaw`.
pub fn to_box_frame(p: Point, b: &Box7) -> Point {
    (p - b.center).rotate_z(-b.yaw)
}

/// Closed-box membership; points on a face are inside.
pub fn contains(b: &Box7, p: Point) -> bool {
    let q = to_box_frame(p, b);
    q.x.abs() <= 0.5 * b.size[0] && q.y.abs() <= 0.5 * b.size[1] && q.z.abs() <= 0.5 * b.size[2]
}

/// Soft point mask: the cube root of the product of min/max ratios of the
/// three pairs of opposing face distances.
///
/// 1 at the center, 0 on any face and 0 for exterior points.
pub fn soft_point_mask(b: &Box7, p: Point) -> f64 {
    if !contains(b, p) {
        return 0.0;
    }
    let d = SurfaceDistances::of(b, p);
    let ratio = |a: f64, c: f64| {
        let (a, c) = (a.max(0.0), c.max(0.0));
        let hi = a.max(c);
        if hi <= 0.0 {
            0.0
        } else {
            a.min(c) / hi
        }
    };
    let prod = ratio(d.front, d.back) * ratio(d.left, d.right) * ratio(d.up, d.down);
    prod.cbrt().clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpandMode {
    /// Multiply each of `(l, w, h)` by the amount.
    Factor,
    /// Add the amount (meters) to each of `(l, w, h)`.
    Length,
}

pub fn expand(b: &Box7, mode: ExpandMode, amount: f64) -> Result<Box7, GeometryError> {
    if !(amount > 0.0) || !amount.is_finite() {
        return Err(GeometryError::NonPositiveAmount(amount));
    }
    let s = b.size;
    let size = match mode {
        ExpandMode::Factor => s.map(|v| v * amount),
        ExpandMode::Length => s.map(|v| v + amount),
    };
    Ok(Box7 { size, ..*b })
}

/// Sign pattern of [`corners`], in lexicographic order with `-` before `+`.
pub const CORNER_SIGNS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, -1.0],
    [1.0, 1.0, 1.0],
];

/// World-frame corners; corner `i` sits at `CORNER_SIGNS[i] * size / 2` in the box frame.
pub fn corners(b: &Box7) -> [Point; 8] {
    let half = b.size.map(|v| 0.5 * v);
    CORNER_SIGNS.map(|s| {
        Point::new(s[0] * half[0], s[1] * half[1], s[2] * half[2]).rotate_z(b.yaw) + b.center
    })
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    0.5 * acc.abs()
}

fn cross(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

fn segment_line_intersection(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let cp = cross(a, b, p);
    let cq = cross(a, b, q);
    let t = cp / (cp - cq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Sutherland-Hodgman clip of `subject` against the convex CCW polygon `clip`.
fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    out.push(segment_line_intersection(prev, cur, a, b));
                }
                out.push(cur);
            } else if prev_in {
                out.push(segment_line_intersection(prev, cur, a, b));
            }
        }
    }
    out
}

/// Area of the BEV footprint intersection of two boxes.
pub fn bev_intersection_area(a: &Box7, b: &Box7) -> f64 {
    let dx = a.center.x - b.center.x;
    let dy = a.center.y - b.center.y;
    let r = a.bev_radius() + b.bev_radius();
    if dx * dx + dy * dy > r * r {
        return 0.0;
    }
    let area = polygon_area(&clip_convex(&a.bev_polygon(), &b.bev_polygon()));
    if area < AREA_EPS {
        0.0
    } else {
        area
    }
}

/// IoU of the BEV footprints.
pub fn bev_iou(a: &Box7, b: &Box7) -> f64 {
    let inter = bev_intersection_area(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.l() * a.w() + b.l() * b.w() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Volumetric IoU of two oriented boxes.
pub fn iou_3d(a: &Box7, b: &Box7) -> f64 {
    let z_overlap = a.z_max().min(b.z_max()) - a.z_min().max(b.z_min());
    if z_overlap <= 0.0 {
        return 0.0;
    }
    let area = bev_intersection_area(a, b);
    if area == 0.0 {
        return 0.0;
    }
    let inter = area * z_overlap;
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Descending score, ascending input index.
pub(crate) fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    order
}

/// Greedy 3D-NMS returning kept input indices in output order.
///
/// A box is suppressed when its IoU with an already kept box is strictly
/// greater than `iou_threshold`.
pub fn nms_3d_indices(
    boxes: &[ScoredBox],
    iou_threshold: f64,
) -> Result<Vec<usize>, GeometryError> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(GeometryError::InvalidThreshold(iou_threshold));
    }
    if let Some(b) = boxes.iter().find(|b| !b.score.is_finite()) {
        return Err(GeometryError::NonFiniteScore(b.score));
    }
    let scores: Vec<f64> = boxes.iter().map(|b| b.score).collect();
    let order = score_order(&scores);
    let mut suppressed = vec![false; boxes.len()];
    let mut keep = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        for &j in &order[pos + 1..] {
            if !suppressed[j] && iou_3d(&boxes[i].bbox, &boxes[j].bbox) > iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    Ok(keep)
}

pub fn nms_3d(boxes: &[ScoredBox], iou_threshold: f64) -> Result<Vec<ScoredBox>, GeometryError> {
    Ok(nms_3d_indices(boxes, iou_threshold)?
        .into_iter()
        .map(|i| boxes[i])
        .collect())
}
