//! Point downsampling strategies and the instance-recall metric.
//!
//! Four strategies are provided: uniform random sampling, farthest point
//! sampling in Euclidean space (D-FPS), farthest point sampling in feature
//! space (Feat-FPS) and top-k selection by a per-point score, which backs
//! both class-aware and centroid-aware sampling.
//!
//! All FPS variants compare squared distances and break ties on the lowest
//! index, so results are identical across platforms.

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::LabeledScene;
use crate::geometry::{contains, soft_point_mask, Box7, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("requested sample count must be at least 1")]
    ZeroK,
    #[error("requested {k} points from a cloud of {n}")]
    KExceedsN { k: usize, n: usize },
    #[error("start index {start} out of range for {n} points")]
    StartOutOfRange { start: usize, n: usize },
    #[error("cloud carries no per-point features")]
    MissingFeatures,
    #[error("non-finite score {value} at index {index}")]
    NonFiniteScore { index: usize, value: f64 },
    #[error("expected {expected} scores, got {got}")]
    ScoreCount { expected: usize, got: usize },
    #[error("feature weight lambda must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
    #[error("schedule sizes must be strictly decreasing ({prev} then {next})")]
    NonDecreasingSchedule { prev: usize, next: usize },
    #[error("schedule has a top-k layer but no scorer was given")]
    MissingScorer,
    #[error("empty schedule")]
    EmptySchedule,
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),
}

/// Row-major `N x D` per-point feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self, SamplingError> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(SamplingError::InvalidCloud(format!(
                "feature buffer of {} values does not split into rows of {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(SamplingError::InvalidCloud(format!(
                "non-finite feature at flat index {i}"
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// `N` points with optional intensity and optional `N x D` features.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point>,
    intensity: Option<Vec<f64>>,
    features: Option<Features>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self, SamplingError> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(SamplingError::InvalidCloud(format!(
                "non-finite coordinate at point {i}"
            )));
        }
        Ok(Self {
            points,
            intensity: None,
            features: None,
        })
    }

    pub fn with_intensity(mut self, intensity: Vec<f64>) -> Result<Self, SamplingError> {
        if intensity.len() != self.points.len() {
            return Err(SamplingError::InvalidCloud(format!(
                "{} intensities for {} points",
                intensity.len(),
                self.points.len()
            )));
        }
        if let Some(i) = intensity.iter().position(|v| !v.is_finite()) {
            return Err(SamplingError::InvalidCloud(format!(
                "non-finite intensity at point {i}"
            )));
        }
        self.intensity = Some(intensity);
        Ok(self)
    }

    pub fn with_features(mut self, features: Features) -> Result<Self, SamplingError> {
        if features.rows() != self.points.len() {
            return Err(SamplingError::InvalidCloud(format!(
                "{} feature rows for {} points",
                features.rows(),
                self.points.len()
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn intensity(&self) -> Option<&[f64]> {
        self.intensity.as_deref()
    }

    pub fn features(&self) -> Option<&Features> {
        self.features.as_ref()
    }

    /// New cloud holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            intensity: self
                .intensity
                .as_ref()
                .map(|v| indices.iter().map(|&i| v[i]).collect()),
            features: self.features.as_ref().map(|f| Features {
                dim: f.dim,
                data: indices
                    .iter()
                    .flat_map(|&i| f.row(i).iter().copied())
                    .collect(),
            }),
        }
    }

    /// Appends the rows of `other`. Optional channels survive only when both sides carry them.
    pub fn concat(&self, other: &PointCloud) -> PointCloud {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let intensity = match (&self.intensity, &other.intensity) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        let features = match (&self.features, &other.features) {
            (Some(a), Some(b)) if a.dim == b.dim => Some(Features {
                dim: a.dim,
                data: a.data.iter().chain(&b.data).copied().collect(),
            }),
            _ => None,
        };
        PointCloud {
            points,
            intensity,
            features,
        }
    }

    /// Applies `f` to every point, keeping intensity and features.
    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|&p| f(p)).collect(),
            intensity: self.intensity.clone(),
            features: self.features.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Random,
    #[serde(rename = "d-fps")]
    DFps,
    #[serde(rename = "feat-fps")]
    FeatFps,
    ClsAware,
    CtrAware,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Random,
        Strategy::DFps,
        Strategy::FeatFps,
        Strategy::ClsAware,
        Strategy::CtrAware,
    ];

    pub fn is_top_k(self) -> bool {
        matches!(self, Strategy::ClsAware | Strategy::CtrAware)
    }

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::DFps => "d-fps",
            Strategy::FeatFps => "feat-fps",
            Strategy::ClsAware => "cls-aware",
            Strategy::CtrAware => "ctr-aware",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.label() == s)
            .ok_or_else(|| format!("unknown sampling strategy '{s}'"))
    }
}

/// Indices selected by one downsampling layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingOutcome {
    pub indices: Vec<usize>,
    pub strategy: Strategy,
    pub layer: usize,
}

/// `k` distinct indices drawn uniformly without replacement.
///
/// The generator is ChaCha8 seeded with `seed`, and the draw is
/// `rand::seq::index::sample`. When `N <= k` every index is returned.
pub fn sample_random(
    cloud: &PointCloud,
    k: usize,
    seed: u64,
) -> Result<SamplingOutcome, SamplingError> {
    if k == 0 {
        return Err(SamplingError::ZeroK);
    }
    let n = cloud.len();
    let indices = if n <= k {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, n, k).into_vec()
    };
    Ok(SamplingOutcome {
        indices,
        strategy: Strategy::Random,
        layer: 0,
    })
}

/// Greedy farthest point selection under an arbitrary squared distance.
///
/// Keeps one running nearest-selected distance per point, so the cost is
/// `O(N k)` distance evaluations.
fn farthest_point_core(
    n: usize,
    k: usize,
    start: usize,
    dist: impl Fn(usize, usize) -> f64,
) -> Vec<usize> {
    let mut nearest = vec![f64::INFINITY; n];
    let mut picked = Vec::with_capacity(k);
    let mut last = start;
    nearest[start] = -1.0;
    picked.push(start);
    while picked.len() < k {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, slot) in nearest.iter_mut().enumerate() {
            if *slot < 0.0 {
                continue;
            }
            let d = dist(last, i);
            if d < *slot {
                *slot = d;
            }
            if *slot > best_d {
                best_d = *slot;
                best = i;
            }
        }
        nearest[best] = -1.0;
        picked.push(best);
        last = best;
    }
    picked
}

fn check_fps_args(n: usize, k: usize, start: usize) -> Result<(), SamplingError> {
    if k == 0 {
        return Err(SamplingError::ZeroK);
    }
    if k > n {
        return Err(SamplingError::KExceedsN { k, n });
    }
    if start >= n {
        return Err(SamplingError::StartOutOfRange { start, n });
    }
    Ok(())
}

/// Farthest point sampling in 3D Euclidean distance, starting from `start`.
pub fn sample_dfps(
    cloud: &PointCloud,
    k: usize,
    start: usize,
) -> Result<SamplingOutcome, SamplingError> {
    let n = cloud.len();
    check_fps_args(n, k, start)?;
    let xs: Vec<f64> = cloud.points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = cloud.points.iter().map(|p| p.y).collect();
    let zs: Vec<f64> = cloud.points.iter().map(|p| p.z).collect();
    let indices = farthest_point_core(n, k, start, |a, i| {
        let dx = xs[i] - xs[a];
        let dy = ys[i] - ys[a];
        let dz = zs[i] - zs[a];
        dx * dx + dy * dy + dz * dz
    });
    Ok(SamplingOutcome {
        indices,
        strategy: Strategy::DFps,
        layer: 0,
    })
}

/// Farthest point sampling under `d_feature + lambda * d_euclidean`, both squared.
///
/// `lambda = 0` is pure feature-space FPS.
pub fn sample_featfps(
    cloud: &PointCloud,
    k: usize,
    start: usize,
    lambda: f64,
) -> Result<SamplingOutcome, SamplingError> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(SamplingError::InvalidLambda(lambda));
    }
    let feats = cloud
        .features
        .as_ref()
        .ok_or(SamplingError::MissingFeatures)?;
    let n = cloud.len();
    check_fps_args(n, k, start)?;
    let dim = feats.dim;
    let data = &feats.data;
    let pts = &cloud.points;
    let indices = farthest_point_core(n, k, start, |a, i| {
        let fa = &data[a * dim..(a + 1) * dim];
        let fi = &data[i * dim..(i + 1) * dim];
        let mut d: f64 = fa.iter().zip(fi).map(|(x, y)| (x - y) * (x - y)).sum();
        if lambda > 0.0 {
            d += lambda * pts[a].dist_sq(pts[i]);
        }
        d
    });
    Ok(SamplingOutcome {
        indices,
        strategy: Strategy::FeatFps,
        layer: 0,
    })
}

/// Indices of the `k` largest scores, sorted by descending score with ties on
/// the lowest index.
///
/// Runs a linear-time selection followed by a sort of the `k` survivors.
pub fn sample_topk(scores: &[f64], k: usize) -> Result<SamplingOutcome, SamplingError> {
    if k == 0 {
        return Err(SamplingError::ZeroK);
    }
    let n = scores.len();
    if k > n {
        return Err(SamplingError::KExceedsN { k, n });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(SamplingError::NonFiniteScore {
            index,
            value: scores[index],
        });
    }
    let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..n).collect();
    if k < n {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    Ok(SamplingOutcome {
        indices: idx,
        strategy: Strategy::ClsAware,
        layer: 0,
    })
}

/// Per-point scores for top-k layers.
///
/// `candidates` are indices into the original cloud; the returned vector is
/// aligned with `candidates`.
pub trait PointScorer {
    fn scores(&self, cloud: &PointCloud, candidates: &[usize], layer: usize) -> Vec<f64>;
}

/// Scores computed from ground-truth boxes, standing in for a perfectly
/// trained score head.
#[derive(Debug, Clone)]
pub enum OracleScorer {
    /// 1 inside any box, 0 elsewhere.
    Foreground(Vec<Box7>),
    /// Largest soft point mask over all boxes.
    Centroid(Vec<Box7>),
}

impl PointScorer for OracleScorer {
    fn scores(&self, cloud: &PointCloud, candidates: &[usize], _layer: usize) -> Vec<f64> {
        let pts = cloud.points();
        match self {
            OracleScorer::Foreground(boxes) => candidates
                .iter()
                .map(|&i| {
                    if boxes.iter().any(|b| contains(b, pts[i])) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
            OracleScorer::Centroid(boxes) => candidates
                .iter()
                .map(|&i| {
                    boxes
                        .iter()
                        .map(|b| soft_point_mask(b, pts[i]))
                        .fold(0.0, f64::max)
                })
                .collect(),
        }
    }
}

/// One downsampling layer of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub strategy: Strategy,
    pub k: usize,
}

impl LayerSpec {
    pub const fn new(strategy: Strategy, k: usize) -> Self {
        Self { strategy, k }
    }
}

/// Four layers taking a 16384-point cloud down to 256 points: D-FPS for the
/// first two layers, centroid-aware top-k for the last two.
pub const DEFAULT_SCHEDULE: [LayerSpec; 4] = [
    LayerSpec::new(Strategy::DFps, 4096),
    LayerSpec::new(Strategy::DFps, 1024),
    LayerSpec::new(Strategy::CtrAware, 512),
    LayerSpec::new(Strategy::CtrAware, 256),
];

/// Input point budget the default schedule expects.
pub const DEFAULT_INPUT_POINTS: usize = 16384;

/// Knobs shared by every layer of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOptions {
    /// Random layers use `seed + layer` as their seed.
    pub seed: u64,
    /// FPS start index, relative to the survivors of the previous layer.
    pub start: usize,
    /// Euclidean weight for Feat-FPS.
    pub lambda: f64,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            start: 0,
            lambda: 0.0,
        }
    }
}

/// Runs `schedule` on `cloud`, each layer sampling the survivors of the
/// previous one.
///
/// Indices of every outcome refer to the original cloud.
pub fn run_schedule(
    cloud: &PointCloud,
    schedule: &[LayerSpec],
    scorer: Option<&dyn PointScorer>,
    opts: ScheduleOptions,
) -> Result<Vec<SamplingOutcome>, SamplingError> {
    validate_schedule(schedule, scorer.is_some())?;
    let mut survivors: Vec<usize> = (0..cloud.len()).collect();
    let mut outcomes = Vec::with_capacity(schedule.len());
    for (layer, spec) in schedule.iter().enumerate() {
        let local = sample_layer(cloud, &survivors, *spec, layer, scorer, opts)?;
        survivors = local.into_iter().map(|i| survivors[i]).collect();
        outcomes.push(SamplingOutcome {
            indices: survivors.clone(),
            strategy: spec.strategy,
            layer,
        });
    }
    Ok(outcomes)
}

pub fn validate_schedule(schedule: &[LayerSpec], has_scorer: bool) -> Result<(), SamplingError> {
    if schedule.is_empty() {
        return Err(SamplingError::EmptySchedule);
    }
    for w in schedule.windows(2) {
        if w[1].k >= w[0].k {
            return Err(SamplingError::NonDecreasingSchedule {
                prev: w[0].k,
                next: w[1].k,
            });
        }
    }
    if schedule.iter().any(|s| s.k == 0) {
        return Err(SamplingError::ZeroK);
    }
    if !has_scorer && schedule.iter().any(|s| s.strategy.is_top_k()) {
        return Err(SamplingError::MissingScorer);
    }
    Ok(())
}

/// Applies one layer to `survivors`, returning positions into `survivors`.
fn sample_layer(
    cloud: &PointCloud,
    survivors: &[usize],
    spec: LayerSpec,
    layer: usize,
    scorer: Option<&dyn PointScorer>,
    opts: ScheduleOptions,
) -> Result<Vec<usize>, SamplingError> {
    let n = survivors.len();
    let start = if n == 0 { 0 } else { opts.start.min(n - 1) };
    let out = match spec.strategy {
        Strategy::Random => sample_random(
            &cloud.subset(survivors),
            spec.k,
            opts.seed.wrapping_add(layer as u64),
        )?,
        Strategy::DFps => sample_dfps(&cloud.subset(survivors), spec.k, start)?,
        Strategy::FeatFps => sample_featfps(&cloud.subset(survivors), spec.k, start, opts.lambda)?,
        Strategy::ClsAware | Strategy::CtrAware => {
            let scorer = scorer.ok_or(SamplingError::MissingScorer)?;
            let scores = scorer.scores(cloud, survivors, layer);
            if scores.len() != n {
                return Err(SamplingError::ScoreCount {
                    expected: n,
                    got: scores.len(),
                });
            }
            sample_topk(&scores, spec.k)?
        }
    };
    Ok(out.indices)
}

/// Instance counts for one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassRecall {
    /// Instances keeping at least `min_points` interior points.
    pub recalled: usize,
    /// Instances with at least `min_points` interior points in the full cloud.
    pub total: usize,
    /// Instances excluded because even the full cloud has too few interior points.
    pub skipped: usize,
}

impl ClassRecall {
    pub fn recall(&self) -> Option<f64> {
        (self.total > 0).then(|| self.recalled as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecall {
    pub layer: usize,
    pub strategy: Strategy,
    pub points: usize,
    pub per_class: BTreeMap<usize, ClassRecall>,
}

/// Instance recall of one or more sampling outcomes on a labeled scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub min_points: usize,
    pub layers: Vec<LayerRecall>,
}

impl RecallReport {
    pub fn class_recall(&self, layer: usize, class_id: usize) -> Option<f64> {
        self.layers.get(layer)?.per_class.get(&class_id)?.recall()
    }
}

/// Which boxes contain each point, computed once per scene.
#[derive(Debug, Clone)]
pub struct InstanceMembership {
    /// `boxes_of[i]` lists the boxes containing point `i`.
    boxes_of: Vec<Vec<u32>>,
    interior_counts: Vec<usize>,
    classes: Vec<usize>,
}

impl InstanceMembership {
    pub fn new(scene: &LabeledScene) -> Self {
        let boxes = &scene.boxes;
        let mut boxes_of = vec![Vec::new(); scene.cloud.len()];
        let mut interior_counts = vec![0; boxes.len()];
        for (bi, b) in boxes.iter().enumerate() {
            let r2 = {
                let [l, w, h] = b.size();
                0.25 * (l * l + w * w + h * h)
            };
            for (pi, p) in scene.cloud.points().iter().enumerate() {
                if p.dist_sq(b.center()) <= r2 && contains(b, *p) {
                    boxes_of[pi].push(bi as u32);
                    interior_counts[bi] += 1;
                }
            }
        }
        Self {
            boxes_of,
            interior_counts,
            classes: boxes.iter().map(|b| b.class_id()).collect(),
        }
    }

    pub fn interior_counts(&self) -> &[usize] {
        &self.interior_counts
    }

    /// Boxes containing point `i`.
    pub fn boxes_of(&self, i: usize) -> &[u32] {
        &self.boxes_of[i]
    }

    pub fn layer_recall(&self, outcome: &SamplingOutcome, min_points: usize) -> LayerRecall {
        let mut kept = vec![0usize; self.interior_counts.len()];
        for &i in &outcome.indices {
            for &b in &self.boxes_of[i] {
                kept[b as usize] += 1;
            }
        }
        let mut per_class: BTreeMap<usize, ClassRecall> = BTreeMap::new();
        for (b, &class) in self.classes.iter().enumerate() {
            let entry = per_class.entry(class).or_default();
            if self.interior_counts[b] < min_points {
                entry.skipped += 1;
                continue;
            }
            entry.total += 1;
            if kept[b] >= min_points {
                entry.recalled += 1;
            }
        }
        LayerRecall {
            layer: outcome.layer,
            strategy: outcome.strategy,
            points: outcome.indices.len(),
            per_class,
        }
    }
}

/// Recall of a single outcome.
///
/// An instance is recalled when at least `min_points` surviving points lie
/// inside its box (`min_points = 0` is treated as 1).
pub fn instance_recall(
    scene: &LabeledScene,
    outcome: &SamplingOutcome,
    min_points: usize,
) -> RecallReport {
    recall_over_layers(scene, std::slice::from_ref(outcome), min_points)
}

/// Recall of every outcome of a schedule run.
pub fn recall_over_layers(
    scene: &LabeledScene,
    outcomes: &[SamplingOutcome],
    min_points: usize,
) -> RecallReport {
    let min_points = min_points.max(1);
    let membership = InstanceMembership::new(scene);
    RecallReport {
        min_points,
        layers: outcomes
            .iter()
            .map(|o| membership.layer_recall(o, min_points))
            .collect(),
    }
}
