//! Average precision with greedy per-class matching.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{iou_3d, Box7, ScoredBox};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("detections reference frame {0} which has no ground truth")]
    UnknownFrame(String),
    #[error("{thresholds} IoU thresholds for {classes} classes")]
    ThresholdCount { thresholds: usize, classes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApInterp {
    /// Recall points 1/40, 2/40, ..., 1.
    R40,
    /// Recall points 0, 0.1, ..., 1.
    R11,
}

impl ApInterp {
    fn recall_points(self) -> Vec<f64> {
        match self {
            ApInterp::R40 => (1..=40).map(|i| i as f64 / 40.0).collect(),
            ApInterp::R11 => (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

/// Default thresholds: 0.7 for the first class, 0.5 for the rest.
pub fn default_thresholds(n_classes: usize) -> Vec<f64> {
    (0..n_classes)
        .map(|c| if c == 0 { 0.7 } else { 0.5 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEval {
    pub class_id: usize,
    pub iou_threshold: f64,
    pub n_gt: usize,
    pub n_det: usize,
    pub true_positives: usize,
    /// `None` when the class has no ground truth.
    pub ap: Option<f64>,
    pub recall: Option<f64>,
}

/// Ground truth by frame id.
pub type GroundTruth = BTreeMap<String, Vec<Box7>>;

pub fn evaluate(
    detections: &[(String, ScoredBox)],
    ground_truth: &GroundTruth,
    thresholds: &[f64],
    interp: ApInterp,
) -> Result<Vec<ClassEval>, EvalError> {
    if let Some((f, _)) = detections
        .iter()
        .find(|(f, _)| !ground_truth.contains_key(f))
    {
        return Err(EvalError::UnknownFrame(f.clone()));
    }
    let n_classes = thresholds.len();
    if let Some(c) = detections
        .iter()
        .map(|(_, d)| d.bbox.class_id())
        .chain(ground_truth.values().flatten().map(Box7::class_id))
        .find(|&c| c >= n_classes)
    {
        return Err(EvalError::ThresholdCount {
            thresholds: n_classes,
            classes: c + 1,
        });
    }
    Ok((0..n_classes)
        .map(|c| evaluate_class(detections, ground_truth, c, thresholds[c], interp))
        .collect())
}

fn evaluate_class(
    detections: &[(String, ScoredBox)],
    ground_truth: &GroundTruth,
    class_id: usize,
    thr: f64,
    interp: ApInterp,
) -> ClassEval {
    let gts: BTreeMap<&str, Vec<&Box7>> = ground_truth
        .iter()
        .map(|(f, bs)| {
            (
                f.as_str(),
                bs.iter().filter(|b| b.class_id() == class_id).collect(),
            )
        })
        .collect();
    let n_gt: usize = gts.values().map(Vec::len).sum();
    let mut dets: Vec<(usize, &str, &ScoredBox)> = detections
        .iter()
        .enumerate()
        .filter(|(_, (_, d))| d.bbox.class_id() == class_id)
        .map(|(i, (f, d))| (i, f.as_str(), d))
        .collect();
    dets.sort_by(|a, b| b.2.score.total_cmp(&a.2.score).then(a.0.cmp(&b.0)));

    let mut used: BTreeMap<&str, Vec<bool>> = gts
        .iter()
        .map(|(f, v)| (*f, vec![false; v.len()]))
        .collect();
    let mut tp = 0usize;
    let mut curve = Vec::with_capacity(dets.len());
    for (k, (_, frame, d)) in dets.iter().enumerate() {
        let cands = &gts[frame];
        let flags = used.get_mut(frame).expect("frame checked");
        let mut best: Option<(f64, usize)> = None;
        for (j, g) in cands.iter().enumerate() {
            if flags[j] {
                continue;
            }
            let iou = iou_3d(&d.bbox, g);
            if iou >= thr && best.is_none_or(|(b, _)| iou > b) {
                best = Some((iou, j));
            }
        }
        if let Some((_, j)) = best {
            flags[j] = true;
            tp += 1;
        }
        if n_gt > 0 {
            curve.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
        }
    }
    let ap = (n_gt > 0).then(|| {
        let points = interp.recall_points();
        let sum: f64 = points
            .iter()
            .map(|&r| {
                curve
                    .iter()
                    .filter(|(rc, _)| *rc >= r - 1e-12)
                    .map(|(_, p)| *p)
                    .fold(0.0, f64::max)
            })
            .sum();
        sum / points.len() as f64
    });
    ClassEval {
        class_id,
        iou_threshold: thr,
        n_gt,
        n_det: dets.len(),
        true_positives: tp,
        ap,
        recall: (n_gt > 0).then(|| tp as f64 / n_gt as f64),
    }
}
