use std::fmt::Write as _;

use super::HeadError;
use crate::geometry::{nms_3d, Box7, Point, ScoredBox};
use crate::nn::{coder::argmax, BoxCoder, Tensor, HEAD_WIDTH};

/// A decoded box with per-class sigmoid scores; the best class score is its confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub bbox: Box7,
    pub scores: Vec<f64>,
}

impl Proposal {
    pub fn class_id(&self) -> usize {
        argmax(&self.scores)
    }

    pub fn score(&self) -> f64 {
        self.scores[self.class_id()]
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn generate_proposals(
    cls_logits: &Tensor,
    reg: &Tensor,
    centroids: &[Point],
    coder: &BoxCoder,
) -> Result<Vec<Proposal>, HeadError> {
    let n = centroids.len();
    if cls_logits.rows() != n
        || reg.rows() != n
        || reg.cols() != HEAD_WIDTH
        || cls_logits.cols() != coder.n_classes()
    {
        return Err(HeadError::Config(format!(
            "heads {:?} and {:?} for {n} centroids and {} classes",
            cls_logits.shape(),
            reg.shape(),
            coder.n_classes()
        )));
    }
    (0..n)
        .map(|i| {
            let scores: Vec<f64> = cls_logits.row(i).iter().map(|&z| sigmoid(z)).collect();
            let class_id = argmax(&scores);
            let bbox = coder.decode(reg.row(i), centroids[i], class_id)?;
            Ok(Proposal { bbox, scores })
        })
        .collect()
}

/// Drops proposals whose best class score is below `score_threshold`, then
/// runs class-agnostic greedy NMS.
pub fn postprocess(
    proposals: &[Proposal],
    iou_threshold: f64,
    score_threshold: f64,
) -> Result<Vec<ScoredBox>, HeadError> {
    if !(0.0..=1.0).contains(&score_threshold) {
        return Err(HeadError::Config(format!(
            "score threshold {score_threshold} outside [0, 1]"
        )));
    }
    let kept: Vec<ScoredBox> = proposals
        .iter()
        .filter(|p| p.score() >= score_threshold)
        .map(|p| ScoredBox::new(p.bbox, p.score()))
        .collect();
    Ok(nms_3d(&kept, iou_threshold)?)
}

/// One detection per line: `frame class score cx cy cz l w h yaw`, six decimals.
pub fn format_detections(frame: &str, detections: &[ScoredBox], class_names: &[String]) -> String {
    let mut out = String::new();
    for d in detections {
        let b = d.bbox;
        let c = b.center();
        let [l, w, h] = b.size();
        let name = class_names
            .get(b.class_id())
            .map_or("unknown", String::as_str);
        writeln!(
            out,
            "{frame} {name} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
            d.score,
            c.x,
            c.y,
            c.z,
            l,
            w,
            h,
            b.yaw()
        )
        .expect("writing to a string");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub frame: String,
    pub detection: ScoredBox,
}

pub fn parse_detections(
    text: &str,
    class_names: &[String],
    origin: &str,
) -> Result<Vec<DetectionRecord>, HeadError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: String| HeadError::Parse {
            origin: origin.to_string(),
            line: i + 1,
            message: m,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 10 {
            return Err(bad(format!("expected 10 fields, found {}", f.len())));
        }
        let class_id = class_names
            .iter()
            .position(|n| n == f[1])
            .ok_or_else(|| bad(format!("unknown class {}", f[1])))?;
        let v: Vec<f64> = f[2..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| bad(format!("{s}: {e}"))))
            .collect::<Result<_, _>>()?;
        let bbox = Box7::new(
            Point::new(v[1], v[2], v[3]),
            [v[4], v[5], v[6]],
            v[7],
            class_id,
        )
        .map_err(|e| bad(e.to_string()))?;
        out.push(DetectionRecord {
            frame: f[0].to_string(),
            detection: ScoredBox::new(bbox, v[0]),
        });
    }
    Ok(out)
}
