use serde::{Deserialize, Serialize};

use super::coder::{self, BoxCoder, BIN, LOC, RES, SIZE};
use super::{Graph, NnError, Tensor, Var};
use crate::geometry::{corners, Box7, Point};

pub const SMOOTH_L1_BETA: f64 = 1.0 / 9.0;

/// Per-class sigmoid cross-entropy, summed over classes and averaged over points.
pub fn loss_cls_aware(g: &mut Graph, logits: Var, labels: &Tensor) -> Result<Var, NnError> {
    let shape = g.value(logits).shape();
    let ones = Tensor::filled(shape[0], shape[1], 1.0);
    let e = g.bce_with_logits(logits, labels.clone(), ones.clone(), ones)?;
    let per_point = g.sum_cols(e);
    Ok(g.mean(per_point))
}

/// As [`loss_cls_aware`] with the foreground term of point `i` scaled by `masks[i]`.
pub fn loss_ctr_aware(
    g: &mut Graph,
    logits: Var,
    labels: &Tensor,
    masks: &[f64],
) -> Result<Var, NnError> {
    let [n, c] = g.value(logits).shape();
    if masks.len() != n {
        return Err(NnError::shape(
            "ctr-aware masks",
            n.to_string(),
            masks.len().to_string(),
        ));
    }
    let mut pos = Tensor::zeros(n, c);
    for (i, m) in masks.iter().enumerate() {
        for j in 0..c {
            pos.set(i, j, *m);
        }
    }
    let e = g.bce_with_logits(logits, labels.clone(), pos, Tensor::filled(n, c, 1.0))?;
    let per_point = g.sum_cols(e);
    Ok(g.mean(per_point))
}

#[derive(Debug, Clone)]
pub struct CentroidLoss {
    pub total: Var,
    pub offset: Var,
    pub spread: Var,
    /// Instances without any marked point.
    pub skipped: Vec<usize>,
}

/// Offset L1 error plus the L1 spread of each vote around its instance's mean
/// vote, averaged over the member points of each instance and then over
/// instances. `assignment[i]` names the instance point `i` belongs to.
pub fn loss_centroid(
    g: &mut Graph,
    offsets: Var,
    points: &[Point],
    assignment: &[Option<usize>],
    gt_centers: &[Point],
) -> Result<CentroidLoss, NnError> {
    let [n, c] = g.value(offsets).shape();
    if c != 3 || n != points.len() || n != assignment.len() {
        return Err(NnError::shape(
            "centroid offsets",
            format!("[{}, 3] with matching assignment", points.len()),
            format!("[{n}, {c}], {} assignments", assignment.len()),
        ));
    }
    if let Some(bad) = assignment
        .iter()
        .flatten()
        .find(|&&k| k >= gt_centers.len())
    {
        return Err(NnError::shape(
            "centroid assignment",
            format!("< {}", gt_centers.len()),
            bad.to_string(),
        ));
    }
    let mut present = vec![false; gt_centers.len()];
    for k in assignment.iter().flatten() {
        present[*k] = true;
    }
    let skipped: Vec<usize> = (0..gt_centers.len()).filter(|&k| !present[k]).collect();
    let marked: Vec<usize> = (0..n).filter(|&i| assignment[i].is_some()).collect();
    if marked.is_empty() {
        let zero = g.constant(Tensor::scalar(0.0));
        return Ok(CentroidLoss {
            total: zero,
            offset: zero,
            spread: zero,
            skipped,
        });
    }
    // dense segment ids over the instances that have members
    let mut dense = vec![usize::MAX; gt_centers.len()];
    let mut n_seg = 0;
    for k in 0..gt_centers.len() {
        if present[k] {
            dense[k] = n_seg;
            n_seg += 1;
        }
    }
    let seg: Vec<usize> = marked
        .iter()
        .map(|&i| dense[assignment[i].unwrap()])
        .collect();

    let mut pos = Vec::with_capacity(marked.len() * 3);
    let mut target = Vec::with_capacity(marked.len() * 3);
    for &i in &marked {
        let k = assignment[i].unwrap();
        pos.extend_from_slice(&points[i].to_array());
        target.extend_from_slice(&(gt_centers[k] - points[i]).to_array());
    }
    let pred = g.gather_rows(offsets, &marked)?;
    let target = g.constant(Tensor::new(marked.len(), 3, target)?);
    let pos = g.constant(Tensor::new(marked.len(), 3, pos)?);

    let err = g.sub(pred, target)?;
    let err = g.abs(err);
    let off_pt = g.sum_cols(err);

    let shifted = g.add(pos, pred)?;
    let mean = g.segment_mean(shifted, &seg, n_seg)?;
    let mean = g.gather_rows(mean, &seg)?;
    let dev = g.sub(shifted, mean)?;
    let dev = g.abs(dev);
    let spread_pt = g.sum_cols(dev);

    let off_inst = g.segment_mean(off_pt, &seg, n_seg)?;
    let offset = g.mean(off_inst);
    let spread_inst = g.segment_mean(spread_pt, &seg, n_seg)?;
    let spread = g.mean(spread_inst);
    let total = g.add(offset, spread)?;
    Ok(CentroidLoss {
        total,
        offset,
        spread,
        skipped,
    })
}

/// Regression target for one positive proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxTarget {
    pub bbox: Box7,
    pub centroid: Point,
}

#[derive(Debug, Clone, Copy)]
pub struct BoxLoss {
    pub loc: Var,
    pub size: Var,
    pub angle_bin: Var,
    pub angle_res: Var,
    pub corner: Var,
    pub total: Var,
}

fn column(g: &mut Graph, v: Vec<f64>) -> Var {
    g.constant(Tensor::column(v))
}

/// Five box terms, each averaged over the rows of `pred`.
pub fn loss_box(
    g: &mut Graph,
    pred: Var,
    targets: &[BoxTarget],
    coder: &BoxCoder,
) -> Result<BoxLoss, NnError> {
    let [n, w] = g.value(pred).shape();
    if w != coder::HEAD_WIDTH || n != targets.len() {
        return Err(NnError::shape(
            "box head",
            format!("[{}, {}]", targets.len(), coder::HEAD_WIDTH),
            format!("[{n}, {w}]"),
        ));
    }
    let enc = targets
        .iter()
        .map(|t| coder.encode(&t.bbox, t.centroid))
        .collect::<Result<Vec<_>, _>>()?;
    let means = targets
        .iter()
        .map(|t| coder.mean_size(t.bbox.class_id()))
        .collect::<Result<Vec<_>, _>>()?;

    let loc = g.slice_cols(pred, LOC.start, LOC.end)?;
    let loc_t = g.constant(Tensor::new(n, 3, enc.iter().flat_map(|e| e.loc).collect())?);
    let d = g.sub(loc, loc_t)?;
    let d = g.smooth_l1(d, SMOOTH_L1_BETA);
    let d = g.sum_cols(d);
    let loc_loss = g.mean(d);

    let size = g.slice_cols(pred, SIZE.start, SIZE.end)?;
    let size_t = g.constant(Tensor::new(
        n,
        3,
        enc.iter().flat_map(|e| e.size).collect(),
    )?);
    let d = g.sub(size, size_t)?;
    let d = g.smooth_l1(d, SMOOTH_L1_BETA);
    let d = g.sum_cols(d);
    let size_loss = g.mean(d);

    let bins: Vec<usize> = enc.iter().map(|e| e.bin).collect();
    let logits = g.slice_cols(pred, BIN.start, BIN.end)?;
    let ce = g.softmax_ce(logits, &bins)?;
    let bin_loss = g.mean(ce);

    let res = g.slice_cols(pred, RES.start, RES.end)?;
    let picked = g.pick_cols(res, &bins)?;
    let res_t = column(g, enc.iter().map(|e| e.residual).collect());
    let d = g.sub(picked, res_t)?;
    let d = g.smooth_l1(d, SMOOTH_L1_BETA);
    let res_loss = g.mean(d);

    let corner_loss = corner_term(g, pred, loc, size, res, targets, &means)?;

    let mut total = g.add(loc_loss, size_loss)?;
    for t in [bin_loss, res_loss, corner_loss] {
        total = g.add(total, t)?;
    }
    Ok(BoxLoss {
        loc: loc_loss,
        size: size_loss,
        angle_bin: bin_loss,
        angle_res: res_loss,
        corner: corner_loss,
        total,
    })
}

/// Mean L1 distance over the 8 corners of the decoded box, against the
/// target or its yaw + pi twin, whichever is closer.
fn corner_term(
    g: &mut Graph,
    pred: Var,
    loc: Var,
    size: Var,
    res: Var,
    targets: &[BoxTarget],
    means: &[[f64; 3]],
) -> Result<Var, NnError> {
    let n = targets.len();
    let bins: Vec<usize> = (0..n)
        .map(|r| coder::argmax(&g.value(pred).row(r)[BIN]))
        .collect();
    let picked = g.pick_cols(res, &bins)?;
    let half_bin = 0.5 * coder::bin_width();
    let yaw = g.scale(picked, half_bin);
    let base = column(g, bins.iter().map(|&b| coder::bin_center(b)).collect());
    let yaw = g.add(yaw, base)?;
    let (cos, sin) = (g.cos(yaw), g.sin(yaw));

    let mut center = Vec::with_capacity(3);
    let mut half = Vec::with_capacity(3);
    for a in 0..3 {
        let l = g.slice_cols(loc, a, a + 1)?;
        let c0 = column(
            g,
            targets.iter().map(|t| t.centroid.to_array()[a]).collect(),
        );
        center.push(g.add(l, c0)?);
        // half extent = mean * (1 + r) / 2
        let r = g.slice_cols(size, a, a + 1)?;
        let m = column(g, means.iter().map(|m| 0.5 * m[a]).collect());
        let mr = g.mul(r, m)?;
        half.push(g.add(mr, m)?);
    }
    let xs = g.mul(cos, half[0])?;
    let xc = g.mul(sin, half[0])?;
    let ys = g.mul(sin, half[1])?;
    let yc = g.mul(cos, half[1])?;

    let mut cols = Vec::with_capacity(24);
    for s in crate::geometry::CORNER_SIGNS {
        // x = cx + cos*sx*l/2 - sin*sy*w/2 ; y = cy + sin*sx*l/2 + cos*sy*w/2
        let a = g.scale(xs, s[0]);
        let b = g.scale(ys, -s[1]);
        let x = g.add(a, b)?;
        let x = g.add(x, center[0])?;
        let a = g.scale(xc, s[0]);
        let b = g.scale(yc, s[1]);
        let y = g.add(a, b)?;
        let y = g.add(y, center[1])?;
        let z = g.scale(half[2], s[2]);
        let z = g.add(z, center[2])?;
        cols.extend([x, y, z]);
    }
    let pc = g.concat_cols(&cols)?;

    let mut dists = Vec::with_capacity(2);
    for flip in [0.0, std::f64::consts::PI] {
        let mut data = Vec::with_capacity(n * 24);
        for t in targets {
            let b = t.bbox;
            let b = Box7::new(b.center(), b.size(), b.yaw() + flip, b.class_id())
                .expect("valid target");
            for p in corners(&b) {
                data.extend_from_slice(&p.to_array());
            }
        }
        let tc = g.constant(Tensor::new(n, 24, data)?);
        let d = g.sub(pc, tc)?;
        let d = g.abs(d);
        let d = g.sum_cols(d);
        dists.push(g.scale(d, 1.0 / 8.0));
    }
    let m = g.minimum(dists[0], dists[1])?;
    Ok(g.mean(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub sample: f64,
    pub cent: f64,
    pub cls: f64,
    #[serde(rename = "box")]
    pub box_: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            sample: 1.0,
            cent: 1.0,
            cls: 1.0,
            box_: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoxBreakdown {
    pub loc: f64,
    pub size: f64,
    pub angle_bin: f64,
    pub angle_res: f64,
    pub corner: f64,
}

impl BoxBreakdown {
    pub fn total(&self) -> f64 {
        self.loc + self.size + self.angle_bin + self.angle_res + self.corner
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub sample: f64,
    pub cent: f64,
    pub cls: f64,
    #[serde(rename = "box")]
    pub box_: f64,
    pub box_terms: BoxBreakdown,
    pub total: f64,
}

impl LossBreakdown {
    pub fn terms(&self) -> [f64; 4] {
        [self.sample, self.cent, self.cls, self.box_]
    }

    pub fn is_valid(&self) -> bool {
        self.terms().iter().all(|v| v.is_finite() && *v >= 0.0) && self.total.is_finite()
    }
}
