use std::path::Path;

use pcdet_core::eval::{evaluate, GroundTruth};
use pcdet_core::head::parse_detections;

use super::load_scenes;
use crate::error::CliError;
use crate::report::ReportTable;
use crate::Context;

/// AP and recall per class of a detection file against the labeled scenes.
pub fn run(ctx: &Context, detections: &Path) -> Result<ReportTable, CliError> {
    let cfg = &ctx.config;
    let names = &cfg.data.class_names;
    let text = std::fs::read_to_string(detections).map_err(|e| CliError::io(detections, e))?;
    let records = parse_detections(&text, names, &detections.display().to_string())?;
    let gt: GroundTruth = load_scenes(ctx, true)?.into_iter().map(|s| (s.frame_id, s.boxes)).collect();
    let dets: Vec<_> = records.into_iter().map(|r| (r.frame, r.detection)).collect();
    let per_class = evaluate(&dets, &gt, &cfg.eval.iou_thresholds, cfg.eval.interp)?;

    let cols = ["iou_threshold", "n_gt", "n_det", "true_positives", "ap", "recall"];
    let mut table = ReportTable::new(format!("average precision ({:?})", cfg.eval.interp), "class", cols.map(String::from).to_vec());
    for e in &per_class {
        table.push(
            names[e.class_id].clone(),
            vec![
                Some(e.iou_threshold),
                Some(e.n_gt as f64),
                Some(e.n_det as f64),
                Some(e.true_positives as f64),
                e.ap,
                e.recall,
            ],
        );
    }
    ctx.emit(&table, "eval")?;
    Ok(table)
}
