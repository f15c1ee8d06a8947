use std::path::Path;

use pcdet_core::geometry::ScoredBox;
use pcdet_core::head::{format_detections, load_detector};
use rayon::prelude::*;

use super::load_scenes;
use crate::error::CliError;
use crate::report::ReportTable;
use crate::Context;

pub const DETECTIONS: &str = "detections.txt";

/// Detects on every scene and writes `detections.txt`; the table counts detections per class.
pub fn run(ctx: &Context, checkpoint: &Path) -> Result<ReportTable, CliError> {
    let detector = load_detector(checkpoint)?;
    let names = &ctx.config.data.class_names;
    if detector.class_names() != names.as_slice() {
        return Err(CliError::Config(format!(
            "checkpoint classes {:?} differ from data classes {:?}",
            detector.class_names(),
            names
        )));
    }
    let scenes = load_scenes(ctx, false)?;
    let results: Vec<Vec<ScoredBox>> = scenes.par_iter().map(|s| detector.detect_scene(s)).collect::<Result<_, _>>()?;

    std::fs::create_dir_all(&ctx.out).map_err(|e| CliError::io(&ctx.out, e))?;
    let path = ctx.out.join(DETECTIONS);
    let text: String = scenes.iter().zip(&results).map(|(s, d)| format_detections(&s.frame_id, d, names)).collect();
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;

    let mut table = ReportTable::new("detections per class", "frame", names.clone());
    for (s, d) in scenes.iter().zip(&results) {
        let counts = (0..names.len()).map(|c| Some(d.iter().filter(|b| b.bbox.class_id() == c).count() as f64)).collect();
        table.push(s.frame_id.clone(), counts);
    }
    ctx.emit(&table, "detect")?;
    Ok(table)
}
