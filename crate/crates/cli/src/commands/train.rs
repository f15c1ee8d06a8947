use std::io::Write;
use std::path::Path;

use pcdet_core::head::{Detector, StepRecord, Trainer};

use super::load_scenes;
use crate::error::CliError;
use crate::report::ReportTable;
use crate::Context;

pub const CHECKPOINT: &str = "checkpoint.bin";
pub const LOG: &str = "train_log.jsonl";

fn loss_row(r: &StepRecord) -> Vec<Option<f64>> {
    let l = &r.loss;
    let b = &l.box_terms;
    [r.lr, l.sample, l.cent, l.cls, l.box_, b.loc, b.size, b.angle_bin, b.angle_res, b.corner, l.total]
        .into_iter()
        .map(Some)
        .collect()
}

/// Trains from scratch or from `resume`, appending one JSON line per step to the log.
///
/// `stop_after` halts early without changing the learning-rate schedule, so a
/// stopped run resumed to the end matches an uninterrupted one.
pub fn run(ctx: &Context, resume: Option<&Path>, steps: Option<usize>, stop_after: Option<usize>) -> Result<ReportTable, CliError> {
    let cfg = &ctx.config;
    let scenes = load_scenes(ctx, true)?;
    let mut trainer = match resume {
        Some(path) => {
            let t = Trainer::resume(path, &scenes)?;
            if t.detector.class_names() != cfg.data.class_names.as_slice() {
                return Err(CliError::Config(format!(
                    "checkpoint classes {:?} differ from data classes {:?}",
                    t.detector.class_names(),
                    cfg.data.class_names
                )));
            }
            t
        }
        None => {
            let mut dcfg = cfg.detector.clone();
            dcfg.init_seed = cfg.seed;
            let mut tcfg = cfg.train.clone();
            tcfg.seed = cfg.seed;
            if let Some(s) = steps {
                tcfg.steps = s;
            }
            Trainer::new(Detector::new(dcfg)?, tcfg, &scenes)?
        }
    };
    let end = stop_after.unwrap_or(usize::MAX).min(trainer.config.steps);

    std::fs::create_dir_all(&ctx.out).map_err(|e| CliError::io(&ctx.out, e))?;
    let log_path = ctx.out.join(LOG);
    let mut log = std::fs::OpenOptions::new()
        .create(true)
        .append(resume.is_some())
        .write(true)
        .truncate(resume.is_none())
        .open(&log_path)
        .map_err(|e| CliError::io(&log_path, e))?;

    let mut first = None;
    let mut last = None;
    while trainer.step() < end {
        let rec = trainer.train_step(&scenes)?;
        let line = serde_json::to_string(&rec).map_err(|e| CliError::Data(e.to_string()))?;
        writeln!(log, "{line}").map_err(|e| CliError::io(&log_path, e))?;
        first.get_or_insert(rec);
        last = Some(rec);
    }
    let ckpt = ctx.out.join(CHECKPOINT);
    trainer.save(&ckpt)?;

    let cols = ["lr", "sample", "cent", "cls", "box", "box.loc", "box.size", "box.angle_bin", "box.angle_res", "box.corner", "total"];
    let mut table = ReportTable::new(format!("training loss, step {} of {}", trainer.step(), trainer.config.steps), "step", cols.map(String::from).to_vec());
    for r in [first, last].into_iter().flatten() {
        table.push(r.step.to_string(), loss_row(&r));
    }
    ctx.emit(&table, "train")?;
    Ok(table)
}
