use pcdet_core::sampling::{recall_over_layers, run_schedule, LayerSpec, PointScorer, RecallReport, SamplingOutcome, ScheduleOptions, Strategy};
use rayon::prelude::*;

use super::{load_scenes, oracle, with_derived_features};
use crate::error::CliError;
use crate::report::ReportTable;
use crate::Context;

/// Row label of the no-sampling baseline.
pub const FULL: &str = "full";

/// The schedule used for `strategy`: top-k strategies replace the top-k
/// layers of `base` and keep its other layers; the rest sample every layer.
pub fn schedule_for(base: &[LayerSpec], strategy: Strategy) -> Vec<LayerSpec> {
    let has_topk = base.iter().any(|l| l.strategy.is_top_k());
    base.iter()
        .map(|l| {
            let st = if !strategy.is_top_k() || !has_topk || l.strategy.is_top_k() { strategy } else { l.strategy };
            LayerSpec::new(st, l.k)
        })
        .collect()
}

/// Column name for a layer and class.
pub fn column(k: usize, class: &str) -> String {
    format!("{k}:{class}")
}

pub fn run(ctx: &Context) -> Result<ReportTable, CliError> {
    let cfg = &ctx.config;
    let scenes = load_scenes(ctx, true)?;
    let schedule = &cfg.sampling.schedule;
    let names = &cfg.data.class_names;
    let columns: Vec<String> = schedule.iter().flat_map(|l| names.iter().map(move |c| column(l.k, c))).collect();
    let mut table = ReportTable::new(
        format!("instance recall over {} scenes (min {} points)", scenes.len(), cfg.sampling.min_points),
        "strategy",
        columns,
    );

    let rows: Vec<Option<Strategy>> = std::iter::once(None).chain(cfg.sampling.strategies.iter().copied().map(Some)).collect();
    for row in rows {
        let reports: Vec<RecallReport> = scenes
            .par_iter()
            .map(|scene| -> Result<RecallReport, CliError> {
                let outcomes = match row {
                    None => schedule
                        .iter()
                        .enumerate()
                        .map(|(layer, l)| SamplingOutcome { indices: (0..scene.cloud.len()).collect(), strategy: l.strategy, layer })
                        .collect(),
                    Some(st) => {
                        let sched = schedule_for(schedule, st);
                        let cloud = if st == Strategy::FeatFps { with_derived_features(&scene.cloud)? } else { scene.cloud.clone() };
                        let scorer = sched.iter().find_map(|l| oracle(l.strategy, &scene.boxes));
                        let opts = ScheduleOptions { seed: cfg.seed, start: 0, lambda: cfg.sampling.lambda };
                        run_schedule(&cloud, &sched, scorer.as_ref().map(|s| s as &dyn PointScorer), opts)?
                    }
                };
                Ok(recall_over_layers(scene, &outcomes, cfg.sampling.min_points))
            })
            .collect::<Result<_, _>>()?;

        let mut values = Vec::new();
        for layer in 0..schedule.len() {
            for c in 0..names.len() {
                let per_scene: Vec<f64> = reports.iter().filter_map(|r| r.class_recall(layer, c)).collect();
                values.push((!per_scene.is_empty()).then(|| per_scene.iter().sum::<f64>() / per_scene.len() as f64));
            }
        }
        table.push(row.map_or(FULL, Strategy::label), values);
    }
    ctx.emit(&table, "recall")?;
    Ok(table)
}
