use pcdet_core::dataio::LabeledScene;
use pcdet_core::sampling::{sample_dfps, sample_featfps, sample_random, sample_topk, PointCloud, PointScorer, SamplingOutcome, Strategy};
use rayon::prelude::*;

use super::{load_scenes, oracle, with_derived_features};
use crate::error::CliError;
use crate::report::ReportTable;
use crate::timing::{time, Timing};
use crate::Context;

/// Scores for every point of `scene`, zero for strategies that do not rank.
pub fn scores(strategy: Strategy, scene: &LabeledScene) -> Vec<f64> {
    let all: Vec<usize> = (0..scene.cloud.len()).collect();
    match oracle(strategy, &scene.boxes) {
        Some(o) => o.scores(&scene.cloud, &all, 0),
        None => vec![0.0; all.len()],
    }
}

/// One sampling call on a prepared cloud. `scores` is only read by top-k strategies.
pub fn sample_prepared(
    strategy: Strategy,
    cloud: &PointCloud,
    scores: &[f64],
    k: usize,
    seed: u64,
    lambda: f64,
) -> Result<SamplingOutcome, CliError> {
    Ok(match strategy {
        Strategy::Random => sample_random(cloud, k, seed)?,
        Strategy::DFps => sample_dfps(cloud, k, 0)?,
        Strategy::FeatFps => sample_featfps(cloud, k, 0, lambda)?,
        Strategy::ClsAware | Strategy::CtrAware => {
            let mut o = sample_topk(scores, k)?;
            o.strategy = strategy;
            o
        }
    })
}

/// Rough peak working memory of one call, in bytes.
pub fn peak_bytes(strategy: Strategy, n: usize, k: usize, feature_dim: usize) -> usize {
    let idx = std::mem::size_of::<usize>();
    let f = std::mem::size_of::<f64>();
    match strategy {
        Strategy::Random => 2 * k * idx,
        Strategy::DFps => n * f + k * idx,
        Strategy::FeatFps => n * f + k * idx + n * feature_dim * f,
        Strategy::ClsAware | Strategy::CtrAware => n * idx + k * idx,
    }
}

fn timed(ctx: &Context, strategy: Strategy, cloud: &PointCloud, scores: &[f64], k: usize) -> Result<Timing, CliError> {
    let s = &ctx.config.sampling;
    sample_prepared(strategy, cloud, scores, k, ctx.config.seed, s.lambda)?;
    Ok(time(1, s.runs, || sample_prepared(strategy, cloud, scores, k, ctx.config.seed, s.lambda)))
}

pub fn run(ctx: &Context) -> Result<ReportTable, CliError> {
    let scenes = load_scenes(ctx, false)?;
    let s = &ctx.config.sampling;
    let dir = ctx.out.join("sample");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    scenes.par_iter().try_for_each(|scene| -> Result<(), CliError> {
        let cloud = with_derived_features(&scene.cloud)?;
        for &st in &s.strategies {
            let out = sample_prepared(st, &cloud, &scores(st, scene), s.k, ctx.config.seed, s.lambda)?;
            let text: String = out.indices.iter().map(|i| format!("{i}\n")).collect();
            let path = dir.join(format!("{}.{}.txt", scene.frame_id, st.label()));
            std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(())
    })?;

    let first = &scenes[0];
    let cloud = with_derived_features(&first.cloud)?;
    let dim = cloud.features().map_or(0, |f| f.dim());
    let n = cloud.len();
    let cols = ["median_ms", "p95_ms", "runs", "points_in", "points_out", "peak_bytes_est"];
    let mut table = ReportTable::new(format!("sampling time on {}", first.frame_id), "strategy", cols.map(String::from).to_vec());
    for &st in &s.strategies {
        let sc = scores(st, first);
        let t = timed(ctx, st, &cloud, &sc, s.k)?;
        table.push(
            st.label(),
            vec![
                Some(t.median_ms),
                Some(t.p95_ms),
                Some(t.runs as f64),
                Some(n as f64),
                Some(s.k.min(n) as f64),
                Some(peak_bytes(st, n, s.k, dim) as f64),
            ],
        );
    }
    ctx.emit(&table, "sample")?;
    Ok(table)
}
