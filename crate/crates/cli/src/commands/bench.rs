use pcdet_core::dataio::generate_scene;
use pcdet_core::geometry::{iou_3d, nms_3d_indices, Box7, Point, ScoredBox};
use pcdet_core::neighborhood::ball_query;
use pcdet_core::sampling::{sample_dfps, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sample::{sample_prepared, scores};
use super::with_derived_features;
use crate::error::CliError;
use crate::report::ReportTable;
use crate::timing::{linear_fit, time, Timing};
use crate::Context;

pub const BALL_RADIUS: f64 = 0.8;
pub const BALL_NQUERY: usize = 16;
pub const NMS_IOU: f64 = 0.5;

/// Row holding the D-FPS / top-k median ratio.
pub const TOPK_SPEEDUP: &str = "topk-speedup";
/// Row holding the R^2 of D-FPS time against k.
pub const DFPS_LINEAR_R2: &str = "d-fps-linear-r2";

pub const COLUMNS: [&str; 6] = ["median_ms", "p95_ms", "runs", "rerun_median_ms", "drift", "value"];

fn random_boxes(n: usize, seed: u64) -> Vec<ScoredBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let c = Point::new(rng.random_range(0.0..40.0), rng.random_range(-20.0..20.0), rng.random_range(0.0..2.0));
            let size = [rng.random_range(0.5..5.0), rng.random_range(0.5..2.5), rng.random_range(0.5..2.0)];
            let b = Box7::new(c, size, rng.random_range(-3.1..3.1), 0).expect("finite box");
            ScoredBox::new(b, rng.random_range(0.0..1.0))
        })
        .collect()
}

/// Times `f` twice back to back and reports the drift between the two medians.
fn twice<T>(ctx: &Context, mut f: impl FnMut() -> T) -> (Timing, Timing) {
    let b = &ctx.config.bench;
    let a = time(b.warmup, b.runs, &mut f);
    (a, time(0, b.runs, &mut f))
}

fn timing_row(t: (Timing, Timing)) -> Vec<Option<f64>> {
    let (a, b) = t;
    let drift = (b.median_ms - a.median_ms).abs() / a.median_ms.max(b.median_ms);
    vec![Some(a.median_ms), Some(a.p95_ms), Some(a.runs as f64), Some(b.median_ms), Some(drift), None]
}

fn value_row(v: f64) -> Vec<Option<f64>> {
    vec![None, None, None, None, None, Some(v)]
}

pub fn run(ctx: &Context) -> Result<ReportTable, CliError> {
    let cfg = &ctx.config;
    let b = &cfg.bench;
    let mut spec = cfg.data.synthetic.clone().with_seed(cfg.seed);
    spec.total_points = Some(b.n);
    let scene = generate_scene(&spec)?;
    let cloud = with_derived_features(&scene.cloud)?;
    let mut table = ReportTable::new(format!("benchmarks at N = {}, k = {}", b.n, b.k), "benchmark", COLUMNS.map(String::from).to_vec());

    let mut medians = std::collections::BTreeMap::new();
    for st in [Strategy::Random, Strategy::DFps, Strategy::FeatFps, Strategy::CtrAware] {
        let sc = scores(st, &scene);
        sample_prepared(st, &cloud, &sc, b.k, cfg.seed, cfg.sampling.lambda)?;
        let t = twice(ctx, || sample_prepared(st, &cloud, &sc, b.k, cfg.seed, cfg.sampling.lambda));
        let label = if st.is_top_k() { "top-k" } else { st.label() };
        medians.insert(label, t.0.median_ms);
        table.push(label, timing_row(t));
    }
    table.push(TOPK_SPEEDUP, value_row(medians["d-fps"] / medians["top-k"]));

    let mut ks = Vec::new();
    let mut ms = Vec::new();
    for &k in &b.fit_ks {
        let t = twice(ctx, || sample_dfps(&scene.cloud, k, 0));
        ks.push(k as f64);
        ms.push(t.0.median_ms);
        table.push(format!("d-fps@{k}"), timing_row(t));
    }
    if ks.len() >= 2 {
        table.push(DFPS_LINEAR_R2, value_row(linear_fit(&ks, &ms).2));
    }

    let centers: Vec<Point> = sample_dfps(&scene.cloud, b.k, 0)?.indices.iter().map(|&i| scene.cloud.points()[i]).collect();
    ball_query(&scene.cloud, &centers, BALL_RADIUS, BALL_NQUERY)?;
    table.push("ball-query", timing_row(twice(ctx, || ball_query(&scene.cloud, &centers, BALL_RADIUS, BALL_NQUERY))));

    let boxes = random_boxes(b.boxes, cfg.seed);
    let pairs = |f: &[ScoredBox]| f.windows(2).map(|w| iou_3d(&w[0].bbox, &w[1].bbox)).sum::<f64>();
    table.push("iou-3d", timing_row(twice(ctx, || pairs(&boxes))));
    nms_3d_indices(&boxes, NMS_IOU)?;
    table.push("nms-3d", timing_row(twice(ctx, || nms_3d_indices(&boxes, NMS_IOU))));

    ctx.emit(&table, "bench")?;
    Ok(table)
}
