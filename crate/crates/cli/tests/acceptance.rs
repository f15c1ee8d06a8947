//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to the
//! real stdout, so the verdicts show up even when output is captured.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;
mod common;

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use common::{pcdet, write_config};
use pcdet_cli::commands::{bench, load_scenes, recall};
use pcdet_cli::config::toy_scene_spec;
use pcdet_cli::report::{Format, ReportTable};
use pcdet_cli::{Context, ExperimentConfig};
use pcdet_core::dataio::{generate_scene, read_point_bin, read_scene_labels, write_point_bin, write_scene_labels, ClassCatalog, LabeledScene, SceneGenSpec};
use pcdet_core::geometry::{iou_3d, Point};
use pcdet_core::head::{format_detections, load_detector, save_detector, ContextConfig, Detector, DetectorConfig, TrainConfig, Trainer};
use pcdet_core::sampling::{InstanceMembership, PointCloud, Strategy};
use rand::Rng;

// Timing-sensitive checks must not share the CPU with each other.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints the verdict line and fails the test unless `ok` held within `budget`.
fn verdict(id: u32, name: &str, ok: Result<String, String>, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    let in_time = elapsed <= budget;
    let (pass, detail) = match ok {
        Ok(d) => (in_time, d),
        Err(d) => (false, d),
    };
    let line = format!(
        "criterion {id} {name}: {} ({detail}; {:.1}s of {}s budget)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
    assert!(pass, "{line}");
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn context(config: ExperimentConfig, out: &std::path::Path) -> Context {
    Context { out: out.to_path_buf(), format: Format::Csv, config }
}

#[test]
fn c1_soft_mask() {
    let _g = serial();
    let t = Instant::now();
    let r = oracles::soft_mask_suite(1000, 1).map(|_| "1000 pairs".to_string());
    verdict(1, "soft mask", r, t, Duration::from_secs(1));
}

#[test]
fn c2_gradients() {
    let _g = serial();
    let t = Instant::now();
    let errs = oracles::gradients::all_loss_errors(20);
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let detail = errs.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    let r = ensure(worst < oracles::gradients::TOL, || format!("max rel error {worst:.2e}: {detail}")).map(|_| format!("max rel error {worst:.2e} over 20 trials per term"));
    verdict(2, "gradient checks", r, t, Duration::from_secs(30));
}

#[test]
fn c3_sampling_oracles() {
    let _g = serial();
    let t = Instant::now();
    let r = (|| {
        oracles::fps_suite(1000, 3)?;
        oracles::topk_suite(1000, 4)?;
        let (emp, exact) = oracles::hypergeometric_suite(10_000)?;
        Ok(format!("fps and top-k exact on 1000 instances, random recall {emp:.4} vs {exact:.4}"))
    })();
    verdict(3, "sampling oracles", r, t, Duration::from_secs(120));
}

#[test]
fn c4_geometry_oracles() {
    let _g = serial();
    let t = Instant::now();
    let r = (|| {
        let worst = oracles::iou_suite(200, 1_000_000, 5)?;
        oracles::nms_suite(1000, 6)?;
        oracles::ball_query_suite(1000, 7)?;
        Ok(format!("worst iou gap {worst:.4}, nms and ball query identical on 1000 instances"))
    })();
    verdict(4, "geometry oracles", r, t, Duration::from_secs(300));
}

/// Fraction of all points that lie inside boxes of each class.
fn class_fractions(scenes: &[LabeledScene], classes: usize) -> Vec<f64> {
    let mut inside = vec![0usize; classes];
    let mut total = 0usize;
    for s in scenes {
        let m = InstanceMembership::new(s);
        for (b, &n) in s.boxes.iter().zip(m.interior_counts()) {
            inside[b.class_id()] += n;
        }
        total += s.cloud.len();
    }
    inside.iter().map(|&n| n as f64 / total as f64).collect()
}

#[test]
fn c5_recall_ordering() {
    let _g = serial();
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.data.scenes = 100;
    cfg.data.synthetic = SceneGenSpec::default();
    cfg.sampling.strategies = vec![Strategy::Random, Strategy::DFps, Strategy::CtrAware];
    let ctx = context(cfg, dir.path());
    let r = (|| {
        let ks: Vec<usize> = ctx.config.sampling.schedule.iter().map(|l| l.k).collect();
        ensure(ks == [4096, 1024, 512, 256], || format!("schedule {ks:?}"))?;
        let table = recall::run(&ctx).map_err(|e| e.to_string())?;
        let scenes = load_scenes(&ctx, true).map_err(|e| e.to_string())?;
        ensure(scenes.iter().all(|s| s.cloud.len() == 16_384), || "scene size".into())?;
        let names = &ctx.config.data.class_names;
        let frac = class_fractions(&scenes, names.len());
        let mut detail = Vec::new();
        for (c, name) in names.iter().enumerate() {
            let col = recall::column(256, name);
            let get = |row: Strategy| table.get(row.label(), &col).ok_or_else(|| format!("missing {} {col}", row.label()));
            let (rnd, dfps, ctr) = (get(Strategy::Random)?, get(Strategy::DFps)?, get(Strategy::CtrAware)?);
            detail.push(format!("{name} {:.2}% of points: random {rnd:.3} d-fps {dfps:.3} ctr-aware {ctr:.3}", 100.0 * frac[c]));
            ensure(ctr >= dfps && dfps >= rnd, || format!("{name}: order broken, {}", detail.join("; ")))?;
            ensure(ctr >= 0.95, || format!("{name}: ctr-aware {ctr:.3} < 0.95"))?;
            if frac[c] < 0.02 {
                ensure(rnd <= 0.80, || format!("{name}: random {rnd:.3} > 0.80"))?;
            }
        }
        Ok(detail.join("; "))
    })();
    verdict(5, "recall ordering at 256 points", r, t, Duration::from_secs(600));
}

#[test]
fn c6_topk_speed() {
    let _g = serial();
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.data.synthetic = SceneGenSpec::default();
    cfg.bench.n = 16_384;
    cfg.bench.k = 512;
    cfg.bench.runs = cfg.bench.runs.max(10);
    cfg.bench.warmup = cfg.bench.warmup.max(2);
    cfg.bench.fit_ks = vec![256, 512];
    let ctx = context(cfg, dir.path());
    let r = (|| {
        let table = bench::run(&ctx).map_err(|e| e.to_string())?;
        let dfps = table.get("d-fps", "median_ms").ok_or("no d-fps row")?;
        let topk = table.get("top-k", "median_ms").ok_or("no top-k row")?;
        let runs = table.get("top-k", "runs").ok_or("no runs")?;
        let speedup = table.get(bench::TOPK_SPEEDUP, "value").ok_or("no speedup row")?;
        let detail = format!("d-fps {dfps:.2} ms, top-k {topk:.3} ms, speedup {speedup:.1}x over {runs} runs");
        ensure(runs >= 10.0 && speedup >= 5.0, || detail.clone())?;
        Ok(detail)
    })();
    verdict(6, "top-k vs d-fps speed", r, t, Duration::from_secs(60));
}

#[test]
fn c7_overfit() {
    let _g = serial();
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut cfg = ExperimentConfig::default();
    cfg.out = out.clone();
    cfg.data.scenes = 5;
    cfg.data.synthetic = toy_scene_spec();
    cfg.train.steps = 400;
    cfg.train.batch = 5;
    cfg.eval.iou_thresholds = vec![0.5; cfg.data.class_names.len()];
    let conf = write_config(&cfg, dir.path());
    let r = (|| {
        let ckpt = out.join("checkpoint.bin").display().to_string();
        let dets = out.join("detections.txt").display().to_string();
        for args in [
            vec!["--config", &conf, "train"],
            vec!["--config", &conf, "detect", "--checkpoint", &ckpt],
            vec!["--config", &conf, "--format", "json", "eval", "--detections", &dets],
        ] {
            let run = pcdet(&args);
            ensure(run.code == 0, || format!("{args:?} exited {}: {}", run.code, run.stderr))?;
        }
        let text = std::fs::read_to_string(out.join("eval.json")).map_err(|e| e.to_string())?;
        let table = ReportTable::from_json(&text).map_err(|e| e.to_string())?;
        let mut detail = Vec::new();
        for name in &cfg.data.class_names {
            let recall = table.get(name, "recall").unwrap_or(0.0);
            let ap = table.get(name, "ap").unwrap_or(0.0);
            detail.push(format!("{name} recall {recall:.3} ap {ap:.3}"));
            ensure(recall >= 0.9 && ap >= 0.8, || detail.join("; "))?;
        }
        Ok(format!("{} steps: {}", cfg.train.steps, detail.join("; ")))
    })();
    verdict(7, "overfit five scenes", r, t, Duration::from_secs(1800));
}

/// Small scenes crowded with pedestrians and cyclists.
fn mechanism_spec() -> SceneGenSpec {
    let mut spec = SceneGenSpec::default();
    spec.x_range = [0.0, 16.0];
    spec.y_range = [-8.0, 8.0];
    spec.total_points = Some(1024);
    spec.classes[0].count = [1, 2];
    spec.classes[1].count = [1, 3];
    spec.classes[2].count = [1, 2];
    spec
}

/// Matched ground-truth boxes and totals for the small classes at IoU 0.5.
fn small_class_hits(det: &Detector, scenes: &[LabeledScene]) -> (usize, usize) {
    let (mut hit, mut total) = (0, 0);
    for s in scenes {
        let d = det.detect_scene(s).unwrap();
        for b in s.boxes.iter().filter(|b| b.class_id() != 0) {
            total += 1;
            if d.iter().any(|x| x.bbox.class_id() == b.class_id() && iou_3d(&x.bbox, b) >= 0.5) {
                hit += 1;
            }
        }
    }
    (hit, total)
}

#[test]
fn c8_centers_vs_length() {
    let _g = serial();
    let t = Instant::now();
    const SEEDS: u64 = 20;
    let spec = mechanism_spec();
    let mut means = [0.0f64; 2];
    for seed in 0..SEEDS {
        let train: Vec<_> = (0..10).map(|s| generate_scene(&spec.clone().with_seed(1000 * seed + s)).unwrap()).collect();
        let test: Vec<_> = (0..8).map(|s| generate_scene(&spec.clone().with_seed(1000 * seed + 500 + s)).unwrap()).collect();
        for (i, ctx) in [ContextConfig::centers(), ContextConfig::length(1.0)].into_iter().enumerate() {
            let mut cfg = DetectorConfig::toy();
            cfg.layers[0].k = 256;
            cfg.layers[1].k = 128;
            cfg.layers[2].k = 64;
            cfg.context = ctx;
            cfg.init_seed = seed;
            let mut tr = Trainer::new(Detector::new(cfg).unwrap(), TrainConfig { steps: 300, batch: 2, seed, ..Default::default() }, &train).unwrap();
            tr.run(&train, |_| {}).unwrap();
            let (h1, n1) = small_class_hits(&tr.detector, &train);
            let (h2, n2) = small_class_hits(&tr.detector, &test);
            means[i] += (h1 + h2) as f64 / (n1 + n2) as f64 / SEEDS as f64;
        }
    }
    let detail = format!("small-class recall centers {:.3} vs length +1.0 m {:.3} over {SEEDS} seeds", means[0], means[1]);
    let r = ensure(means[0] < means[1], || detail.clone()).map(|_| detail.clone());
    verdict(8, "centers vs extended length", r, t, Duration::from_secs(2700));
}

#[test]
fn c9_round_trips() {
    let _g = serial();
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let r = (|| {
        // f32-representable values survive the binary format exactly
        let mut rng = oracles::rng(9);
        let mut q = || rng.random_range(-80.0f32..80.0) as f64;
        let pts: Vec<Point> = (0..16_384).map(|_| Point::new(q(), q(), q())).collect();
        let intensity: Vec<f64> = (0..pts.len()).map(|i| (i as f32 / 16_384.0) as f64).collect();
        let cloud = PointCloud::new(pts).unwrap().with_intensity(intensity).unwrap();
        let bin = dir.path().join("cloud.bin");
        write_point_bin(&bin, &cloud).map_err(|e| e.to_string())?;
        let back = read_point_bin(&bin).map_err(|e| e.to_string())?;
        let bits = |c: &PointCloud| {
            let mut v: Vec<u64> = c.points().iter().flat_map(|p| p.to_array().map(f64::to_bits)).collect();
            v.extend(c.intensity().unwrap().iter().map(|x| x.to_bits()));
            v
        };
        ensure(bits(&cloud) == bits(&back), || "point binary not bit-exact".into())?;

        let cat = ClassCatalog::default();
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let scene = generate_scene(&SceneGenSpec::default().with_seed(seed)).map_err(|e| e.to_string())?;
            let p = dir.path().join(format!("labels{seed}.txt"));
            write_scene_labels(&p, &scene.boxes, &cat).map_err(|e| e.to_string())?;
            let back = read_scene_labels(&p, &cat).map_err(|e| e.to_string())?;
            ensure(back.len() == scene.boxes.len(), || "label count changed".into())?;
            for (a, b) in scene.boxes.iter().zip(&back) {
                ensure(a.class_id() == b.class_id(), || "label class changed".into())?;
                let mut diffs: Vec<f64> = (a.center() - b.center()).to_array().to_vec();
                diffs.extend(a.size().iter().zip(b.size()).map(|(x, y)| x - y));
                diffs.push(a.yaw() - b.yaw());
                worst = diffs.iter().fold(worst, |w, d| w.max(d.abs()));
            }
        }
        ensure(worst <= 1e-6, || format!("label error {worst:.2e}"))?;

        let mut spec = toy_scene_spec();
        spec.total_points = Some(1024);
        let scenes: Vec<_> = (0..3).map(|s| generate_scene(&spec.clone().with_seed(s)).unwrap()).collect();
        let mut dcfg = DetectorConfig::toy();
        dcfg.layers[0].k = 256;
        dcfg.layers[1].k = 128;
        dcfg.layers[2].k = 64;
        let names = dcfg.class_names.clone();
        let mut tr = Trainer::new(Detector::new(dcfg).unwrap(), TrainConfig { steps: 5, batch: 1, ..Default::default() }, &scenes).unwrap();
        tr.run(&scenes, |_| {}).unwrap();
        let ck = dir.path().join("model.bin");
        save_detector(&ck, &tr.detector).map_err(|e| e.to_string())?;
        let loaded = load_detector(&ck).map_err(|e| e.to_string())?;
        for s in &scenes {
            let a = format_detections(&s.frame_id, &tr.detector.detect_scene(s).unwrap(), &names);
            let b = format_detections(&s.frame_id, &loaded.detect_scene(s).unwrap(), &names);
            ensure(a == b, || format!("{}: detections differ after reload", s.frame_id))?;
        }
        Ok(format!("16384 points bit-exact, worst label error {worst:.1e}, reloaded detections identical"))
    })();
    verdict(9, "format round trips", r, t, Duration::from_secs(60));
}
