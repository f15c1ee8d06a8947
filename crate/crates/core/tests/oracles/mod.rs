//! Reference implementations and randomized checks shared by the test suites.
#![allow(dead_code)]

use pcdet_core::dataio::LabeledScene;
use pcdet_core::geometry::{
    contains, iou_3d, nms_3d_indices, soft_point_mask, Box7, Point, ScoredBox,
};
use pcdet_core::neighborhood::ball_query;
use pcdet_core::sampling::{
    instance_recall, sample_dfps, sample_featfps, sample_random, sample_topk, Features, PointCloud,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod gradients;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<Point> {
    (0..n)
        .map(|_| {
            Point::new(
                rng.random_range(-extent..extent),
                rng.random_range(-extent..extent),
                rng.random_range(-extent..extent),
            )
        })
        .collect()
}

pub fn random_box(rng: &mut ChaCha8Rng, extent: f64) -> Box7 {
    let c = Point::new(
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
    );
    let size = [
        rng.random_range(0.2..5.0),
        rng.random_range(0.2..3.0),
        rng.random_range(0.2..2.5),
    ];
    Box7::new(c, size, rng.random_range(-4.0..4.0), rng.random_range(0..3)).unwrap()
}

/// A box near `a`, so that the pair usually overlaps.
pub fn nearby_box(rng: &mut ChaCha8Rng, a: &Box7) -> Box7 {
    let s = a.size();
    let c = a.center()
        + Point::new(
            rng.random_range(-0.6..0.6) * s[0],
            rng.random_range(-0.6..0.6) * s[1],
            rng.random_range(-0.6..0.6) * s[2],
        );
    let size = s.map(|v| v * rng.random_range(0.5..1.5));
    Box7::new(c, size, a.yaw() + rng.random_range(-1.5..1.5), a.class_id()).unwrap()
}

/// Farthest point sampling recomputing every point's distance to the whole
/// selected set at each step; ties go to the lowest index.
pub fn naive_fps(
    n: usize,
    k: usize,
    start: usize,
    dist: impl Fn(usize, usize) -> f64,
) -> Vec<usize> {
    let mut picked = vec![start];
    while picked.len() < k {
        let mut best = None;
        let mut best_d = f64::NEG_INFINITY;
        for i in 0..n {
            if picked.contains(&i) {
                continue;
            }
            let d = picked
                .iter()
                .map(|&s| dist(s, i))
                .fold(f64::INFINITY, f64::min);
            if d > best_d {
                best_d = d;
                best = Some(i);
            }
        }
        picked.push(best.unwrap());
    }
    picked
}

/// Full sort by descending score, ties by index.
pub fn sorted_topk(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Probability that a draw of `k` from `n` without replacement hits at least
/// one of `m` marked items.
pub fn hypergeometric_hit(n: usize, m: usize, k: usize) -> f64 {
    let miss: f64 = (0..k)
        .map(|i| (n - m - i) as f64 / (n - i) as f64)
        .product();
    1.0 - miss
}

/// Monte Carlo IoU from uniform samples over the union of both bounding cuboids.
pub fn monte_carlo_iou(rng: &mut ChaCha8Rng, a: &Box7, b: &Box7, samples: usize) -> f64 {
    let bounds = |x: &Box7| {
        let r = x.bev_radius();
        let c = x.center();
        ([c.x - r, c.y - r, x.z_min()], [c.x + r, c.y + r, x.z_max()])
    };
    let (la, ha) = bounds(a);
    let (lb, hb) = bounds(b);
    let lo: [f64; 3] = std::array::from_fn(|d| la[d].min(lb[d]));
    let hi: [f64; 3] = std::array::from_fn(|d| ha[d].max(hb[d]));
    let (mut both, mut either) = (0usize, 0usize);
    for _ in 0..samples {
        let p = Point::new(
            rng.random_range(lo[0]..hi[0]),
            rng.random_range(lo[1]..hi[1]),
            rng.random_range(lo[2]..hi[2]),
        );
        let (ia, ib) = (contains(a, p), contains(b, p));
        both += (ia && ib) as usize;
        either += (ia || ib) as usize;
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

/// Keeps a box when no already kept box of higher priority overlaps it above the threshold.
pub fn brute_nms(boxes: &[ScoredBox], thr: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| {
        boxes[j]
            .score
            .partial_cmp(&boxes[i].score)
            .unwrap()
            .then(i.cmp(&j))
    });
    let mut keep: Vec<usize> = Vec::new();
    for i in order {
        if keep
            .iter()
            .all(|&k| iou_3d(&boxes[k].bbox, &boxes[i].bbox) <= thr)
        {
            keep.push(i);
        }
    }
    keep
}

/// Linear scan ball query: neighbors by distance then index, padded with the
/// first neighbor, or the nearest point when none lies within the radius.
pub fn brute_ball(
    points: &[Point],
    center: Point,
    radius: f64,
    nquery: usize,
) -> (Vec<usize>, usize) {
    let mut hits: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.dist_sq(center), i))
        .filter(|&(d, _)| d <= radius * radius)
        .collect();
    hits.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let found = hits.len();
    let fill = match hits.first() {
        Some(h) => h.1,
        None => {
            let mut all: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .map(|(i, p)| (p.dist_sq(center), i))
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            all[0].1
        }
    };
    let mut out: Vec<usize> = hits.iter().take(nquery).map(|h| h.1).collect();
    out.resize(nquery, fill);
    (out, found)
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Center, faces, the quarter-offset value, then rigid-motion and scale invariance on `pairs` random pairs.
pub fn soft_mask_suite(pairs: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let eighth = |r: &mut ChaCha8Rng, lo: i32, hi: i32| r.random_range(lo..=hi) as f64 / 8.0;
    for _ in 0..50 {
        // the cube root magnifies sub-ulp offsets, so surface points must be exact:
        // axis-aligned boxes on a dyadic lattice keep every face coordinate representable
        let c = Point::new(
            eighth(&mut r, -80, 80),
            eighth(&mut r, -80, 80),
            eighth(&mut r, -80, 80),
        );
        let [l, w, h] = [
            eighth(&mut r, 2, 40),
            eighth(&mut r, 2, 24),
            eighth(&mut r, 2, 20),
        ];
        let b = Box7::new(c, [l, w, h], 0.0, 0).unwrap();
        check((soft_point_mask(&b, c) - 1.0).abs() < 1e-9, || {
            format!("center of {b:?}")
        })?;
        for q in [
            Point::new(0.5 * l, 0.0, 0.0),
            Point::new(-0.5 * l, 0.25 * w, 0.0),
            Point::new(0.0, 0.5 * w, 0.25 * h),
            Point::new(0.25 * l, -0.5 * w, 0.0),
            Point::new(0.0, 0.0, 0.5 * h),
            Point::new(0.25 * l, 0.25 * w, -0.5 * h),
        ] {
            let m = soft_point_mask(&b, q + c);
            check(m.abs() < 1e-9, || {
                format!("face point {q:?} of {b:?} has mask {m}")
            })?;
        }
    }
    for _ in 0..50 {
        let b = random_box(&mut r, 10.0);
        check((soft_point_mask(&b, b.center()) - 1.0).abs() < 1e-9, || {
            format!("center of {b:?}")
        })?;
        let quarter = soft_point_mask(
            &b,
            Point::new(0.25 * b.l(), 0.0, 0.0).rotate_z(b.yaw()) + b.center(),
        );
        check((quarter - (1.0f64 / 3.0).cbrt()).abs() < 1e-9, || {
            format!("quarter offset mask {quarter}")
        })?;
    }
    for _ in 0..pairs {
        let b = random_box(&mut r, 10.0);
        let [l, w, h] = b.size();
        let local = Point::new(
            r.random_range(-0.5..0.5) * l,
            r.random_range(-0.5..0.5) * w,
            r.random_range(-0.5..0.5) * h,
        );
        let p = local.rotate_z(b.yaw()) + b.center();
        let m = soft_point_mask(&b, p);
        let angle = r.random_range(-3.2..3.2);
        let t = Point::new(
            r.random_range(-50.0..50.0),
            r.random_range(-50.0..50.0),
            r.random_range(-5.0..5.0),
        );
        let moved = b.rotated_z(angle).translated(t);
        let mm = soft_point_mask(&moved, p.rotate_z(angle) + t);
        check((m - mm).abs() < 1e-9, || {
            format!("rigid motion changed mask {m} -> {mm}")
        })?;
        let s = r.random_range(0.1..10.0);
        let scaled = Box7::new(
            b.center() * s,
            b.size().map(|v| v * s),
            b.yaw(),
            b.class_id(),
        )
        .unwrap();
        let ms = soft_point_mask(&scaled, p * s);
        check((m - ms).abs() < 1e-9, || {
            format!("scale {s} changed mask {m} -> {ms}")
        })?;
    }
    Ok(())
}

/// D-FPS and Feat-FPS against [`naive_fps`] on random clouds of at most 500 points.
pub fn fps_suite(instances: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for t in 0..instances {
        let n = r.random_range(1..=500);
        let mut pts = random_points(&mut r, n, 10.0);
        if t % 5 == 0 {
            // a coarse lattice produces many equal distances
            for p in &mut pts {
                *p = Point::new(p.x.round(), p.y.round(), p.z.round());
            }
        }
        let k = r.random_range(1..=n.min(48));
        let start = r.random_range(0..n);
        let dim = r.random_range(1..=4);
        let feats: Vec<f64> = (0..n * dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let lambda = if t % 3 == 0 {
            0.0
        } else {
            r.random_range(0.0..2.0)
        };
        let cloud = PointCloud::new(pts.clone())
            .unwrap()
            .with_features(Features::new(dim, feats.clone()).unwrap())
            .unwrap();

        let got = sample_dfps(&cloud, k, start).unwrap().indices;
        let want = naive_fps(n, k, start, |a, i| pts[a].dist_sq(pts[i]));
        check(got == want, || {
            format!("D-FPS instance {t}: {got:?} vs {want:?}")
        })?;

        let fd = |a: usize, i: usize| {
            let f: f64 = (0..dim)
                .map(|d| (feats[a * dim + d] - feats[i * dim + d]).powi(2))
                .sum();
            f + lambda * pts[a].dist_sq(pts[i])
        };
        let got = sample_featfps(&cloud, k, start, lambda).unwrap().indices;
        let want = naive_fps(n, k, start, fd);
        check(got == want, || {
            format!("Feat-FPS instance {t}: {got:?} vs {want:?}")
        })?;
    }
    Ok(())
}

/// Top-k against a full sort, with deliberate ties.
pub fn topk_suite(instances: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for t in 0..instances {
        let n = r.random_range(1..=2000);
        let levels = r.random_range(1..=50);
        let scores: Vec<f64> = (0..n)
            .map(|_| r.random_range(0..levels) as f64 / levels as f64)
            .collect();
        let k = r.random_range(1..=n);
        let got = sample_topk(&scores, k).unwrap().indices;
        check(got == sorted_topk(&scores, k), || {
            format!("top-k instance {t} (n {n}, k {k})")
        })?;
    }
    Ok(())
}

/// Fraction of `seeds` random draws that keep an instance, against the closed form.
pub fn hypergeometric_suite(seeds: u64) -> Result<(f64, f64), String> {
    let mut r = rng(99);
    let n = 400;
    let m = 6;
    let k = 40;
    let b = Box7::new(Point::new(0.0, 0.0, 0.0), [1.0, 1.0, 1.0], 0.0, 1)
        .unwrap()
        .with_instance(0);
    let mut pts: Vec<Point> = (0..m)
        .map(|_| {
            Point::new(
                r.random_range(-0.4..0.4),
                r.random_range(-0.4..0.4),
                r.random_range(-0.4..0.4),
            )
        })
        .collect();
    pts.extend(
        (m..n).map(|_| Point::new(r.random_range(2.0..20.0), r.random_range(2.0..20.0), 0.0)),
    );
    let scene = LabeledScene::new("hyper", PointCloud::new(pts).unwrap(), vec![b]).unwrap();
    let mut hits = 0.0;
    for s in 0..seeds {
        let o = sample_random(&scene.cloud, k, s).unwrap();
        hits += instance_recall(&scene, &o, 1).class_recall(0, 1).unwrap();
    }
    let empirical = hits / seeds as f64;
    let exact = hypergeometric_hit(n, m, k);
    check((empirical - exact).abs() <= 0.02, || {
        format!("random recall {empirical} vs closed form {exact}")
    })?;
    Ok((empirical, exact))
}

/// Rotated IoU against Monte Carlo; returns the largest deviation.
pub fn iou_suite(pairs: usize, samples: usize, seed: u64) -> Result<f64, String> {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for t in 0..pairs {
        let a = random_box(&mut r, 5.0);
        let b = if t % 10 == 9 {
            random_box(&mut r, 5.0)
        } else {
            nearby_box(&mut r, &a)
        };
        let exact = iou_3d(&a, &b);
        let mc = monte_carlo_iou(&mut r, &a, &b, samples);
        worst = worst.max((exact - mc).abs());
        check((exact - mc).abs() <= 0.01, || {
            format!("pair {t}: iou {exact} vs Monte Carlo {mc}")
        })?;
    }
    Ok(worst)
}

pub fn nms_suite(instances: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for t in 0..instances {
        let n = r.random_range(0..=40);
        let base: Vec<Box7> = (0..r.random_range(1..=6))
            .map(|_| random_box(&mut r, 6.0))
            .collect();
        let boxes: Vec<ScoredBox> = (0..n)
            .map(|_| {
                let a = &base[r.random_range(0..base.len())];
                let b = if r.random_bool(0.8) {
                    nearby_box(&mut r, a)
                } else {
                    *a
                };
                let score = if r.random_bool(0.2) {
                    0.5
                } else {
                    r.random_range(0.0..1.0)
                };
                ScoredBox::new(b, score)
            })
            .collect();
        let thr = [0.0, 0.1, 0.3, 0.5, 0.7, 1.0][t % 6];
        let got = nms_3d_indices(&boxes, thr).unwrap();
        let want = brute_nms(&boxes, thr);
        check(got == want, || {
            format!("NMS instance {t} (threshold {thr}): {got:?} vs {want:?}")
        })?;
    }
    Ok(())
}

pub fn ball_query_suite(instances: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for t in 0..instances {
        let n = r.random_range(1..=400);
        let extent = r.random_range(0.5..10.0);
        let mut pts = random_points(&mut r, n, extent);
        if n > 4 && t % 4 == 0 {
            pts[1] = pts[0];
            pts[3] = pts[2];
        }
        let centers: Vec<Point> = (0..r.random_range(1..=30))
            .map(|_| {
                if r.random_bool(0.5) {
                    pts[r.random_range(0..n)]
                } else {
                    random_points(&mut r, 1, extent * 1.5)[0]
                }
            })
            .collect();
        let radius = r.random_range(0.05..extent);
        let nquery = r.random_range(1..=32);
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let g = ball_query(&cloud, &centers, radius, nquery).unwrap();
        for (c, &center) in centers.iter().enumerate() {
            let (want, found) = brute_ball(&pts, center, radius, nquery);
            check(g.group(c) == want.as_slice() && g.found(c) == found, || {
                format!(
                    "ball query instance {t}, center {c}: {:?} ({}) vs {want:?} ({found})",
                    g.group(c),
                    g.found(c)
                )
            })?;
            let valid = g.validity(c).iter().filter(|&&v| v).count();
            check(valid == found.min(nquery), || {
                format!("validity count {valid} for {found} found")
            })?;
        }
    }
    Ok(())
}
