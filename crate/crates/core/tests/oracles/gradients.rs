//! Finite-difference checks of every loss term.

use pcdet_core::geometry::{Box7, Point};
use pcdet_core::nn::{
    loss_box, loss_centroid, loss_cls_aware, loss_ctr_aware, BoxCoder, BoxTarget, Graph,
    ParamStore, Tensor, Var, HEAD_WIDTH,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub const BOX_TERMS: [&str; 6] = [
    "box.loc",
    "box.size",
    "box.angle_bin",
    "box.angle_res",
    "box.corner",
    "box.total",
];

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    Tensor::new(
        rows,
        cols,
        (0..rows * cols).map(|_| scale * normal(rng)).collect(),
    )
    .unwrap()
}

/// Largest relative disagreement between backprop and central differences.
pub fn max_rel_error(store: &ParamStore, f: impl Fn(&mut Graph, &ParamStore) -> Var) -> f64 {
    let mut g = Graph::new();
    let out = f(&mut g, store);
    let grads = g.backward(out).unwrap();
    let mut worst: f64 = 0.0;
    for id in store.ids() {
        let shape = store.value(id).shape();
        for k in 0..shape[0] * shape[1] {
            let eval = |delta: f64| {
                let mut s = store.clone();
                s.value_mut(id).data_mut()[k] += delta;
                let mut g = Graph::new();
                let v = f(&mut g, &s);
                g.value(v).item()
            };
            let numeric = (eval(STEP) - eval(-STEP)) / (2.0 * STEP);
            let analytic = grads.get(id).map_or(0.0, |t| t.data()[k]);
            // floor well above central-difference round-off (~1e-11 here)
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

pub fn one_hot_labels(rng: &mut ChaCha8Rng, n: usize, c: usize) -> Tensor {
    let mut t = Tensor::zeros(n, c);
    for i in 0..n {
        let k = rng.random_range(0..=c);
        if k < c {
            t.set(i, k, 1.0);
        }
    }
    t
}

pub fn cls_aware_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let id = store.add("logits", random_tensor(&mut rng, 64, 3, 2.0));
    let labels = one_hot_labels(&mut rng, 64, 3);
    max_rel_error(&store, |g, s| {
        let x = g.param(s, id);
        loss_cls_aware(g, x, &labels).unwrap()
    })
}

pub fn ctr_aware_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
    let mut store = ParamStore::new();
    let id = store.add("logits", random_tensor(&mut rng, 64, 3, 2.0));
    let labels = one_hot_labels(&mut rng, 64, 3);
    let masks: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
    max_rel_error(&store, |g, s| {
        let x = g.param(s, id);
        loss_ctr_aware(g, x, &labels, &masks).unwrap()
    })
}

pub fn centroid_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
    let n = 40;
    let k = 4;
    let mut store = ParamStore::new();
    let id = store.add("offsets", random_tensor(&mut rng, n, 3, 1.0));
    let points: Vec<Point> = (0..n)
        .map(|_| Point::new(normal(&mut rng), normal(&mut rng), normal(&mut rng)))
        .collect();
    let centers: Vec<Point> = (0..k)
        .map(|_| Point::new(normal(&mut rng), normal(&mut rng), 0.0))
        .collect();
    let assignment: Vec<Option<usize>> = (0..n)
        .map(|_| {
            if rng.random_bool(0.7) {
                Some(rng.random_range(0..k))
            } else {
                None
            }
        })
        .collect();
    max_rel_error(&store, |g, s| {
        let x = g.param(s, id);
        loss_centroid(g, x, &points, &assignment, &centers)
            .unwrap()
            .total
    })
}

pub fn random_box(rng: &mut ChaCha8Rng) -> Box7 {
    let class_id = rng.random_range(0..3);
    Box7::new(
        Point::new(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-1.0..1.0),
        ),
        [
            rng.random_range(0.5..4.0),
            rng.random_range(0.5..2.0),
            rng.random_range(0.5..2.0),
        ],
        rng.random_range(-3.1..3.1),
        class_id,
    )
    .unwrap()
}

pub fn coder3() -> BoxCoder {
    BoxCoder::new(vec![[3.9, 1.6, 1.56], [0.8, 0.6, 1.73], [1.76, 0.6, 1.73]]).unwrap()
}

/// `term` indexes [`BOX_TERMS`].
pub fn box_term_error(term: usize, seed: u64) -> f64 {
    let coder = coder3();
    let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
    let n = 8;
    let targets: Vec<BoxTarget> = (0..n)
        .map(|_| {
            let bbox = random_box(&mut rng);
            let centroid = bbox.center()
                + Point::new(normal(&mut rng), normal(&mut rng), 0.3 * normal(&mut rng));
            BoxTarget { bbox, centroid }
        })
        .collect();
    let mut store = ParamStore::new();
    let id = store.add("head", random_tensor(&mut rng, n, HEAD_WIDTH, 0.5));
    max_rel_error(&store, |g, s| {
        let x = g.param(s, id);
        let l = loss_box(g, x, &targets, &coder).unwrap();
        [l.loc, l.size, l.angle_bin, l.angle_res, l.corner, l.total][term]
    })
}

/// Worst error per loss term over `trials` seeds.
pub fn all_loss_errors(trials: u64) -> Vec<(String, f64)> {
    let worst = |f: &dyn Fn(u64) -> f64| (0..trials).map(f).fold(0.0, f64::max);
    let mut out = vec![
        ("cls-aware".to_string(), worst(&cls_aware_error)),
        ("ctr-aware".to_string(), worst(&ctr_aware_error)),
        ("centroid".to_string(), worst(&centroid_error)),
    ];
    for (t, name) in BOX_TERMS.iter().enumerate() {
        out.push((name.to_string(), worst(&|s| box_term_error(t, s))));
    }
    out
}
