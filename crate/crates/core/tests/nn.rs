mod oracles;

use pcdet_core::head::{Detector, DetectorConfig};
use pcdet_core::neighborhood::{group_and_canonicalize, multi_scale_group, GroupedBlock};
use pcdet_core::nn::{
    checkpoint, forward_mlp, sa_layer, Activation, Graph, Mlp, MlpSpec, NnError, OneCycle,
    OptimConfig, Optimizer, OptimizerKind, ParamStore, SaModule, SaSpec, Tensor,
};
use pcdet_core::sampling::{Features, PointCloud};
use rand::Rng;

#[test]
fn forward_mlp_hand_example() {
    let mut store = ParamStore::new();
    let spec = MlpSpec::chain(&[2, 2, 1], Activation::None).unwrap();
    let mlp = Mlp::new(&mut store, "m", spec, &mut oracles::rng(0)).unwrap();
    let (w1, b1) = mlp.layers[0];
    let (w2, b2) = mlp.layers[1];
    *store.value_mut(w1) = Tensor::from_rows(&[vec![1.0, -1.0], vec![2.0, 0.0]]).unwrap();
    *store.value_mut(b1) = Tensor::from_rows(&[vec![0.0, 1.0]]).unwrap();
    *store.value_mut(w2) = Tensor::column(vec![1.0, 1.0]);
    *store.value_mut(b2) = Tensor::scalar(0.5);
    let mut g = Graph::new();
    let x = g.constant(Tensor::from_rows(&[vec![1.0, 1.0], vec![-1.0, 0.0]]).unwrap());
    let y = forward_mlp(&mut g, &store, &mlp, x).unwrap();
    // row 1: relu(3, 0) . (1, 1) + 0.5; row 2: relu(-1, 2) . (1, 1) + 0.5
    assert_eq!(g.value(y).data(), &[3.5, 2.5]);

    let bad = g.constant(Tensor::zeros(1, 3));
    assert!(matches!(
        forward_mlp(&mut g, &store, &mlp, bad),
        Err(NnError::ShapeMismatch { .. })
    ));
}

#[test]
fn output_widths_of_the_kitti_network() {
    let det = Detector::new(DetectorConfig::kitti()).unwrap();
    let shape = |name: &str| {
        let id = det
            .store
            .ids()
            .find(|&id| det.store.name(id) == name)
            .unwrap_or_else(|| panic!("no {name}"));
        det.store.value(id).shape()
    };
    // first set abstraction: two scales of 32 and 64 channels, then 96 -> 64
    assert_eq!(shape("sa0.post.0.weight"), [96, 64]);
    // aggregation: 512 + 1024 concatenated, then 1536 -> 512
    assert_eq!(shape("agg.post.0.weight"), [1536, 512]);
    assert_eq!(shape("cls.0.weight"), [512, 256]);
    assert_eq!(shape("reg.2.weight"), [256, 30]);
}

fn sa_setup() -> (
    ParamStore,
    SaModule,
    PointCloud,
    Vec<pcdet_core::geometry::Point>,
) {
    let mut r = oracles::rng(5);
    let pts = oracles::random_points(&mut r, 300, 2.0);
    let feats: Vec<f64> = (0..300).map(|_| r.random_range(0.0..1.0)).collect();
    let cloud = PointCloud::new(pts.clone())
        .unwrap()
        .with_features(Features::new(1, feats).unwrap())
        .unwrap();
    let mut store = ParamStore::new();
    let spec = SaSpec {
        scales: vec![
            MlpSpec::chain(&[4, 16, 16, 32], Activation::Relu).unwrap(),
            MlpSpec::chain(&[4, 32, 32, 64], Activation::Relu).unwrap(),
        ],
        post: Some(MlpSpec::chain(&[96, 64], Activation::Relu).unwrap()),
    };
    let module = SaModule::new(&mut store, "sa", spec, &mut r).unwrap();
    (store, module, cloud, pts[..20].to_vec())
}

fn run_sa(store: &ParamStore, module: &SaModule, blocks: &[GroupedBlock]) -> Tensor {
    let mut g = Graph::new();
    let y = sa_layer(&mut g, store, module, blocks).unwrap();
    g.value(y).clone()
}

#[test]
fn sa_layer_width_and_neighbor_order_invariance() {
    let (store, module, cloud, centers) = sa_setup();
    let blocks: Vec<GroupedBlock> = multi_scale_group(&cloud, &centers, &[0.2, 0.8], &[16, 32])
        .unwrap()
        .into_iter()
        .map(|(_, b)| b)
        .collect();
    let out = run_sa(&store, &module, &blocks);
    assert_eq!(out.shape(), [20, 64]);

    let reversed: Vec<GroupedBlock> = blocks
        .iter()
        .map(|b| {
            let mut data = Vec::with_capacity(b.data.len());
            for c in 0..b.m {
                for s in (0..b.nquery).rev() {
                    data.extend_from_slice(b.entry(c, s));
                }
            }
            GroupedBlock { data, ..b.clone() }
        })
        .collect();
    assert_eq!(run_sa(&store, &module, &reversed), out);
}

#[test]
fn sa_layer_is_translation_invariant() {
    let (store, module, cloud, centers) = sa_setup();
    let t = pcdet_core::geometry::Point::new(12.5, -3.25, 0.5);
    let moved = cloud.map_points(|p| p + t);
    let moved_centers: Vec<_> = centers.iter().map(|&c| c + t).collect();
    let groups = multi_scale_group(&cloud, &centers, &[0.2, 0.8], &[16, 32]).unwrap();
    let a: Vec<GroupedBlock> = groups.iter().map(|(_, b)| b.clone()).collect();
    // same neighbor lists, re-canonicalized in the moved frame
    let b: Vec<GroupedBlock> = groups
        .iter()
        .map(|(g, _)| group_and_canonicalize(&moved, &moved_centers, g).unwrap())
        .collect();
    let (ya, yb) = (run_sa(&store, &module, &a), run_sa(&store, &module, &b));
    assert!(ya
        .data()
        .iter()
        .zip(yb.data())
        .all(|(x, y)| (x - y).abs() < 1e-9));
}

#[test]
fn adam_with_one_cycle_solves_a_quadratic() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::zeros(1, 3));
    let target = Tensor::from_rows(&[vec![1.5, -2.0, 0.25]]).unwrap();
    let mut opt = Optimizer::new(OptimConfig::default(), &store);
    let schedule = OneCycle::new(0.1, 500);
    for step in 0..500 {
        let mut g = Graph::new();
        let wv = g.param(&store, w);
        let t = g.constant(target.clone());
        let d = g.sub(wv, t).unwrap();
        let sq = g.mul(d, d).unwrap();
        let loss = g.sum(sq);
        let grads = g.backward(loss).unwrap();
        opt.step(&mut store, &grads, schedule.lr(step)).unwrap();
    }
    let got = store.value(w).data();
    assert!(
        got.iter()
            .zip(target.data())
            .all(|(a, b)| (a - b).abs() < 1e-3),
        "{got:?}"
    );
    assert_eq!(opt.steps(), 500);
}

#[test]
fn sgd_step_is_plain_gradient_descent() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap());
    let mut g = Graph::new();
    let wv = g.param(&store, w);
    let sq = g.mul(wv, wv).unwrap();
    let loss = g.sum(sq);
    let grads = g.backward(loss).unwrap();
    let mut opt = Optimizer::new(
        OptimConfig {
            kind: OptimizerKind::Sgd,
            ..Default::default()
        },
        &store,
    );
    opt.step(&mut store, &grads, 0.1).unwrap();
    assert_eq!(store.value(w).data(), &[0.8, 1.6]);
}

#[test]
fn one_cycle_endpoints() {
    let s = OneCycle::new(0.01, 100);
    assert!((s.lr(0) - 0.001).abs() < 1e-15);
    assert!((s.lr(40) - 0.01).abs() < 1e-15);
    assert!((s.lr(100) - 1e-7).abs() < 1e-18);
    assert!((1..40).all(|i| s.lr(i) > s.lr(i - 1)));
    assert!((41..=100).all(|i| s.lr(i) < s.lr(i - 1)));
}

#[test]
fn checkpoint_bytes_round_trip() {
    let det = Detector::new(DetectorConfig::toy()).unwrap();
    let model = serde_json::json!({ "detector": det.config });
    let bytes = checkpoint::to_bytes(&model, &det.store).unwrap();
    assert_eq!(&bytes[..8], checkpoint::MAGIC);
    let (manifest, store) = checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(manifest.model, model);
    assert_eq!(
        checkpoint::to_bytes(&manifest.model, &store).unwrap(),
        bytes
    );
    assert!(checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(checkpoint::from_bytes(&bad).is_err());
}
