//! The toy single-stage detector: sampling backbone, centroid votes,
//! instance aggregation and the two prediction branches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assign::{assign_membership, ContextConfig};
use super::proposal::{generate_proposals, postprocess, Proposal};
use super::HeadError;
use crate::dataio::LabeledScene;
use crate::geometry::{contains, soft_point_mask, Box7, Point, ScoredBox};
use crate::neighborhood::{ball_query, GroupIndex};
use crate::nn::{
    forward_mlp, loss_box, loss_centroid, loss_cls_aware, loss_ctr_aware, sa_layer_graph,
    Activation, BoxBreakdown, BoxCoder, BoxTarget, Graph, LossBreakdown, LossWeights, Mlp, MlpSpec,
    ParamStore, SaModule, SaSpec, ScaleInput, Tensor, Var, HEAD_WIDTH,
};
use crate::sampling::{
    sample_dfps, sample_featfps, sample_random, sample_topk, Features, PointCloud, Strategy,
};

/// One backbone stage. Without radii the stage only selects points and
/// carries their features forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub strategy: Strategy,
    pub k: usize,
    #[serde(default)]
    pub radii: Vec<f64>,
    #[serde(default)]
    pub nquery: Vec<usize>,
    /// Per-scale widths after the input.
    #[serde(default)]
    pub mlps: Vec<Vec<usize>>,
    /// Widths after concatenation; empty for none.
    #[serde(default)]
    pub post: Vec<usize>,
}

impl LayerConfig {
    pub fn groups(&self) -> bool {
        !self.radii.is_empty()
    }

    fn sa_spec(&self, in_width: usize) -> Result<SaSpec, HeadError> {
        let scales = self
            .mlps
            .iter()
            .map(|w| MlpSpec::chain(&[&[3 + in_width][..], w].concat(), Activation::Relu))
            .collect::<Result<Vec<_>, _>>()?;
        let concat: usize = scales.iter().map(MlpSpec::output_width).sum();
        let post = if self.post.is_empty() {
            None
        } else {
            Some(MlpSpec::chain(
                &[&[concat][..], &self.post].concat(),
                Activation::Relu,
            )?)
        };
        Ok(SaSpec { scales, post })
    }

    fn validate(&self, what: &str) -> Result<(), HeadError> {
        let bad = |m: String| Err(HeadError::Config(format!("{what}: {m}")));
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if self.radii.len() != self.nquery.len() || self.radii.len() != self.mlps.len() {
            return bad(format!(
                "{} radii, {} nquery, {} mlps",
                self.radii.len(),
                self.nquery.len(),
                self.mlps.len()
            ));
        }
        if self.radii.windows(2).any(|w| w[0] >= w[1]) || self.radii.iter().any(|r| !(*r > 0.0)) {
            return bad(format!(
                "radii must be positive and increasing: {:?}",
                self.radii
            ));
        }
        if self.mlps.iter().any(Vec::is_empty) || self.nquery.contains(&0) {
            return bad("empty MLP or zero nquery".into());
        }
        if !self.groups() && !self.post.is_empty() {
            return bad("a selection-only stage has no post MLP".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationConfig {
    pub radii: Vec<f64>,
    pub nquery: Vec<usize>,
    pub mlps: Vec<Vec<usize>>,
    pub post: Vec<usize>,
}

impl AggregationConfig {
    fn as_layer(&self) -> LayerConfig {
        LayerConfig {
            strategy: Strategy::DFps,
            k: 1,
            radii: self.radii.clone(),
            nquery: self.nquery.clone(),
            mlps: self.mlps.clone(),
            post: self.post.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub class_names: Vec<String>,
    /// `(l, w, h)` anchors per class.
    pub mean_sizes: Vec<[f64; 3]>,
    pub layers: Vec<LayerConfig>,
    pub score_hidden: Vec<usize>,
    pub vote_hidden: Vec<usize>,
    pub aggregation: AggregationConfig,
    pub cls_hidden: Vec<usize>,
    pub reg_hidden: Vec<usize>,
    pub context: ContextConfig,
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default = "default_lambda")]
    pub feat_lambda: f64,
    pub score_threshold: f64,
    pub nms_iou: f64,
    pub init_seed: u64,
}

fn default_lambda() -> f64 {
    1.0
}

fn default_classes() -> (Vec<String>, Vec<[f64; 3]>) {
    (
        vec!["Car".into(), "Pedestrian".into(), "Cyclist".into()],
        vec![[3.9, 1.6, 1.56], [0.8, 0.6, 1.73], [1.76, 0.6, 1.73]],
    )
}

impl DetectorConfig {
    /// A small network for CPU-scale scenes of about 2,048 points.
    pub fn toy() -> Self {
        let (class_names, mean_sizes) = default_classes();
        let layer =
            |strategy, k, radii: &[f64], nquery: &[usize], mlps: &[&[usize]], post: &[usize]| {
                LayerConfig {
                    strategy,
                    k,
                    radii: radii.to_vec(),
                    nquery: nquery.to_vec(),
                    mlps: mlps.iter().map(|m| m.to_vec()).collect(),
                    post: post.to_vec(),
                }
            };
        Self {
            class_names,
            mean_sizes,
            layers: vec![
                layer(
                    Strategy::DFps,
                    512,
                    &[0.8, 1.6],
                    &[8, 16],
                    &[&[16, 16], &[16, 32]],
                    &[32],
                ),
                layer(
                    Strategy::CtrAware,
                    256,
                    &[1.6, 3.2],
                    &[8, 16],
                    &[&[32, 32], &[32, 64]],
                    &[64],
                ),
                layer(Strategy::CtrAware, 128, &[], &[], &[], &[]),
            ],
            score_hidden: vec![32],
            vote_hidden: vec![64],
            aggregation: AggregationConfig {
                radii: vec![1.6, 3.2],
                nquery: vec![16, 16],
                mlps: vec![vec![64, 64], vec![64, 64]],
                post: vec![128],
            },
            cls_hidden: vec![64, 64],
            reg_hidden: vec![64, 64],
            context: ContextConfig::length(1.0),
            weights: LossWeights::default(),
            feat_lambda: 1.0,
            score_threshold: 0.1,
            nms_iou: 0.1,
            init_seed: 0,
        }
    }

    /// Layer widths of the KITTI network.
    pub fn kitti() -> Self {
        let (class_names, mean_sizes) = default_classes();
        let sa = |strategy, k, radii: [f64; 2], mlps: [[usize; 3]; 2], post: usize| LayerConfig {
            strategy,
            k,
            radii: radii.to_vec(),
            nquery: vec![16, 32],
            mlps: mlps.iter().map(|m| m.to_vec()).collect(),
            post: vec![post],
        };
        Self {
            class_names,
            mean_sizes,
            layers: vec![
                sa(
                    Strategy::DFps,
                    4096,
                    [0.2, 0.8],
                    [[16, 16, 32], [32, 32, 64]],
                    64,
                ),
                sa(
                    Strategy::DFps,
                    1024,
                    [0.8, 1.6],
                    [[64, 64, 128], [64, 96, 128]],
                    128,
                ),
                sa(
                    Strategy::CtrAware,
                    512,
                    [1.6, 4.8],
                    [[128, 128, 256], [128, 256, 256]],
                    256,
                ),
                LayerConfig {
                    strategy: Strategy::CtrAware,
                    k: 256,
                    radii: vec![],
                    nquery: vec![],
                    mlps: vec![],
                    post: vec![],
                },
            ],
            score_hidden: vec![256],
            vote_hidden: vec![128],
            aggregation: AggregationConfig {
                radii: vec![4.8, 6.4],
                nquery: vec![16, 32],
                mlps: vec![vec![356, 356, 512], vec![256, 512, 1024]],
                post: vec![512],
            },
            cls_hidden: vec![256, 256],
            reg_hidden: vec![256, 256],
            context: ContextConfig::length(1.0),
            weights: LossWeights::default(),
            feat_lambda: 1.0,
            score_threshold: 0.1,
            nms_iou: 0.01,
            init_seed: 0,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn validate(&self) -> Result<(), HeadError> {
        if self.class_names.is_empty() || self.class_names.len() != self.mean_sizes.len() {
            return Err(HeadError::Config(format!(
                "{} class names but {} mean sizes",
                self.class_names.len(),
                self.mean_sizes.len()
            )));
        }
        if self.layers.is_empty() {
            return Err(HeadError::Config("no backbone layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate(&format!("layer {i}"))?;
            if i == 0 && l.strategy.is_top_k() {
                return Err(HeadError::Config(
                    "the first layer has no features to score".into(),
                ));
            }
            if i == 0 && !l.groups() {
                return Err(HeadError::Config("the first layer must group".into()));
            }
            if i > 0 && l.k > self.layers[i - 1].k {
                return Err(HeadError::Config(format!(
                    "layer {i} keeps more points than layer {}",
                    i - 1
                )));
            }
        }
        self.aggregation.as_layer().validate("aggregation")?;
        if self.aggregation.radii.is_empty() {
            return Err(HeadError::Config(
                "aggregation needs at least one radius".into(),
            ));
        }
        self.context
            .validate()
            .map_err(|e| HeadError::Config(e.to_string()))?;
        for (name, v) in [
            ("score_threshold", self.score_threshold),
            ("nms_iou", self.nms_iou),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(HeadError::Config(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        BoxCoder::new(self.mean_sizes.clone())?;
        Ok(())
    }
}

/// Intensity is the only raw point feature.
pub const INPUT_FEATURES: usize = 1;

/// Parameter-free sampling and grouping results for the leading D-FPS layers of one scene.
#[derive(Debug, Clone, Default)]
pub struct SceneCache {
    layers: Vec<(Vec<usize>, Vec<GroupIndex>)>,
}

#[derive(Debug, Clone)]
pub struct TopKRecord {
    pub layer: usize,
    pub strategy: Strategy,
    pub candidates: Vec<Point>,
    pub logits: Var,
}

/// Representative points and their predicted votes.
#[derive(Debug, Clone)]
pub struct VoteSet {
    /// Indices into the input cloud.
    pub indices: Vec<usize>,
    pub positions: Vec<Point>,
    pub offsets: Var,
    pub shifted: Vec<Point>,
}

#[derive(Debug)]
pub struct Forward {
    pub graph: Graph,
    /// Input-cloud indices kept by each layer.
    pub layer_indices: Vec<Vec<usize>>,
    pub topk: Vec<TopKRecord>,
    pub votes: VoteSet,
    pub cls_logits: Var,
    pub reg: Var,
}

#[derive(Debug, Clone)]
pub struct Detector {
    pub config: DetectorConfig,
    pub coder: BoxCoder,
    pub store: ParamStore,
    sa: Vec<Option<SaModule>>,
    score: Vec<Option<Mlp>>,
    vote: Mlp,
    agg: SaModule,
    cls: Mlp,
    reg: Mlp,
}

pub fn predict_and_shift(
    g: &mut Graph,
    store: &ParamStore,
    head: &Mlp,
    features: Var,
    positions: &[Point],
    indices: Vec<usize>,
) -> Result<VoteSet, HeadError> {
    let offsets = forward_mlp(g, store, head, features)?;
    let t = g.value(offsets);
    if t.rows() != positions.len() || t.cols() != 3 {
        return Err(HeadError::Config(format!(
            "offset head gives {:?} for {} points",
            t.shape(),
            positions.len()
        )));
    }
    let shifted = positions
        .iter()
        .enumerate()
        .map(|(i, p)| *p + Point::new(t.get(i, 0), t.get(i, 1), t.get(i, 2)))
        .collect();
    Ok(VoteSet {
        indices,
        positions: positions.to_vec(),
        offsets,
        shifted,
    })
}

fn group_scales(
    source: &[Point],
    centers: &[Point],
    radii: &[f64],
    nquery: &[usize],
) -> Result<Vec<GroupIndex>, HeadError> {
    let cloud = PointCloud::new(source.to_vec())?;
    radii
        .iter()
        .zip(nquery)
        .map(|(&r, &q)| Ok(ball_query(&cloud, centers, r, q)?))
        .collect()
}

fn relative(source: &[Point], centers: &[Point], groups: &GroupIndex) -> Tensor {
    let mut data = Vec::with_capacity(groups.indices().len() * 3);
    for (c, center) in centers.iter().enumerate() {
        for &i in groups.group(c) {
            data.extend_from_slice(&(source[i] - *center).to_array());
        }
    }
    Tensor::new(groups.indices().len(), 3, data).expect("three columns")
}

fn set_abstraction(
    g: &mut Graph,
    store: &ParamStore,
    module: &SaModule,
    source: &[Point],
    features: Var,
    centers: &[Point],
    groups: &[GroupIndex],
) -> Result<Var, HeadError> {
    let scales: Vec<ScaleInput> = groups
        .iter()
        .map(|gi| ScaleInput {
            rel: relative(source, centers, gi),
            groups: gi,
        })
        .collect();
    Ok(sa_layer_graph(g, store, module, &scales, Some(features))?)
}

/// Groups source points around the votes and pools their features.
pub fn aggregate_instances(
    g: &mut Graph,
    store: &ParamStore,
    module: &SaModule,
    config: &AggregationConfig,
    votes: &VoteSet,
    source: &[Point],
    source_features: Var,
) -> Result<Var, HeadError> {
    let groups = group_scales(source, &votes.shifted, &config.radii, &config.nquery)?;
    set_abstraction(
        g,
        store,
        module,
        source,
        source_features,
        &votes.shifted,
        &groups,
    )
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self, HeadError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut store = ParamStore::new();
        let c = config.n_classes();
        let mut width = INPUT_FEATURES;
        let mut sa = Vec::new();
        let mut score = Vec::new();
        let mut source_width = width;
        for (i, l) in config.layers.iter().enumerate() {
            score.push(if l.strategy.is_top_k() {
                let spec = MlpSpec::chain(
                    &[&[width][..], &config.score_hidden, &[c]].concat(),
                    Activation::None,
                )?;
                Some(Mlp::new(&mut store, &format!("score{i}"), spec, &mut rng)?)
            } else {
                None
            });
            if l.groups() {
                let module =
                    SaModule::new(&mut store, &format!("sa{i}"), l.sa_spec(width)?, &mut rng)?;
                width = module.spec.output_width();
                source_width = width;
                sa.push(Some(module));
            } else {
                sa.push(None);
            }
        }
        let vote_spec = MlpSpec::chain(
            &[&[width][..], &config.vote_hidden, &[3]].concat(),
            Activation::None,
        )?;
        let vote = Mlp::new(&mut store, "vote", vote_spec, &mut rng)?;
        vote.zero_last(&mut store);
        let agg = SaModule::new(
            &mut store,
            "agg",
            config.aggregation.as_layer().sa_spec(source_width)?,
            &mut rng,
        )?;
        let w = agg.spec.output_width();
        let cls = Mlp::new(
            &mut store,
            "cls",
            MlpSpec::chain(
                &[&[w][..], &config.cls_hidden, &[c]].concat(),
                Activation::None,
            )?,
            &mut rng,
        )?;
        let reg = Mlp::new(
            &mut store,
            "reg",
            MlpSpec::chain(
                &[&[w][..], &config.reg_hidden, &[HEAD_WIDTH]].concat(),
                Activation::None,
            )?,
            &mut rng,
        )?;
        let coder = BoxCoder::new(config.mean_sizes.clone())?;
        Ok(Self {
            config,
            coder,
            store,
            sa,
            score,
            vote,
            agg,
            cls,
            reg,
        })
    }

    /// Rebuilds the network and installs `store`, which must match it name for name.
    pub fn with_params(config: DetectorConfig, store: ParamStore) -> Result<Self, HeadError> {
        let mut d = Self::new(config)?;
        if store.len() < d.store.len() {
            return Err(HeadError::Checkpoint(format!(
                "{} tensors, expected {}",
                store.len(),
                d.store.len()
            )));
        }
        for id in d.store.ids().collect::<Vec<_>>() {
            if store.name(id) != d.store.name(id)
                || store.value(id).shape() != d.store.value(id).shape()
            {
                return Err(HeadError::Checkpoint(format!(
                    "tensor {} is {} {:?}, expected {} {:?}",
                    id.0,
                    store.name(id),
                    store.value(id).shape(),
                    d.store.name(id),
                    d.store.value(id).shape()
                )));
            }
            *d.store.value_mut(id) = store.value(id).clone();
        }
        Ok(d)
    }

    pub fn class_names(&self) -> &[String] {
        &self.config.class_names
    }

    /// Precomputes sampling and grouping for the leading D-FPS layers.
    pub fn cache(&self, cloud: &PointCloud) -> Result<SceneCache, HeadError> {
        let mut cache = SceneCache::default();
        let mut pts: Vec<Point> = cloud.points().to_vec();
        for l in &self.config.layers {
            if l.strategy != Strategy::DFps || !l.groups() || pts.is_empty() {
                break;
            }
            let k = l.k.min(pts.len());
            let sel = sample_dfps(&PointCloud::new(pts.clone())?, k, 0)?.indices;
            let centers: Vec<Point> = sel.iter().map(|&i| pts[i]).collect();
            let groups = group_scales(&pts, &centers, &l.radii, &l.nquery)?;
            cache.layers.push((sel, groups));
            pts = centers;
        }
        Ok(cache)
    }

    /// Runs the network on one cloud. `sample_seed` drives random-sampling layers.
    pub fn forward(
        &self,
        cloud: &PointCloud,
        cache: Option<&SceneCache>,
        sample_seed: u64,
    ) -> Result<Forward, HeadError> {
        if cloud.is_empty() {
            return Err(HeadError::EmptyScene);
        }
        let mut g = Graph::new();
        let store = &self.store;
        let intensity = cloud
            .intensity()
            .map_or_else(|| vec![0.0; cloud.len()], <[f64]>::to_vec);
        let mut feats = g.constant(Tensor::column(intensity));
        let mut pts: Vec<Point> = cloud.points().to_vec();
        let mut orig: Vec<usize> = (0..cloud.len()).collect();
        let mut layer_indices = Vec::new();
        let mut topk = Vec::new();
        let mut source = (pts.clone(), feats);

        for (i, l) in self.config.layers.iter().enumerate() {
            let k = l.k.min(pts.len());
            let cached = cache.and_then(|c| c.layers.get(i));
            let sel: Vec<usize> = match (cached, l.strategy) {
                (Some((sel, _)), _) => sel.clone(),
                (None, Strategy::DFps) => {
                    sample_dfps(&PointCloud::new(pts.clone())?, k, 0)?.indices
                }
                (None, Strategy::Random) => {
                    sample_random(
                        &PointCloud::new(pts.clone())?,
                        k,
                        sample_seed.wrapping_add(i as u64),
                    )?
                    .indices
                }
                (None, Strategy::FeatFps) => {
                    let f = g.value(feats);
                    let c = PointCloud::new(pts.clone())?
                        .with_features(Features::new(f.cols(), f.data().to_vec())?)?;
                    sample_featfps(&c, k, 0, self.config.feat_lambda)?.indices
                }
                (None, Strategy::ClsAware | Strategy::CtrAware) => {
                    let mlp = self.score[i]
                        .as_ref()
                        .expect("top-k layers have score heads");
                    let logits = forward_mlp(&mut g, store, mlp, feats)?;
                    let t = g.value(logits);
                    let scores: Vec<f64> = (0..t.rows())
                        .map(|r| t.row(r).iter().copied().fold(f64::NEG_INFINITY, f64::max))
                        .collect();
                    topk.push(TopKRecord {
                        layer: i,
                        strategy: l.strategy,
                        candidates: pts.clone(),
                        logits,
                    });
                    sample_topk(&scores, k)?.indices
                }
            };
            let centers: Vec<Point> = sel.iter().map(|&j| pts[j]).collect();
            feats = match &self.sa[i] {
                Some(module) => {
                    let groups = match cached {
                        Some((_, gr)) => gr.clone(),
                        None => group_scales(&pts, &centers, &l.radii, &l.nquery)?,
                    };
                    let f = set_abstraction(&mut g, store, module, &pts, feats, &centers, &groups)?;
                    source = (centers.clone(), f);
                    f
                }
                None => g.gather_rows(feats, &sel)?,
            };
            orig = sel.iter().map(|&j| orig[j]).collect();
            layer_indices.push(orig.clone());
            pts = centers;
        }

        let votes = predict_and_shift(&mut g, store, &self.vote, feats, &pts, orig)?;
        let agg = aggregate_instances(
            &mut g,
            store,
            &self.agg,
            &self.config.aggregation,
            &votes,
            &source.0,
            source.1,
        )?;
        let cls_logits = forward_mlp(&mut g, store, &self.cls, agg)?;
        let reg = forward_mlp(&mut g, store, &self.reg, agg)?;
        Ok(Forward {
            graph: g,
            layer_indices,
            topk,
            votes,
            cls_logits,
            reg,
        })
    }

    /// Records the weighted multi-task loss on `fwd.graph`.
    pub fn loss(
        &self,
        fwd: &mut Forward,
        boxes: &[Box7],
    ) -> Result<(Var, LossBreakdown), HeadError> {
        let c = self.config.n_classes();
        let w = self.config.weights;
        let g = &mut fwd.graph;

        let mut sample = g.constant(Tensor::scalar(0.0));
        for rec in &fwd.topk {
            let n = rec.candidates.len();
            let mut labels = Tensor::zeros(n, c);
            let mut masks = vec![0.0; n];
            for (i, p) in rec.candidates.iter().enumerate() {
                let inside = boxes
                    .iter()
                    .filter(|b| contains(b, *p))
                    .min_by(|a, b| p.dist_sq(a.center()).total_cmp(&p.dist_sq(b.center())));
                if let Some(b) = inside {
                    labels.set(i, b.class_id(), 1.0);
                    masks[i] = soft_point_mask(b, *p);
                }
            }
            let l = match rec.strategy {
                Strategy::CtrAware => loss_ctr_aware(g, rec.logits, &labels, &masks)?,
                _ => loss_cls_aware(g, rec.logits, &labels)?,
            };
            sample = g.add(sample, l)?;
        }

        let members = assign_membership(&fwd.votes.positions, boxes, self.config.context)?;
        let centers: Vec<Point> = boxes.iter().map(Box7::center).collect();
        let cent = loss_centroid(
            g,
            fwd.votes.offsets,
            &fwd.votes.positions,
            &members,
            &centers,
        )?;

        let n = members.len();
        let mut labels = Tensor::zeros(n, c);
        for (i, m) in members.iter().enumerate() {
            if let Some(k) = m {
                labels.set(i, boxes[*k].class_id(), 1.0);
            }
        }
        let cls = loss_cls_aware(g, fwd.cls_logits, &labels)?;

        let positives: Vec<usize> = (0..n).filter(|&i| members[i].is_some()).collect();
        let targets: Vec<BoxTarget> = positives
            .iter()
            .map(|&i| BoxTarget {
                bbox: boxes[members[i].unwrap()],
                centroid: fwd.votes.shifted[i],
            })
            .collect();
        let pred = g.gather_rows(fwd.reg, &positives)?;
        let bl = loss_box(g, pred, &targets, &self.coder)?;

        let mut total = g.scale(sample, w.sample);
        for (v, wt) in [(cent.total, w.cent), (cls, w.cls), (bl.total, w.box_)] {
            let s = g.scale(v, wt);
            total = g.add(total, s)?;
        }
        let val = |v: Var| g.value(v).item();
        let breakdown = LossBreakdown {
            sample: w.sample * val(sample),
            cent: w.cent * val(cent.total),
            cls: w.cls * val(cls),
            box_: w.box_ * val(bl.total),
            box_terms: BoxBreakdown {
                loc: val(bl.loc),
                size: val(bl.size),
                angle_bin: val(bl.angle_bin),
                angle_res: val(bl.angle_res),
                corner: val(bl.corner),
            },
            total: val(total),
        };
        Ok((total, breakdown))
    }

    pub fn proposals(&self, fwd: &Forward) -> Result<Vec<Proposal>, HeadError> {
        generate_proposals(
            fwd.graph.value(fwd.cls_logits),
            fwd.graph.value(fwd.reg),
            &fwd.votes.shifted,
            &self.coder,
        )
    }

    /// Final detections for one cloud, highest score first.
    pub fn detect(
        &self,
        cloud: &PointCloud,
        cache: Option<&SceneCache>,
    ) -> Result<Vec<ScoredBox>, HeadError> {
        if cloud.is_empty() {
            return Ok(Vec::new());
        }
        let fwd = self.forward(cloud, cache, 0)?;
        postprocess(
            &self.proposals(&fwd)?,
            self.config.nms_iou,
            self.config.score_threshold,
        )
    }

    pub fn detect_scene(&self, scene: &LabeledScene) -> Result<Vec<ScoredBox>, HeadError> {
        self.detect(&scene.cloud, None)
    }
}
