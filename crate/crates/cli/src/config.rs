//! Versioned TOML experiment files.

use std::path::{Path, PathBuf};

use pcdet_core::dataio::{ClassGen, SceneGenSpec};
use pcdet_core::eval::ApInterp;
use pcdet_core::head::{DetectorConfig, TrainConfig};
use pcdet_core::sampling::{LayerSpec, Strategy, DEFAULT_SCHEDULE};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA: &str = "pcdet-experiment/1";

/// Where scenes come from: a directory of `<frame>.bin` clouds with
/// `<frame>.txt` labels, or the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Number of synthetic scenes, seeded `seed, seed + 1, ...`.
    #[serde(default = "default_scenes")]
    pub scenes: usize,
    #[serde(default)]
    pub synthetic: SceneGenSpec,
    #[serde(default = "default_class_names")]
    pub class_names: Vec<String>,
}

fn default_scenes() -> usize {
    100
}

fn default_class_names() -> Vec<String> {
    vec!["Car".into(), "Pedestrian".into(), "Cyclist".into()]
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { dir: None, scenes: default_scenes(), synthetic: SceneGenSpec::default(), class_names: default_class_names() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default = "default_schedule")]
    pub schedule: Vec<LayerSpec>,
    /// Strategies run by `sample` and compared by `recall`.
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    /// Points kept by `sample`.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Instances with fewer interior points are left out of recall.
    #[serde(default = "default_min_points")]
    pub min_points: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
}

fn default_schedule() -> Vec<LayerSpec> {
    DEFAULT_SCHEDULE.to_vec()
}

fn default_strategies() -> Vec<Strategy> {
    vec![Strategy::Random, Strategy::DFps, Strategy::FeatFps, Strategy::CtrAware]
}

fn default_k() -> usize {
    512
}

fn default_lambda() -> f64 {
    1.0
}

fn default_min_points() -> usize {
    1
}

fn default_runs() -> usize {
    10
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            schedule: default_schedule(),
            strategies: default_strategies(),
            k: default_k(),
            lambda: default_lambda(),
            min_points: default_min_points(),
            runs: default_runs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// One IoU threshold per class.
    #[serde(default = "default_thresholds")]
    pub iou_thresholds: Vec<f64>,
    #[serde(default = "default_interp")]
    pub interp: ApInterp,
}

fn default_thresholds() -> Vec<f64> {
    vec![0.7, 0.5, 0.5]
}

fn default_interp() -> ApInterp {
    ApInterp::R40
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { iou_thresholds: default_thresholds(), interp: default_interp() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_bench_n")]
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Sample sizes for the D-FPS scaling fit.
    #[serde(default = "default_fit_ks")]
    pub fit_ks: Vec<usize>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default = "default_box_count")]
    pub boxes: usize,
}

fn default_bench_n() -> usize {
    16_384
}

fn default_fit_ks() -> Vec<usize> {
    vec![256, 512, 1024, 2048, 4096]
}

fn default_warmup() -> usize {
    2
}

fn default_box_count() -> usize {
    500
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n: default_bench_n(),
            k: default_k(),
            fit_ks: default_fit_ks(),
            runs: default_runs(),
            warmup: default_warmup(),
            boxes: default_box_count(),
        }
    }
}

/// Everything a run needs; a run is reproducible from this file and its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default = "DetectorConfig::toy")]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("pcdet-out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA.to_string(),
            seed: 0,
            out: default_out(),
            data: DataConfig::default(),
            sampling: SamplingConfig::default(),
            detector: DetectorConfig::toy(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

/// Synthetic scenes sized for the toy detector: 2,048 points on a 24 m square.
pub fn toy_scene_spec() -> SceneGenSpec {
    let mut spec = SceneGenSpec::default();
    spec.x_range = [0.0, 24.0];
    spec.y_range = [-12.0, 12.0];
    spec.total_points = Some(2048);
    spec.classes = vec![
        ClassGen { count: [1, 3], ..spec.classes[0].clone() },
        ClassGen { count: [1, 3], ..spec.classes[1].clone() },
        ClassGen { count: [1, 2], ..spec.classes[2].clone() },
    ];
    spec
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let raw: toml::Value = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        match raw.get("schema").and_then(|v| v.as_str()) {
            Some(SCHEMA) => {}
            Some(other) => return Err(CliError::Config(format!("unsupported schema {other:?}, expected {SCHEMA:?}"))),
            None => return Err(CliError::Config(format!("missing schema id, expected schema = {SCHEMA:?}"))),
        }
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.data.synthetic.validate()?;
        if self.data.class_names.is_empty() {
            return bad("no class names".into());
        }
        if self.data.dir.is_none() && self.data.scenes == 0 {
            return bad("no data directory and zero synthetic scenes".into());
        }
        if self.data.synthetic.classes.len() > self.data.class_names.len() {
            return bad(format!(
                "{} synthetic classes but {} class names",
                self.data.synthetic.classes.len(),
                self.data.class_names.len()
            ));
        }
        pcdet_core::sampling::validate_schedule(&self.sampling.schedule, true)?;
        if self.sampling.k == 0 || self.sampling.runs == 0 || self.bench.runs == 0 || self.bench.k == 0 {
            return bad("sample sizes and run counts must be positive".into());
        }
        if self.sampling.strategies.is_empty() {
            return bad("no sampling strategies".into());
        }
        self.detector.validate()?;
        if self.detector.class_names != self.data.class_names {
            return bad(format!(
                "detector classes {:?} differ from data classes {:?}",
                self.detector.class_names, self.data.class_names
            ));
        }
        self.train.validate()?;
        if self.eval.iou_thresholds.len() != self.data.class_names.len() {
            return bad(format!(
                "{} IoU thresholds for {} classes",
                self.eval.iou_thresholds.len(),
                self.data.class_names.len()
            ));
        }
        if self.eval.iou_thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return bad(format!("IoU thresholds must lie in [0, 1]: {:?}", self.eval.iou_thresholds));
        }
        Ok(())
    }
}
