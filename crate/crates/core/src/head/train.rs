use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detector::{Detector, DetectorConfig, SceneCache};
use super::HeadError;
use crate::dataio::{augment, build_bank, AugmentConfig, BankInstance, LabeledScene};
use crate::nn::{
    checkpoint, Gradients, LossBreakdown, OneCycle, OptimConfig, Optimizer, OptimizerKind,
    ParamStore, Tensor,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    /// Scenes per step; gradients are averaged over them.
    pub batch: usize,
    pub seed: u64,
    #[serde(default)]
    pub augment: Option<AugmentConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            lr: 0.01,
            optimizer: OptimizerKind::Adam,
            batch: 5,
            seed: 0,
            augment: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), HeadError> {
        if self.batch == 0 {
            return Err(HeadError::Config("batch must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(HeadError::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: LossBreakdown,
}

pub struct Trainer {
    pub detector: Detector,
    pub config: TrainConfig,
    optimizer: Optimizer,
    schedule: OneCycle,
    step: usize,
    caches: Vec<SceneCache>,
    bank: Vec<BankInstance>,
}

fn mix(seed: u64, step: usize, slot: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((step as u64) << 20)
        .wrapping_add(slot as u64)
}

fn check_finite(loss: &LossBreakdown) -> Result<(), HeadError> {
    let b = loss.box_terms;
    let named = [
        ("sample", loss.sample),
        ("cent", loss.cent),
        ("cls", loss.cls),
        ("box.loc", b.loc),
        ("box.size", b.size),
        ("box.angle_bin", b.angle_bin),
        ("box.angle_res", b.angle_res),
        ("box.corner", b.corner),
        ("total", loss.total),
    ];
    match named.iter().find(|(_, v)| !v.is_finite()) {
        Some((name, v)) => Err(HeadError::NonFinite(format!("{name} loss is {v}"))),
        None => Ok(()),
    }
}

impl Trainer {
    pub fn new(
        detector: Detector,
        config: TrainConfig,
        scenes: &[LabeledScene],
    ) -> Result<Self, HeadError> {
        config.validate()?;
        let optimizer = Optimizer::new(
            OptimConfig {
                kind: config.optimizer,
                ..Default::default()
            },
            &detector.store,
        );
        Self::assemble(detector, config, optimizer, 0, scenes)
    }

    fn assemble(
        detector: Detector,
        config: TrainConfig,
        optimizer: Optimizer,
        step: usize,
        scenes: &[LabeledScene],
    ) -> Result<Self, HeadError> {
        if scenes.is_empty() {
            return Err(HeadError::Config("no training scenes".into()));
        }
        let (caches, bank) = match &config.augment {
            None => (
                scenes
                    .par_iter()
                    .map(|s| detector.cache(&s.cloud))
                    .collect::<Result<Vec<_>, _>>()?,
                Vec::new(),
            ),
            Some(a) => (Vec::new(), build_bank(scenes, a.min_points)),
        };
        let schedule = OneCycle::new(config.lr, config.steps);
        Ok(Self {
            detector,
            config,
            optimizer,
            schedule,
            step,
            caches,
            bank,
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// One optimizer update over the next `batch` scenes, cycling through `scenes` in order.
    pub fn train_step(&mut self, scenes: &[LabeledScene]) -> Result<StepRecord, HeadError> {
        let n = scenes.len();
        let picks: Vec<usize> = (0..self.config.batch)
            .map(|j| (self.step * self.config.batch + j) % n)
            .collect();
        let det = &self.detector;
        let results: Vec<(Gradients, LossBreakdown)> = picks
            .par_iter()
            .enumerate()
            .map(|(slot, &i)| {
                let seed = mix(self.config.seed, self.step, slot);
                let (scene, cache) = match &self.config.augment {
                    Some(a) => (augment(&scenes[i], a, &self.bank, seed)?.0, None),
                    None => (scenes[i].clone(), self.caches.get(i)),
                };
                let mut fwd = det.forward(&scene.cloud, cache, seed)?;
                let (total, loss) = det.loss(&mut fwd, &scene.boxes)?;
                check_finite(&loss)?;
                Ok((fwd.graph.backward(total)?, loss))
            })
            .collect::<Result<_, HeadError>>()?;

        let mut grads = Gradients::default();
        let mut mean = LossBreakdown::default();
        let k = results.len() as f64;
        for (g, l) in &results {
            grads.accumulate(g);
            mean.sample += l.sample / k;
            mean.cent += l.cent / k;
            mean.cls += l.cls / k;
            mean.box_ += l.box_ / k;
            mean.box_terms.loc += l.box_terms.loc / k;
            mean.box_terms.size += l.box_terms.size / k;
            mean.box_terms.angle_bin += l.box_terms.angle_bin / k;
            mean.box_terms.angle_res += l.box_terms.angle_res / k;
            mean.box_terms.corner += l.box_terms.corner / k;
            mean.total += l.total / k;
        }
        grads.scale(1.0 / k);
        let lr = self.schedule.lr(self.step);
        self.optimizer.step(&mut self.detector.store, &grads, lr)?;
        self.step += 1;
        Ok(StepRecord {
            step: self.step,
            lr,
            loss: mean,
        })
    }

    /// Runs until `config.steps` updates have been made, calling `log` after each.
    pub fn run(
        &mut self,
        scenes: &[LabeledScene],
        mut log: impl FnMut(&StepRecord),
    ) -> Result<(), HeadError> {
        while self.step < self.config.steps {
            let rec = self.train_step(scenes)?;
            log(&rec);
        }
        Ok(())
    }

    /// Parameters, optimizer moments and progress, enough to resume bit-for-bit.
    pub fn save(&self, path: &Path) -> Result<(), HeadError> {
        let store = &self.detector.store;
        let mut all = store.clone();
        let (m, v) = self.optimizer.moments();
        for (prefix, moments) in [("opt.m", m), ("opt.v", v)] {
            for (id, t) in store.ids().zip(moments) {
                all.add(format!("{prefix}.{}", store.name(id)), t.clone());
            }
        }
        let model = serde_json::json!({
            "detector": self.detector.config,
            "training": {
                "config": self.config,
                "step": self.step,
                "optimizer_steps": self.optimizer.steps(),
                "param_tensors": store.len(),
            },
        });
        checkpoint::save(path, &model, &all)?;
        Ok(())
    }

    pub fn resume(path: &Path, scenes: &[LabeledScene]) -> Result<Self, HeadError> {
        let (manifest, all) = checkpoint::load(path)?;
        let config: DetectorConfig = field(&manifest.model, "detector")?;
        let training = manifest
            .model
            .get("training")
            .ok_or_else(|| HeadError::Checkpoint("no training state".into()))?;
        let tconfig: TrainConfig = field(training, "config")?;
        let step: usize = field(training, "step")?;
        let opt_steps: u64 = field(training, "optimizer_steps")?;
        let n: usize = field(training, "param_tensors")?;
        if all.len() != 3 * n {
            return Err(HeadError::Checkpoint(format!(
                "{} tensors for {n} parameters",
                all.len()
            )));
        }
        let ids: Vec<_> = all.ids().collect();
        let mut params = ParamStore::new();
        for &id in &ids[..n] {
            params.add(all.name(id), all.value(id).clone());
        }
        let take = |r: std::ops::Range<usize>| -> Vec<Tensor> {
            ids[r].iter().map(|&id| all.value(id).clone()).collect()
        };
        let detector = Detector::with_params(config, params)?;
        let optimizer = Optimizer::restore(
            OptimConfig {
                kind: tconfig.optimizer,
                ..Default::default()
            },
            take(n..2 * n),
            take(2 * n..3 * n),
            opt_steps,
        );
        Self::assemble(detector, tconfig, optimizer, step, scenes)
    }
}

fn field<T: serde::de::DeserializeOwned>(v: &serde_json::Value, key: &str) -> Result<T, HeadError> {
    let x = v
        .get(key)
        .ok_or_else(|| HeadError::Checkpoint(format!("manifest lacks {key}")))?;
    serde_json::from_value(x.clone()).map_err(|e| HeadError::Checkpoint(format!("{key}: {e}")))
}

/// Loads the detector from a checkpoint written by [`Trainer::save`] or [`save_detector`].
pub fn load_detector(path: &Path) -> Result<Detector, HeadError> {
    let (manifest, store) = checkpoint::load(path)?;
    let config: DetectorConfig = field(&manifest.model, "detector")?;
    Detector::with_params(config, store)
}

pub fn save_detector(path: &Path, detector: &Detector) -> Result<(), HeadError> {
    checkpoint::save(
        path,
        &serde_json::json!({ "detector": detector.config }),
        &detector.store,
    )?;
    Ok(())
}
