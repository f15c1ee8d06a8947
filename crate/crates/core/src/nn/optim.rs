use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Gradients, NnError, ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Cosine one-cycle schedule: warm up from `max_lr / div_factor` to `max_lr`
/// over the first `pct_start` of the run, then anneal to
/// `max_lr / (div_factor * final_div_factor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneCycle {
    pub max_lr: f64,
    pub total_steps: usize,
    pub pct_start: f64,
    pub div_factor: f64,
    pub final_div_factor: f64,
}

impl OneCycle {
    pub fn new(max_lr: f64, total_steps: usize) -> Self {
        Self {
            max_lr,
            total_steps,
            pct_start: 0.4,
            div_factor: 10.0,
            final_div_factor: 1e4,
        }
    }

    pub fn lr(&self, step: usize) -> f64 {
        let initial = self.max_lr / self.div_factor;
        let last = initial / self.final_div_factor;
        let total = self.total_steps.max(1) as f64;
        let warm = (self.pct_start * total).max(1.0);
        let t = (step as f64).min(total);
        let anneal = |from: f64, to: f64, frac: f64| {
            to + 0.5 * (from - to) * (1.0 + (PI * frac.clamp(0.0, 1.0)).cos())
        };
        if t < warm {
            anneal(initial, self.max_lr, t / warm)
        } else {
            anneal(self.max_lr, last, (t - warm) / (total - warm).max(1.0))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    pub config: OptimConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimConfig, store: &ParamStore) -> Self {
        let zeros = |s: &ParamStore| {
            s.ids()
                .map(|id| Tensor::zeros(s.value(id).rows(), s.value(id).cols()))
                .collect()
        };
        Self {
            config,
            m: zeros(store),
            v: zeros(store),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// First and second moment estimates, one per parameter.
    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.m, &self.v)
    }

    pub fn restore(config: OptimConfig, m: Vec<Tensor>, v: Vec<Tensor>, steps: u64) -> Self {
        Self {
            config,
            m,
            v,
            steps,
        }
    }

    /// Applies one update; parameters missing from `grads` see a zero gradient.
    pub fn step(
        &mut self,
        store: &mut ParamStore,
        grads: &Gradients,
        lr: f64,
    ) -> Result<(), NnError> {
        for (id, g) in grads.iter() {
            if !g.is_finite() {
                return Err(NnError::NonFiniteGradient(id));
            }
            if g.shape() != store.value(id).shape() {
                return Err(NnError::shape(
                    "optimizer",
                    format!("{:?}", store.value(id).shape()),
                    format!("{:?}", g.shape()),
                ));
            }
        }
        self.steps += 1;
        let OptimConfig {
            kind,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.steps as i32);
        let bc2 = 1.0 - beta2.powi(self.steps as i32);
        for id in store.ids().collect::<Vec<_>>() {
            let Some(g) = grads.get(id) else {
                if kind == OptimizerKind::Sgd {
                    continue;
                }
                let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
                let p = store.value_mut(id);
                for k in 0..p.len() {
                    m.data_mut()[k] *= beta1;
                    v.data_mut()[k] *= beta2;
                    p.data_mut()[k] -=
                        lr * (m.data()[k] / bc1) / ((v.data()[k] / bc2).sqrt() + eps);
                }
                continue;
            };
            let p = store.value_mut(id);
            match kind {
                OptimizerKind::Sgd => {
                    for (w, gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *w -= lr * gv;
                    }
                }
                OptimizerKind::Adam => {
                    let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
                    for k in 0..p.len() {
                        let gv = g.data()[k];
                        let mk = beta1 * m.data()[k] + (1.0 - beta1) * gv;
                        let vk = beta2 * v.data()[k] + (1.0 - beta2) * gv * gv;
                        m.data_mut()[k] = mk;
                        v.data_mut()[k] = vk;
                        p.data_mut()[k] -= lr * (mk / bc1) / ((vk / bc2).sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
