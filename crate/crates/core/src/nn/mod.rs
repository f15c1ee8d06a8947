//! A small dense autodiff engine with the layers, losses and optimizers the detector needs.

pub mod checkpoint;
pub mod coder;
mod graph;
pub mod loss;
mod mlp;
pub mod optim;
mod tensor;

use thiserror::Error;

pub use coder::{BoxCoder, EncodedBox, HEAD_WIDTH, N_BINS};
pub use graph::{Gradients, Graph, Var, LOG_EPS};
pub use loss::{
    loss_box, loss_centroid, loss_cls_aware, loss_ctr_aware, BoxBreakdown, BoxLoss, BoxTarget,
    CentroidLoss, LossBreakdown, LossWeights,
};
pub use mlp::{
    forward_mlp, sa_layer, sa_layer_graph, Activation, Mlp, MlpSpec, ParamId, ParamStore, SaModule,
    SaSpec, ScaleInput,
};
pub use optim::{OneCycle, OptimConfig, Optimizer, OptimizerKind};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("{op}: expected {expected}, found {found}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },
    #[error("backward called on a value that was never recorded")]
    NoForward,
    #[error("non-finite gradient for parameter {0:?}")]
    NonFiniteGradient(ParamId),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl NnError {
    pub(crate) fn shape(op: &'static str, expected: String, found: String) -> Self {
        Self::ShapeMismatch {
            op,
            expected,
            found,
        }
    }
}
