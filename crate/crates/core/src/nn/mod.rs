//! Trainable layer kit: fully-connected (optionally masked), 1-D convolutional,
//! and batch-normalization layers with exact analytic gradients, plus model
//! composition, initialization, parameter accounting, and checkpoint files.

mod checkpoint;
mod layer;
mod model;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use layer::{BnLayer, ConvLayer, FcLayer, Layer, LayerCache};
pub use model::{Model, ParamCount, ParamView};
pub(crate) use model::init_layer;

use serde::{Deserialize, Serialize};

/// Element-wise activation applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
}

/// Whether batch-norm scale/shift (and statistics) are shared across channels
/// at each height, or kept per (height, channel) element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BnParamMode {
    PerHeight,
    PerElement,
}

/// Forward-pass phase: training uses within-batch normalization statistics,
/// evaluation uses finalized population statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

pub const DEFAULT_BN_EPSILON: f64 = 1e-8;

/// Architecture description of a single layer; a JSON list of these is the
/// on-disk model description format. Masks for sparsely-connected layers live
/// in checkpoint/mask files, not here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Fc {
        n_in: usize,
        n_out: usize,
        activation: Activation,
    },
    /// Fully-connected layer with a frozen zero mask on the weights.
    Sc {
        n_in: usize,
        n_out: usize,
        activation: Activation,
    },
    Conv1d {
        filter: usize,
        c_in: usize,
        c_out: usize,
        activation: Activation,
    },
    Bn {
        n_h: usize,
        #[serde(default = "default_bn_mode")]
        param_mode: BnParamMode,
        #[serde(default = "default_bn_epsilon")]
        epsilon: f64,
    },
}

fn default_bn_mode() -> BnParamMode {
    BnParamMode::PerHeight
}

fn default_bn_epsilon() -> f64 {
    DEFAULT_BN_EPSILON
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}
