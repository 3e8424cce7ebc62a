//! Small deterministic neural-network substrate with hand-written
//! backpropagation. Everything is `f64` and single-threaded; reductions run
//! in a fixed order so training is reproducible bit for bit.

mod adam;
mod batchnorm;
mod checkpoint;
mod layers;
mod linear;
mod loss;
mod tensor;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use batchnorm::{BatchNorm, BN_EPSILON, BN_MOMENTUM};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, restore, save_checkpoint, write_checkpoint,
    CheckpointEntry, CHECKPOINT_TAG,
};
pub use layers::{maxpool_set, maxpool_set_backward, relu, relu_backward, MaxPoolSet, Relu, Stage};
pub use linear::{linear_backward, linear_forward, Linear, LinearGrads};
pub use loss::{softmax, softmax_cross_entropy};
pub use tensor::Tensor;

pub(crate) use tensor::{axpy, dot};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("batch normalisation needs at least 2 rows in training mode, got {0}")]
    BatchTooSmall(usize),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("backward called before forward")]
    NoForwardCache,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Trainable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Named view of one registered tensor.
pub enum Slot<'a> {
    Param(&'a Param),
    /// Non-trainable state such as batch-norm running statistics.
    Buffer(&'a Tensor),
}

pub enum SlotMut<'a> {
    Param(&'a mut Param),
    Buffer(&'a mut Tensor),
}

/// Ordered registry of parameters and buffers. The visiting order defines
/// the optimizer state layout and the checkpoint layout.
pub trait Module {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>));

    fn zero_grad(&mut self) {
        self.visit_mut("", &mut |_, slot| {
            if let SlotMut::Param(p) = slot {
                p.zero_grad();
            }
        });
    }

    /// Number of trainable scalars.
    fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, slot| {
            if let Slot::Param(p) = slot {
                n += p.value.len();
            }
        });
        n
    }
}

/// How close the last forward pass came to the places where central finite
/// differences stop being informative: ReLU and max-pool switching points,
/// and batch-norm features with almost no spread in the batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditioning {
    pub kink_margin: f64,
    pub min_relative_spread: f64,
}

impl Conditioning {
    pub const UNCONSTRAINED: Conditioning = Conditioning {
        kink_margin: f64::INFINITY,
        min_relative_spread: f64::INFINITY,
    };

    pub fn min(self, other: Conditioning) -> Conditioning {
        Conditioning {
            kink_margin: self.kink_margin.min(other.kink_margin),
            min_relative_spread: self.min_relative_spread.min(other.min_relative_spread),
        }
    }
}

/// `prefix.name`, or just `name` at the root.
pub fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
