//! Small dense-tensor core: row-major `f64` tensors, a recording tape for
//! reverse-mode differentiation, the activations and losses used by the
//! policy classifiers, and Adam/Nadam/RMSProp with global-norm clipping.

pub mod error;
pub mod functional;
pub mod gradcheck;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use error::{NdError, Result};
pub use optim::{clip_gradients, global_norm, OptimizerKind, OptimizerState, CLIP_NORM};
pub use params::{NamedTensor, ParamId, ParamSet};
pub use tape::{gather_rows, Gradients, Tape, Var};
pub use tensor::Tensor;
