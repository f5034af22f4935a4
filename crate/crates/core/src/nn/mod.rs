//! Layers of the 1D CNN with exact forward and backward passes.
//!
//! All numerics are `f64`. Layer backward functions return gradients and
//! never mutate parameters.

pub mod activation;
pub mod batchnorm;
pub mod conv;
pub mod dense;
pub mod network;
pub mod pool;
pub mod tensor;

pub use activation::{relu, relu_backward, softmax, DropoutMask};
pub use batchnorm::{BatchNorm1d, BnCache, BnGrads};
pub use conv::{Conv1d, ConvGrads};
pub use dense::{Dense, DenseGrads};
pub use network::{
    argmax_first, init_network, init_unchecked_widths, segments_tensor, ActivationPattern, Architecture,
    ConvBlock, ForwardCache, Gradients, Mode, Network, ParamKind, ParamSpec,
};
pub use pool::{gap, gap_backward, maxpool1d, maxpool1d_backward};
pub use tensor::Tensor3;
