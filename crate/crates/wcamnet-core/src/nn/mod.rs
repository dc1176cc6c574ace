//! Minimal layer-based neural network kernels.
//!
//! Every layer owns its parameters and caches whatever its backward pass
//! needs during a `Mode::Train` forward. There is no graph or tape: model
//! structs call layer forwards in order and backwards in reverse, which
//! keeps data flow explicit and deterministic.

pub mod activation;
pub mod attention;
pub mod conv;
pub mod gradcheck;
pub mod init;
pub mod linear;
pub mod loss;
pub mod norm;
pub mod optim;
pub mod param;
pub mod pool;

pub use activation::{Gelu, Relu, Sigmoid, SIGMOID_FLOOR};
pub use attention::MultiHeadAttention;
pub use conv::{conv_out_dim, Conv2d};
pub use gradcheck::{check_gradient, GradCheckReport};
pub use linear::Linear;
pub use loss::mse;
pub use norm::{BatchNorm2d, LayerNorm};
pub use optim::SgdMomentum;
pub use param::{Mode, Param, ParamSet};
pub use pool::{AdaptiveAvgPool, GlobalAvgPool, MaxPool2d};
