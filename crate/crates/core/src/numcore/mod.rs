//! Minimal differentiable numerics in 64-bit floats.

mod gradcheck;
mod graph;
mod layers;
mod params;
mod tensor;

pub use gradcheck::{grad_check, grad_check_params, GradCheckReport};
pub use graph::{cross_entropy, log_softmax, softmax, Graph, Var};
pub use layers::{lstm_step, Linear, LstmParams};
pub use params::{Gradients, LrSchedule, ParamId, ParamStore};
pub use tensor::Tensor;

/// Default half-width of the uniform initializer for weight matrices.
pub const INIT_SCALE: f64 = 0.08;

/// Default Adam hyper-parameters `(beta1, beta2)` and epsilon.
pub const ADAM_BETAS: (f64, f64) = (0.9, 0.999);
pub const ADAM_EPS: f64 = 1e-8;
