//! A compact reverse-mode automatic differentiation engine over `f64` tensors.
//!
//! Every backward rule is itself written in terms of differentiable tensor
//! operations, so gradients can be differentiated again. That is what makes
//! gradient-norm penalties (which need the gradient of a gradient) possible.
//!
//! The engine is deterministic: there is no threading and gradient
//! accumulation follows node creation order.

mod backward;
mod conv;
mod ops;
mod tensor;

pub use backward::{grad, grad_with_seed};
pub use conv::ConvGeometry;
pub use tensor::{is_grad_enabled, no_grad, Tensor};
