//! Dense-tensor reverse-mode automatic differentiation.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::finite_diff_check;
pub use tape::{Gradients, NodeId, Op, Tape};
pub use tensor::Tensor;
