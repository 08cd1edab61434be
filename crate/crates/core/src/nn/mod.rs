//! Feed-forward network substrate: dense matrices, MLPs with hand-written
//! reverse mode, Adam, and a central-difference gradient checker.

mod adam;
mod gradcheck;
mod matrix;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{gradient_check, gradient_check_with_step, GradCheckReport};
pub use matrix::Matrix;
pub use mlp::{Activation, Gradient, Mlp, Tape};
