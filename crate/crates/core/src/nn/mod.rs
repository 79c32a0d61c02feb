//! A small reverse-mode autodiff engine and what is needed to train the
//! pipeline networks with it: layers, losses, Adam, checkpoints and a
//! finite-difference gradient checker.

mod adam;
mod checkpoint;
mod gradcheck;
mod graph;
mod loss;
mod network;
mod tensor;

pub use adam::{Adam, DEFAULT_LR};
pub use checkpoint::{Checkpoint, OptimizerState, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{
    check_gradients, grad_check, GradCheckEntry, GradReport, FD_STEP, MAX_CHECKS_PER_TENSOR, REL_FLOOR,
};
pub use graph::{Activation, Graph, Ops, Var, SIGMOID_MARGIN};
pub use loss::{combined_loss, mse, mse_loss, msg, msg_loss, msg_scales, DEFAULT_MSG_SCALES};
pub use network::{NetSpec, Network, Param};
pub use tensor::{Scalar, Tensor};
