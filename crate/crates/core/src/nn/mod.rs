//! Minimal dense feed-forward engine: explicit forward/backward passes,
//! inverted dropout, Adam, and a finite-difference gradient checker.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod matrix;
mod network;

pub use adam::AdamState;
pub use gradcheck::{
    central_difference, finite_diff_check, relative_error, GradCheckReport, LossEval, Objective,
    REL_ERR_FLOOR,
};
pub use matrix::Matrix;
pub(crate) use matrix::sq_dist;
pub use network::{
    Activation, Architecture, DenseLayer, ForwardPass, Gradients, LayerGrads, Mode, Network,
};
