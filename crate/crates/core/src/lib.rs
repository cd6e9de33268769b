//! Reusing a single reinforcement-learning policy across plant parameters
//! through dual-scale (time and amplitude) homogeneity transforms.
//!
//! The crate is organised bottom-up:
//!
//! * [`dynamics`]: plant models, trajectories and a Dormand–Prince integrator
//!   with zero-order-hold control.
//! * [`homogeneity`]: analytic scaling transforms, the homogenizing
//!   controller wrapper and trajectory-level verification.
//! * [`rl`]: dense networks with hand-written backprop and DDPG training.
//! * [`estimation`]: recursive least squares and the adaptive controller.
//! * [`homogenizer`]: genetic-programming search for transforms.
//! * [`cli`]: the command-line front end and its artifact writers.

pub mod cli;
pub mod dynamics;
mod error;
pub mod estimation;
pub mod homogeneity;
pub mod homogenizer;
pub mod rl;

pub use error::{Error, Result};
