//! Parameter-dependent scaling transforms that make a perturbed plant's
//! closed loop a time- and amplitude-scaled copy of the nominal one.

mod controller;
mod timescale;
mod transform;
mod verify;

pub use controller::{homogenize_controller, FnPolicy, HomogenizedController, PolicyMap, SaturationMode};
pub use timescale::{estimate_time_scale, Signal, TimeScaleSearch};
pub use transform::{
    driverload_transform, driverload_transform_with_tol, pendulum_transform, transform_for, HomogeneityTransform,
    NominalSpec, DEFAULT_MU_TOL,
};
pub use verify::{ts_itae, verify_homogeneity, HomogeneityReport};
