//! Plant models and simulation.

mod integrator;
mod params;
mod plant;
mod trajectory;

pub use integrator::{
    integrate, integrate_feedback, Controller, FnController, HoldStepper, Recording, SimConfig,
};
pub use params::{DriverLoadParams, PendulumParams, PlantKind, PlantParams};
pub use plant::{
    driverload_derivative, pendulum_derivative, DriverLoad, Dynamics, ParamStep, Pendulum,
    SteppedPendulum,
};
pub use trajectory::Trajectory;
pub(crate) use trajectory::{fmt17, interpolate_near};

use std::f64::consts::PI;

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2*pi for tiny negative inputs
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}
