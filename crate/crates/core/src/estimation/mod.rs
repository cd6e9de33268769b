//! Online identification of pendulum parameters and the adaptive
//! homogenizing controller built on it.

mod adaptive;
mod regressors;
mod rls;

pub use adaptive::{
    adaptive_homogeneous_controller, write_estimation_csv, AdaptiveConfig, AdaptiveController, EstimateRecord,
};
pub use regressors::{pendulum_regressors, recover_params, regressor_sample, true_coefficients, RegressorSample};
pub use rls::RlsState;
