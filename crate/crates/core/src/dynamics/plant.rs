use super::params::{DriverLoadParams, PendulumParams};
use crate::error::ensure_finite;
use crate::Result;

/// Continuous-time plant `dx/dt = f(t, x, u)` with a scalar input.
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;

    /// Writes `f(t, x, u)` into `dx`. Must not allocate.
    fn derivative(&self, t: f64, x: &[f64], u: f64, dx: &mut [f64]);

    /// State indices that are angles.
    fn angle_indices(&self) -> &[usize] {
        &[0]
    }

    /// Times at which the right-hand side is discontinuous in `t`.
    fn breakpoints(&self) -> &[f64] {
        &[]
    }
}

/// Pendulum right-hand side, angle measured from the upright position.
pub fn pendulum_derivative(state: &[f64], torque: f64, p: &PendulumParams) -> Result<[f64; 2]> {
    check_state(state, 2)?;
    ensure_finite(&[torque], "torque")?;
    p.validate()?;
    let mut dx = [0.0; 2];
    pendulum_rhs(state, torque, p, &mut dx);
    Ok(dx)
}

/// Vehicle/suspended-load right-hand side, state `(theta, theta_dot, x, x_dot)`.
pub fn driverload_derivative(state: &[f64], force: f64, p: &DriverLoadParams) -> Result<[f64; 4]> {
    check_state(state, 4)?;
    ensure_finite(&[force], "force")?;
    p.validate()?;
    let mut dx = [0.0; 4];
    driverload_rhs(state, force, p, &mut dx);
    Ok(dx)
}

fn check_state(state: &[f64], dim: usize) -> Result<()> {
    if state.len() != dim {
        return Err(crate::Error::InvalidInput(format!(
            "expected state of dimension {dim}, got {}",
            state.len()
        )));
    }
    ensure_finite(state, "state")
}

#[inline]
fn pendulum_rhs(x: &[f64], u: f64, p: &PendulumParams, dx: &mut [f64]) {
    dx[0] = x[1];
    dx[1] = (p.g / p.l) * x[0].sin() + u / (p.m * p.l * p.l);
}

#[inline]
fn driverload_rhs(x: &[f64], f: f64, p: &DriverLoadParams, dx: &mut [f64]) {
    let (s, c) = x[0].sin_cos();
    let w2 = x[1] * x[1];
    let mu = p.mu();
    let lg = p.l / p.g;
    dx[0] = x[1];
    dx[1] = (p.g / p.l) * (mu * c * (f / (p.g * p.m) - lg * w2 * s) - s) / (1.0 - mu * c * c);
    dx[2] = x[3];
    dx[3] = p.g * (f / (p.m * p.g) - s * (lg * w2 + c)) / (1.0 / mu - c * c);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pendulum(pub PendulumParams);

impl<D: Dynamics + ?Sized> Dynamics for &D {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn derivative(&self, t: f64, x: &[f64], u: f64, dx: &mut [f64]) {
        (**self).derivative(t, x, u, dx)
    }

    fn angle_indices(&self) -> &[usize] {
        (**self).angle_indices()
    }

    fn breakpoints(&self) -> &[f64] {
        (**self).breakpoints()
    }
}

impl Dynamics for Pendulum {
    fn dim(&self) -> usize {
        2
    }

    fn derivative(&self, _t: f64, x: &[f64], u: f64, dx: &mut [f64]) {
        pendulum_rhs(x, u, &self.0, dx);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverLoad(pub DriverLoadParams);

impl Dynamics for DriverLoad {
    fn dim(&self) -> usize {
        4
    }

    fn derivative(&self, _t: f64, x: &[f64], u: f64, dx: &mut [f64]) {
        driverload_rhs(x, u, &self.0, dx);
    }
}

/// A step change in pendulum parameters taking effect at `time`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParamStep {
    pub time: f64,
    pub m: Option<f64>,
    pub l: Option<f64>,
}

/// Pendulum whose mass and length change in steps.
#[derive(Debug, Clone)]
pub struct SteppedPendulum {
    initial: PendulumParams,
    steps: Vec<ParamStep>,
    times: Vec<f64>,
}

impl SteppedPendulum {
    pub fn new(initial: PendulumParams, mut steps: Vec<ParamStep>) -> Result<Self> {
        initial.validate()?;
        steps.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut p = initial;
        for s in &steps {
            if let Some(m) = s.m {
                p.m = m;
            }
            if let Some(l) = s.l {
                p.l = l;
            }
            p.validate()?;
        }
        let times = steps.iter().map(|s| s.time).collect();
        Ok(Self { initial, steps, times })
    }

    /// Parameters in effect at `t` (steps apply from their time onwards).
    pub fn params_at(&self, t: f64) -> PendulumParams {
        let mut p = self.initial;
        for s in self.steps.iter().take_while(|s| s.time <= t) {
            if let Some(m) = s.m {
                p.m = m;
            }
            if let Some(l) = s.l {
                p.l = l;
            }
        }
        p
    }
}

impl Dynamics for SteppedPendulum {
    fn dim(&self) -> usize {
        2
    }

    fn derivative(&self, t: f64, x: &[f64], u: f64, dx: &mut [f64]) {
        pendulum_rhs(x, u, &self.params_at(t), dx);
    }

    fn breakpoints(&self) -> &[f64] {
        &self.times
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn paper_nominal() -> PendulumParams {
        PendulumParams::new(1.0, 9.81, 9.81).unwrap()
    }

    #[test]
    fn pendulum_examples() {
        let p = paper_nominal();
        assert_eq!(pendulum_derivative(&[0.0, 0.0], 0.0, &p).unwrap(), [0.0, 0.0]);
        let d = pendulum_derivative(&[PI, 0.0], 0.0, &p).unwrap();
        assert_eq!(d[0], 0.0);
        assert!(d[1].abs() < 1e-15);
        let d = pendulum_derivative(&[PI / 2.0, 0.0], 0.0, &p).unwrap();
        assert!((d[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite() {
        let p = paper_nominal();
        assert!(pendulum_derivative(&[f64::NAN, 0.0], 0.0, &p).is_err());
        assert!(pendulum_derivative(&[0.0, 0.0], f64::INFINITY, &p).is_err());
        assert!(driverload_derivative(&[0.0; 4], f64::NAN, &DriverLoadParams::nominal()).is_err());
        assert!(pendulum_derivative(&[0.0], 0.0, &p).is_err());
    }

    #[test]
    fn driverload_equilibrium() {
        let d = driverload_derivative(&[0.0; 4], 0.0, &DriverLoadParams::nominal()).unwrap();
        assert_eq!(d, [0.0; 4]);
    }

    #[test]
    fn driverload_unit_force_at_rest() {
        let p = DriverLoadParams::new(0.85, 0.15, 0.5, 9.81).unwrap();
        let d = driverload_derivative(&[0.0; 4], 1.0, &p).unwrap();
        assert!((d[3] - 1.0 / 0.85).abs() < 1e-12, "{}", d[3]);
        assert!((d[1] - 1.0 / (0.85 * 0.5)).abs() < 1e-12, "{}", d[1]);
    }

    /// Solves the two coupled equations of motion for the accelerations by
    /// Cramer's rule, independently of the closed form.
    fn linear_solve(x: &[f64], f: f64, p: &DriverLoadParams) -> (f64, f64) {
        let (th, w) = (x[0], x[1]);
        // [(M+m)      -m l cos][xdd ]   [F - m l sin w^2]
        // [-cos        l      ][thdd] = [-g sin         ]
        let a11 = p.big_m + p.m;
        let a12 = -p.m * p.l * th.cos();
        let a21 = -th.cos();
        let a22 = p.l;
        let b1 = f - p.m * p.l * th.sin() * w * w;
        let b2 = -p.g * th.sin();
        let det = a11 * a22 - a12 * a21;
        let xdd = (b1 * a22 - a12 * b2) / det;
        let thdd = (a11 * b2 - a21 * b1) / det;
        (thdd, xdd)
    }

    #[test]
    fn driverload_closed_form_matches_linear_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let p = DriverLoadParams::new(
                rng.random_range(0.1..5.0),
                rng.random_range(0.01..3.0),
                rng.random_range(0.1..5.0),
                rng.random_range(1.0..20.0),
            )
            .unwrap();
            let x = [
                rng.random_range(-PI..PI),
                rng.random_range(-5.0..5.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ];
            let f = rng.random_range(-20.0..20.0);
            let d = driverload_derivative(&x, f, &p).unwrap();
            let (thdd, xdd) = linear_solve(&x, f, &p);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-3);
            assert!(rel(d[1], thdd) < 1e-12, "theta_dd {} vs {}", d[1], thdd);
            assert!(rel(d[3], xdd) < 1e-12, "x_dd {} vs {}", d[3], xdd);
            assert_eq!(d[0], x[1]);
            assert_eq!(d[2], x[3]);
        }
    }

    #[test]
    fn stepped_params_switch() {
        let sp = SteppedPendulum::new(
            PendulumParams::new(2.0, 7.0, 9.81).unwrap(),
            vec![
                ParamStep { time: 4.0, m: None, l: Some(8.0) },
                ParamStep { time: 2.0, m: Some(3.0), l: None },
            ],
        )
        .unwrap();
        assert_eq!(sp.params_at(1.99).m, 2.0);
        assert_eq!(sp.params_at(2.0).m, 3.0);
        assert_eq!(sp.params_at(3.0).l, 7.0);
        assert_eq!(sp.params_at(4.5).l, 8.0);
        assert_eq!(sp.breakpoints(), &[2.0, 4.0]);
    }
}
