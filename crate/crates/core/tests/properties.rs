use std::f64::consts::PI;

use dualscale::dynamics::{
    driverload_derivative, integrate, pendulum_derivative, DriverLoad, DriverLoadParams, Dynamics, Pendulum, PendulumParams,
    Recording, SimConfig,
};
use dualscale::estimation::{RegressorSample, RlsState};
use dualscale::homogeneity::{
    driverload_transform, homogenize_controller, pendulum_transform, FnPolicy, HomogeneityTransform, NominalSpec,
};
use dualscale::rl::{Activation, DenseNetwork, ReplayBuffer, Transition};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pendulum_law(x: &[f64]) -> f64 {
    -(30.0 * x[0].sin() + 8.0 * x[1]).tanh() * 20.0
}

fn load_law(x: &[f64]) -> f64 {
    -(4.1 * x[0] + 1.5 * x[1] + 2.0 * x[2] + 2.6 * x[3])
}

/// Runs the nominal law on the nominal plant and its homogenized form on
/// `perturbed`, and returns the largest deviation of `x_i` from
/// `kappa_i * x_nom_i` over matching control instants.
fn instant_mismatch<D: Dynamics>(
    nominal: D,
    perturbed: D,
    t: &HomogeneityTransform,
    law: fn(&[f64]) -> f64,
    x0: Vec<f64>,
) -> f64 {
    let period = 0.05;
    let t_final = 3.0;
    let nom_cfg = SimConfig::new(t_final, period, x0.clone())
        .with_tolerances(1e-11, 1e-12)
        .with_recording(Recording::ControlInstants);
    let ident = homogenize_controller(FnPolicy { dim: x0.len(), f: law }, HomogeneityTransform::identity(x0.len())).unwrap();
    let nom = integrate(&nominal, ident, &nom_cfg).unwrap();

    let scaled_x0: Vec<f64> = x0.iter().zip(&t.kappa).map(|(x, k)| x * k).collect();
    let p_period = t.scaled_period(period);
    let per_cfg = SimConfig::new(t_final * p_period / period, p_period, scaled_x0)
        .with_tolerances(1e-11, 1e-12)
        .with_recording(Recording::ControlInstants);
    let ctrl = homogenize_controller(FnPolicy { dim: x0.len(), f: law }, t.clone()).unwrap();
    let per = integrate(&perturbed, ctrl, &per_cfg).unwrap();

    assert_eq!(nom.len(), per.len());
    let mut worst: f64 = 0.0;
    for i in 0..nom.len() {
        for (j, k) in t.kappa.iter().enumerate() {
            let scale = k.abs().max(1.0);
            worst = worst.max((per.state(i)[j] - k * nom.state(i)[j]).abs() / scale);
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pendulum_homogeneity_holds_across_parameters(
        m in 0.2f64..5.0,
        l in 0.3f64..12.0,
        th in -PI..PI,
        w in -2.0f64..2.0,
    ) {
        let nominal = PendulumParams::nominal();
        let p = PendulumParams::new(m, l, nominal.g).unwrap();
        let t = pendulum_transform(&p, &NominalSpec::pendulum(nominal).unwrap()).unwrap();
        let dev = instant_mismatch(Pendulum(nominal), Pendulum(p), &t, pendulum_law, vec![th, w]);
        prop_assert!(dev < 1e-6, "deviation {dev}");
    }

    #[test]
    fn load_homogeneity_holds_at_equal_mass_ratio(
        mass in 0.3f64..4.0,
        l in 0.3f64..5.0,
        th in -0.5f64..0.5,
        x in -1.0f64..1.0,
    ) {
        let nominal = DriverLoadParams::nominal();
        let p = DriverLoadParams::new(nominal.big_m * mass, nominal.m * mass, l, nominal.g).unwrap();
        let t = driverload_transform(&p, &NominalSpec::driver_load(nominal).unwrap()).unwrap();
        let dev = instant_mismatch(DriverLoad(nominal), DriverLoad(p), &t, load_law, vec![th, 0.0, x, 0.0]);
        prop_assert!(dev < 1e-6, "deviation {dev}");
    }

    #[test]
    fn nominal_parameters_give_the_identity(th in -PI..PI, w in -5.0f64..5.0) {
        let nominal = PendulumParams::nominal();
        let t = pendulum_transform(&nominal, &NominalSpec::pendulum(nominal).unwrap()).unwrap();
        prop_assert_eq!(t.zeta, 1.0);
        prop_assert_eq!(t.control_scale, 1.0);
        prop_assert!(t.kappa.iter().chain(&t.state_scales).all(|&v| v == 1.0));
        let mut c = homogenize_controller(FnPolicy { dim: 2, f: pendulum_law }, t).unwrap();
        prop_assert_eq!(c.evaluate(&[th, w]).unwrap(), pendulum_law(&[th, w]));
    }

    #[test]
    fn equilibria_are_fixed_points(
        m in 0.1f64..10.0,
        l in 0.1f64..20.0,
        big_m in 0.1f64..10.0,
        x in -10.0f64..10.0,
        upright in any::<bool>(),
    ) {
        let th = if upright { 0.0 } else { PI };
        let d = pendulum_derivative(&[th, 0.0], 0.0, &PendulumParams::new(m, l, 9.81).unwrap()).unwrap();
        prop_assert!(d.iter().all(|v| v.abs() < 1e-12), "{d:?}");
        let p = DriverLoadParams::new(big_m, m, l, 9.81).unwrap();
        let d = driverload_derivative(&[0.0, 0.0, x, 0.0], 0.0, &p).unwrap();
        prop_assert!(d.iter().all(|&v| v == 0.0), "{d:?}");
    }

    #[test]
    fn rls_without_forgetting_is_regularised_least_squares(
        rows in prop::collection::vec((-5.0f64..5.0, -1.0f64..1.0, -50.0f64..50.0), 1..60),
        psi0 in prop::array::uniform2(-3.0f64..3.0),
        p0 in 1.0f64..1e4,
    ) {
        let mut rls = RlsState::new(psi0.to_vec(), p0, 1.0).unwrap();
        let mut a = [[1.0 / p0, 0.0], [0.0, 1.0 / p0]];
        let mut b = [psi0[0] / p0, psi0[1] / p0];
        for &(u, s, y) in &rows {
            rls.update(&RegressorSample { phi: vec![u, s], y }).unwrap();
            prop_assert!(rls.is_positive_definite());
            let phi = [u, s];
            for i in 0..2 {
                b[i] += phi[i] * y;
                for j in 0..2 {
                    a[i][j] += phi[i] * phi[j];
                }
            }
        }
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let batch = [(a[1][1] * b[0] - a[0][1] * b[1]) / det, (a[0][0] * b[1] - a[1][0] * b[0]) / det];
        for i in 0..2 {
            let tol = 1e-7 * batch[i].abs().max(1.0);
            prop_assert!((rls.psi[i] - batch[i]).abs() < tol, "{:?} vs {:?}", rls.psi, batch);
        }
    }

    #[test]
    fn forgetting_keeps_covariance_positive_definite(
        rows in prop::collection::vec((-5.0f64..5.0, -1.0f64..1.0, -50.0f64..50.0), 1..200),
        lambda in 0.9f64..1.0,
    ) {
        let mut rls = RlsState::new(vec![0.0, 0.0], 1e4, lambda).unwrap();
        for &(u, s, y) in &rows {
            rls.update(&RegressorSample { phi: vec![u, s], y }).unwrap();
            prop_assert!(rls.is_positive_definite());
            prop_assert!((rls.p[1] - rls.p[2]).abs() <= 1e-9 * rls.trace());
        }
    }

    #[test]
    fn replay_length_is_capped(capacity in 1usize..64, pushes in 0usize..200) {
        let mut buf = ReplayBuffer::new(capacity, 2, 1).unwrap();
        for i in 0..pushes {
            let v = i as f64;
            buf.push(Transition { obs: vec![v, v], action: vec![v], reward: -v, next_obs: vec![v, v], done: false }).unwrap();
            prop_assert!(buf.len() <= buf.capacity());
        }
        prop_assert_eq!(buf.len(), pushes.min(capacity));
    }

    #[test]
    fn actor_output_stays_within_saturation(
        seed in any::<u64>(),
        scale in 0.1f64..100.0,
        x in prop::array::uniform3(-1e4f64..1e4),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = DenseNetwork::random(
            &[3, 16, 12, 1],
            &[Activation::Relu, Activation::Relu, Activation::Tanh],
            scale,
            Some(3e-3),
            &mut rng,
        )
        .unwrap();
        let out = net.forward(&x).unwrap()[0];
        prop_assert!(out.is_finite() && out.abs() <= scale);
    }
}
