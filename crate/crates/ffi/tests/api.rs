use std::ffi::CString;
use std::ptr;

use dualscale::dynamics::{PendulumParams, PlantParams};
use dualscale::rl::{Activation, Dense, DenseNetwork, Policy};
use dualscale_ffi::*;

const G: f64 = 9.81;

fn pd_policy() -> Policy {
    let mut layer = Dense::zeros(2, 1, Activation::Linear);
    layer.weights[[0, 0]] = -200.0;
    layer.weights[[1, 0]] = -60.0;
    let net = DenseNetwork::new(vec![layer], 1.0).unwrap();
    let nominal = PlantParams::Pendulum(PendulumParams::nominal());
    Policy::new(net, vec!["theta".into(), "theta_dot".into()], nominal, 0).unwrap()
}

fn load(policy: &Policy) -> (tempfile::TempDir, *mut DsPolicy) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.json");
    policy.save(&path).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ds_policy_load(c.as_ptr(), &mut out) }, DsStatus::Ok);
    (dir, out)
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { ds_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn policy_round_trips_through_handle() {
    let policy = pd_policy();
    let (_dir, h) = load(&policy);
    assert_eq!(unsafe { ds_policy_input_dim(h) }, 2);
    let x = [0.3, -0.1];
    let mut u = 0.0;
    assert_eq!(unsafe { ds_policy_act(h, x.as_ptr(), 2, &mut u) }, DsStatus::Ok);
    assert_eq!(u, policy.act(&x).unwrap());
    assert_eq!(unsafe { ds_policy_act(h, x.as_ptr(), 1, &mut u) }, DsStatus::InvalidInput);
    unsafe { ds_policy_free(h) };
}

#[test]
fn pendulum_transform_getters() {
    let mut t = ptr::null_mut();
    let nl = G;
    assert_eq!(unsafe { ds_pendulum_transform(2.0, 4.0 * nl, G, 1.0, nl, G, &mut t) }, DsStatus::Ok);
    assert_eq!(unsafe { ds_transform_dim(t) }, 2);
    assert!((unsafe { ds_transform_zeta(t) } - 0.5).abs() < 1e-12);
    assert!((unsafe { ds_transform_control_scale(t) } - 8.0).abs() < 1e-12);
    let mut c = [0.0; 2];
    let mut k = [0.0; 2];
    assert_eq!(unsafe { ds_transform_state_scales(t, c.as_mut_ptr(), 2) }, DsStatus::Ok);
    assert_eq!(unsafe { ds_transform_kappa(t, k.as_mut_ptr(), 2) }, DsStatus::Ok);
    assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] - 2.0).abs() < 1e-12);
    assert!((k[0] * c[0] - 1.0).abs() < 1e-12 && (k[1] * c[1] - 1.0).abs() < 1e-12);
    assert_eq!(unsafe { ds_transform_state_scales(t, c.as_mut_ptr(), 3) }, DsStatus::InvalidInput);
    unsafe { ds_transform_free(t) };
}

#[test]
fn invalid_parameters_set_the_error_message() {
    let mut t = ptr::null_mut();
    let status = unsafe { ds_pendulum_transform(-1.0, G, G, 1.0, G, G, &mut t) };
    assert_eq!(status, DsStatus::InvalidInput);
    assert!(t.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn driver_load_transform_rejects_mismatched_mass_ratio() {
    let mut t = ptr::null_mut();
    let ok = unsafe { ds_driverload_transform(2.0, 1.0, 2.0, G, 1.0, 0.5, 1.0, G, &mut t) };
    assert_eq!(ok, DsStatus::Ok);
    assert_eq!(unsafe { ds_transform_dim(t) }, 4);
    unsafe { ds_transform_free(t) };
    let mut bad = ptr::null_mut();
    let status = unsafe { ds_driverload_transform(3.0, 1.0, 2.0, G, 1.0, 0.5, 1.0, G, &mut bad) };
    assert_ne!(status, DsStatus::Ok);
    assert!(bad.is_null());
}

#[test]
fn null_handles_are_reported() {
    let mut u = 0.0;
    let x = [0.0, 0.0];
    assert_eq!(unsafe { ds_policy_act(ptr::null(), x.as_ptr(), 2, &mut u) }, DsStatus::NullPointer);
    assert_eq!(unsafe { ds_policy_load(ptr::null(), ptr::null_mut()) }, DsStatus::NullPointer);
    assert!(unsafe { ds_transform_zeta(ptr::null()) }.is_nan());
    assert_eq!(unsafe { ds_trajectory_len(ptr::null()) }, 0);
    unsafe {
        ds_policy_free(ptr::null_mut());
        ds_transform_free(ptr::null_mut());
        ds_controller_free(ptr::null_mut());
        ds_rls_free(ptr::null_mut());
        ds_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn controller_scales_state_and_control() {
    let policy = pd_policy();
    let (_dir, p) = load(&policy);
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { ds_pendulum_transform(1.5, 2.0 * G, G, 1.0, G, G, &mut t) }, DsStatus::Ok);
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { ds_controller_new(p, t, 0.0, &mut c) }, DsStatus::Ok);
    let x = [0.2, 0.4];
    let mut u = 0.0;
    assert_eq!(unsafe { ds_controller_evaluate(c, x.as_ptr(), 2, &mut u) }, DsStatus::Ok);
    let (c0, c1) = (1.5 * 2.0, 2f64.sqrt());
    let expected = c0 * policy.act(&[x[0], c1 * x[1]]).unwrap();
    assert!((u - expected).abs() < 1e-9 * expected.abs().max(1.0));
    unsafe {
        ds_controller_free(c);
        ds_transform_free(t);
        ds_policy_free(p);
    }
}

#[test]
fn rls_recovers_linear_model() {
    let psi0 = [0.0, 0.0];
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ds_rls_new(psi0.as_ptr(), 2, 1e4, 1.0, &mut r) }, DsStatus::Ok);
    let trace0 = unsafe { ds_rls_trace(r) };
    for k in 0..200 {
        let t = k as f64 * 0.1;
        let phi = [t.sin(), t.cos() + 0.5];
        let y = 3.0 * phi[0] - 2.0 * phi[1];
        assert_eq!(unsafe { ds_rls_update(r, phi.as_ptr(), 2, y) }, DsStatus::Ok);
    }
    let mut psi = [0.0; 2];
    assert_eq!(unsafe { ds_rls_estimate(r, psi.as_mut_ptr(), 2) }, DsStatus::Ok);
    assert!((psi[0] - 3.0).abs() < 1e-4 && (psi[1] + 2.0).abs() < 1e-4, "{psi:?}");
    assert!(unsafe { ds_rls_trace(r) } < trace0);
    let phi = [1.0];
    assert_eq!(unsafe { ds_rls_update(r, phi.as_ptr(), 1, 0.0) }, DsStatus::InvalidInput);
    unsafe { ds_rls_free(r) };
}

#[test]
fn rollout_exposes_trajectory_samples() {
    let (_dir, p) = load(&pd_policy());
    let mut traj = ptr::null_mut();
    let mut success = -1;
    let status = unsafe { ds_pendulum_rollout(p, ptr::null(), 1.0, G, G, 0.5, 0.0, 20.0, 0.05, 0.0, &mut success, &mut traj) };
    assert_eq!(status, DsStatus::Ok, "{}", last_error());
    assert_eq!(success, 1);
    let n = unsafe { ds_trajectory_len(traj) };
    assert!(n > 100);
    assert_eq!(unsafe { ds_trajectory_dim(traj) }, 2);
    let (mut time, mut state, mut u) = (0.0, [0.0; 2], 0.0);
    assert_eq!(unsafe { ds_trajectory_sample(traj, 0, &mut time, state.as_mut_ptr(), 2, &mut u) }, DsStatus::Ok);
    assert_eq!(time, 0.0);
    assert_eq!(state, [0.5, 0.0]);
    assert_eq!(unsafe { ds_trajectory_sample(traj, n, &mut time, state.as_mut_ptr(), 2, &mut u) }, DsStatus::InvalidInput);
    unsafe {
        ds_trajectory_free(traj);
        ds_policy_free(p);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { std::ffi::CStr::from_ptr(ds_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/dualscale.h")).unwrap();
    for name in [
        "DS_STATUS_OK",
        "DsPolicy",
        "ds_last_error",
        "ds_policy_load",
        "ds_pendulum_transform",
        "ds_controller_evaluate",
        "ds_rls_update",
        "ds_pendulum_rollout",
        "ds_trajectory_free",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
