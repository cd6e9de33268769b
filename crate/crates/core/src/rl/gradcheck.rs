//! Central finite-difference checks of the hand-written gradients.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::critic::Critic;
use super::network::{flatten_grads, Activation, DenseNetwork, Parameters};

const H: f64 = 1e-6;

/// Relative error with a floor so that near-zero derivatives compare absolutely.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.5..1.5))
}

/// Weighted sum of outputs, a scalar objective with known output gradient.
fn objective(out: ArrayView2<f64>, w: &Array2<f64>) -> f64 {
    (&out * w).sum()
}

fn fd_params<P: Parameters>(model: &mut P, f: impl Fn(&P) -> f64, analytic: &[&[f64]]) -> f64 {
    let mut worst: f64 = 0.0;
    let shapes: Vec<usize> = model.param_slices().iter().map(|s| s.len()).collect();
    for (k, &len) in shapes.iter().enumerate() {
        for i in 0..len {
            let orig = model.param_slices()[k][i];
            model.param_slices_mut()[k][i] = orig + H;
            let up = f(model);
            model.param_slices_mut()[k][i] = orig - H;
            let down = f(model);
            model.param_slices_mut()[k][i] = orig;
            worst = worst.max(rel_err((up - down) / (2.0 * H), analytic[k][i]));
        }
    }
    worst
}

/// Worst relative error over actor weights and inputs for one random net.
pub fn check_network(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let acts = [Activation::Tanh, Activation::Relu, Activation::Linear, Activation::Tanh];
    let hidden = [rng.random_range(2..6), rng.random_range(2..6)];
    let in_dim = rng.random_range(1..4);
    let a1 = acts[rng.random_range(0..acts.len())];
    let a2 = acts[rng.random_range(0..acts.len())];
    let mut net = DenseNetwork::random(&[in_dim, hidden[0], hidden[1], 2], &[a1, a2, Activation::Tanh], 1.7, None, &mut rng).expect("valid sizes");
    let x = random_matrix(3, in_dim, &mut rng);
    let w = random_matrix(3, 2, &mut rng);
    let (_, cache) = net.forward_batch(x.view());
    let (grads, d_in) = net.backward(&cache, w.view());
    let flat: Vec<Vec<f64>> = flatten_grads(&grads).iter().map(|s| s.to_vec()).collect();
    let views: Vec<&[f64]> = flat.iter().map(Vec::as_slice).collect();
    let mut worst = fd_params(&mut net, |n| objective(n.forward_batch(x.view()).0.view(), &w), &views);
    for r in 0..x.nrows() {
        for c in 0..x.ncols() {
            let mut xp = x.clone();
            xp[[r, c]] += H;
            let mut xm = x.clone();
            xm[[r, c]] -= H;
            let fd = (objective(net.forward_batch(xp.view()).0.view(), &w) - objective(net.forward_batch(xm.view()).0.view(), &w)) / (2.0 * H);
            worst = worst.max(rel_err(fd, d_in[[r, c]]));
        }
    }
    worst
}

/// Worst relative error over critic weights, observation and action inputs.
pub fn check_critic(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (obs_dim, act_dim) = (rng.random_range(1..4), rng.random_range(1..3));
    let mut critic = Critic::random(obs_dim, act_dim, rng.random_range(2..7), rng.random_range(2..7), &mut rng);
    // larger head weights keep the objective away from the flat rectified region
    critic.head.weights.mapv_inplace(|v| v * 300.0);
    let obs = random_matrix(4, obs_dim, &mut rng);
    let act = random_matrix(4, act_dim, &mut rng);
    let w = random_matrix(4, 1, &mut rng);
    let (_, cache) = critic.forward_batch(obs.view(), act.view());
    let grads = critic.backward(&cache, w.view());
    let flat: Vec<Vec<f64>> = grads.flat().iter().map(|s| s.to_vec()).collect();
    let views: Vec<&[f64]> = flat.iter().map(Vec::as_slice).collect();
    let mut worst = fd_params(&mut critic, |c| objective(c.forward_batch(obs.view(), act.view()).0.view(), &w), &views);
    let q = |o: &Array2<f64>, a: &Array2<f64>| objective(critic.forward_batch(o.view(), a.view()).0.view(), &w);
    let da = critic.action_gradient(&cache);
    for (input, analytic, is_obs) in [(&obs, &grads.d_obs, true), (&act, &grads.d_action, false)] {
        for r in 0..input.nrows() {
            for c in 0..input.ncols() {
                let mut p = input.clone();
                p[[r, c]] += H;
                let mut m = input.clone();
                m[[r, c]] -= H;
                let fd = if is_obs { (q(&p, &act) - q(&m, &act)) / (2.0 * H) } else { (q(&obs, &p) - q(&obs, &m)) / (2.0 * H) };
                worst = worst.max(rel_err(fd, analytic[[r, c]]));
                if !is_obs {
                    worst = worst.max(rel_err(fd, w[[r, 0]] * da[[r, c]]));
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn network_gradients_match_finite_differences() {
        for seed in 0..50 {
            let e = check_network(seed);
            assert!(e < 1e-6, "seed {seed}: {e}");
        }
    }

    #[test]
    fn critic_gradients_match_finite_differences() {
        for seed in 0..50 {
            let e = check_critic(seed);
            assert!(e < 1e-6, "seed {seed}: {e}");
        }
    }
}
