//! Two-branch Q network: observations and actions are embedded separately,
//! summed, rectified and mapped to a scalar.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{Activation, Dense, LayerGrad, Parameters};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    /// observation -> hidden, rectified
    pub obs_hidden: Dense,
    /// hidden -> joint width, linear
    pub obs_out: Dense,
    /// action -> joint width, linear
    pub action_in: Dense,
    /// joint width -> Q, linear
    pub head: Dense,
}

pub struct CriticCache {
    obs: Array2<f64>,
    action: Array2<f64>,
    h_pre: Array2<f64>,
    h: Array2<f64>,
    joint_pre: Array2<f64>,
    joint: Array2<f64>,
}

/// Gradients of a batch objective with respect to critic weights and inputs.
pub struct CriticGrads {
    pub layers: [LayerGrad; 4],
    pub d_obs: Array2<f64>,
    pub d_action: Array2<f64>,
}

impl CriticGrads {
    pub fn flat(&self) -> Vec<&[f64]> {
        super::network::flatten_grads(&self.layers)
    }
}

impl Critic {
    pub fn random<R: Rng>(obs_dim: usize, action_dim: usize, hidden: usize, joint: usize, rng: &mut R) -> Self {
        Self {
            obs_hidden: Dense::init(obs_dim, hidden, Activation::Relu, None, rng),
            obs_out: Dense::init(hidden, joint, Activation::Linear, None, rng),
            action_in: Dense::init(action_dim, joint, Activation::Linear, None, rng),
            head: Dense::init(joint, 1, Activation::Linear, Some(3e-3), rng),
        }
    }

    pub fn zeros(obs_dim: usize, action_dim: usize, hidden: usize, joint: usize) -> Self {
        Self {
            obs_hidden: Dense::zeros(obs_dim, hidden, Activation::Relu),
            obs_out: Dense::zeros(hidden, joint, Activation::Linear),
            action_in: Dense::zeros(action_dim, joint, Activation::Linear),
            head: Dense::zeros(joint, 1, Activation::Linear),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_hidden.inputs()
    }

    pub fn action_dim(&self) -> usize {
        self.action_in.inputs()
    }

    fn check(&self, obs: ArrayView2<f64>, action: ArrayView2<f64>) -> Result<()> {
        if obs.ncols() != self.obs_dim() || action.ncols() != self.action_dim() || obs.nrows() != action.nrows() {
            return Err(Error::InvalidInput(format!(
                "critic expects ({}, {}) columns, got ({}, {})",
                self.obs_dim(),
                self.action_dim(),
                obs.ncols(),
                action.ncols()
            )));
        }
        Ok(())
    }

    /// Q value of a single observation/action pair.
    pub fn q(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let o = ArrayView2::from_shape((1, obs.len()), obs).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let a = ArrayView2::from_shape((1, action.len()), action).map_err(|e| Error::InvalidInput(e.to_string()))?;
        self.check(o, a)?;
        Ok(self.forward_batch(o, a).0[[0, 0]])
    }

    pub fn forward_batch(&self, obs: ArrayView2<f64>, action: ArrayView2<f64>) -> (Array2<f64>, CriticCache) {
        let h_pre = self.obs_hidden.pre_activation(obs);
        let h = self.obs_hidden.activate(&h_pre);
        let mut joint_pre = self.obs_out.pre_activation(h.view());
        joint_pre += &self.action_in.pre_activation(action);
        let joint = joint_pre.mapv(|v| v.max(0.0));
        let q = self.head.pre_activation(joint.view());
        let cache = CriticCache { obs: obs.to_owned(), action: action.to_owned(), h_pre, h, joint_pre, joint };
        (q, cache)
    }

    /// Backpropagates `d_q` (one column, per-sample objective gradient).
    pub fn backward(&self, cache: &CriticCache, d_q: ArrayView2<f64>) -> CriticGrads {
        let d_q = d_q.to_owned();
        let (head, d_joint) = self.head.backward(cache.joint.view(), &d_q);
        let mut d_joint_pre = d_joint;
        ndarray::Zip::from(&mut d_joint_pre)
            .and(&cache.joint_pre)
            .for_each(|d, &z| if z <= 0.0 { *d = 0.0 });
        let (obs_out, d_h) = self.obs_out.backward(cache.h.view(), &d_joint_pre);
        let (action_in, d_action) = self.action_in.backward(cache.action.view(), &d_joint_pre);
        let d_h_pre = self.obs_hidden.delta(&cache.h_pre, &cache.h, d_h.view());
        let (obs_hidden, d_obs) = self.obs_hidden.backward(cache.obs.view(), &d_h_pre);
        CriticGrads { layers: [obs_hidden, obs_out, action_in, head], d_obs, d_action }
    }

    /// `dQ/da` for every row, without weight gradients.
    pub fn action_gradient(&self, cache: &CriticCache) -> Array2<f64> {
        let w = self.head.weights.column(0);
        let mut d = Array2::zeros(cache.joint_pre.raw_dim());
        for (mut row, zrow) in d.axis_iter_mut(Axis(0)).zip(cache.joint_pre.axis_iter(Axis(0))) {
            for j in 0..row.len() {
                row[j] = if zrow[j] > 0.0 { w[j] } else { 0.0 };
            }
        }
        d.dot(&self.action_in.weights.t())
    }
}

impl Parameters for Critic {
    fn param_slices(&self) -> Vec<&[f64]> {
        [&self.obs_hidden, &self.obs_out, &self.action_in, &self.head]
            .into_iter()
            .flat_map(|l| [l.weights.as_slice().expect("layout"), l.bias.as_slice().expect("layout")])
            .collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        [&mut self.obs_hidden, &mut self.obs_out, &mut self.action_in, &mut self.head]
            .into_iter()
            .flat_map(|l| {
                [l.weights.as_slice_mut().expect("layout"), l.bias.as_slice_mut().expect("layout")]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_critic_is_zero() {
        let c = Critic::zeros(2, 1, 8, 6);
        assert_eq!(c.q(&[1.0, -3.0], &[0.7]).unwrap(), 0.0);
        assert!(c.q(&[1.0], &[0.7]).is_err());
    }

    #[test]
    fn doubling_head_doubles_q_when_bias_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut c = Critic::random(2, 1, 8, 6, &mut rng);
        c.head.bias[0] = 0.0;
        // make the joint pre-activation positive so the rectifier is linear
        c.obs_out.bias.fill(5.0);
        let q1 = c.q(&[0.2, 0.1], &[0.3]).unwrap();
        c.head.weights.mapv_inplace(|w| 2.0 * w);
        let q2 = c.q(&[0.2, 0.1], &[0.3]).unwrap();
        assert!((q2 - 2.0 * q1).abs() < 1e-12 * q1.abs().max(1.0));
    }

    #[test]
    fn action_gradient_matches_full_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let c = Critic::random(2, 1, 8, 6, &mut rng);
        let obs = ndarray::array![[0.2, 0.1], [-1.0, 2.0], [3.0, 0.0]];
        let act = ndarray::array![[0.3], [-0.5], [0.9]];
        let (_, cache) = c.forward_batch(obs.view(), act.view());
        let ones = Array2::ones((3, 1));
        let full = c.backward(&cache, ones.view());
        let fast = c.action_gradient(&cache);
        for (a, b) in full.d_action.iter().zip(fast.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
