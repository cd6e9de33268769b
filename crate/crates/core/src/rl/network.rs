//! Fully connected networks with hand-written backpropagation.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    fn grad(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

/// Affine layer followed by an elementwise activation.
///
/// `weights[[i, j]]` connects input `i` to output `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self { weights: Array2::zeros((inputs, outputs)), bias: Array1::zeros(outputs), activation }
    }

    /// Uniform fan-in initialisation in `[-limit, limit]`; `limit = None`
    /// uses `1/sqrt(inputs)`.
    pub fn init<R: Rng>(inputs: usize, outputs: usize, activation: Activation, limit: Option<f64>, rng: &mut R) -> Self {
        let lim = limit.unwrap_or(1.0 / (inputs as f64).sqrt());
        let dist = Uniform::new_inclusive(-lim, lim).expect("finite limit");
        let weights = Array2::from_shape_simple_fn((inputs, outputs), || dist.sample(rng));
        let bias = Array1::from_shape_simple_fn(outputs, || dist.sample(rng));
        Self { weights, bias, activation }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    pub(crate) fn pre_activation(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights);
        z += &self.bias;
        z
    }

    pub(crate) fn activate(&self, z: &Array2<f64>) -> Array2<f64> {
        let act = self.activation;
        z.mapv(|v| act.apply(v))
    }

    /// Gradient of the pre-activation given the output gradient.
    pub(crate) fn delta(&self, z: &Array2<f64>, y: &Array2<f64>, dy: ArrayView2<f64>) -> Array2<f64> {
        let act = self.activation;
        let mut d = dy.to_owned();
        ndarray::Zip::from(&mut d).and(z).and(y).for_each(|d, &z, &y| *d *= act.grad(z, y));
        d
    }

    /// Weight gradients and input gradient for pre-activation gradient `dz`.
    pub(crate) fn backward(&self, x: ArrayView2<f64>, dz: &Array2<f64>) -> (LayerGrad, Array2<f64>) {
        let weights = x.t().dot(dz).as_standard_layout().into_owned();
        let grad = LayerGrad { weights, bias: dz.sum_axis(Axis(0)) };
        let dx = dz.dot(&self.weights.t());
        (grad, dx)
    }

    fn params_mut(&mut self) -> [&mut [f64]; 2] {
        [
            self.weights.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ]
    }

    fn params(&self) -> [&[f64]; 2] {
        [
            self.weights.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LayerGrad {
    fn slices(&self) -> [&[f64]; 2] {
        [
            self.weights.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
        ]
    }
}

/// Flat views over trainable parameters, in a fixed order.
pub trait Parameters {
    fn param_slices(&self) -> Vec<&[f64]>;
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }
}

/// Feed-forward stack; the final layer output is multiplied by `output_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNetwork {
    pub layers: Vec<Dense>,
    pub output_scale: f64,
}

/// Intermediate values kept for backpropagation.
pub struct ForwardCache {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

impl ForwardCache {
    /// Network output (after `output_scale`) is not stored; this is the
    /// last activation.
    pub fn last_activation(&self) -> &Array2<f64> {
        self.post.last().unwrap_or(&self.input)
    }
}

impl DenseNetwork {
    pub fn new(layers: Vec<Dense>, output_scale: f64) -> Result<Self> {
        let net = Self { layers, output_scale };
        net.validate()?;
        Ok(net)
    }

    /// Random network with the given layer widths and activations.
    pub fn random<R: Rng>(sizes: &[usize], activations: &[Activation], output_scale: f64, final_limit: Option<f64>, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::InvalidInput("need one activation per layer".into()));
        }
        let last = activations.len() - 1;
        let layers = sizes
            .windows(2)
            .zip(activations)
            .enumerate()
            .map(|(i, (w, &a))| Dense::init(w[0], w[1], a, if i == last { final_limit } else { None }, rng))
            .collect();
        Self::new(layers, output_scale)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidInput("network has no layers".into()));
        }
        for pair in self.layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::InvalidInput(format!(
                    "layer output {} does not match next input {}",
                    pair[0].outputs(),
                    pair[1].inputs()
                )));
            }
        }
        for l in &self.layers {
            if l.bias.len() != l.outputs() {
                return Err(Error::InvalidInput("bias length mismatch".into()));
            }
        }
        let finite = self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()));
        if !finite || !self.output_scale.is_finite() {
            return Err(Error::InvalidInput("non-finite network weights".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(Dense::outputs)).collect()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        let mut x = ArrayView1::from(input).to_owned();
        for layer in &self.layers {
            let mut z = layer.weights.t().dot(&x);
            z += &layer.bias;
            let act = layer.activation;
            z.mapv_inplace(|v| act.apply(v));
            x = z;
        }
        Ok(x.iter().map(|v| v * self.output_scale).collect())
    }

    /// Batched forward pass, rows are samples.
    pub fn forward_batch(&self, input: ArrayView2<f64>) -> (Array2<f64>, ForwardCache) {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = post.last().map_or(input, |p| p.view());
            let z = layer.pre_activation(x);
            let y = layer.activate(&z);
            pre.push(z);
            post.push(y);
        }
        let out = post.last().expect("non-empty") * self.output_scale;
        (out, ForwardCache { input: input.to_owned(), pre, post })
    }

    /// Backpropagates `d_out` (gradient w.r.t. the scaled output).
    /// Returns per-layer weight gradients and the input gradient.
    pub fn backward(&self, cache: &ForwardCache, d_out: ArrayView2<f64>) -> (Vec<LayerGrad>, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut dy = d_out.to_owned() * self.output_scale;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = if i == 0 { cache.input.view() } else { cache.post[i - 1].view() };
            let dz = layer.delta(&cache.pre[i], &cache.post[i], dy.view());
            let (g, dx) = layer.backward(x, &dz);
            grads.push(g);
            dy = dx;
        }
        grads.reverse();
        (grads, dy)
    }

    pub fn zeroed_like(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| Dense::zeros(l.inputs(), l.outputs(), l.activation))
            .collect();
        Self { layers, output_scale: self.output_scale }
    }
}

/// Flattens layer gradients in the same order as [`Parameters::param_slices`].
pub fn flatten_grads(grads: &[LayerGrad]) -> Vec<&[f64]> {
    grads.iter().flat_map(LayerGrad::slices).collect()
}

impl Parameters for DenseNetwork {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(Dense::params).collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(Dense::params_mut).collect()
    }
}

/// `target <- (1 - rate) * target + rate * source`, elementwise.
pub fn soft_update<P: Parameters>(target: &mut P, source: &P, rate: f64) -> Result<()> {
    let src = source.param_slices();
    let mut dst = target.param_slices_mut();
    if src.len() != dst.len() || src.iter().zip(dst.iter()).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::InvalidInput("soft update between differently shaped networks".into()));
    }
    for (d, s) in dst.iter_mut().zip(src) {
        for (dv, sv) in d.iter_mut().zip(s) {
            *dv = (1.0 - rate) * *dv + rate * sv;
        }
    }
    Ok(())
}

/// Adam optimiser state for one parameter set.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<P: Parameters>(params: &P, learning_rate: f64) -> Self {
        let shapes: Vec<usize> = params.param_slices().iter().map(|s| s.len()).collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Descends along `grads`.
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &[&[f64]]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let lr = self.learning_rate * bc2.sqrt() / bc1;
        for (((p, g), m), v) in params.param_slices_mut().into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= lr * m[i] / (v[i].sqrt() + self.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_zero_output() {
        let net = DenseNetwork::new(
            vec![Dense::zeros(2, 5, Activation::Relu), Dense::zeros(5, 1, Activation::Tanh)],
            30.0,
        )
        .unwrap();
        assert_eq!(net.forward(&[3.0, -1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut l = Dense::zeros(3, 3, Activation::Linear);
        l.weights = Array2::eye(3);
        let net = DenseNetwork::new(vec![l], 1.0).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn dimension_checks() {
        let net = DenseNetwork::new(vec![Dense::zeros(2, 1, Activation::Linear)], 1.0).unwrap();
        assert!(net.forward(&[1.0]).is_err());
        let bad = DenseNetwork::new(
            vec![Dense::zeros(2, 3, Activation::Relu), Dense::zeros(4, 1, Activation::Linear)],
            1.0,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn batch_and_single_forward_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DenseNetwork::random(&[2, 7, 5, 1], &[Activation::Relu, Activation::Relu, Activation::Tanh], 30.0, None, &mut rng).unwrap();
        let x = array![[0.3, -1.2], [2.0, 0.1]];
        let (out, _) = net.forward_batch(x.view());
        for r in 0..2 {
            let single = net.forward(x.row(r).as_slice().unwrap()).unwrap();
            assert!((single[0] - out[[r, 0]]).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_update_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src = DenseNetwork::random(&[2, 3, 1], &[Activation::Relu, Activation::Tanh], 1.0, None, &mut rng).unwrap();
        let base = DenseNetwork::random(&[2, 3, 1], &[Activation::Relu, Activation::Tanh], 1.0, None, &mut rng).unwrap();

        let mut t = base.clone();
        soft_update(&mut t, &src, 1.0).unwrap();
        assert_eq!(t, src);
        let mut t = base.clone();
        soft_update(&mut t, &src, 0.0).unwrap();
        assert_eq!(t, base);

        let mut a = DenseNetwork::new(vec![Dense::zeros(1, 1, Activation::Linear)], 1.0).unwrap();
        let mut b = a.clone();
        b.layers[0].weights[[0, 0]] = 2.0;
        soft_update(&mut a, &b, 0.5).unwrap();
        assert_eq!(a.layers[0].weights[[0, 0]], 1.0);

        let mut wrong = DenseNetwork::random(&[2, 4, 1], &[Activation::Relu, Activation::Tanh], 1.0, None, &mut rng).unwrap();
        assert!(soft_update(&mut wrong, &src, 0.5).is_err());
    }

    #[test]
    fn adam_minimises_quadratic() {
        let mut net = DenseNetwork::new(vec![Dense::zeros(1, 1, Activation::Linear)], 1.0).unwrap();
        net.layers[0].weights[[0, 0]] = 5.0;
        let mut opt = Adam::new(&net, 0.1);
        for _ in 0..500 {
            let w = net.layers[0].weights[[0, 0]];
            let b = net.layers[0].bias[0];
            let g = [2.0 * (w - 1.0), 2.0 * (b + 2.0)];
            opt.step(&mut net, &[&g[..1], &g[1..]]);
        }
        assert!((net.layers[0].weights[[0, 0]] - 1.0).abs() < 1e-2);
        assert!((net.layers[0].bias[0] + 2.0).abs() < 1e-2);
    }
}
