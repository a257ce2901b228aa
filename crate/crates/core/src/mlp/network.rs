use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MlpError;

/// Layer widths of the feature-to-color network.
pub const DFAOIT_DIMS: [usize; 4] = [10, 32, 16, 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }
}

/// Fully connected layer. `weights` is `outputs x inputs`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], biases: vec![0.0; outputs], activation }
    }

    pub fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }

    pub fn weight(&self, o: usize, i: usize) -> f64 {
        self.weights[o * self.inputs + i]
    }

    pub fn set_weight(&mut self, o: usize, i: usize, v: f64) {
        self.weights[o * self.inputs + i] = v;
    }
}

/// Dense network with ReLU hidden layers and a sigmoid output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpWeights {
    layers: Vec<Dense>,
}

fn activation_for(layer: usize, count: usize) -> Activation {
    if layer + 1 == count {
        Activation::Sigmoid
    } else {
        Activation::Relu
    }
}

impl MlpWeights {
    /// All-zero parameters for the given layer widths.
    ///
    /// # Panics
    ///
    /// Panics with fewer than two widths or a zero width.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2 && dims.iter().all(|&d| d > 0), "need at least two non-zero layer widths");
        let count = dims.len() - 1;
        let layers = dims.windows(2).enumerate().map(|(l, w)| Dense::zeros(w[0], w[1], activation_for(l, count))).collect();
        Self { layers }
    }

    /// He-uniform weights `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, zero biases.
    pub fn he_uniform(dims: &[usize], seed: u64) -> Self {
        let mut net = Self::zeros(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut net.layers {
            let limit = (6.0 / layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.gen_range(-limit..limit);
            }
        }
        net
    }

    pub fn dfaoit_zeros() -> Self {
        Self::zeros(&DFAOIT_DIMS)
    }

    pub(crate) fn from_layers(layers: Vec<Dense>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn check_dims(&self, expected: &[usize]) -> Result<(), MlpError> {
        let found = self.dims();
        if found != expected {
            return Err(MlpError::DimMismatch { expected: expected.to_vec(), found });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// Parameter tensors in a fixed order: per layer, weights then biases.
    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
    }

    /// Output of the network for one input.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, MlpError> {
        Ok(forward(self, x)?.output().to_vec())
    }
}

/// Pre- and post-activation values of every layer for one input.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn for_net(net: &MlpWeights) -> Self {
        Self {
            input: vec![0.0; net.input_dim()],
            pre: net.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
            post: net.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
        }
    }

    pub fn output(&self) -> &[f64] {
        self.post.last().expect("cache has layers")
    }
}

/// Parameter gradients, same shapes as the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &MlpWeights) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    /// Same order as [`MlpWeights::tensors_mut`].
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.weights.iter_mut().zip(self.biases.iter_mut()).flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            for x in t {
                *x *= s;
            }
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors().flatten().copied().collect()
    }
}

/// Mean squared error over channels.
pub fn loss_mse(pred: &[f64], target: &[f64]) -> f64 {
    debug_assert_eq!(pred.len(), target.len());
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    sum / pred.len() as f64
}

/// Runs the network, filling `cache` (which must come from [`ForwardCache::for_net`]).
pub(crate) fn forward_into(net: &MlpWeights, x: &[f64], cache: &mut ForwardCache) {
    cache.input.copy_from_slice(x);
    for (l, layer) in net.layers.iter().enumerate() {
        let (before, after) = cache.post.split_at_mut(l);
        let input: &[f64] = if l == 0 { &cache.input } else { &before[l - 1] };
        let pre = &mut cache.pre[l];
        let post = &mut after[0];
        for o in 0..layer.outputs {
            let row = layer.row(o);
            let mut s = layer.biases[o];
            for (w, v) in row.iter().zip(input) {
                s += w * v;
            }
            pre[o] = s;
            post[o] = layer.activation.apply(s);
        }
    }
}

pub fn forward(net: &MlpWeights, x: &[f64]) -> Result<ForwardCache, MlpError> {
    if x.len() != net.input_dim() {
        return Err(MlpError::InputLength { expected: net.input_dim(), found: x.len() });
    }
    let mut cache = ForwardCache::for_net(net);
    forward_into(net, x, &mut cache);
    Ok(cache)
}

/// Scratch buffers for [`accumulate_backward`].
pub(crate) struct BackwardScratch {
    delta: Vec<f64>,
    next: Vec<f64>,
}

impl BackwardScratch {
    pub(crate) fn for_net(net: &MlpWeights) -> Self {
        let widest = net.dims().into_iter().max().unwrap_or(0);
        Self { delta: Vec::with_capacity(widest), next: Vec::with_capacity(widest) }
    }
}

/// Adds the gradient of `loss_mse(forward(x), target)` to `grads`; returns the loss.
pub(crate) fn accumulate_backward(
    net: &MlpWeights,
    cache: &ForwardCache,
    target: &[f64],
    grads: &mut Gradients,
    scratch: &mut BackwardScratch,
) -> f64 {
    let out = cache.output();
    let m = out.len() as f64;
    let delta = &mut scratch.delta;
    delta.clear();
    let last = net.layers.last().expect("at least one layer");
    for (k, (&y, &t)) in out.iter().zip(target).enumerate() {
        let dy = 2.0 * (y - t) / m;
        delta.push(match last.activation {
            Activation::Sigmoid => dy * y * (1.0 - y),
            Activation::Relu => {
                if cache.pre[net.layers.len() - 1][k] > 0.0 {
                    dy
                } else {
                    0.0
                }
            }
        });
    }

    for l in (0..net.layers.len()).rev() {
        let layer = &net.layers[l];
        let input: &[f64] = if l == 0 { &cache.input } else { &cache.post[l - 1] };
        let gw = &mut grads.weights[l];
        let gb = &mut grads.biases[l];
        for o in 0..layer.outputs {
            let d = scratch.delta[o];
            gb[o] += d;
            if d != 0.0 {
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, v) in row.iter_mut().zip(input) {
                    *g += d * v;
                }
            }
        }
        if l == 0 {
            break;
        }
        let next = &mut scratch.next;
        next.clear();
        next.resize(layer.inputs, 0.0);
        for o in 0..layer.outputs {
            let d = scratch.delta[o];
            if d != 0.0 {
                for (n, w) in next.iter_mut().zip(layer.row(o)) {
                    *n += w * d;
                }
            }
        }
        // ReLU'(0) = 0
        let below = &net.layers[l - 1];
        debug_assert_eq!(below.activation, Activation::Relu);
        for (n, &pre) in next.iter_mut().zip(&cache.pre[l - 1]) {
            if pre <= 0.0 {
                *n = 0.0;
            }
        }
        std::mem::swap(&mut scratch.delta, &mut scratch.next);
    }
    loss_mse(out, target)
}

/// Exact gradient of the single-example loss.
pub fn backward(net: &MlpWeights, cache: &ForwardCache, target: &[f64]) -> Result<Gradients, MlpError> {
    if target.len() != net.output_dim() {
        return Err(MlpError::InputLength { expected: net.output_dim(), found: target.len() });
    }
    if cache.input.len() != net.input_dim() || cache.pre.len() != net.layers.len() {
        return Err(MlpError::DimMismatch { expected: net.dims(), found: cache_dims(cache) });
    }
    let mut grads = Gradients::zeros_like(net);
    let mut scratch = BackwardScratch::for_net(net);
    accumulate_backward(net, cache, target, &mut grads, &mut scratch);
    Ok(grads)
}

fn cache_dims(cache: &ForwardCache) -> Vec<usize> {
    let mut d = vec![cache.input.len()];
    d.extend(cache.pre.iter().map(Vec::len));
    d
}

/// Mean gradient and mean loss over a batch of `(input, target)` rows.
pub fn batch_gradients(net: &MlpWeights, inputs: &[&[f64]], targets: &[&[f64]]) -> Result<(Gradients, f64), MlpError> {
    let mut grads = Gradients::zeros_like(net);
    let mut cache = ForwardCache::for_net(net);
    let mut scratch = BackwardScratch::for_net(net);
    let mut loss = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        if x.len() != net.input_dim() {
            return Err(MlpError::InputLength { expected: net.input_dim(), found: x.len() });
        }
        forward_into(net, x, &mut cache);
        loss += accumulate_backward(net, &cache, t, &mut grads, &mut scratch);
    }
    let n = inputs.len().max(1) as f64;
    grads.scale(1.0 / n);
    Ok((grads, loss / n))
}
