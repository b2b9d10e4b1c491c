use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Exponential linear unit with α = 1.
    Elu,
    Identity,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Identity => z,
            Activation::Sigmoid => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation, given both the
    /// pre-activation `z` and the output `a = f(z)`.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

/// The 7-5-3-5-7 reconstruction topology: ELU on the two 5-unit layers,
/// linear bottleneck and output.
pub fn default_topology() -> Vec<LayerSpec> {
    vec![
        LayerSpec::new(7, 5, Activation::Elu),
        LayerSpec::new(5, 3, Activation::Identity),
        LayerSpec::new(3, 5, Activation::Elu),
        LayerSpec::new(5, 7, Activation::Identity),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out_dim × in_dim`
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub spec: LayerSpec,
}

/// Dense feed-forward network. Serializes as its model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelFile", try_from = "ModelFile")]
pub struct Network {
    layers: Vec<Layer>,
}

/// Per-layer pre- and post-activations from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().map_or(&self.input, Vec::as_slice)
    }

    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }

    pub fn post_activations(&self) -> &[Vec<f64>] {
        &self.post
    }
}

/// Gradient with the same shapes as the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Matrix, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (Matrix::zeros(l.spec.out_dim, l.spec.in_dim), vec![0.0; l.spec.out_dim]))
                .collect(),
        }
    }

    /// Flattened in parameter order: per layer, weights row-major then biases.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.as_slice().iter().chain(b.iter()).copied())
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in w.as_mut_slice().iter_mut().zip(ow.as_slice()) {
                *x += y;
            }
            for (x, y) in b.iter_mut().zip(ob) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            for x in w.as_mut_slice().iter_mut().chain(b.iter_mut()) {
                *x *= factor;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0_f64, |m, g| m.max(g.abs()))
    }
}

impl Network {
    /// Assembles a network from explicit layers, checking that dimensions
    /// chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.spec.in_dim == 0 || l.spec.out_dim == 0 {
                return Err(Error::Shape(format!("layer {i} has a zero dimension")));
            }
            if l.weights.rows() != l.spec.out_dim
                || l.weights.cols() != l.spec.in_dim
                || l.biases.len() != l.spec.out_dim
            {
                return Err(Error::Shape(format!("layer {i} parameters disagree with its spec")));
            }
        }
        check_chain(&layers.iter().map(|l| l.spec).collect::<Vec<_>>())?;
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.spec.param_count()).sum()
    }

    /// Parameters in the same order as [`Gradients::iter`].
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(l.biases.iter()).copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.as_mut_slice().iter_mut().chain(l.biases.iter_mut()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input of length {} for a network expecting {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Output only, without keeping intermediate activations.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for l in &self.layers {
            a = layer_forward(l, &a).1;
        }
        Ok(a)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let input = post.last().map_or(x, Vec::as_slice);
            let (z, a) = layer_forward(l, input);
            pre.push(z);
            post.push(a);
        }
        let output = post.last().cloned().unwrap_or_default();
        Ok((
            output,
            ForwardCache {
                input: x.to_vec(),
                pre,
                post,
            },
        ))
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        let stale = cache.pre.len() != self.layers.len()
            || cache.input.len() != self.input_dim()
            || self
                .layers
                .iter()
                .zip(&cache.pre)
                .any(|(l, z)| z.len() != l.spec.out_dim);
        if stale {
            return Err(Error::Shape("forward cache does not match this network".into()));
        }
        Ok(())
    }

    /// Backpropagates a gradient with respect to the network output.
    pub fn backprop(&self, cache: &ForwardCache, grad_output: &[f64]) -> Result<Gradients> {
        self.check_cache(cache)?;
        if grad_output.len() != self.output_dim() {
            return Err(Error::Shape("output gradient has the wrong length".into()));
        }
        let last = self.layers.len() - 1;
        let act = self.layers[last].spec.activation;
        let delta: Vec<f64> = grad_output
            .iter()
            .zip(&cache.pre[last])
            .zip(&cache.post[last])
            .map(|((g, &z), &a)| g * act.derivative(z, a))
            .collect();
        Ok(self.backprop_delta(cache, delta))
    }

    /// Backpropagates a gradient with respect to the last layer's
    /// pre-activation. Useful when the loss and output activation have a
    /// combined derivative, as sigmoid with cross-entropy does.
    pub fn backprop_preactivation(&self, cache: &ForwardCache, delta: &[f64]) -> Result<Gradients> {
        self.check_cache(cache)?;
        if delta.len() != self.output_dim() {
            return Err(Error::Shape("output delta has the wrong length".into()));
        }
        Ok(self.backprop_delta(cache, delta.to_vec()))
    }

    fn backprop_delta(&self, cache: &ForwardCache, mut delta: Vec<f64>) -> Gradients {
        let mut grads = Gradients::zeros_like(self);
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = if li == 0 { &cache.input } else { &cache.post[li - 1] };
            let (gw, gb) = &mut grads.layers[li];
            for (o, &d) in delta.iter().enumerate() {
                gb[o] = d;
                for (i, &x) in input.iter().enumerate() {
                    gw[(o, i)] = d * x;
                }
            }
            if li > 0 {
                let prev = self.layers[li - 1].spec.activation;
                delta = (0..layer.spec.in_dim)
                    .map(|i| {
                        let back: f64 = delta
                            .iter()
                            .enumerate()
                            .map(|(o, d)| layer.weights[(o, i)] * d)
                            .sum();
                        back * prev.derivative(cache.pre[li - 1][i], cache.post[li - 1][i])
                    })
                    .collect();
            }
        }
        grads
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(&ModelFile::from(self))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str::<ModelFile>(&text)?.try_into()
    }
}

fn layer_forward(l: &Layer, input: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let z: Vec<f64> = (0..l.spec.out_dim)
        .map(|o| {
            l.weights
                .row(o)
                .iter()
                .zip(input)
                .fold(l.biases[o], |acc, (w, x)| acc + w * x)
        })
        .collect();
    let a = z.iter().map(|&v| l.spec.activation.apply(v)).collect();
    (z, a)
}

fn check_chain(specs: &[LayerSpec]) -> Result<()> {
    for (i, pair) in specs.windows(2).enumerate() {
        if pair[0].out_dim != pair[1].in_dim {
            return Err(Error::Shape(format!(
                "layer {i} outputs {} values but layer {} expects {}",
                pair[0].out_dim,
                i + 1,
                pair[1].in_dim
            )));
        }
    }
    Ok(())
}

/// Glorot-uniform weights in `±√(6/(in+out))` and zero biases.
pub fn init_network(specs: &[LayerSpec], seed: u64) -> Result<Network> {
    if specs.is_empty() {
        return Err(Error::Shape("network needs at least one layer".into()));
    }
    if specs.iter().any(|s| s.in_dim == 0 || s.out_dim == 0) {
        return Err(Error::Shape("layer dimensions must be at least 1".into()));
    }
    check_chain(specs)?;
    let mut rng = Rng::new(seed);
    let layers = specs
        .iter()
        .map(|&spec| {
            let limit = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
            let data = (0..spec.in_dim * spec.out_dim)
                .map(|_| rng.uniform_in(-limit, limit))
                .collect();
            Layer {
                weights: Matrix::from_row_major(spec.out_dim, spec.in_dim, data)
                    .expect("sized by construction"),
                biases: vec![0.0; spec.out_dim],
                spec,
            }
        })
        .collect();
    Ok(Network { layers })
}

/// Mean squared error `(1/d)·Σ(xᵢ − x̂ᵢ)²`.
pub fn mse_loss(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::Shape(format!(
            "mse between lengths {} and {}",
            x.len(),
            x_hat.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Shape("mse of empty vectors".into()));
    }
    let sum: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / x.len() as f64)
}

/// Gradient of `mse_loss(x, forward(net, x))` for the cached pass.
pub fn backward(net: &Network, cache: &ForwardCache, x: &[f64]) -> Result<Gradients> {
    let out = cache.output();
    if x.len() != out.len() {
        return Err(Error::Shape("reconstruction target has the wrong length".into()));
    }
    let scale = 2.0 / x.len() as f64;
    let grad: Vec<f64> = out.iter().zip(x).map(|(o, t)| scale * (o - t)).collect();
    net.backprop(cache, &grad)
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    topology: Vec<usize>,
    layers: Vec<LayerRecord>,
}

impl From<&Network> for ModelFile {
    fn from(net: &Network) -> Self {
        let mut topology = vec![net.input_dim()];
        topology.extend(net.layers.iter().map(|l| l.spec.out_dim));
        Self {
            format_version: MODEL_FORMAT_VERSION,
            topology,
            layers: net
                .layers
                .iter()
                .map(|l| LayerRecord {
                    in_dim: l.spec.in_dim,
                    out_dim: l.spec.out_dim,
                    activation: l.spec.activation,
                    weights: l.weights.as_slice().to_vec(),
                    biases: l.biases.clone(),
                })
                .collect(),
        }
    }
}

impl From<Network> for ModelFile {
    fn from(net: Network) -> Self {
        ModelFile::from(&net)
    }
}

impl TryFrom<ModelFile> for Network {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: file.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let layers = file
            .layers
            .into_iter()
            .map(|r| {
                Ok(Layer {
                    weights: Matrix::from_row_major(r.out_dim, r.in_dim, r.weights)?,
                    biases: r.biases,
                    spec: LayerSpec::new(r.in_dim, r.out_dim, r.activation),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let net = Network::from_layers(layers)?;
        let mut topology = vec![net.input_dim()];
        topology.extend(net.layers.iter().map(|l| l.spec.out_dim));
        if topology != file.topology {
            return Err(Error::Shape("model topology disagrees with its layers".into()));
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_layer(d: usize) -> Network {
        Network::from_layers(vec![Layer {
            weights: Matrix::identity(d),
            biases: vec![0.0; d],
            spec: LayerSpec::new(d, d, Activation::Identity),
        }])
        .unwrap()
    }

    fn zero_net() -> Network {
        let mut net = init_network(&default_topology(), 1).unwrap();
        net.params_mut().for_each(|p| *p = 0.0);
        net
    }

    #[test]
    fn default_topology_has_120_parameters() {
        let net = init_network(&default_topology(), 0).unwrap();
        assert_eq!(net.layers().len(), 4);
        assert_eq!(net.param_count(), (7 * 5 + 5) + (5 * 3 + 3) + (3 * 5 + 5) + (5 * 7 + 7));
        assert_eq!(net.param_count(), 120);
        assert_eq!(net.params().count(), 120);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_network(&default_topology(), 5).unwrap();
        assert_eq!(a, init_network(&default_topology(), 5).unwrap());
        assert_ne!(a, init_network(&default_topology(), 6).unwrap());
        for l in a.layers() {
            let limit = (6.0 / (l.spec.in_dim + l.spec.out_dim) as f64).sqrt();
            assert!(l.weights.as_slice().iter().all(|w| w.abs() <= limit));
            assert!(l.biases.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn broken_chain_is_rejected() {
        let specs = [
            LayerSpec::new(7, 5, Activation::Elu),
            LayerSpec::new(4, 7, Activation::Identity),
        ];
        assert!(matches!(init_network(&specs, 0), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let (out, _) = zero_net().forward(&[0.3, -1.0, 2.0, 0.0, 5.0, 0.1, 0.9]).unwrap();
        assert_eq!(out, vec![0.0; 7]);
    }

    #[test]
    fn identity_layer_passes_through() {
        let x = [0.25, -3.0, 8.5];
        assert_eq!(identity_layer(3).predict(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn elu_values() {
        assert!((Activation::Elu.apply(-1.0) - (-0.632_120_558_828_557_7)).abs() < 1e-15);
        assert_eq!(Activation::Elu.apply(2.5), 2.5);
        assert_eq!(Activation::Elu.apply(0.0), 0.0);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        assert!(matches!(zero_net().forward(&[1.0; 6]), Err(Error::Shape(_))));
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!((mse_loss(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!(matches!(mse_loss(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn perfect_reconstruction_has_zero_gradient() {
        let net = identity_layer(4);
        let x = [0.1, 0.2, 0.3, 0.4];
        let (_, cache) = net.forward(&x).unwrap();
        let g = backward(&net, &cache, &x).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn output_weight_gradient_is_linear_in_residual() {
        // Single identity layer with bias b: residual = x̂ − x = b for W = I.
        let x = [0.5, -0.25, 1.0];
        let grad_for = |bias: f64| {
            let mut net = identity_layer(3);
            net.layers[0].biases = vec![bias; 3];
            let (_, cache) = net.forward(&x).unwrap();
            backward(&net, &cache, &x).unwrap()
        };
        let g1 = grad_for(0.1);
        let g3 = grad_for(0.3);
        for (a, b) in g1.iter().zip(g3.iter()) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let net = init_network(&default_topology(), 0).unwrap();
        let other = identity_layer(7);
        let (_, cache) = other.forward(&[0.0; 7]).unwrap();
        assert!(matches!(backward(&net, &cache, &[0.0; 7]), Err(Error::Shape(_))));
    }

    #[test]
    fn save_load_reproduces_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let net = init_network(&default_topology(), 42).unwrap();
        net.save(&path).unwrap();
        let back = Network::load(&path).unwrap();
        assert_eq!(net, back);
        let x = [0.1, 0.9, 0.4, 0.3, 0.7, 0.2, 0.5];
        let a = net.predict(&x).unwrap();
        let b = back.predict(&x).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
