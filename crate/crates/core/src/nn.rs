//! Feed-forward networks with exact backpropagation.
//!
//! Both the predictor and the rejector are single-output MLPs built here.
//! The networks are small (at most two hidden layers), so the implementation
//! favors clarity: plain loops over row-major weight matrices, a cache of
//! per-layer intermediates, and gradients computed for an externally
//! supplied output gradient. Correctness is pinned by finite-difference
//! checks in the test suite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RandomStream};

/// Per-neuron nonlinearity. Output layers are always linear: the networks
/// emit scores, not probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Tanh,
    Relu,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation. The ReLU subgradient
    /// at exactly 0 is fixed to 0.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One dense layer: `output_dim` neurons over `input_dim` inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

/// Shape of a scoring network: chained layers ending in one linear output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LayerSpec>", into = "Vec<LayerSpec>")]
pub struct MlpSpec {
    layers: Vec<LayerSpec>,
}

impl MlpSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.input_dim == 0 || layer.output_dim == 0 {
                return Err(Error::InvalidArgument(format!(
                    "layer {k} has a zero dimension"
                )));
            }
            if k > 0 && layers[k - 1].output_dim != layer.input_dim {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} emits {} values but layer {k} expects {}",
                    k - 1,
                    layers[k - 1].output_dim,
                    layer.input_dim
                )));
            }
        }
        let last = layers.last().unwrap();
        if last.output_dim != 1 || last.activation != Activation::Linear {
            return Err(Error::InvalidArgument(
                "final layer must be a single linear output".into(),
            ));
        }
        Ok(Self { layers })
    }

    /// Scoring network with the given hidden widths, all sharing one
    /// activation, followed by the linear output neuron. An empty `hidden`
    /// list yields a single linear layer.
    pub fn scorer(input_dim: usize, hidden: &[usize], activation: Activation) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input_dim;
        for &width in hidden {
            layers.push(LayerSpec {
                input_dim: prev,
                output_dim: width,
                activation,
            });
            prev = width;
        }
        layers.push(LayerSpec {
            input_dim: prev,
            output_dim: 1,
            activation: Activation::Linear,
        });
        MlpSpec::new(layers)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }
}

impl TryFrom<Vec<LayerSpec>> for MlpSpec {
    type Error = Error;
    fn try_from(layers: Vec<LayerSpec>) -> Result<Self> {
        MlpSpec::new(layers)
    }
}

impl From<MlpSpec> for Vec<LayerSpec> {
    fn from(spec: MlpSpec) -> Self {
        spec.layers
    }
}

/// A network with concrete parameters: per layer a weight matrix of shape
/// `(output_dim, input_dim)` and a bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    spec: MlpSpec,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

/// Intermediates retained by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    /// Pre-activation vector per layer.
    pre: Vec<Vec<f64>>,
    /// Post-activation vector per layer.
    post: Vec<Vec<f64>>,
}

/// Parameter gradients mirroring a model's shapes.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub d_weights: Vec<Matrix>,
    pub d_biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            d_weights: model
                .spec
                .layers()
                .iter()
                .map(|l| Matrix::zeros(l.output_dim, l.input_dim))
                .collect(),
            d_biases: model
                .spec
                .layers()
                .iter()
                .map(|l| vec![0.0; l.output_dim])
                .collect(),
        }
    }

    /// Accumulates `other` into `self`.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            let cols = a.cols();
            for i in 0..a.rows() {
                for j in 0..cols {
                    a.set(i, j, a.get(i, j) + b.get(i, j));
                }
            }
        }
        for (a, b) in self.d_biases.iter_mut().zip(&other.d_biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.d_weights {
            let (rows, cols) = (w.rows(), w.cols());
            for i in 0..rows {
                for j in 0..cols {
                    w.set(i, j, w.get(i, j) * factor);
                }
            }
        }
        for b in &mut self.d_biases {
            for v in b.iter_mut() {
                *v *= factor;
            }
        }
    }
}

impl MlpModel {
    /// Initializes weights uniformly on `[-b, b]` with the Glorot bound
    /// `b = sqrt(6 / (fan_in + fan_out))`; biases start at zero.
    pub fn build(spec: &MlpSpec, rng: &mut RandomStream) -> Self {
        let mut weights = Vec::with_capacity(spec.layers().len());
        let mut biases = Vec::with_capacity(spec.layers().len());
        for layer in spec.layers() {
            let bound = (6.0 / (layer.input_dim + layer.output_dim) as f64).sqrt();
            let data = rng
                .sample_uniform(layer.output_dim * layer.input_dim, -bound, bound)
                .expect("valid bounds");
            weights.push(Matrix::new(layer.output_dim, layer.input_dim, data).expect("valid shape"));
            biases.push(vec![0.0; layer.output_dim]);
        }
        Self {
            spec: spec.clone(),
            weights,
            biases,
        }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Test-and-tooling access for perturbing a single parameter.
    pub fn weight_mut(&mut self, layer: usize) -> &mut Matrix {
        &mut self.weights[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut Vec<f64> {
        &mut self.biases[layer]
    }

    /// Validates a deserialized or hand-assembled model against its spec.
    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.spec.layers().len() || self.biases.len() != self.weights.len()
        {
            return Err(Error::ShapeMismatch(format!(
                "model has {} weight matrices and {} bias vectors for {} layers",
                self.weights.len(),
                self.biases.len(),
                self.spec.layers().len()
            )));
        }
        for (k, layer) in self.spec.layers().iter().enumerate() {
            let w = &self.weights[k];
            if w.rows() != layer.output_dim || w.cols() != layer.input_dim {
                return Err(Error::ShapeMismatch(format!(
                    "layer {k} weights are {}x{}, expected {}x{}",
                    w.rows(),
                    w.cols(),
                    layer.output_dim,
                    layer.input_dim
                )));
            }
            if self.biases[k].len() != layer.output_dim {
                return Err(Error::ShapeMismatch(format!(
                    "layer {k} bias has length {}, expected {}",
                    self.biases[k].len(),
                    layer.output_dim
                )));
            }
            if self.biases[k].iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite bias in layer {k}")));
            }
        }
        Ok(())
    }

    /// Assembles a model from explicit parameters, validating shapes.
    pub fn from_parameters(
        spec: MlpSpec,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let model = Self {
            spec,
            weights,
            biases,
        };
        model.validate()?;
        Ok(model)
    }

    /// Forward pass returning the scalar score and the cache needed by
    /// [`MlpModel::backward`].
    pub fn forward(&self, x: &[f64]) -> Result<(f64, ForwardCache)> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has length {} but the network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let n_layers = self.spec.layers().len();
        let mut pre = Vec::with_capacity(n_layers);
        let mut post = Vec::with_capacity(n_layers);
        let mut current: &[f64] = x;
        for (k, layer) in self.spec.layers().iter().enumerate() {
            let mut z = self.weights[k].mat_vec(current)?;
            for (zi, bi) in z.iter_mut().zip(&self.biases[k]) {
                *zi += bi;
            }
            let a: Vec<f64> = z.iter().map(|&zi| layer.activation.apply(zi)).collect();
            pre.push(z);
            post.push(a);
            current = post.last().unwrap();
        }
        let score = post.last().unwrap()[0];
        Ok((
            score,
            ForwardCache {
                input: x.to_vec(),
                pre,
                post,
            },
        ))
    }

    /// Forward pass without retaining intermediates.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.forward(x).map(|(s, _)| s)
    }

    /// Backpropagates `d_score` (the gradient of some loss with respect to
    /// this network's output) into parameter gradients.
    pub fn backward(&self, cache: &ForwardCache, d_score: f64) -> Result<Gradients> {
        let layers = self.spec.layers();
        if cache.pre.len() != layers.len()
            || cache.input.len() != self.input_dim()
            || cache
                .pre
                .iter()
                .zip(layers)
                .any(|(z, l)| z.len() != l.output_dim)
        {
            return Err(Error::ShapeMismatch(
                "forward cache does not match this network".into(),
            ));
        }

        let mut grads = Gradients::zeros_like(self);
        // delta_k = dL/d(pre-activation of layer k)
        let last = layers.len() - 1;
        let mut delta = vec![d_score * layers[last].activation.derivative(cache.pre[last][0])];
        for k in (0..layers.len()).rev() {
            let inputs: &[f64] = if k == 0 { &cache.input } else { &cache.post[k - 1] };
            for (i, &d) in delta.iter().enumerate() {
                grads.d_biases[k][i] = d;
                for (j, &a) in inputs.iter().enumerate() {
                    grads.d_weights[k].set(i, j, d * a);
                }
            }
            if k == 0 {
                break;
            }
            let prev_layer = &layers[k - 1];
            let mut next_delta = vec![0.0; prev_layer.output_dim];
            for (j, nd) in next_delta.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (i, &d) in delta.iter().enumerate() {
                    acc += d * self.weights[k].get(i, j);
                }
                *nd = acc * prev_layer.activation.derivative(cache.pre[k - 1][j]);
            }
            delta = next_delta;
        }
        Ok(grads)
    }
}

/// Which update rule the optimizer applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum OptimizerMethod {
    Sgd,
    /// Adaptive moment estimation with bias-corrected first and second
    /// moments.
    AdaptiveMoment { beta1: f64, beta2: f64, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(flatten)]
    pub method: OptimizerMethod,
    pub learning_rate: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: OptimizerMethod::AdaptiveMoment {
                beta1: 0.9,
                beta2: 0.999,
                epsilon: 1e-8,
            },
            learning_rate: 1e-3,
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            method: OptimizerMethod::Sgd,
            learning_rate,
        }
    }

    pub fn adaptive(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Mutable optimizer state for one model: moment accumulators mirroring the
/// parameter shapes plus the step counter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: OptimizerConfig,
    step: u64,
    m_weights: Vec<Matrix>,
    m_biases: Vec<Vec<f64>>,
    v_weights: Vec<Matrix>,
    v_biases: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, model: &MlpModel) -> Self {
        let zeros_w = || {
            model
                .spec()
                .layers()
                .iter()
                .map(|l| Matrix::zeros(l.output_dim, l.input_dim))
                .collect::<Vec<_>>()
        };
        let zeros_b = || {
            model
                .spec()
                .layers()
                .iter()
                .map(|l| vec![0.0; l.output_dim])
                .collect::<Vec<_>>()
        };
        Self {
            config,
            step: 0,
            m_weights: zeros_w(),
            m_biases: zeros_b(),
            v_weights: zeros_w(),
            v_biases: zeros_b(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update to `model` in place.
    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients) -> Result<()> {
        for (k, (dw, db)) in grads.d_weights.iter().zip(&grads.d_biases).enumerate() {
            if dw.data().iter().any(|v| !v.is_finite()) || db.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient in layer {k}"
                )));
            }
        }
        self.step += 1;
        let lr = self.config.learning_rate;
        match self.config.method {
            OptimizerMethod::Sgd => {
                for k in 0..model.weights().len() {
                    let dw = &grads.d_weights[k];
                    let w = model.weight_mut(k);
                    let (rows, cols) = (w.rows(), w.cols());
                    for i in 0..rows {
                        for j in 0..cols {
                            w.set(i, j, w.get(i, j) - lr * dw.get(i, j));
                        }
                    }
                    let db = &grads.d_biases[k];
                    let b = model.bias_mut(k);
                    for (bi, gi) in b.iter_mut().zip(db) {
                        *bi -= lr * gi;
                    }
                }
            }
            OptimizerMethod::AdaptiveMoment { beta1, beta2, epsilon } => {
                let t = self.step as i32;
                let corr1 = 1.0 - beta1.powi(t);
                let corr2 = 1.0 - beta2.powi(t);
                for k in 0..model.weights().len() {
                    let dw = &grads.d_weights[k];
                    let mw = &mut self.m_weights[k];
                    let vw = &mut self.v_weights[k];
                    let w = model.weight_mut(k);
                    let (rows, cols) = (w.rows(), w.cols());
                    for i in 0..rows {
                        for j in 0..cols {
                            let g = dw.get(i, j);
                            let m = beta1 * mw.get(i, j) + (1.0 - beta1) * g;
                            let v = beta2 * vw.get(i, j) + (1.0 - beta2) * g * g;
                            mw.set(i, j, m);
                            vw.set(i, j, v);
                            let update = lr * (m / corr1) / ((v / corr2).sqrt() + epsilon);
                            w.set(i, j, w.get(i, j) - update);
                        }
                    }
                    let db = &grads.d_biases[k];
                    let b = model.bias_mut(k);
                    for (idx, (bi, &g)) in b.iter_mut().zip(db).enumerate() {
                        let m = beta1 * self.m_biases[k][idx] + (1.0 - beta1) * g;
                        let v = beta2 * self.v_biases[k][idx] + (1.0 - beta2) * g * g;
                        self.m_biases[k][idx] = m;
                        self.v_biases[k][idx] = v;
                        *bi -= lr * (m / corr1) / ((v / corr2).sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}
