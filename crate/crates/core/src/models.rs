//! Decision functions g: Rᵈ → R — linear and small fully connected — with
//! forward scoring and analytic parameter gradients.
//!
//! Parameters are stored flat in a fixed order: layer-major, each layer's
//! weight matrix first (output-major rows), then its bias vector. For the
//! linear model this is simply `[w₁, …, w_d, b]`, so the score gradient is
//! `concat(x, 1)`.

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::losses::{loss_derivative, loss_value, LossSpec};
use crate::rewrite::{CorrectionCoefficients, CostWeights};
use rand::distr::Uniform;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const PARAM_ORDER_TAG: &str = "layer_major_weights_then_bias";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Mlp,
}

/// g(x) = wᵀx + b with params `[w…, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    dim: usize,
    params: Vec<f64>,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(Error::Domain("linear parameters must be finite".into()));
        }
        let dim = weights.len();
        let mut params = weights;
        params.push(bias);
        Ok(Self { dim, params })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            params: vec![0.0; dim + 1],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.params[..self.dim]
    }

    pub fn bias(&self) -> f64 {
        self.params[self.dim]
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights().iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Fully connected network with ReLU hidden layers and a single affine
/// output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    params: Vec<f64>,
    activation: Activation,
}

impl MlpModel {
    pub fn zeros(layer_dims: Vec<usize>) -> Result<Self> {
        validate_mlp_dims(&layer_dims)?;
        let n = mlp_param_count(&layer_dims);
        Ok(Self {
            layer_dims,
            params: vec![0.0; n],
            activation: Activation::Relu,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    fn layer_count(&self) -> usize {
        self.layer_dims.len() - 1
    }

    /// Offset of layer `l`'s weight block; biases follow the weights.
    fn layer_offset(&self, l: usize) -> usize {
        let mut off = 0;
        for k in 0..l {
            off += self.layer_dims[k] * self.layer_dims[k + 1] + self.layer_dims[k + 1];
        }
        off
    }
}

fn validate_mlp_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Config(format!(
            "mlp needs at least input and output dims, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Config(format!("zero layer width in {dims:?}")));
    }
    if *dims.last().unwrap() != 1 {
        return Err(Error::Config(format!(
            "output dimension must be 1, got {}",
            dims.last().unwrap()
        )));
    }
    Ok(())
}

fn mlp_param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Linear(_) => ModelKind::Linear,
            Model::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.dim,
            Model::Mlp(m) => m.layer_dims[0],
        }
    }

    pub fn num_params(&self) -> usize {
        self.params().len()
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Model::Linear(m) => &m.params,
            Model::Mlp(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Model::Linear(m) => &mut m.params,
            Model::Mlp(m) => &mut m.params,
        }
    }

    /// Score a single input.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        match self {
            Model::Linear(m) => {
                let mut s = m.bias();
                for (w, v) in m.weights().iter().zip(x) {
                    s += w * v;
                }
                Ok(s)
            }
            Model::Mlp(m) => {
                let mut cache = MlpCache::default();
                Ok(mlp_forward(m, x, &mut cache))
            }
        }
    }

    /// Gradient of the scalar score with respect to all parameters, flattened
    /// in the documented order.
    pub fn parameter_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut grad = vec![0.0; self.num_params()];
        match self {
            Model::Linear(_) => {
                grad[..x.len()].copy_from_slice(x);
                grad[x.len()] = 1.0;
            }
            Model::Mlp(m) => {
                let mut cache = MlpCache::default();
                mlp_forward(m, x, &mut cache);
                mlp_backprop(m, x, &cache, 1.0, &mut grad);
            }
        }
        Ok(grad)
    }
}

/// Per-layer post-activations, reused across samples to avoid reallocation.
#[derive(Default)]
struct MlpCache {
    activations: Vec<Vec<f64>>,
}

fn mlp_forward(m: &MlpModel, x: &[f64], cache: &mut MlpCache) -> f64 {
    let layers = m.layer_count();
    cache.activations.resize_with(layers, Vec::new);
    for l in 0..layers {
        let (n_in, n_out) = (m.layer_dims[l], m.layer_dims[l + 1]);
        let off = m.layer_offset(l);
        let weights = &m.params[off..off + n_in * n_out];
        let biases = &m.params[off + n_in * n_out..off + n_in * n_out + n_out];
        let hidden = l + 1 < layers;

        let (done, rest) = cache.activations.split_at_mut(l);
        let input: &[f64] = if l == 0 { x } else { &done[l - 1] };
        let out = &mut rest[0];
        out.clear();
        out.resize(n_out, 0.0);
        for j in 0..n_out {
            let row = &weights[j * n_in..(j + 1) * n_in];
            let mut z = biases[j];
            for (w, v) in row.iter().zip(input) {
                z += w * v;
            }
            out[j] = if hidden { z.max(0.0) } else { z };
        }
    }
    cache.activations[layers - 1][0]
}

/// Accumulate `scale · ∂g/∂params` into `grad`. Requires a forward pass to
/// have filled `cache` for this input.
fn mlp_backprop(m: &MlpModel, x: &[f64], cache: &MlpCache, scale: f64, grad: &mut [f64]) {
    let layers = m.layer_count();
    let mut delta = vec![scale];
    for l in (0..layers).rev() {
        let (n_in, n_out) = (m.layer_dims[l], m.layer_dims[l + 1]);
        let off = m.layer_offset(l);
        let prev: &[f64] = if l == 0 { x } else { &cache.activations[l - 1] };

        let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
        for j in 0..n_out {
            let dj = delta[j];
            if dj != 0.0 {
                let row = &mut gw[j * n_in..(j + 1) * n_in];
                for (g, v) in row.iter_mut().zip(prev) {
                    *g += dj * v;
                }
                gb[j] += dj;
            }
        }

        if l > 0 {
            let weights = &m.params[off..off + n_in * n_out];
            let mut next = vec![0.0; n_in];
            for j in 0..n_out {
                let dj = delta[j];
                if dj != 0.0 {
                    let row = &weights[j * n_in..(j + 1) * n_in];
                    for (nd, w) in next.iter_mut().zip(row) {
                        *nd += dj * w;
                    }
                }
            }
            // ReLU gate: closed where the unit was inactive.
            for (nd, &a) in next.iter_mut().zip(&cache.activations[l - 1]) {
                if a <= 0.0 {
                    *nd = 0.0;
                }
            }
            delta = next;
        }
    }
}

/// Deterministic fan-based uniform initialization with zero biases.
pub fn init_model(kind: ModelKind, dims: &[usize], seed: u64) -> Result<Model> {
    if dims.is_empty() {
        return Err(Error::Config("empty model dims".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        ModelKind::Linear => {
            let d = dims[0];
            if d == 0 {
                return Err(Error::Config("zero input dimension".into()));
            }
            let bound = (6.0 / (d as f64 + 1.0)).sqrt();
            let dist =
                Uniform::new_inclusive(-bound, bound).map_err(|e| Error::Config(e.to_string()))?;
            let weights: Vec<f64> = (0..d).map(|_| rng.sample(dist)).collect();
            Ok(Model::Linear(LinearModel::new(weights, 0.0)?))
        }
        ModelKind::Mlp => {
            validate_mlp_dims(dims)?;
            let mut params = Vec::with_capacity(mlp_param_count(dims));
            for w in dims.windows(2) {
                let (n_in, n_out) = (w[0], w[1]);
                let bound = (6.0 / (n_in as f64 + n_out as f64)).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound)
                    .map_err(|e| Error::Config(e.to_string()))?;
                params.extend((0..n_in * n_out).map(|_| rng.sample(dist)));
                params.extend(std::iter::repeat_n(0.0, n_out));
            }
            Ok(Model::Mlp(MlpModel {
                layer_dims: dims.to_vec(),
                params,
                activation: Activation::Relu,
            }))
        }
    }
}

/// Empirical risk of the two-set backward-corrected estimator on the given
/// batches, together with its exact parameter gradient.
///
/// Batch 1 contributes (1/n)Σ [a·ℓ(g(x)) + b·ℓ(−g(x))] and batch 2
/// contributes (1/n′)Σ [d·ℓ(g(x′)) + c·ℓ(−g(x′))].
pub fn risk_value_and_gradient(
    model: &Model,
    batch1: &Matrix,
    batch2: &Matrix,
    coeffs: &CorrectionCoefficients,
    loss: &LossSpec,
) -> Result<(f64, Vec<f64>)> {
    if !loss.trainable() {
        return Err(Error::UnsupportedLoss(
            "zero-one loss cannot drive gradient training".into(),
        ));
    }
    if batch1.is_empty() || batch2.is_empty() {
        return Err(Error::EmptySample(
            "risk gradient needs both batches".into(),
        ));
    }
    let mut grad = vec![0.0; model.num_params()];
    let mut risk = 0.0;
    let inv_n = 1.0 / batch1.nrows() as f64;
    let inv_np = 1.0 / batch2.nrows() as f64;
    let mut cache = MlpCache::default();

    let mut accumulate = |m: &Model,
                          x: &[f64],
                          w_pos: f64,
                          w_neg: f64,
                          norm: f64,
                          grad: &mut [f64]|
     -> Result<f64> {
        let score = match m {
            Model::Linear(_) => m.forward(x)?,
            Model::Mlp(mlp) => {
                if x.len() != mlp.layer_dims[0] {
                    return Err(Error::Shape {
                        expected: mlp.layer_dims[0],
                        got: x.len(),
                    });
                }
                mlp_forward(mlp, x, &mut cache)
            }
        };
        let value = w_pos * loss_value(loss, score)? + w_neg * loss_value(loss, -score)?;
        let dscore =
            (w_pos * loss_derivative(loss, score)? - w_neg * loss_derivative(loss, -score)?) * norm;
        match m {
            Model::Linear(lin) => {
                for (g, v) in grad[..lin.dim].iter_mut().zip(x) {
                    *g += dscore * v;
                }
                grad[lin.dim] += dscore;
            }
            Model::Mlp(mlp) => mlp_backprop(mlp, x, &cache, dscore, grad),
        }
        Ok(value * norm)
    };

    for x in batch1.iter_rows() {
        risk += accumulate(model, x, coeffs.a, coeffs.b, inv_n, &mut grad)?;
    }
    for x in batch2.iter_rows() {
        risk += accumulate(model, x, coeffs.d, coeffs.c, inv_np, &mut grad)?;
    }
    Ok((risk, grad))
}

/// Flat parameter gradient of the two-set corrected empirical risk.
pub fn risk_gradient(
    model: &Model,
    batch1: &Matrix,
    batch2: &Matrix,
    coeffs: &CorrectionCoefficients,
    loss: &LossSpec,
) -> Result<Vec<f64>> {
    risk_value_and_gradient(model, batch1, batch2, coeffs, loss).map(|(_, g)| g)
}

/// Same as [`risk_value_and_gradient`] for the simplified cost-sensitive
/// estimator (α/n)Σℓ(g(x)) + (α′/n′)Σℓ(−g(x′)) − offset. Requires a
/// symmetric loss; the offset carries no gradient.
pub fn risk_value_and_gradient_sym(
    model: &Model,
    batch1: &Matrix,
    batch2: &Matrix,
    weights: &CostWeights,
    loss: &LossSpec,
) -> Result<(f64, Vec<f64>)> {
    if !loss.symmetric {
        return Err(Error::NonSymmetricLoss(format!(
            "{} does not satisfy ℓ(z)+ℓ(−z)=1",
            loss.kind.name()
        )));
    }
    let coeffs = CorrectionCoefficients {
        a: weights.alpha,
        b: 0.0,
        c: weights.alpha_prime,
        d: 0.0,
    };
    let (risk, grad) = risk_value_and_gradient(model, batch1, batch2, &coeffs, loss)?;
    Ok((risk - weights.offset, grad))
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    kind: ModelKind,
    dims: Vec<usize>,
    activation: Option<Activation>,
    params: Vec<f64>,
    order: String,
    seed: Option<u64>,
}

impl Model {
    pub fn to_json(&self, seed: Option<u64>) -> serde_json::Value {
        let doc = match self {
            Model::Linear(m) => ModelDoc {
                kind: ModelKind::Linear,
                dims: vec![m.dim],
                activation: None,
                params: m.params.clone(),
                order: PARAM_ORDER_TAG.into(),
                seed,
            },
            Model::Mlp(m) => ModelDoc {
                kind: ModelKind::Mlp,
                dims: m.layer_dims.clone(),
                activation: Some(m.activation),
                params: m.params.clone(),
                order: PARAM_ORDER_TAG.into(),
                seed,
            },
        };
        serde_json::to_value(doc).expect("model serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Model> {
        let doc: ModelDoc = serde_json::from_value(value.clone())?;
        if doc.order != PARAM_ORDER_TAG {
            return Err(Error::Config(format!(
                "unknown parameter order \"{}\"",
                doc.order
            )));
        }
        if doc.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("model parameters must be finite".into()));
        }
        match doc.kind {
            ModelKind::Linear => {
                let d = *doc
                    .dims
                    .first()
                    .ok_or_else(|| Error::Config("linear model needs an input dimension".into()))?;
                if doc.params.len() != d + 1 {
                    return Err(Error::Shape {
                        expected: d + 1,
                        got: doc.params.len(),
                    });
                }
                Ok(Model::Linear(LinearModel {
                    dim: d,
                    params: doc.params,
                }))
            }
            ModelKind::Mlp => {
                validate_mlp_dims(&doc.dims)?;
                let expected = mlp_param_count(&doc.dims);
                if doc.params.len() != expected {
                    return Err(Error::Shape {
                        expected,
                        got: doc.params.len(),
                    });
                }
                Ok(Model::Mlp(MlpModel {
                    layer_dims: doc.dims,
                    params: doc.params,
                    activation: doc.activation.unwrap_or(Activation::Relu),
                }))
            }
        }
    }

    pub fn save_json(&self, path: &std::path::Path, seed: Option<u64>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json(seed))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Model> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        Model::from_json(&value)
    }
}
