//! Fully connected network with hand-written forward and backward passes.
//!
//! Samples are columns: a batch `X` has shape `(n_0, m)`, and layer `l`
//! computes `Z = W·A_prev + b`, `A = g(Z)`.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clip applied to predicted probabilities before taking logs.
pub const PROB_EPSILON: f64 = 1e-12;

pub const REFERENCE_LAYER_SIZES: [usize; 5] = [5, 128, 64, 32, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    /// One unit, binary cross-entropy.
    Sigmoid,
    /// One unit per class, categorical cross-entropy.
    Softmax,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn activate(kind: Activation, z: &Array2<f64>) -> Array2<f64> {
    match kind {
        Activation::Sigmoid => z.mapv(sigmoid),
        Activation::Relu => z.mapv(|v| v.max(0.0)),
        Activation::Softmax => {
            let mut out = z.clone();
            for mut col in out.columns_mut() {
                let max = col.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                col.mapv_inplace(|v| (v - max).exp());
                let total = col.sum();
                col.mapv_inplace(|v| v / total);
            }
            out
        }
    }
}

/// `dZ` from `dA` for element-wise activations. ReLU passes gradient only
/// where `Z > 0` strictly.
pub fn activation_backward(
    kind: Activation,
    da: &Array2<f64>,
    z: &Array2<f64>,
) -> Result<Array2<f64>> {
    if da.dim() != z.dim() {
        return Err(Error::domain(format!(
            "dA shape {:?} does not match Z shape {:?}",
            da.dim(),
            z.dim()
        )));
    }
    match kind {
        Activation::Sigmoid => Ok(ndarray::Zip::from(da).and(z).map_collect(|&g, &v| {
            let s = sigmoid(v);
            g * s * (1.0 - s)
        })),
        Activation::Relu => {
            Ok(ndarray::Zip::from(da)
                .and(z)
                .map_collect(|&g, &v| if v > 0.0 { g } else { 0.0 }))
        }
        Activation::Softmax => Err(Error::domain(
            "softmax backward is only available fused with cross-entropy",
        )),
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b || a == 0 {
        return Err(Error::domain(format!("length mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// Mean binary cross-entropy with `y_hat` clipped to `[ε, 1-ε]`.
pub fn bce_cost(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y.len(), y_hat.len())?;
    let total: f64 = y
        .iter()
        .zip(y_hat)
        .map(|(&t, &p)| {
            let p = p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / y.len() as f64)
}

pub fn mse_cost(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y.len(), y_hat.len())?;
    let total: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(total / y.len() as f64)
}

/// Mean categorical cross-entropy of softmax columns against integer labels.
pub fn cross_entropy_cost(labels: &[u8], probs: &Array2<f64>) -> Result<f64> {
    check_lengths(labels.len(), probs.ncols())?;
    let mut total = 0.0;
    for (col, &label) in probs.columns().into_iter().zip(labels) {
        let p = col
            .get(usize::from(label))
            .ok_or_else(|| Error::domain(format!("label {label} has no output unit")))?;
        total -= p.clamp(PROB_EPSILON, 1.0).ln();
    }
    Ok(total / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layer_sizes: Vec<usize>,
    /// `weights[l]` has shape `(layer_sizes[l+1], layer_sizes[l])`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub output: OutputHead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// Pre-activations per layer.
    pub z: Vec<Array2<f64>>,
    /// `a[0]` is the input, `a[l]` the output of layer `l`.
    pub a: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub dw: Vec<Array2<f64>>,
    pub db: Vec<Array1<f64>>,
}

impl MlpGradients {
    pub fn to_flat(&self) -> Vec<f64> {
        self.dw
            .iter()
            .zip(&self.db)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

/// On-disk checkpoint: layer sizes plus row-major weight matrices.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    layer_sizes: Vec<usize>,
    output: OutputHead,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

const MAX_CHECKPOINT_PARAMS: usize = 50_000_000;

impl MlpParams {
    pub fn zeros(layer_sizes: &[usize], output: OutputHead) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::domain(format!("invalid layer sizes {layer_sizes:?}")));
        }
        if output == OutputHead::Sigmoid && layer_sizes[layer_sizes.len() - 1] != 1 {
            return Err(Error::domain("a sigmoid head has exactly one output unit"));
        }
        let mut total = 0usize;
        for pair in layer_sizes.windows(2) {
            total = pair[0]
                .checked_mul(pair[1])
                .and_then(|w| total.checked_add(w + pair[1]))
                .filter(|&t| t <= MAX_CHECKPOINT_PARAMS)
                .ok_or_else(|| Error::domain("network too large"))?;
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights: layer_sizes
                .windows(2)
                .map(|p| Array2::zeros((p[1], p[0])))
                .collect(),
            biases: layer_sizes[1..].iter().map(|&n| Array1::zeros(n)).collect(),
            output,
        })
    }

    /// He-scaled normal weights (`std = sqrt(2 / fan_in)`), zero biases.
    pub fn he_init<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        output: OutputHead,
        rng: &mut R,
    ) -> Result<Self> {
        let mut params = Self::zeros(layer_sizes, output)?;
        for w in &mut params.weights {
            let fan_in = w.ncols() as f64;
            let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
            w.mapv_inplace(|_| normal.sample(rng));
        }
        Ok(params)
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|p| p[0] * p[1] + p[1])
            .sum()
    }

    /// Multiply-accumulates in one forward pass of a single sample.
    pub fn macs_per_sample(&self) -> u64 {
        self.layer_sizes
            .windows(2)
            .map(|p| (p[0] * p[1]) as u64)
            .sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::domain("flat parameter length mismatch"));
        }
        let mut it = flat.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            w.iter_mut().chain(b.iter_mut()).for_each(|v| {
                *v = it.next().expect("length checked");
            });
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let expected = Self::zeros(&self.layer_sizes, self.output)?;
        let shapes_ok = self.weights.len() == expected.weights.len()
            && self.biases.len() == expected.biases.len()
            && self
                .weights
                .iter()
                .zip(&expected.weights)
                .all(|(a, b)| a.dim() == b.dim())
            && self
                .biases
                .iter()
                .zip(&expected.biases)
                .all(|(a, b)| a.len() == b.len());
        if !shapes_ok {
            return Err(Error::domain("parameter shapes do not chain"));
        }
        if self.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite parameter"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let ckpt = Checkpoint {
            layer_sizes: self.layer_sizes.clone(),
            output: self.output,
            weights: self.weights.iter().map(|w| w.iter().copied().collect()).collect(),
            biases: self.biases.iter().map(|b| b.to_vec()).collect(),
        };
        Ok(serde_json::to_string(&ckpt)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        let mut params = Self::zeros(&ckpt.layer_sizes, ckpt.output)?;
        if ckpt.weights.len() != params.weights.len() || ckpt.biases.len() != params.biases.len()
        {
            return Err(Error::domain("checkpoint layer count mismatch"));
        }
        for (w, flat) in params.weights.iter_mut().zip(ckpt.weights) {
            let shape = w.dim();
            *w = Array2::from_shape_vec(shape, flat)
                .map_err(|e| Error::domain(format!("weight shape: {e}")))?;
        }
        for (b, flat) in params.biases.iter_mut().zip(ckpt.biases) {
            if flat.len() != b.len() {
                return Err(Error::domain("bias length mismatch"));
            }
            *b = Array1::from(flat);
        }
        params.validate()?;
        Ok(params)
    }
}

fn output_activation(head: OutputHead) -> Activation {
    match head {
        OutputHead::Sigmoid => Activation::Sigmoid,
        OutputHead::Softmax => Activation::Softmax,
    }
}

/// ReLU hidden layers, configured output head. Returns the output
/// activations and the cache needed by [`model_backward`].
pub fn model_forward(params: &MlpParams, x: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
    if x.nrows() != params.layer_sizes[0] || x.ncols() == 0 {
        return Err(Error::domain(format!(
            "input shape {:?} does not match {} input units",
            x.dim(),
            params.layer_sizes[0]
        )));
    }
    let depth = params.depth();
    let mut cache = ForwardCache {
        z: Vec::with_capacity(depth),
        a: vec![x.clone()],
    };
    for (l, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
        let z = w.dot(&cache.a[l]) + b.view().insert_axis(Axis(1));
        let kind = if l + 1 == depth {
            output_activation(params.output)
        } else {
            Activation::Relu
        };
        cache.a.push(activate(kind, &z));
        cache.z.push(z);
    }
    let out = cache.a[depth].clone();
    Ok((out, cache))
}

/// Mean cost of the output activations under the configured head.
pub fn model_cost(params: &MlpParams, out: &Array2<f64>, labels: &[u8]) -> Result<f64> {
    match params.output {
        OutputHead::Sigmoid => {
            let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
            bce_cost(&y, &out.row(0).to_vec())
        }
        OutputHead::Softmax => cross_entropy_cost(labels, out),
    }
}

/// Probability of class 1 per column.
pub fn class_one_probability(params: &MlpParams, out: &Array2<f64>) -> Vec<f64> {
    let row = match params.output {
        OutputHead::Sigmoid => 0,
        OutputHead::Softmax => 1,
    };
    out.row(row).to_vec()
}

pub fn model_backward(
    params: &MlpParams,
    cache: &ForwardCache,
    labels: &[u8],
) -> Result<MlpGradients> {
    let depth = params.depth();
    let m = labels.len();
    let stale = cache.a.len() != depth + 1
        || cache.z.len() != depth
        || m == 0
        || cache.a.iter().any(|a| a.ncols() != m)
        || cache
            .a
            .iter()
            .zip(&params.layer_sizes)
            .any(|(a, &n)| a.nrows() != n);
    if stale {
        return Err(Error::domain("forward cache does not match parameters or labels"));
    }
    let out = &cache.a[depth];
    // output dZ for sigmoid+BCE and softmax+CE both reduce to A - Y
    let mut dz = out.clone();
    for (j, &label) in labels.iter().enumerate() {
        match params.output {
            OutputHead::Sigmoid => dz[[0, j]] -= f64::from(label),
            OutputHead::Softmax => {
                let k = usize::from(label);
                if k >= dz.nrows() {
                    return Err(Error::domain(format!("label {label} has no output unit")));
                }
                dz[[k, j]] -= 1.0;
            }
        }
    }
    let inv_m = 1.0 / m as f64;
    let mut dw = vec![Array2::zeros((0, 0)); depth];
    let mut db = vec![Array1::zeros(0); depth];
    for l in (0..depth).rev() {
        dw[l] = dz.dot(&cache.a[l].t()) * inv_m;
        db[l] = dz.sum_axis(Axis(1)) * inv_m;
        if l > 0 {
            let da_prev = params.weights[l].t().dot(&dz);
            dz = activation_backward(Activation::Relu, &da_prev, &cache.z[l - 1])?;
        }
    }
    Ok(MlpGradients { dw, db })
}

/// `W <- W - α·dW`, `b <- b - α·db`
pub fn gd_update(params: &MlpParams, grads: &MlpGradients, alpha: f64) -> Result<MlpParams> {
    let shapes_ok = grads.dw.len() == params.weights.len()
        && grads.db.len() == params.biases.len()
        && grads.dw.iter().zip(&params.weights).all(|(a, b)| a.dim() == b.dim())
        && grads.db.iter().zip(&params.biases).all(|(a, b)| a.len() == b.len());
    if !shapes_ok {
        return Err(Error::domain("gradient shapes do not match parameters"));
    }
    let mut next = params.clone();
    for (w, dw) in next.weights.iter_mut().zip(&grads.dw) {
        w.scaled_add(-alpha, dw);
    }
    for (b, db) in next.biases.iter_mut().zip(&grads.db) {
        b.scaled_add(-alpha, db);
    }
    Ok(next)
}

/// `[5, 128, 64, 32, 2]` with a softmax head.
pub fn build_reference_ann<R: Rng + ?Sized>(rng: &mut R) -> MlpParams {
    MlpParams::he_init(&REFERENCE_LAYER_SIZES, OutputHead::Softmax, rng)
        .expect("reference sizes are valid")
}

/// Stacks feature vectors as columns.
pub fn batch_matrix<'a>(
    features: impl ExactSizeIterator<Item = &'a [f64]>,
    n_inputs: usize,
) -> Result<Array2<f64>> {
    let m = features.len();
    let mut x = Array2::zeros((n_inputs, m));
    for (j, f) in features.enumerate() {
        if f.len() != n_inputs {
            return Err(Error::domain("feature length mismatch"));
        }
        for (i, &v) in f.iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    Ok(x)
}
