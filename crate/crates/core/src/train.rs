//! Mini-batch training for the classical and variational models.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{MarketSample, SplitDataset};
use crate::mlp::{self, MlpParams};
use crate::vqc::{EncodedSample, FdScheme, ParameterizedCircuit};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const DEFAULT_CLASSICAL_EPOCHS: usize = 200;
pub const DEFAULT_QUANTUM_EPOCHS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    PlainGd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    Classical,
    Quantum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// `None` selects the per-family default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    pub seed: u64,
    pub delta_theta: f64,
    pub optimizer: OptimizerKind,
    pub fd_scheme: FdScheme,
    /// Half-width of the uniform initial angle distribution, radians.
    pub theta_init_spread: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 32,
            epochs: None,
            seed: 0,
            delta_theta: 1e-3,
            optimizer: OptimizerKind::Adam,
            fd_scheme: FdScheme::Forward,
            theta_init_spread: std::f64::consts::PI,
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::domain(format!(
                "learning rate {} must be > 0",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::domain("batch size must be at least 1"));
        }
        if !(self.delta_theta > 0.0 && self.delta_theta.is_finite()) {
            return Err(Error::domain(format!(
                "delta_theta {} must be > 0",
                self.delta_theta
            )));
        }
        if !(self.theta_init_spread >= 0.0 && self.theta_init_spread.is_finite()) {
            return Err(Error::domain("theta_init_spread must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn epochs_for(&self, family: ModelFamily) -> usize {
        self.epochs.unwrap_or(match family {
            ModelFamily::Classical => DEFAULT_CLASSICAL_EPOCHS,
            ModelFamily::Quantum => DEFAULT_QUANTUM_EPOCHS,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, alpha: f64) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len()
    {
        return Err(Error::domain(format!(
            "adam shapes differ: params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let t = i32::try_from(state.t).unwrap_or(i32::MAX);
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= alpha * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// `p <- p - α·g`, in place.
pub fn plain_gd_step(params: &mut [f64], grads: &[f64], alpha: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::domain("gradient length does not match parameters"));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= alpha * g;
    }
    Ok(())
}

/// The update rule shared by every model; parameters travel as flat vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Adam(AdamState),
    PlainGd,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, len: usize) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(len)),
            OptimizerKind::PlainGd => Optimizer::PlainGd,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], alpha: f64) -> Result<()> {
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Training("non-finite gradient".into()));
        }
        match self {
            Optimizer::Adam(state) => adam_step(params, grads, state, alpha),
            Optimizer::PlainGd => plain_gd_step(params, grads, alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sample-weighted mean of the batch losses seen during the epoch.
    pub loss: f64,
    /// Train accuracy after the epoch's last update.
    pub accuracy: f64,
    #[serde(skip)]
    pub wall_time_secs: f64,
    pub cumulative_ops: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

fn labels_of(samples: &[MarketSample]) -> Vec<u8> {
    samples.iter().map(|s| s.label).collect()
}

fn feature_matrix(samples: &[MarketSample], n_inputs: usize) -> Result<ndarray::Array2<f64>> {
    mlp::batch_matrix(samples.iter().map(|s| s.features.values()), n_inputs)
}

fn accuracy(predicted: &[u8], actual: &[u8]) -> f64 {
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    hits as f64 / actual.len().max(1) as f64
}

/// Class-1 probabilities of an MLP on `samples`.
pub fn mlp_scores(params: &MlpParams, samples: &[MarketSample]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let x = feature_matrix(samples, params.layer_sizes[0])?;
    let (out, _) = mlp::model_forward(params, &x)?;
    Ok(mlp::class_one_probability(params, &out))
}

/// Class-1 probabilities of a circuit on `samples`.
pub fn circuit_scores(circuit: &ParameterizedCircuit, samples: &[MarketSample]) -> Result<Vec<f64>> {
    let compiled = circuit.compile()?;
    samples
        .iter()
        .map(|s| Ok(compiled.predict_encoded(&circuit.encode(&s.features)?)?.p_up))
        .collect()
}

/// Ties go to class 1.
pub fn threshold(scores: &[f64]) -> Vec<u8> {
    scores.iter().map(|&p| u8::from(p >= 0.5)).collect()
}

fn check_trainable(dataset: &SplitDataset, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    Ok(())
}

/// Trains `params` in place of a fresh copy: contiguous mini-batches in
/// chronological order, forward, backward, shared optimizer step.
pub fn train_classical_from(
    mut params: MlpParams,
    dataset: &SplitDataset,
    config: &TrainConfig,
) -> Result<(MlpParams, TrainHistory)> {
    check_trainable(dataset, config)?;
    let n_inputs = params.layer_sizes[0];
    let train = &dataset.train;
    let all_x = feature_matrix(train, n_inputs)?;
    let all_labels = labels_of(train);
    let mut flat = params.to_flat();
    let mut optimizer = Optimizer::new(config.optimizer, flat.len());
    let macs_per_epoch = params.macs_per_sample() * train.len() as u64;
    let mut history = TrainHistory::default();
    let mut ops = 0u64;
    for epoch in 1..=config.epochs_for(ModelFamily::Classical) {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        for batch in train.chunks(config.batch_size) {
            let x = feature_matrix(batch, n_inputs)?;
            let labels = labels_of(batch);
            let (out, cache) = mlp::model_forward(&params, &x)?;
            loss_sum += mlp::model_cost(&params, &out, &labels)? * batch.len() as f64;
            let grads = mlp::model_backward(&params, &cache, &labels)?;
            optimizer.step(&mut flat, &grads.to_flat(), config.learning_rate)?;
            params.set_flat(&flat)?;
        }
        ops += macs_per_epoch;
        let (out, _) = mlp::model_forward(&params, &all_x)?;
        let predicted = threshold(&mlp::class_one_probability(&params, &out));
        history.records.push(EpochRecord {
            epoch,
            loss: loss_sum / train.len() as f64,
            accuracy: accuracy(&predicted, &all_labels),
            wall_time_secs: started.elapsed().as_secs_f64(),
            cumulative_ops: ops,
        });
    }
    Ok((params, history))
}

/// Reference ANN with He initialization drawn from `config.seed`.
pub fn train_classical(dataset: &SplitDataset, config: &TrainConfig) -> Result<(MlpParams, TrainHistory)> {
    let mut rng = model_rng(config.seed, ModelStream::Ann);
    train_classical_from(mlp::build_reference_ann(&mut rng), dataset, config)
}

/// Finite-difference training of `model.theta`. The starting angles are taken
/// as given. Coordinates fan out over the ambient rayon pool when it has more
/// than one thread; results do not depend on the thread count.
pub fn train_quantum(
    mut model: ParameterizedCircuit,
    dataset: &SplitDataset,
    config: &TrainConfig,
) -> Result<(ParameterizedCircuit, TrainHistory)> {
    check_trainable(dataset, config)?;
    model.validate()?;
    let train = &dataset.train;
    let encoded: Vec<EncodedSample> = model.encode_samples(train)?;
    let all_labels = labels_of(train);
    let counts = model.count_operations();
    let evaluations_per_sample = match config.fd_scheme {
        FdScheme::Forward => counts.forward_passes_per_gradient,
        FdScheme::Central => 1 + counts.forward_passes_per_gradient_central,
    };
    let ops_per_epoch =
        counts.gate_applications_per_forward * evaluations_per_sample * train.len() as u64;
    let parallel = rayon::current_num_threads() > 1;
    let mut optimizer = Optimizer::new(config.optimizer, model.theta.len());
    let mut history = TrainHistory::default();
    let mut ops = 0u64;
    for epoch in 1..=config.epochs_for(ModelFamily::Quantum) {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        for batch in encoded.chunks(config.batch_size) {
            let step = model.gradient_encoded(batch, config.delta_theta, config.fd_scheme, parallel)?;
            loss_sum += step.loss * batch.len() as f64;
            let mut theta = std::mem::take(&mut model.theta);
            optimizer.step(&mut theta, &step.gradient, config.learning_rate)?;
            model.theta = theta;
        }
        ops += ops_per_epoch;
        let compiled = model.compile()?;
        let predicted = encoded
            .iter()
            .map(|s| Ok(compiled.predict_encoded(&s.register)?.label_hat))
            .collect::<Result<Vec<u8>>>()?;
        history.records.push(EpochRecord {
            epoch,
            loss: loss_sum / train.len() as f64,
            accuracy: accuracy(&predicted, &all_labels),
            wall_time_secs: started.elapsed().as_secs_f64(),
            cumulative_ops: ops,
        });
    }
    Ok((model, history))
}

/// Independent random streams per model, all derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelStream {
    Ann = 1,
    Qbn = 2,
    Qqtn = 3,
}

pub fn model_rng(seed: u64, stream: ModelStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Ansatz with angles drawn uniformly from `±config.theta_init_spread`.
pub fn initialized_ansatz(
    mut circuit: ParameterizedCircuit,
    config: &TrainConfig,
    stream: ModelStream,
) -> ParameterizedCircuit {
    let mut rng = model_rng(config.seed, stream);
    circuit.randomize_theta(&mut rng, config.theta_init_spread);
    circuit
}
