//! Parameterized variational circuits: the qubit (QBN) and qutrit (QQTN)
//! classifiers, fidelity loss against the readout basis state, and
//! finite-difference gradients over the trainable angles.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoders::{encode_feature_register, EncodingScheme, FeatureVector};
use crate::error::{Error, Result};
use crate::gates::{self, Axis, Subspace};
use crate::market::MarketSample;
use crate::state::{GatePlan, QuditRegister};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    Hadamard,
    PauliX,
    Cnot,
    Rotation,
    ControlledRotation,
}

impl GateKind {
    fn is_parameterized(self) -> bool {
        matches!(self, GateKind::Rotation | GateKind::ControlledRotation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub wire: usize,
    pub level: usize,
}

/// One gate placement. Rotations take their angle either from `theta`
/// (fixed) or from the circuit's parameter vector at `slot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    pub kind: GateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<Subspace>,
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<Control>,
}

impl GateSpec {
    pub fn fixed(kind: GateKind, targets: Vec<usize>) -> Self {
        Self {
            kind,
            axis: None,
            theta: None,
            slot: None,
            subspace: None,
            targets,
            control: None,
        }
    }

    pub fn rotation(axis: Axis, slot: usize, subspace: Option<Subspace>, target: usize) -> Self {
        Self {
            kind: GateKind::Rotation,
            axis: Some(axis),
            theta: None,
            slot: Some(slot),
            subspace,
            targets: vec![target],
            control: None,
        }
    }

    pub fn controlled_rotation(
        axis: Axis,
        slot: usize,
        subspace: Option<Subspace>,
        control: Control,
        target: usize,
    ) -> Self {
        Self {
            kind: GateKind::ControlledRotation,
            control: Some(control),
            ..Self::rotation(axis, slot, subspace, target)
        }
    }

    fn angle(&self, theta: &[f64]) -> Result<f64> {
        match (self.theta, self.slot) {
            (Some(t), None) => Ok(t),
            (None, Some(s)) => theta
                .get(s)
                .copied()
                .ok_or_else(|| Error::domain(format!("parameter slot {s} out of range"))),
            _ => Err(Error::domain(
                "a rotation needs exactly one of `theta` or `slot`",
            )),
        }
    }

    fn subspace_for(&self, dim: usize) -> Subspace {
        match (dim, self.subspace) {
            (3, Some(s)) => s,
            _ => Subspace::new(0, 1),
        }
    }

    fn validate(&self, dim: usize, wires: usize, n_params: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::domain(msg));
        let expected_targets = match self.kind {
            GateKind::Cnot => 2,
            _ => 1,
        };
        if self.targets.len() != expected_targets {
            return bad(format!("{:?} needs {expected_targets} target wire(s)", self.kind));
        }
        let mut used: Vec<usize> = self.targets.clone();
        if let Some(c) = self.control {
            if self.kind != GateKind::ControlledRotation {
                return bad(format!("{:?} does not take a control", self.kind));
            }
            if c.level >= dim {
                return bad(format!("control level {} out of range", c.level));
            }
            used.push(c.wire);
        } else if self.kind == GateKind::ControlledRotation {
            return bad("controlled rotation without control".into());
        }
        for (i, w) in used.iter().enumerate() {
            if *w >= wires {
                return bad(format!("wire {w} out of range for {wires} wires"));
            }
            if used[..i].contains(w) {
                return bad(format!("wire {w} used twice in one gate"));
            }
        }
        if self.kind.is_parameterized() {
            if self.axis.is_none() {
                return bad("rotation without axis".into());
            }
            if let Some(t) = self.theta {
                if !t.is_finite() {
                    return bad("non-finite fixed angle".into());
                }
            }
            if let Some(s) = self.slot {
                if s >= n_params {
                    return bad(format!("parameter slot {s} out of range"));
                }
            }
            if self.theta.is_some() == self.slot.is_some() {
                return bad("a rotation needs exactly one of `theta` or `slot`".into());
            }
            match (dim, self.subspace) {
                (2, Some(_)) => return bad("qubit rotations take no subspace".into()),
                (3, None) => return bad("qutrit rotations need a subspace".into()),
                _ => {}
            }
            // also rejects subspaces like (2, 1)
            gates::rotation(Axis::Z, 0.0, dim, self.subspace_for(dim))?;
        } else if self.axis.is_some()
            || self.theta.is_some()
            || self.slot.is_some()
            || self.subspace.is_some()
        {
            return bad(format!("{:?} takes no angle, axis or subspace", self.kind));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    RotationLayer,
    EntangleLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub gates: Vec<GateSpec>,
}

/// Probability of class 1 and the thresholded label (ties go to 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub p_up: f64,
    pub label_hat: u8,
}

impl Prediction {
    /// Binary readout from the level-0 and level-1 marginals; any level-2
    /// mass is dropped and the remainder renormalized.
    pub fn from_marginals(p0: f64, p1: f64) -> Result<Self> {
        let mass = p0 + p1;
        if mass.is_nan() || mass < 1e-12 {
            return Err(Error::DegenerateReadout(mass));
        }
        let p_up = (p1 / mass).clamp(0.0, 1.0);
        Ok(Self {
            p_up,
            label_hat: u8::from(p_up >= 0.5),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdScheme {
    Forward,
    Central,
}

/// Per-model operation counts under the gate-application cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub gate_applications_per_forward: u64,
    pub parameter_count: u64,
    /// `1 + P` circuit evaluations per batch gradient (forward differences).
    pub forward_passes_per_gradient: u64,
    /// `2P` circuit evaluations per batch gradient (central differences).
    pub forward_passes_per_gradient_central: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterizedCircuit {
    pub dim: usize,
    pub wires: usize,
    pub readout_wire: usize,
    pub encoding: EncodingScheme,
    pub layers: Vec<LayerSpec>,
    pub theta: Vec<f64>,
}

/// Gate matrices resolved for one fixed `theta`; reused across a batch.
pub struct CompiledCircuit {
    dim: usize,
    wires: usize,
    readout_wire: usize,
    ops: Vec<GatePlan>,
}

impl CompiledCircuit {
    fn check_input(&self, input: &QuditRegister) -> Result<()> {
        if input.dim() != self.dim || input.wires() != self.wires {
            return Err(Error::domain(format!(
                "input register has d = {}, n = {}; circuit expects d = {}, n = {}",
                input.dim(),
                input.wires(),
                self.dim,
                self.wires
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &QuditRegister) -> Result<QuditRegister> {
        self.forward_from(input.clone(), 0)
    }

    /// Runs ops `start..` on a register that already went through `..start`.
    fn forward_from(&self, mut reg: QuditRegister, start: usize) -> Result<QuditRegister> {
        self.check_input(&reg)?;
        for op in &self.ops[start..] {
            reg.apply_plan(op)?;
        }
        Ok(reg)
    }

    /// `1 - P(readout = label)`
    pub fn loss(&self, encoded: &QuditRegister, label: u8) -> Result<f64> {
        let out = self.forward(encoded)?;
        self.readout_loss(&out, label)
    }

    fn readout_loss(&self, out: &QuditRegister, label: u8) -> Result<f64> {
        Ok(1.0 - out.marginal_probability(self.readout_wire, usize::from(label))?)
    }

    pub fn predict_encoded(&self, encoded: &QuditRegister) -> Result<Prediction> {
        let out = self.forward(encoded)?;
        let m = out.wire_marginals(self.readout_wire)?;
        Prediction::from_marginals(m[0], m[1])
    }
}

/// A sample already mapped to its input register.
#[derive(Debug, Clone)]
pub struct EncodedSample {
    pub register: QuditRegister,
    pub label: u8,
}

impl ParameterizedCircuit {
    /// Empty circuit (identity) on `wires` wires.
    pub fn empty(dim: usize, wires: usize, encoding: EncodingScheme) -> Result<Self> {
        crate::state::check_shape(dim, wires)?;
        Ok(Self {
            dim,
            wires,
            readout_wire: 0,
            encoding,
            layers: Vec::new(),
            theta: Vec::new(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        crate::state::check_shape(self.dim, self.wires)?;
        if self.readout_wire >= self.wires {
            return Err(Error::domain("readout wire out of range"));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("non-finite parameter"));
        }
        let mut seen = vec![false; self.theta.len()];
        for layer in &self.layers {
            for g in &layer.gates {
                g.validate(self.dim, self.wires, self.theta.len())?;
                match layer.kind {
                    LayerKind::RotationLayer if g.kind != GateKind::Rotation || g.slot.is_none() => {
                        return Err(Error::domain(
                            "rotation layers hold only trainable single-wire rotations",
                        ))
                    }
                    LayerKind::EntangleLayer if g.kind == GateKind::Rotation => {
                        return Err(Error::domain("entangle layers hold no single-wire rotations"))
                    }
                    _ => {}
                }
                if let Some(s) = g.slot {
                    seen[s] = true;
                }
            }
        }
        if let Some(s) = seen.iter().position(|used| !used) {
            return Err(Error::domain(format!("parameter slot {s} is never used")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let circuit: Self = serde_json::from_str(text)?;
        circuit.validate()?;
        Ok(circuit)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn parameter_count(&self) -> usize {
        self.theta.len()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Replaces `theta` with independent draws from `U(-spread, spread)`.
    pub fn randomize_theta<R: Rng + ?Sized>(&mut self, rng: &mut R, spread: f64) {
        for t in &mut self.theta {
            *t = rng.random_range(-spread..=spread);
        }
    }

    pub fn compile(&self) -> Result<CompiledCircuit> {
        self.compile_with(&self.theta)
    }

    /// Compiles against an explicit parameter vector (same length as `theta`).
    pub fn compile_with(&self, theta: &[f64]) -> Result<CompiledCircuit> {
        if theta.len() != self.theta.len() {
            return Err(Error::domain("parameter vector length mismatch"));
        }
        let (d, n) = (self.dim, self.wires);
        let mut ops = Vec::new();
        for g in self.layers.iter().flat_map(|l| &l.gates) {
            let fixed = match g.kind {
                GateKind::Hadamard => Some(gates::hadamard(d)?),
                GateKind::PauliX => Some(gates::pauli_x(d)?),
                GateKind::Cnot => Some(gates::cnot(d)?),
                GateKind::Rotation | GateKind::ControlledRotation => None,
            };
            let plan = match fixed {
                Some(gate) => GatePlan::new(d, n, &gate, &g.targets)?,
                None => {
                    let axis = g.axis.ok_or_else(|| Error::domain("rotation without axis"))?;
                    let gate = gates::rotation(axis, g.angle(theta)?, d, g.subspace_for(d))?;
                    let target = *g
                        .targets
                        .first()
                        .ok_or_else(|| Error::domain("rotation without target"))?;
                    match g.control {
                        Some(c) => GatePlan::controlled(d, n, &gate, c.wire, c.level, target)?,
                        None => GatePlan::new(d, n, &gate, &g.targets)?,
                    }
                }
            };
            ops.push(plan);
        }
        Ok(CompiledCircuit {
            dim: d,
            wires: self.wires,
            readout_wire: self.readout_wire,
            ops,
        })
    }

    pub fn forward(&self, input: &QuditRegister) -> Result<QuditRegister> {
        self.compile()?.forward(input)
    }

    pub fn encode(&self, x: &FeatureVector) -> Result<QuditRegister> {
        let reg = encode_feature_register(x, self.encoding, self.dim)?;
        if reg.wires() != self.wires {
            return Err(Error::domain(format!(
                "{} features encode to {} wires, circuit has {}",
                x.len(),
                reg.wires(),
                self.wires
            )));
        }
        Ok(reg)
    }

    pub fn encode_samples(&self, samples: &[MarketSample]) -> Result<Vec<EncodedSample>> {
        samples
            .iter()
            .map(|s| {
                Ok(EncodedSample {
                    register: self.encode(&s.features)?,
                    label: s.label,
                })
            })
            .collect()
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Prediction> {
        self.compile()?.predict_encoded(&self.encode(x)?)
    }

    pub fn fidelity_loss(&self, sample: &MarketSample) -> Result<f64> {
        check_label(sample.label)?;
        self.compile()?.loss(&self.encode(&sample.features)?, sample.label)
    }

    pub fn batch_loss(&self, samples: &[MarketSample]) -> Result<f64> {
        let encoded = self.encode_samples(samples)?;
        batch_loss_encoded(&self.compile()?, &encoded)
    }

    /// Finite-difference gradient of the mean fidelity loss over `batch`.
    pub fn finite_diff_gradient(
        &self,
        batch: &[MarketSample],
        delta: f64,
        scheme: FdScheme,
    ) -> Result<Vec<f64>> {
        let encoded = self.encode_samples(batch)?;
        Ok(self
            .gradient_encoded(&encoded, delta, scheme, false)?
            .gradient)
    }

    /// Gradient over pre-encoded samples; `parallel` fans samples out on the
    /// current rayon pool with results identical to the sequential order.
    ///
    /// Each probe circuit differs from the base circuit only from the first
    /// gate that reads the perturbed slot onward, so probes resume from the
    /// cached base state at that gate. The arithmetic is the same as
    /// evaluating every probe from scratch.
    pub fn gradient_encoded(
        &self,
        batch: &[EncodedSample],
        delta: f64,
        scheme: FdScheme,
        parallel: bool,
    ) -> Result<LossAndGradient> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::domain(format!("finite-difference step {delta} must be > 0")));
        }
        if batch.is_empty() {
            return Err(Error::domain("empty batch"));
        }
        let base = self.compile()?;
        let first_use = self.first_slot_use();
        let mut probes = Vec::new();
        for j in 0..self.theta.len() {
            let signs: &[f64] = match scheme {
                FdScheme::Forward => &[1.0],
                FdScheme::Central => &[1.0, -1.0],
            };
            for &sign in signs {
                let mut probe = self.theta.clone();
                probe[j] = self.theta[j] + sign * delta;
                probes.push((first_use[j], self.compile_with(&probe)?));
            }
        }
        let per_sample = |s: &EncodedSample| -> Result<Vec<f64>> {
            check_label(s.label)?;
            base.check_input(&s.register)?;
            let mut trace = Vec::with_capacity(base.ops.len() + 1);
            let mut reg = s.register.clone();
            for op in &base.ops {
                trace.push(reg.clone());
                reg.apply_plan(op)?;
            }
            let mut losses = Vec::with_capacity(1 + probes.len());
            losses.push(base.readout_loss(&reg, s.label)?);
            for (start, probe) in &probes {
                let resumed = match trace.get(*start) {
                    Some(cached) => probe.forward_from(cached.clone(), *start)?,
                    None => reg.clone(),
                };
                losses.push(probe.readout_loss(&resumed, s.label)?);
            }
            Ok(losses)
        };
        let rows: Vec<Vec<f64>> = if parallel {
            batch.par_iter().map(per_sample).collect::<Result<_>>()?
        } else {
            batch.iter().map(per_sample).collect::<Result<_>>()?
        };
        let m = batch.len() as f64;
        let mean = |k: usize| rows.iter().map(|r| r[k]).fold(0.0, |acc, l| acc + l) / m;
        let loss = mean(0);
        let gradient = (0..self.theta.len())
            .map(|j| match scheme {
                FdScheme::Forward => (mean(1 + j) - loss) / delta,
                FdScheme::Central => (mean(1 + 2 * j) - mean(2 + 2 * j)) / (2.0 * delta),
            })
            .collect();
        Ok(LossAndGradient { loss, gradient })
    }

    /// Index, in flattened gate order, of the first gate reading each slot.
    fn first_slot_use(&self) -> Vec<usize> {
        let mut first = vec![usize::MAX; self.theta.len()];
        for (i, g) in self.layers.iter().flat_map(|l| &l.gates).enumerate() {
            if let Some(slot) = g.slot {
                if let Some(f) = first.get_mut(slot) {
                    *f = (*f).min(i);
                }
            }
        }
        first
    }

    pub fn count_operations(&self) -> OpCounts {
        let gates: usize = self.layers.iter().map(|l| l.gates.len()).sum();
        let p = self.theta.len() as u64;
        OpCounts {
            gate_applications_per_forward: gates as u64,
            parameter_count: p,
            forward_passes_per_gradient: 1 + p,
            forward_passes_per_gradient_central: 2 * p,
        }
    }
}

fn check_label(label: u8) -> Result<()> {
    if label > 1 {
        Err(Error::domain(format!("label {label} is not binary")))
    } else {
        Ok(())
    }
}

pub fn batch_loss_encoded(circuit: &CompiledCircuit, batch: &[EncodedSample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::domain("empty batch"));
    }
    let mut total = 0.0;
    for s in batch {
        check_label(s.label)?;
        total += circuit.loss(&s.register, s.label)?;
    }
    Ok(total / batch.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGradient {
    /// Loss at the unperturbed parameters.
    pub loss: f64,
    pub gradient: Vec<f64>,
}

/// Coordinate-wise finite differences of `loss` around `theta`. `theta` is
/// only read; every probe works on its own copy.
pub fn finite_diff_gradient_fn<F>(
    theta: &[f64],
    delta: f64,
    scheme: FdScheme,
    parallel: bool,
    loss: F,
) -> Result<LossAndGradient>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("finite-difference step {delta} must be > 0")));
    }
    let base = loss(theta)?;
    let coordinate = |j: usize| -> Result<f64> {
        let mut probe = theta.to_vec();
        probe[j] = theta[j] + delta;
        let plus = loss(&probe)?;
        match scheme {
            FdScheme::Forward => Ok((plus - base) / delta),
            FdScheme::Central => {
                probe[j] = theta[j] - delta;
                let minus = loss(&probe)?;
                Ok((plus - minus) / (2.0 * delta))
            }
        }
    };
    let gradient = if parallel {
        (0..theta.len())
            .into_par_iter()
            .map(coordinate)
            .collect::<Result<Vec<_>>>()?
    } else {
        (0..theta.len()).map(coordinate).collect::<Result<Vec<_>>>()?
    };
    Ok(LossAndGradient {
        loss: base,
        gradient,
    })
}

/// Three qubits, three blocks of {RX, RZ on every wire} + ring CNOT
/// (0→1, 1→2, 2→0). Depth 6, 18 parameters, readout on wire 0.
pub fn build_qbn_ansatz() -> ParameterizedCircuit {
    const WIRES: usize = 3;
    const BLOCKS: usize = 3;
    let mut layers = Vec::with_capacity(2 * BLOCKS);
    for b in 0..BLOCKS {
        let mut rot = Vec::with_capacity(2 * WIRES);
        for q in 0..WIRES {
            let slot = b * 2 * WIRES + 2 * q;
            rot.push(GateSpec::rotation(Axis::X, slot, None, q));
            rot.push(GateSpec::rotation(Axis::Z, slot + 1, None, q));
        }
        layers.push(LayerSpec {
            kind: LayerKind::RotationLayer,
            gates: rot,
        });
        layers.push(LayerSpec {
            kind: LayerKind::EntangleLayer,
            gates: (0..WIRES)
                .map(|q| GateSpec::fixed(GateKind::Cnot, vec![q, (q + 1) % WIRES]))
                .collect(),
        });
    }
    ParameterizedCircuit {
        dim: 2,
        wires: WIRES,
        readout_wire: 0,
        encoding: EncodingScheme::Amplitude,
        layers,
        theta: vec![0.0; BLOCKS * 2 * WIRES],
    }
}

/// Five qutrits, two blocks of {R_y^(01), R_y^(12) on every wire} + ring of
/// controlled R_x^(01) sharing one angle per block, trigger level 2. Each
/// wire controls its lower neighbour, applied as 1→0, 2→1, 3→2, 4→3, 0→4,
/// so the readout wire 0 is conditioned on wire 1 in the first block.
/// Depth 4, 20 + 2 parameters, readout on wire 0.
pub fn build_qqtn_ansatz() -> ParameterizedCircuit {
    const WIRES: usize = 5;
    const BLOCKS: usize = 2;
    const TRIGGER: usize = 2;
    let rotation_slots = BLOCKS * 2 * WIRES;
    let mut layers = Vec::with_capacity(2 * BLOCKS);
    for b in 0..BLOCKS {
        let mut rot = Vec::with_capacity(2 * WIRES);
        for q in 0..WIRES {
            let slot = b * 2 * WIRES + 2 * q;
            rot.push(GateSpec::rotation(Axis::Y, slot, Some(Subspace::new(0, 1)), q));
            rot.push(GateSpec::rotation(Axis::Y, slot + 1, Some(Subspace::new(1, 2)), q));
        }
        layers.push(LayerSpec {
            kind: LayerKind::RotationLayer,
            gates: rot,
        });
        layers.push(LayerSpec {
            kind: LayerKind::EntangleLayer,
            gates: (0..WIRES)
                .map(|q| {
                    GateSpec::controlled_rotation(
                        Axis::X,
                        rotation_slots + b,
                        Some(Subspace::new(0, 1)),
                        Control {
                            wire: (q + 1) % WIRES,
                            level: TRIGGER,
                        },
                        q,
                    )
                })
                .collect(),
        });
    }
    ParameterizedCircuit {
        dim: 3,
        wires: WIRES,
        readout_wire: 0,
        encoding: EncodingScheme::Phase,
        layers,
        theta: vec![0.0; rotation_slots + BLOCKS],
    }
}
