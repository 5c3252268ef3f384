//! Unitary constructors for qubits (d = 2) and qutrits (d = 3).
//!
//! Qutrit rotations embed the usual `exp(-i θ σ/2)` block into a chosen pair of
//! levels and leave the third level untouched; `rotation(Z, θ, 3, (0,1))` is
//! `diag(e^{-iθ/2}, e^{iθ/2}, 1)`. The qutrit "Hadamard" is the 3-point Fourier
//! matrix, and CNOT generalizes to the controlled modular shift.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::Amplitude;

/// Deviation allowed in `U†U - I` (max-abs entry) at construction.
pub const UNITARITY_TOLERANCE: f64 = 1e-9;

const MAX_QFT_SIDE: usize = 256;

/// Square unitary matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GateMatrix {
    side: usize,
    entries: Vec<Amplitude>,
}

impl GateMatrix {
    /// Checks shape and unitarity.
    pub fn new(side: usize, entries: Vec<Amplitude>) -> Result<Self> {
        if side == 0 || entries.len() != side * side {
            return Err(Error::domain(format!(
                "gate needs {side}x{side} entries, got {}",
                entries.len()
            )));
        }
        let gate = Self { side, entries };
        let deviation = gate.unitarity_deviation();
        if deviation.is_nan() || deviation >= UNITARITY_TOLERANCE {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(gate)
    }

    pub fn identity(side: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); side * side];
        for i in 0..side {
            entries[i * side + i] = Complex64::new(1.0, 0.0);
        }
        Self { side, entries }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn entries(&self) -> &[Amplitude] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Amplitude {
        self.entries[row * self.side + col]
    }

    pub fn dagger(&self) -> Self {
        let n = self.side;
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                entries[c * n + r] = self.entries[r * n + c].conj();
            }
        }
        Self { side: n, entries }
    }

    /// Matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &GateMatrix) -> Result<Self> {
        if self.side != rhs.side {
            return Err(Error::domain("matmul of gates with different sides"));
        }
        let n = self.side;
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.entries[r * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..n {
                    entries[r * n + c] += a * rhs.entries[k * n + c];
                }
            }
        }
        Ok(Self { side: n, entries })
    }

    /// Largest entry-wise distance between the two matrices.
    pub fn max_abs_diff(&self, other: &GateMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(if self.side == other.side { 0.0 } else { f64::INFINITY }, f64::max)
    }

    /// `‖U†U − I‖_max`
    pub fn unitarity_deviation(&self) -> f64 {
        let n = self.side;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.entries[k * n + i].conj() * self.entries[k * n + j];
                }
                if i == j {
                    acc -= 1.0;
                }
                let dev = acc.norm();
                if dev.is_nan() {
                    return f64::NAN;
                }
                worst = worst.max(dev);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Pair of levels `(low, high)` a qudit rotation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subspace {
    pub low: usize,
    pub high: usize,
}

impl Subspace {
    pub const fn new(low: usize, high: usize) -> Self {
        Self { low, high }
    }

    fn validate(self, dim: usize) -> Result<()> {
        let ok = match dim {
            2 => self == Subspace::new(0, 1),
            3 => self.low < self.high && self.high < 3,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "subspace ({}, {}) invalid for d = {dim}",
                self.low, self.high
            )))
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::domain(format!("unsupported level count d = {dim}")))
    }
}

/// `e^{2πi·k/n}` with `k` reduced mod `n` first so large exponents stay exact.
fn root_of_unity(k: usize, n: usize) -> Complex64 {
    let k = k % n;
    if (4 * k).is_multiple_of(n) {
        // exact quarter turns
        [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ][4 * k / n]
    } else {
        Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)
    }
}

pub fn hadamard(dim: usize) -> Result<GateMatrix> {
    check_dim(dim)?;
    if dim == 2 {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        return GateMatrix::new(2, vec![h, h, h, -h]);
    }
    qft(dim, 1)
}

/// Cyclic shift `|j> -> |j+1 mod d>`.
pub fn pauli_x(dim: usize) -> Result<GateMatrix> {
    check_dim(dim)?;
    let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
    for j in 0..dim {
        entries[((j + 1) % dim) * dim + j] = Complex64::new(1.0, 0.0);
    }
    GateMatrix::new(dim, entries)
}

/// Controlled modular shift `|c, t> -> |c, t + c mod d>`; control is the
/// first wire of the pair.
pub fn cnot(dim: usize) -> Result<GateMatrix> {
    check_dim(dim)?;
    let side = dim * dim;
    let mut entries = vec![Complex64::new(0.0, 0.0); side * side];
    for c in 0..dim {
        for t in 0..dim {
            let col = c * dim + t;
            let row = c * dim + (t + c) % dim;
            entries[row * side + col] = Complex64::new(1.0, 0.0);
        }
    }
    GateMatrix::new(side, entries)
}

/// The 2x2 block `exp(-i θ σ_axis / 2)` as `[[a, b], [c, d]]`.
fn su2_block(axis: Axis, theta: f64) -> [Complex64; 4] {
    let (s, c) = (theta / 2.0).sin_cos();
    let zero = Complex64::new(0.0, 0.0);
    match axis {
        Axis::X => [
            Complex64::new(c, 0.0),
            Complex64::new(0.0, -s),
            Complex64::new(0.0, -s),
            Complex64::new(c, 0.0),
        ],
        Axis::Y => [
            Complex64::new(c, 0.0),
            Complex64::new(-s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(c, 0.0),
        ],
        Axis::Z => [
            Complex64::new(c, -s),
            zero,
            zero,
            Complex64::new(c, s),
        ],
    }
}

pub fn rotation(axis: Axis, theta: f64, dim: usize, subspace: Subspace) -> Result<GateMatrix> {
    check_dim(dim)?;
    subspace.validate(dim)?;
    if !theta.is_finite() {
        return Err(Error::domain(format!("rotation angle {theta} is not finite")));
    }
    let [a, b, c, d] = su2_block(axis, theta);
    let mut gate = GateMatrix::identity(dim);
    let (lo, hi) = (subspace.low, subspace.high);
    gate.entries[lo * dim + lo] = a;
    gate.entries[lo * dim + hi] = b;
    gate.entries[hi * dim + lo] = c;
    gate.entries[hi * dim + hi] = d;
    GateMatrix::new(dim, gate.entries)
}

/// Two-wire gate (control first) applying `rotation(..)` to the target iff
/// the control sits at `trigger_level`.
pub fn controlled_rotation(
    axis: Axis,
    theta: f64,
    dim: usize,
    subspace: Subspace,
    trigger_level: usize,
) -> Result<GateMatrix> {
    let block = rotation(axis, theta, dim, subspace)?;
    if trigger_level >= dim {
        return Err(Error::domain(format!(
            "trigger level {trigger_level} out of range for d = {dim}"
        )));
    }
    let side = dim * dim;
    let mut gate = GateMatrix::identity(side);
    let off = trigger_level * dim;
    for r in 0..dim {
        for c in 0..dim {
            gate.entries[(off + r) * side + off + c] = block.get(r, c);
        }
    }
    GateMatrix::new(side, gate.entries)
}

/// Discrete Fourier transform on `n` wires: entries `ω^{jk} / √(d^n)`,
/// `ω = e^{2πi/d^n}`.
pub fn qft(dim: usize, wires: usize) -> Result<GateMatrix> {
    check_dim(dim)?;
    let side = u32::try_from(wires)
        .ok()
        .and_then(|w| dim.checked_pow(w))
        .filter(|&s| wires >= 1 && s <= MAX_QFT_SIDE)
        .ok_or_else(|| {
            Error::domain(format!("QFT on {wires} wires of d = {dim} exceeds {MAX_QFT_SIDE}"))
        })?;
    let scale = 1.0 / (side as f64).sqrt();
    let entries = (0..side * side)
        .map(|idx| root_of_unity((idx / side) * (idx % side), side) * scale)
        .collect();
    GateMatrix::new(side, entries)
}
