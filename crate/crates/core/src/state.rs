//! Dense pure-state register over `n` wires of dimension `d`.
//!
//! Basis indices are big-endian mixed radix: wire 0 is the most significant
//! digit, so for qubits `|w0 w1 w2>` lives at `4*w0 + 2*w1 + w2`.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gates::GateMatrix;

pub type Amplitude = Complex64;

/// Norm tolerance enforced after construction and every unitary application.
pub const NORM_TOLERANCE: f64 = 1e-9;

const MAX_QUBITS: usize = 12;
const MAX_QUTRITS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct QuditRegister {
    dim: usize,
    wires: usize,
    amps: Vec<Amplitude>,
}

/// Born-rule outcome distribution over the full basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    pub probs: Vec<f64>,
}

impl ProbabilityVector {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Gate matrix with identity rows dropped and zero entries skipped.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SparseGate {
    side: usize,
    /// Columns read by at least one non-identity row.
    cols: Vec<usize>,
    /// `(row, first term, end of terms)`
    rows: Vec<(usize, usize, usize)>,
    terms: Vec<(usize, Amplitude)>,
}

impl SparseGate {
    fn new(gate: &GateMatrix) -> Self {
        let side = gate.side();
        let entries = gate.entries();
        let zero = Amplitude::new(0.0, 0.0);
        let mut rows = Vec::new();
        let mut terms = Vec::new();
        let mut used = vec![false; side];
        for r in 0..side {
            let row = &entries[r * side..(r + 1) * side];
            let identity = row
                .iter()
                .enumerate()
                .all(|(c, z)| *z == Amplitude::new(if c == r { 1.0 } else { 0.0 }, 0.0));
            if identity {
                continue;
            }
            let first = terms.len();
            for (c, z) in row.iter().enumerate().filter(|(_, z)| **z != zero) {
                terms.push((c, *z));
                used[c] = true;
            }
            rows.push((r, first, terms.len()));
        }
        Self {
            side,
            cols: (0..side).filter(|&c| used[c]).collect(),
            rows,
            terms,
        }
    }

    /// The two local levels touched, when the gate acts on at most two.
    fn pair(&self) -> Option<(usize, usize)> {
        let mut levels: Vec<usize> = self.rows.iter().map(|r| r.0).collect();
        levels.extend(&self.cols);
        levels.sort_unstable();
        levels.dedup();
        match levels.as_slice() {
            [a, b] => Some((*a, *b)),
            [a] if self.side > 1 => Some(if *a + 1 < self.side { (*a, a + 1) } else { (a - 1, *a) }),
            _ => None,
        }
    }

    #[inline]
    fn apply_at(
        &self,
        amps: &mut [Amplitude],
        base: usize,
        offsets: &[usize],
        gathered: &mut [Amplitude],
    ) {
        for &c in &self.cols {
            gathered[c] = amps[base + offsets[c]];
        }
        for &(r, first, end) in &self.rows {
            let mut acc = Amplitude::new(0.0, 0.0);
            for &(c, u) in &self.terms[first..end] {
                acc += u * gathered[c];
            }
            amps[base + offsets[r]] = acc;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kernel {
    /// 2x2 block on local levels `lo`, `hi`, row-major.
    Pair {
        lo: usize,
        hi: usize,
        m: [Amplitude; 4],
        real: bool,
    },
    Sparse(SparseGate),
}

/// A gate bound to wire positions on a register shape: the amplitude index
/// of every local-zero base, and the offset of every local basis state.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GatePlan {
    dim: usize,
    wires: usize,
    kernel: Kernel,
    bases: Vec<usize>,
    offsets: Vec<usize>,
}

fn stride_of(dim: usize, wires: usize, wire: usize) -> usize {
    dim.pow((wires - 1 - wire) as u32)
}

fn check_wire_list(wires: usize, list: &[usize]) -> Result<()> {
    for (i, &w) in list.iter().enumerate() {
        if w >= wires {
            return Err(Error::domain(format!("wire {w} out of range for {wires} wires")));
        }
        if list[..i].contains(&w) {
            return Err(Error::domain(format!("wire {w} listed twice")));
        }
    }
    Ok(())
}

impl GatePlan {
    pub(crate) fn new(dim: usize, wires: usize, gate: &GateMatrix, targets: &[usize]) -> Result<Self> {
        let len = check_shape(dim, wires)?;
        check_wire_list(wires, targets)?;
        let k = targets.len();
        if k == 0 || gate.side() != dim.pow(k as u32) {
            return Err(Error::domain(format!(
                "gate side {} does not match d^k = {dim}^{k}",
                gate.side()
            )));
        }
        let strides: Vec<usize> = targets.iter().map(|&w| stride_of(dim, wires, w)).collect();
        let offsets = (0..gate.side())
            .map(|local| {
                let mut rem = local;
                let mut off = 0;
                for &s in strides.iter().rev() {
                    off += (rem % dim) * s;
                    rem /= dim;
                }
                off
            })
            .collect();
        let bases = (0..len)
            .filter(|&i| strides.iter().all(|&s| (i / s) % dim == 0))
            .collect();
        Ok(Self {
            dim,
            wires,
            kernel: Kernel::new(gate),
            bases,
            offsets,
        })
    }

    /// Single-wire `gate` on `target`, applied where `control` is at `level`.
    pub(crate) fn controlled(
        dim: usize,
        wires: usize,
        gate: &GateMatrix,
        control: usize,
        level: usize,
        target: usize,
    ) -> Result<Self> {
        let len = check_shape(dim, wires)?;
        check_wire_list(wires, &[control, target])?;
        if gate.side() != dim || level >= dim {
            return Err(Error::domain("controlled gate does not match register"));
        }
        let cs = stride_of(dim, wires, control);
        let ts = stride_of(dim, wires, target);
        Ok(Self {
            dim,
            wires,
            kernel: Kernel::new(gate),
            bases: (0..len)
                .filter(|&i| (i / cs) % dim == level && (i / ts).is_multiple_of(dim))
                .collect(),
            offsets: (0..dim).map(|j| j * ts).collect(),
        })
    }
}

impl Kernel {
    fn new(gate: &GateMatrix) -> Self {
        let sparse = SparseGate::new(gate);
        match sparse.pair() {
            Some((lo, hi)) => {
                let m = [gate.get(lo, lo), gate.get(lo, hi), gate.get(hi, lo), gate.get(hi, hi)];
                let real = m.iter().all(|z| z.im == 0.0);
                Kernel::Pair { lo, hi, m, real }
            }
            None => Kernel::Sparse(sparse),
        }
    }
}

pub(crate) fn check_shape(dim: usize, wires: usize) -> Result<usize> {
    let max_wires = match dim {
        2 => MAX_QUBITS,
        3 => MAX_QUTRITS,
        _ => return Err(Error::domain(format!("unsupported level count d = {dim}"))),
    };
    if wires == 0 || wires > max_wires {
        return Err(Error::domain(format!(
            "wire count {wires} outside 1..={max_wires} for d = {dim}"
        )));
    }
    Ok(dim.pow(wires as u32))
}

impl QuditRegister {
    pub fn basis_state(dim: usize, wires: usize, index: usize) -> Result<Self> {
        let len = check_shape(dim, wires)?;
        if index >= len {
            return Err(Error::domain(format!(
                "basis index {index} out of range for {len} amplitudes"
            )));
        }
        let mut amps = vec![Amplitude::new(0.0, 0.0); len];
        amps[index] = Amplitude::new(1.0, 0.0);
        Ok(Self { dim, wires, amps })
    }

    /// Builds a register from explicit amplitudes. The vector must already be
    /// normalized to within [`NORM_TOLERANCE`].
    pub fn from_amplitudes(dim: usize, wires: usize, amps: Vec<Amplitude>) -> Result<Self> {
        let len = check_shape(dim, wires)?;
        if amps.len() != len {
            return Err(Error::domain(format!(
                "expected {len} amplitudes, got {}",
                amps.len()
            )));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::domain("non-finite amplitude"));
        }
        let reg = Self { dim, wires, amps };
        let norm = reg.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::domain(format!("register not normalized: |psi|^2 = {norm}")));
        }
        Ok(reg)
    }

    /// Scales an arbitrary non-zero vector to unit norm. Never applied implicitly.
    pub fn renormalized(dim: usize, wires: usize, mut amps: Vec<Amplitude>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Encoding(format!("cannot normalize vector of norm {norm}")));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Self::from_amplitudes(dim, wires, amps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn wires(&self) -> usize {
        self.wires
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn stride(&self, wire: usize) -> usize {
        self.dim.pow((self.wires - 1 - wire) as u32)
    }

    fn digit(&self, index: usize, wire: usize) -> usize {
        (index / self.stride(wire)) % self.dim
    }

    /// Tensor product `self ⊗ other`; `self` occupies the leading wires.
    pub fn tensor(&self, other: &QuditRegister) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::domain("tensor product of registers with different d"));
        }
        let wires = self.wires + other.wires;
        check_shape(self.dim, wires)?;
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Ok(Self {
            dim: self.dim,
            wires,
            amps,
        })
    }

    /// Applies `gate` to the listed wires (first listed wire is the most
    /// significant digit of the gate's local index) and returns the new state.
    pub fn apply_unitary(&self, gate: &GateMatrix, wires: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.apply_in_place(gate, wires)?;
        Ok(out)
    }

    pub(crate) fn apply_in_place(&mut self, gate: &GateMatrix, wires: &[usize]) -> Result<()> {
        let plan = GatePlan::new(self.dim, self.wires, gate, wires)?;
        self.apply_plan(&plan)
    }

    /// Applies a single-wire `target_gate` only on the slice where `control`
    /// sits at `level`. Equivalent to the block-diagonal two-wire matrix but
    /// touches a `1/d` fraction of the amplitudes.
    #[cfg(test)]
    pub(crate) fn apply_controlled_in_place(
        &mut self,
        target_gate: &GateMatrix,
        control: usize,
        level: usize,
        target: usize,
    ) -> Result<()> {
        let plan =
            GatePlan::controlled(self.dim, self.wires, target_gate, control, level, target)?;
        self.apply_plan(&plan)
    }

    pub(crate) fn apply_plan(&mut self, plan: &GatePlan) -> Result<()> {
        if plan.dim != self.dim || plan.wires != self.wires {
            return Err(Error::domain("gate plan was built for a different register"));
        }
        match &plan.kernel {
            Kernel::Pair { lo, hi, m, real } => {
                let (lo, hi) = (plan.offsets[*lo], plan.offsets[*hi]);
                if *real {
                    let [a, b, c, d] = m.map(|z| z.re);
                    for &base in &plan.bases {
                        let (x, y) = (self.amps[base + lo], self.amps[base + hi]);
                        self.amps[base + lo] = x * a + y * b;
                        self.amps[base + hi] = x * c + y * d;
                    }
                } else {
                    let [a, b, c, d] = *m;
                    for &base in &plan.bases {
                        let (x, y) = (self.amps[base + lo], self.amps[base + hi]);
                        self.amps[base + lo] = a * x + b * y;
                        self.amps[base + hi] = c * x + d * y;
                    }
                }
            }
            Kernel::Sparse(gate) => {
                let mut gathered = vec![Amplitude::new(0.0, 0.0); gate.side];
                for &base in &plan.bases {
                    gate.apply_at(&mut self.amps, base, &plan.offsets, &mut gathered);
                }
            }
        }
        Ok(())
    }

    pub fn born_probabilities(&self) -> ProbabilityVector {
        ProbabilityVector {
            probs: self.amps.iter().map(|a| a.norm_sqr()).collect(),
        }
    }

    /// Probability that `wire` is found in `level`, summed over all other wires.
    pub fn marginal_probability(&self, wire: usize, level: usize) -> Result<f64> {
        if wire >= self.wires || level >= self.dim {
            return Err(Error::domain(format!(
                "wire {wire} / level {level} out of range for {} wires of d = {}",
                self.wires, self.dim
            )));
        }
        let stride = self.stride(wire);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (i / stride) % self.dim == level)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// All `d` marginals of one wire in a single sweep.
    pub fn wire_marginals(&self, wire: usize) -> Result<Vec<f64>> {
        if wire >= self.wires {
            return Err(Error::domain(format!("wire {wire} out of range")));
        }
        let stride = self.stride(wire);
        let mut out = vec![0.0; self.dim];
        for (i, a) in self.amps.iter().enumerate() {
            out[(i / stride) % self.dim] += a.norm_sqr();
        }
        Ok(out)
    }

    /// Overlap probability `|<a|b>|^2`.
    pub fn fidelity(&self, other: &QuditRegister) -> Result<f64> {
        if self.dim != other.dim || self.wires != other.wires {
            return Err(Error::domain("fidelity of registers with different shapes"));
        }
        let inner: Amplitude = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(inner.norm_sqr())
    }

    /// Draws one basis index from the Born distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_nonzero = 0;
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p > 0.0 {
                last_nonzero = i;
            }
            acc += p;
            if u < acc {
                return i;
            }
        }
        // u landed in the rounding gap above the cumulative sum
        last_nonzero
    }

    /// Formats a basis index as its wire digits, e.g. `|012>`.
    pub fn ket_label(&self, index: usize) -> String {
        let digits: String = (0..self.wires)
            .map(|w| char::from_digit(self.digit(index, w) as u32, 10).unwrap_or('?'))
            .collect();
        format!("|{digits}>")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Amplitude {
        Amplitude::new(re, im)
    }

    #[test]
    fn basis_states() {
        let r = QuditRegister::basis_state(2, 1, 0).unwrap();
        assert_eq!(r.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)]);
        let r = QuditRegister::basis_state(3, 1, 2).unwrap();
        assert_eq!(r.amplitudes(), &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let r = QuditRegister::basis_state(2, 3, 5).unwrap();
        assert_eq!(r.len(), 8);
        assert_eq!(r.amplitudes()[5], c(1.0, 0.0));
        assert!(matches!(
            QuditRegister::basis_state(2, 2, 4),
            Err(Error::Domain(_))
        ));
        assert!(QuditRegister::basis_state(4, 1, 0).is_err());
        assert!(QuditRegister::basis_state(3, 9, 0).is_err());
    }

    #[test]
    fn x_and_h_on_zero() {
        let zero = QuditRegister::basis_state(2, 1, 0).unwrap();
        let one = zero.apply_unitary(&gates::pauli_x(2).unwrap(), &[0]).unwrap();
        assert_eq!(one.amplitudes()[1], c(1.0, 0.0));
        let plus = zero.apply_unitary(&gates::hadamard(2).unwrap(), &[0]).unwrap();
        for a in plus.amplitudes() {
            assert!((a - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn qutrit_rz_pi_on_zero_is_minus_i() {
        let zero = QuditRegister::basis_state(3, 1, 0).unwrap();
        let rz = gates::rotation(gates::Axis::Z, PI, 3, gates::Subspace::new(0, 1)).unwrap();
        let out = zero.apply_unitary(&rz, &[0]).unwrap();
        assert!((out.amplitudes()[0] - c(0.0, -1.0)).norm() < 1e-15);
        assert!(out.amplitudes()[1].norm() < 1e-15);
        assert!(out.amplitudes()[2].norm() < 1e-15);
    }

    #[test]
    fn apply_rejects_bad_wires() {
        let r = QuditRegister::basis_state(2, 2, 0).unwrap();
        let cx = gates::cnot(2).unwrap();
        assert!(r.apply_unitary(&cx, &[0, 0]).is_err());
        assert!(r.apply_unitary(&cx, &[0, 2]).is_err());
        assert!(r.apply_unitary(&cx, &[0]).is_err());
        let q = QuditRegister::basis_state(3, 2, 0).unwrap();
        assert!(q.apply_unitary(&cx, &[0, 1]).is_err());
    }

    #[test]
    fn gate_wire_order_is_big_endian() {
        // CNOT with control on wire 1, target on wire 0: |01> -> |11>
        let r = QuditRegister::basis_state(2, 2, 0b01).unwrap();
        let out = r.apply_unitary(&gates::cnot(2).unwrap(), &[1, 0]).unwrap();
        assert_eq!(out.amplitudes()[0b11], c(1.0, 0.0));
    }

    #[test]
    fn born_examples() {
        let plus = QuditRegister::from_amplitudes(
            2,
            1,
            vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)],
        )
        .unwrap();
        let p = plus.born_probabilities();
        assert!((p.probs[0] - 0.5).abs() < 1e-15 && (p.probs[1] - 0.5).abs() < 1e-15);

        let two = QuditRegister::basis_state(3, 1, 2).unwrap();
        assert_eq!(two.born_probabilities().probs, vec![0.0, 0.0, 1.0]);

        // printed amplitudes are rounded, so renormalize before asking for probabilities
        let printed =
            QuditRegister::renormalized(2, 1, vec![c(0.832, 0.0), c(0.554, 0.0)]).unwrap();
        let p = printed.born_probabilities();
        assert!((p.probs[0] - 0.692).abs() < 1e-3);
        assert!((p.probs[1] - 0.307).abs() < 1e-3);
    }

    #[test]
    fn marginal_examples() {
        let r = QuditRegister::basis_state(2, 2, 0b01).unwrap();
        assert_eq!(r.marginal_probability(1, 1).unwrap(), 1.0);
        assert_eq!(r.marginal_probability(0, 1).unwrap(), 0.0);
        let uniform = QuditRegister::from_amplitudes(2, 2, vec![c(0.5, 0.0); 4]).unwrap();
        assert!((uniform.marginal_probability(0, 0).unwrap() - 0.5).abs() < 1e-15);
        assert!(uniform.marginal_probability(2, 0).is_err());
        assert!(uniform.marginal_probability(0, 2).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let zero = QuditRegister::basis_state(2, 1, 0).unwrap();
        let one = QuditRegister::basis_state(2, 1, 1).unwrap();
        let plus = zero.apply_unitary(&gates::hadamard(2).unwrap(), &[0]).unwrap();
        assert!((zero.fidelity(&zero).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(zero.fidelity(&one).unwrap(), 0.0);
        assert!((zero.fidelity(&plus).unwrap() - 0.5).abs() < 1e-15);
        let q = QuditRegister::basis_state(3, 1, 0).unwrap();
        assert!(zero.fidelity(&q).is_err());
    }

    #[test]
    fn sampling() {
        let one = QuditRegister::basis_state(2, 1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..100).all(|_| one.sample(&mut rng) == 1));

        let plus = QuditRegister::from_amplitudes(
            2,
            1,
            vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let zeros = (0..10_000).filter(|_| plus.sample(&mut rng) == 0).count();
        // 3 sigma of Binomial(10^4, 1/2) is 0.015
        assert!((zeros as f64 / 1e4 - 0.5).abs() < 0.02, "{zeros}");

        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| plus.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
    }

    #[test]
    fn controlled_kernel_matches_full_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in [2usize, 3] {
            let wires = 3;
            let len = dim.pow(wires as u32);
            let amps: Vec<_> = (0..len)
                .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let reg = QuditRegister::renormalized(dim, wires, amps).unwrap();
            let sub = gates::Subspace::new(0, 1);
            let level = dim - 1;
            let full =
                gates::controlled_rotation(gates::Axis::X, 0.7, dim, sub, level).unwrap();
            let single = gates::rotation(gates::Axis::X, 0.7, dim, sub).unwrap();
            for (ctl, tgt) in [(0, 1), (2, 0), (1, 2)] {
                let expected = reg.apply_unitary(&full, &[ctl, tgt]).unwrap();
                let mut got = reg.clone();
                got.apply_controlled_in_place(&single, ctl, level, tgt).unwrap();
                for (a, b) in got.amplitudes().iter().zip(expected.amplitudes()) {
                    assert!((a - b).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn ket_labels() {
        let r = QuditRegister::basis_state(3, 3, 5).unwrap();
        assert_eq!(r.ket_label(5), "|012>");
    }
}
