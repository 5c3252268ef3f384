//! Classical feature vectors into quantum registers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{self, Axis, Subspace};
use crate::state::{Amplitude, QuditRegister};

/// Normalized features, every entry finite and in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::domain(format!("feature {i} = {v} is outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(x: FeatureVector) -> Self {
        x.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingScheme {
    Amplitude,
    Phase,
}

/// Zero-pads `x` to `d^n` entries and L2-normalizes it into real amplitudes.
pub fn amplitude_encode(x: &FeatureVector, dim: usize, wires: usize) -> Result<QuditRegister> {
    let capacity = crate::state::check_shape(dim, wires)?;
    if x.len() > capacity {
        return Err(Error::Capacity {
            features: x.len(),
            capacity,
        });
    }
    if x.values().iter().all(|&v| v == 0.0) {
        return Err(Error::Encoding(
            "all-zero feature vector has no amplitude encoding".into(),
        ));
    }
    let mut amps = vec![Amplitude::new(0.0, 0.0); capacity];
    for (a, &v) in amps.iter_mut().zip(x.values()) {
        a.re = v;
    }
    QuditRegister::renormalized(dim, wires, amps)
}

fn check_unit(v: f64) -> Result<()> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("phase-encoded value {v} is outside [0, 1]")))
    }
}

/// `cos(πv/2)|0> + sin(πv/2)|1>`
pub fn phase_encode_qubit(v: f64) -> Result<QuditRegister> {
    check_unit(v)?;
    let (s, c) = (PI * v / 2.0).sin_cos();
    QuditRegister::from_amplitudes(2, 1, vec![Amplitude::new(c, 0.0), Amplitude::new(s, 0.0)])
}

/// `R_y^{(12)}(πv) · R_y^{(01)}(πv) |0>`, which spreads `v ∈ (0,1)` over all
/// three levels and reduces to `|0>` at `v = 0`.
pub fn phase_encode_qutrit(v: f64) -> Result<QuditRegister> {
    check_unit(v)?;
    let angle = PI * v;
    let first = gates::rotation(Axis::Y, angle, 3, Subspace::new(0, 1))?;
    let second = gates::rotation(Axis::Y, angle, 3, Subspace::new(1, 2))?;
    let mut reg = QuditRegister::basis_state(3, 1, 0)?;
    reg.apply_in_place(&first, &[0])?;
    reg.apply_in_place(&second, &[0])?;
    Ok(reg)
}

/// Smallest `n` with `dim^n >= features`.
pub fn wires_for(features: usize, dim: usize) -> usize {
    let mut n = 1;
    while dim.pow(n as u32) < features {
        n += 1;
    }
    n
}

/// Encodes a whole feature vector. Amplitude encoding packs all features into
/// `ceil(log2 f)` qubits; phase encoding uses one wire per feature.
pub fn encode_feature_register(
    x: &FeatureVector,
    scheme: EncodingScheme,
    dim: usize,
) -> Result<QuditRegister> {
    match scheme {
        EncodingScheme::Amplitude => {
            if dim != 2 {
                return Err(Error::domain("amplitude encoding is defined for qubits only"));
            }
            amplitude_encode(x, 2, wires_for(x.len(), 2))
        }
        EncodingScheme::Phase => {
            let encode: fn(f64) -> Result<QuditRegister> = match dim {
                2 => phase_encode_qubit,
                3 => phase_encode_qutrit,
                _ => return Err(Error::domain(format!("unsupported level count d = {dim}"))),
            };
            let mut values = x.values().iter();
            let first = values
                .next()
                .ok_or_else(|| Error::Encoding("empty feature vector".into()))?;
            values.try_fold(encode(*first)?, |acc, &v| acc.tensor(&encode(v)?))
        }
    }
}

/// One-hot basis state for `symbol`.
pub fn basis_encode(symbol: usize, dim: usize, wires: usize) -> Result<QuditRegister> {
    QuditRegister::basis_state(dim, wires, symbol)
}

/// `QFT |symbol>`
pub fn qft_encode(symbol: usize, dim: usize, wires: usize) -> Result<QuditRegister> {
    let reg = basis_encode(symbol, dim, wires)?;
    let all: Vec<usize> = (0..wires).collect();
    reg.apply_unitary(&gates::qft(dim, wires)?, &all)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn amplitude_worked_example() {
        let reg = amplitude_encode(&fv(&[0.6, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]), 2, 3).unwrap();
        let a = reg.amplitudes();
        assert!((a[0].re - 0.832).abs() < 1e-3);
        assert!((a[1].re - 0.554).abs() < 1e-3);
        assert!(a[2..].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn amplitude_examples() {
        let reg = amplitude_encode(&fv(&[1.0, 0.0, 0.0, 0.0, 0.0]), 2, 3).unwrap();
        assert_eq!(reg, QuditRegister::basis_state(2, 3, 0).unwrap());
        let reg = amplitude_encode(&fv(&[0.3, 0.4]), 2, 1).unwrap();
        assert!((reg.amplitudes()[0].re - 0.6).abs() < 1e-15);
        assert!((reg.amplitudes()[1].re - 0.8).abs() < 1e-15);
        assert!(matches!(
            amplitude_encode(&fv(&[0.0, 0.0]), 2, 1),
            Err(Error::Encoding(_))
        ));
        assert!(matches!(
            amplitude_encode(&fv(&[0.1, 0.2, 0.3]), 2, 1),
            Err(Error::Capacity { features: 3, capacity: 2 })
        ));
    }

    #[test]
    fn feature_vector_range() {
        assert!(FeatureVector::new(vec![0.5, 1.5]).is_err());
        assert!(FeatureVector::new(vec![f64::NAN]).is_err());
        assert!(serde_json::from_str::<FeatureVector>("[0.2, -0.1]").is_err());
    }

    #[test]
    fn qubit_phase_endpoints() {
        assert!((phase_encode_qubit(0.0).unwrap().amplitudes()[0].re - 1.0).abs() < 1e-15);
        assert!((phase_encode_qubit(1.0).unwrap().amplitudes()[1].re - 1.0).abs() < 1e-15);
        let half = phase_encode_qubit(0.5).unwrap();
        let r = 2f64.sqrt() / 2.0;
        assert!((half.amplitudes()[0].re - r).abs() < 1e-15);
        assert!((half.amplitudes()[1].re - r).abs() < 1e-15);
        assert!(phase_encode_qubit(1.01).is_err());
        assert!(phase_encode_qutrit(-0.1).is_err());
    }

    #[test]
    fn qutrit_phase_matches_dense_product() {
        assert_eq!(
            phase_encode_qutrit(0.0).unwrap(),
            QuditRegister::basis_state(3, 1, 0).unwrap()
        );
        // explicit 3x3 product against (1, 0, 0) at v = 0.5, angle π/2
        let (s, c) = (std::f64::consts::FRAC_PI_4.sin(), std::f64::consts::FRAC_PI_4.cos());
        let r01 = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
        let r12 = [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]];
        let after_first: Vec<f64> = (0..3).map(|i| r01[i][0]).collect();
        let expected: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|k| r12[i][k] * after_first[k]).sum())
            .collect();
        let got = phase_encode_qutrit(0.5).unwrap();
        for (a, e) in got.amplitudes().iter().zip(&expected) {
            assert!((a.re - e).abs() < 1e-15 && a.im.abs() < 1e-15);
        }
        assert!((got.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn feature_register_examples() {
        let zeros = encode_feature_register(&fv(&[0.0; 5]), EncodingScheme::Phase, 3).unwrap();
        assert_eq!(zeros, QuditRegister::basis_state(3, 5, 0).unwrap());
        let ones = encode_feature_register(&fv(&[1.0; 5]), EncodingScheme::Phase, 2).unwrap();
        assert!((ones.amplitudes()[31].re - 1.0).abs() < 1e-12);
        let amp =
            encode_feature_register(&fv(&[0.6, 0.4, 0.0, 0.0, 0.0]), EncodingScheme::Amplitude, 2)
                .unwrap();
        assert_eq!(amp.wires(), 3);
        assert!((amp.amplitudes()[0].re - 0.832).abs() < 1e-3);
        assert!(encode_feature_register(&fv(&[0.5]), EncodingScheme::Amplitude, 3).is_err());
        assert!(encode_feature_register(&fv(&[]), EncodingScheme::Phase, 3).is_err());
    }

    #[test]
    fn basis_and_qft_examples() {
        let r = basis_encode(1, 3, 2).unwrap();
        assert_eq!(r.ket_label(1), "|01>");
        assert_eq!(r.amplitudes()[1].re, 1.0);
        assert_eq!(basis_encode(3, 2, 2).unwrap().amplitudes()[3].re, 1.0);
        assert!(basis_encode(4, 2, 2).is_err());

        let q = qft_encode(1, 2, 2).unwrap();
        let expected = [(0.5, 0.0), (0.0, 0.5), (-0.5, 0.0), (0.0, -0.5)];
        for (a, (re, im)) in q.amplitudes().iter().zip(expected) {
            assert!((a.re - re).abs() < 1e-15 && (a.im - im).abs() < 1e-15);
        }
        for symbol in 0..9 {
            let q = qft_encode(symbol, 3, 2).unwrap();
            for p in q.born_probabilities().probs {
                assert!((p - 1.0 / 9.0).abs() < 1e-12);
            }
        }
        assert!(qft_encode(9, 3, 2).is_err());
    }
}
