//! The shared entangled resource, Alice's encoding and Bob's first decoding
//! step.
//!
//! After the GXOR gate the encoded state factorizes as `|α_j⟩|k⟩`, so the
//! `k` half of the message is read off system 2 with certainty and only the
//! symmetric family `{|α_j⟩}` on system 1 remains to be discriminated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{gxor, pauli_x_inv, pauli_z};
use crate::tensor::{apply, c, project_subsystem, root_of_unity, subsystem_probabilities, Ket, Operator, Subsystem, C64};

/// Smallest coefficient accepted as nonzero.
pub const COEFF_TOL: f64 = 1e-12;
/// Squared coefficients closer than this are one multiplicity class.
pub const MULTIPLICITY_TOL: f64 = 1e-9;
const NORM_TOL: f64 = 1e-10;

/// Schmidt form `Σ_l a_l |l⟩₁|l⟩₂` of the shared state, with bases aligned to
/// the computational basis. Coefficient order is kept as given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchmidtSpec", into = "SchmidtSpec")]
pub struct SchmidtState {
    d1: usize,
    d2: usize,
    coeffs: Vec<f64>,
    a_min: f64,
    mu: usize,
}

/// JSON form: `{"d1": 3, "d2": 4, "coeffs": [...], "squared": false}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchmidtSpec {
    pub d1: usize,
    pub d2: usize,
    pub coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub squared: bool,
}

impl TryFrom<SchmidtSpec> for SchmidtState {
    type Error = Error;

    fn try_from(spec: SchmidtSpec) -> Result<Self> {
        if spec.squared {
            SchmidtState::from_squared(spec.d1, spec.d2, &spec.coeffs)
        } else {
            SchmidtState::new(spec.d1, spec.d2, spec.coeffs)
        }
    }
}

impl From<SchmidtState> for SchmidtSpec {
    fn from(s: SchmidtState) -> Self {
        SchmidtSpec {
            d1: s.d1,
            d2: s.d2,
            coeffs: s.coeffs,
            squared: false,
        }
    }
}

/// Smallest coefficient over the entries above [`COEFF_TOL`] and how many
/// entries share it.
pub(crate) fn min_and_multiplicity(coeffs: &[f64]) -> (f64, usize) {
    let min = coeffs
        .iter()
        .copied()
        .filter(|&a| a > COEFF_TOL)
        .fold(f64::INFINITY, f64::min);
    let mu = coeffs
        .iter()
        .filter(|&&a| a > COEFF_TOL && (a * a - min * min).abs() <= MULTIPLICITY_TOL)
        .count();
    (min, mu)
}

impl SchmidtState {
    pub fn new(d1: usize, d2: usize, coeffs: Vec<f64>) -> Result<Self> {
        if d1 < 2 || d2 < 2 {
            return Err(Error::InvalidDimension(format!(
                "local dimensions must be at least 2, got ({d1}, {d2})"
            )));
        }
        if coeffs.is_empty() {
            return Err(Error::InvalidCoefficients("no coefficients".into()));
        }
        if coeffs.len() > d1.min(d2) {
            return Err(Error::InvalidCoefficients(format!(
                "Schmidt rank {} exceeds min(d1, d2) = {}",
                coeffs.len(),
                d1.min(d2)
            )));
        }
        if let Some(bad) = coeffs.iter().find(|&&a| !a.is_finite() || a < COEFF_TOL) {
            return Err(Error::InvalidCoefficients(format!(
                "coefficient {bad} is not strictly positive"
            )));
        }
        let norm: f64 = coeffs.iter().map(|a| a * a).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidCoefficients(format!(
                "squared coefficients sum to {norm}"
            )));
        }
        let (a_min, mu) = min_and_multiplicity(&coeffs);
        Ok(Self {
            d1,
            d2,
            coeffs,
            a_min,
            mu,
        })
    }

    /// Builds the state from squared coefficients `a_l²`.
    pub fn from_squared(d1: usize, d2: usize, squared: &[f64]) -> Result<Self> {
        if let Some(bad) = squared.iter().find(|&&p| p.is_nan() || p < 0.0) {
            return Err(Error::InvalidCoefficients(format!("negative weight {bad}")));
        }
        Self::new(d1, d2, squared.iter().map(|p| p.sqrt()).collect())
    }

    /// Maximally entangled state of rank `rank`.
    pub fn uniform(d1: usize, d2: usize, rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidCoefficients("rank must be positive".into()));
        }
        Self::new(d1, d2, vec![1.0 / (rank as f64).sqrt(); rank])
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    /// Schmidt rank `D`.
    pub fn rank(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn squared(&self) -> Vec<f64> {
        self.coeffs.iter().map(|a| a * a).collect()
    }

    pub fn a_min(&self) -> f64 {
        self.a_min
    }

    /// Multiplicity `μ` of the smallest coefficient.
    pub fn multiplicity(&self) -> usize {
        self.mu
    }

    pub fn is_uniform(&self) -> bool {
        self.mu == self.rank()
    }

    /// Number of messages `d2·D`.
    pub fn message_count(&self) -> usize {
        self.d2 * self.rank()
    }

    pub fn messages(&self) -> impl Iterator<Item = Message> + '_ {
        (0..self.rank()).flat_map(move |j| (0..self.d2).map(move |k| Message { j, k }))
    }

    pub fn message(&self, j: usize, k: usize) -> Result<Message> {
        if j >= self.rank() || k >= self.d2 {
            return Err(Error::MessageOutOfRange {
                j,
                k,
                rank: self.rank(),
                d2: self.d2,
            });
        }
        Ok(Message { j, k })
    }
}

/// Message `(j, k)`: `j` rides on the phase, `k` on the shift.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Message {
    pub j: usize,
    pub k: usize,
}

impl Message {
    /// Row-major index `j·d2 + k`.
    pub fn index(&self, d2: usize) -> usize {
        self.j * d2 + self.k
    }

    pub fn from_index(index: usize, d2: usize) -> Self {
        Message {
            j: index / d2,
            k: index % d2,
        }
    }
}

/// `Σ_l c_l e^{2πijl/P}|l⟩` embedded in a `dim`-level space, with period
/// `P = coeffs.len()`.
pub fn symmetric_ket(coeffs: &[f64], dim: usize, j: usize) -> Result<Ket> {
    if coeffs.len() > dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: coeffs.len(),
        });
    }
    let period = coeffs.len();
    let mut amps = vec![c(0.0); dim];
    for (l, &a) in coeffs.iter().enumerate() {
        amps[l] = root_of_unity((j * l) as i64, period) * a;
    }
    Ket::new(amps)
}

/// `Σ_l a_l |l⟩|l⟩` on `d1 ⊗ d2`.
pub fn resource_state(s: &SchmidtState) -> Ket {
    let d2 = s.d2;
    let mut amps = vec![c(0.0); s.d1 * d2];
    for (l, &a) in s.coeffs.iter().enumerate() {
        amps[l * d2 + l] = c(a);
    }
    Ket::new(amps).expect("nonempty resource")
}

/// `I ⊗ X^{-k} Z^j` acting on the resource.
pub fn encoding_operator(s: &SchmidtState, m: Message) -> Result<Operator> {
    s.message(m.j, m.k)?;
    let shift = pauli_x_inv(s.d2)?.pow(m.k as u32)?;
    let local = if s.rank() >= 2 {
        shift.matmul(&pauli_z(s.rank(), s.d2)?.pow(m.j as u32)?)?
    } else {
        shift
    };
    Ok(Operator::identity(s.d1).kron(&local))
}

/// `|Ψ_jk⟩ = (I ⊗ X^{-k} Z^j)|Ψ⟩`.
pub fn encode(s: &SchmidtState, m: Message) -> Result<Ket> {
    apply(&encoding_operator(s, m)?, &resource_state(s))
}

/// `|α_j⟩ = Σ_l a_l e^{2πijl/D}|l⟩` in the `d1`-level space.
pub fn symmetric_state(s: &SchmidtState, j: usize) -> Result<Ket> {
    if j >= s.rank() {
        return Err(Error::IndexOutOfRange {
            index: j,
            bound: s.rank(),
        });
    }
    symmetric_ket(&s.coeffs, s.d1, j)
}

/// GXOR followed by a computational-basis readout of system 2. On a valid
/// encoded state the readout is deterministic and yields `(k, |α_j⟩)`.
pub fn decode_split(state: &Ket, s: &SchmidtState) -> Result<(usize, Ket)> {
    let dims = (s.d1, s.d2);
    let after = apply(&gxor(s.d1, s.d2)?, state)?;
    let probs = subsystem_probabilities(&after, dims, Subsystem::B)?;
    let k = probs
        .iter()
        .position(|&p| p >= 1.0 - 1e-9)
        .ok_or(Error::NotEncodedState)?;
    let (_, system1) = project_subsystem(&after, dims, Subsystem::B, k)?;
    Ok((k, system1))
}

/// Overlap `⟨α_m|α_j⟩ = Σ_l a_l² e^{2πi(j−m)l/D}` in closed form.
pub fn symmetric_overlap(coeffs: &[f64], m: usize, j: usize) -> C64 {
    let period = coeffs.len();
    coeffs
        .iter()
        .enumerate()
        .map(|(l, a)| root_of_unity((j as i64 - m as i64) * l as i64, period) * (a * a))
        .sum()
}
