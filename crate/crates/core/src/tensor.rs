//! Dense complex linear algebra on small Hilbert spaces.
//!
//! [`Ket`] and [`Operator`] are thin wrappers over `nalgebra` vectors and
//! matrices. [`Measurement`] is a validated POVM whose outcomes carry an
//! [`Outcome`] label. Sampling helpers draw from explicit, seedable
//! generators so Monte Carlo runs replay bit-for-bit.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entrywise tolerance for unitarity, hermiticity and POVM completeness.
pub const OPERATOR_TOL: f64 = 1e-10;
/// Tolerance on the total of a probability vector.
pub const PROBABILITY_SUM_TOL: f64 = 1e-9;
/// Largest rounding excursion outside [0, 1] that is silently clipped.
pub const PROBABILITY_CLIP_TOL: f64 = 1e-10;

pub type C64 = Complex64;

#[inline]
pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `exp(2πi·num/den)`.
#[inline]
pub fn root_of_unity(num: i64, den: usize) -> C64 {
    let theta = 2.0 * std::f64::consts::PI * (num.rem_euclid(den as i64) as f64) / den as f64;
    C64::from_polar(1.0, theta)
}

/// Clips a Born probability to [0, 1], rejecting excursions larger than
/// rounding noise.
pub fn clip_probability(p: f64) -> Result<f64> {
    if !(-PROBABILITY_CLIP_TOL..=1.0 + PROBABILITY_CLIP_TOL).contains(&p) {
        return Err(Error::InvalidProbabilities(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    amps: DVector<C64>,
}

impl Ket {
    /// Wraps raw amplitudes without normalizing.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidDimension("ket dimension must be positive".into()));
        }
        Ok(Self {
            amps: DVector::from_vec(amps),
        })
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let mut k = Self::new(amps)?;
        let n = k.norm_sqr();
        if n <= f64::MIN_POSITIVE || !n.is_finite() {
            return Err(Error::NotNormalized(n));
        }
        k.amps /= c(n.sqrt());
        Ok(k)
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&a| c(a)).collect())
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("ket dimension must be positive".into()));
        }
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, bound: dim });
        }
        let mut amps = DVector::zeros(dim);
        amps[index] = c(1.0);
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }


    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// Largest entrywise distance, for approximate comparisons.
    pub fn max_abs_diff(&self, other: &Ket) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Fidelity-style check: equal up to a global phase.
    pub fn equal_up_to_phase(&self, other: &Ket, tol: f64) -> bool {
        match self.inner(other) {
            Ok(ov) => {
                let n = (self.norm_sqr() * other.norm_sqr()).sqrt();
                (ov.norm() - n).abs() <= tol
            }
            Err(_) => false,
        }
    }
}

/// `a ⊗ b`, with amplitude `a_i b_j` at index `i·b.dim + j`.
pub fn tensor(a: &Ket, b: &Ket) -> Ket {
    let (da, db) = (a.dim(), b.dim());
    let amps = DVector::from_fn(da * db, |idx, _| a.amps[idx / db] * b.amps[idx % db]);
    Ket { amps }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
}

impl Operator {
    pub fn from_fn(dim_out: usize, dim_in: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        Self {
            m: DMatrix::from_fn(dim_out, dim_in, f),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim_out: usize, dim_in: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim_out, dim_in),
        }
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(entries)),
        }
    }

    /// `|ket⟩⟨bra|`.
    pub fn outer(ket: &Ket, bra: &Ket) -> Self {
        Self {
            m: &ket.amps * bra.amps.adjoint(),
        }
    }

    /// Rank-one projector onto a normalized ket.
    pub fn projector(ket: &Ket) -> Self {
        Self::outer(ket, ket)
    }

    pub fn dim_out(&self) -> usize {
        self.m.nrows()
    }

    pub fn dim_in(&self) -> usize {
        self.m.ncols()
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    pub fn matmul(&self, rhs: &Operator) -> Result<Self> {
        check_dim(self.dim_in(), rhs.dim_out())?;
        Ok(Self { m: &self.m * &rhs.m })
    }

    pub fn add(&self, rhs: &Operator) -> Result<Self> {
        check_dim(self.dim_out(), rhs.dim_out())?;
        check_dim(self.dim_in(), rhs.dim_in())?;
        Ok(Self { m: &self.m + &rhs.m })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            m: &self.m * factor,
        }
    }

    /// Integer power of a square operator.
    pub fn pow(&self, exp: u32) -> Result<Self> {
        check_dim(self.dim_in(), self.dim_out())?;
        let mut acc = Self::identity(self.dim_in());
        for _ in 0..exp {
            acc.m = &acc.m * &self.m;
        }
        Ok(acc)
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Operator) -> Self {
        Self {
            m: self.m.kronecker(&rhs.m),
        }
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        if self.m.shape() != other.m.shape() {
            return f64::INFINITY;
        }
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.dim_in() == self.dim_out()
            && (&self.m.adjoint() * &self.m - DMatrix::<C64>::identity(self.dim_in(), self.dim_in()))
                .iter()
                .all(|z| z.norm() <= tol)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.dim_in() == self.dim_out() && self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Eigenvalues of a Hermitian operator, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.m.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `⟨s|self|s⟩`.
    pub fn expectation(&self, s: &Ket) -> Result<C64> {
        check_dim(self.dim_in(), s.dim())?;
        check_dim(self.dim_out(), s.dim())?;
        Ok(s.amps.dotc(&(&self.m * &s.amps)))
    }
}

/// Matrix-vector product `u|s⟩`.
pub fn apply(u: &Operator, s: &Ket) -> Result<Ket> {
    check_dim(u.dim_in(), s.dim())?;
    Ok(Ket { amps: &u.m * &s.amps })
}

/// Label attached to a measurement outcome.
///
/// `Guess` names the hypothesis index together with the decoding stage that
/// produced it, so conclusive outcomes from different stages stay distinct.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Guess { stage: usize, index: usize },
    Inconclusive,
}

impl Outcome {
    pub fn guess(index: usize) -> Self {
        Outcome::Guess { stage: 0, index }
    }

    pub fn index(&self) -> Option<usize> {
        match self {
            Outcome::Guess { index, .. } => Some(*index),
            Outcome::Inconclusive => None,
        }
    }

    pub fn is_conclusive(&self) -> bool {
        matches!(self, Outcome::Guess { .. })
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Guess { stage, index } => write!(f, "{index}@{stage}"),
            Outcome::Inconclusive => f.write_str("?"),
        }
    }
}

/// A POVM: positive elements summing to the identity, one label each.
#[derive(Clone, Debug)]
pub struct Measurement {
    dim: usize,
    elements: Vec<Operator>,
    labels: Vec<Outcome>,
}

impl Measurement {
    /// Validates completeness and positivity within [`OPERATOR_TOL`].
    pub fn new(elements: Vec<Operator>, labels: Vec<Outcome>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidMeasurement("no elements".into()));
        }
        if elements.len() != labels.len() {
            return Err(Error::InvalidMeasurement(format!(
                "{} elements but {} labels",
                elements.len(),
                labels.len()
            )));
        }
        let dim = elements[0].dim_in();
        let mut total = Operator::zeros(dim, dim);
        for (i, e) in elements.iter().enumerate() {
            if e.dim_in() != dim || e.dim_out() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: e.dim_in().max(e.dim_out()),
                });
            }
            if !e.is_hermitian(OPERATOR_TOL) {
                return Err(Error::InvalidMeasurement(format!("element {i} is not hermitian")));
            }
            if let Some(&min) = e.hermitian_eigenvalues().first() {
                if min < -OPERATOR_TOL {
                    return Err(Error::InvalidMeasurement(format!(
                        "element {i} has eigenvalue {min}"
                    )));
                }
            }
            total = total.add(e)?;
        }
        let dev = total.max_abs_diff(&Operator::identity(dim));
        if dev > OPERATOR_TOL {
            return Err(Error::InvalidMeasurement(format!(
                "elements sum to identity only within {dev:e}"
            )));
        }
        let mut seen = labels.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != labels.len() {
            return Err(Error::InvalidMeasurement("duplicate outcome labels".into()));
        }
        Ok(Self {
            dim,
            elements,
            labels,
        })
    }

    /// Like [`Measurement::new`], but sums elements that share a label.
    pub fn merged(parts: Vec<(Outcome, Operator)>) -> Result<Self> {
        let mut elements: Vec<Operator> = Vec::new();
        let mut labels: Vec<Outcome> = Vec::new();
        for (label, op) in parts {
            match labels.iter().position(|l| *l == label) {
                Some(i) => elements[i] = elements[i].add(&op)?,
                None => {
                    labels.push(label);
                    elements.push(op);
                }
            }
        }
        Self::new(elements, labels)
    }

    /// Projective measurement in the computational basis.
    pub fn computational(dim: usize) -> Result<Self> {
        let elements = (0..dim)
            .map(|i| Ket::basis(dim, i).map(|k| Operator::projector(&k)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(elements, (0..dim).map(Outcome::guess).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn labels(&self) -> &[Outcome] {
        &self.labels
    }

    pub fn position(&self, label: Outcome) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }
}

/// Born-rule probabilities `⟨s|Π_l|s⟩`, clipped to [0, 1].
pub fn born_probabilities(state: &Ket, m: &Measurement) -> Result<Vec<f64>> {
    check_dim(m.dim(), state.dim())?;
    let probs = m
        .elements()
        .iter()
        .map(|e| clip_probability(e.expectation(state)?.re))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::InvalidProbabilities(format!(
            "Born probabilities sum to {total}"
        )));
    }
    Ok(probs)
}

/// Inverse-CDF draw from `probs`.
pub fn sample_outcome<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::InvalidProbabilities("empty distribution".into()));
    }
    if let Some(p) = probs.iter().find(|&&p| p < -PROBABILITY_CLIP_TOL || !p.is_finite()) {
        return Err(Error::InvalidProbabilities(format!("negative probability {p}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::InvalidProbabilities(format!("probabilities sum to {total}")));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last_positive = i;
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(last_positive)
}

/// Seedable generator for stream `stream` of a run seeded with `seed`.
///
/// Streams are independent ChaCha8 sequences, so a Monte Carlo batch can be
/// replayed on any worker.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

fn check_bipartite(state: &Ket, dims: (usize, usize)) -> Result<()> {
    if dims.0 == 0 || dims.1 == 0 {
        return Err(Error::InvalidDimension("subsystem dimension must be positive".into()));
    }
    check_dim(dims.0 * dims.1, state.dim())
}

/// Outcome distribution of a computational-basis measurement on one factor.
pub fn subsystem_probabilities(state: &Ket, dims: (usize, usize), sub: Subsystem) -> Result<Vec<f64>> {
    check_bipartite(state, dims)?;
    let (da, db) = dims;
    let n = match sub {
        Subsystem::A => da,
        Subsystem::B => db,
    };
    let mut probs = vec![0.0; n];
    for (idx, a) in state.amplitudes().iter().enumerate() {
        let o = match sub {
            Subsystem::A => idx / db,
            Subsystem::B => idx % db,
        };
        probs[o] += a.norm_sqr();
    }
    probs.into_iter().map(clip_probability).collect()
}

/// Measures one factor of a bipartite pure state in the computational basis
/// and returns the outcome probability with the renormalized state of the
/// other factor.
pub fn project_subsystem(
    state: &Ket,
    dims: (usize, usize),
    sub: Subsystem,
    outcome: usize,
) -> Result<(f64, Ket)> {
    check_bipartite(state, dims)?;
    let (da, db) = dims;
    let bound = match sub {
        Subsystem::A => da,
        Subsystem::B => db,
    };
    if outcome >= bound {
        return Err(Error::IndexOutOfRange { index: outcome, bound });
    }
    let amps: Vec<C64> = match sub {
        Subsystem::A => (0..db).map(|j| state.amps[outcome * db + j]).collect(),
        Subsystem::B => (0..da).map(|i| state.amps[i * db + outcome]).collect(),
    };
    let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if p < 1e-14 {
        return Err(Error::NullEvent);
    }
    let scale = c(1.0 / p.sqrt());
    let rest = Ket {
        amps: DVector::from_iterator(amps.len(), amps.into_iter().map(|a| a * scale)),
    };
    Ok((clip_probability(p)?, rest))
}

/// Samples a computational-basis measurement on one factor.
pub fn measure_subsystem<R: Rng + ?Sized>(
    state: &Ket,
    dims: (usize, usize),
    sub: Subsystem,
    rng: &mut R,
) -> Result<(usize, Ket)> {
    let probs = subsystem_probabilities(state, dims, sub)?;
    let o = sample_outcome(&probs, rng)?;
    let (_, rest) = project_subsystem(state, dims, sub, o)?;
    Ok((o, rest))
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s2() -> f64 {
        std::f64::consts::FRAC_1_SQRT_2
    }

    #[test]
    fn tensor_of_basis_states() {
        let k = tensor(&Ket::basis(2, 0).unwrap(), &Ket::basis(2, 0).unwrap());
        assert_eq!(k.dim(), 4);
        assert_eq!(k.amplitude(0), c(1.0));
        let k = tensor(&Ket::basis(2, 1).unwrap(), &Ket::basis(3, 0).unwrap());
        for i in 0..6 {
            let want = if i == 3 { 1.0 } else { 0.0 };
            assert_eq!(k.amplitude(i), c(want));
        }
    }

    #[test]
    fn tensor_is_linear() {
        let plus = Ket::from_real(&[s2(), s2()]).unwrap();
        let k = tensor(&plus, &Ket::basis(2, 1).unwrap());
        let want = Ket::from_real(&[0.0, s2(), 0.0, s2()]).unwrap();
        assert!(k.max_abs_diff(&want) < 1e-15);
        assert!(k.is_normalized(1e-12));
    }

    #[test]
    fn apply_checks_dimensions() {
        let s = Ket::basis(3, 1).unwrap();
        assert_eq!(apply(&Operator::identity(3), &s).unwrap(), s);
        assert!(matches!(
            apply(&Operator::identity(2), &s),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn born_on_computational_basis() {
        let m = Measurement::computational(2).unwrap();
        let p = born_probabilities(&Ket::basis(2, 0).unwrap(), &m).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
        assert!(born_probabilities(&Ket::basis(3, 0).unwrap(), &m).is_err());
    }

    #[test]
    fn measurement_rejects_incomplete_or_negative() {
        let p0 = Operator::projector(&Ket::basis(2, 0).unwrap());
        assert!(Measurement::new(vec![p0.clone()], vec![Outcome::guess(0)]).is_err());
        let neg = Operator::diagonal(&[c(2.0), c(-1.0)]);
        let rest = Operator::diagonal(&[c(-1.0), c(2.0)]);
        assert!(Measurement::new(vec![neg, rest], vec![Outcome::guess(0), Outcome::guess(1)]).is_err());
    }

    #[test]
    fn sampling_edge_cases() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..100 {
            assert_eq!(sample_outcome(&[1.0, 0.0], &mut rng).unwrap(), 0);
        }
        assert!(sample_outcome(&[1.1, -0.1], &mut rng).is_err());
        assert!(sample_outcome(&[0.5, 0.4], &mut rng).is_err());
    }

    fn frequency_of_zero(p: f64, seed: u64, n: usize) -> f64 {
        let mut rng = stream_rng(seed, 0);
        let hits = (0..n)
            .filter(|_| sample_outcome(&[p, 1.0 - p], &mut rng).unwrap() == 0)
            .count();
        hits as f64 / n as f64
    }

    #[test]
    fn sampling_frequencies_within_three_sigma() {
        assert!((frequency_of_zero(0.5, 42, 100_000) - 0.5).abs() <= 0.01);
        assert!((frequency_of_zero(0.9, 7, 100_000) - 0.9).abs() <= 0.003);
    }

    #[test]
    fn streams_replay_and_differ() {
        let a: Vec<u64> = (0..4).map(|_| stream_rng(9, 3).random()).collect();
        let b: Vec<u64> = (0..4).map(|_| stream_rng(9, 3).random()).collect();
        assert_eq!(a, b);
        let x: u64 = stream_rng(9, 3).random();
        let y: u64 = stream_rng(9, 4).random();
        assert_ne!(x, y);
    }

    #[test]
    fn project_bell_state() {
        let bell = Ket::from_real(&[s2(), 0.0, 0.0, s2()]).unwrap();
        let (p, rest) = project_subsystem(&bell, (2, 2), Subsystem::B, 0).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!(rest.max_abs_diff(&Ket::basis(2, 0).unwrap()) < 1e-12);

        let prod = tensor(&Ket::basis(2, 1).unwrap(), &Ket::basis(2, 1).unwrap());
        let (p, rest) = project_subsystem(&prod, (2, 2), Subsystem::B, 1).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!(rest.max_abs_diff(&Ket::basis(2, 1).unwrap()) < 1e-12);
        assert_eq!(
            project_subsystem(&prod, (2, 2), Subsystem::B, 0),
            Err(Error::NullEvent)
        );
    }

    #[test]
    fn project_subsystem_a_reads_rows() {
        let k = tensor(&Ket::basis(3, 2).unwrap(), &Ket::from_real(&[0.6, 0.8]).unwrap());
        let (p, rest) = project_subsystem(&k, (3, 2), Subsystem::A, 2).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!(rest.max_abs_diff(&Ket::from_real(&[0.6, 0.8]).unwrap()) < 1e-12);
    }
}
