//! Measurements for equally likely symmetric states.
//!
//! A *family* is a coefficient list `c_l` indexed by level; entries at or
//! below [`COEFF_TOL`] are off the support. Its states are
//! `Σ_l c_l e^{2πijl/P}|l⟩` with period `P = c.len()`, which stays the
//! original Schmidt rank even after failures shrink the support.
//!
//! The separation map pushes a family towards the uniform one: success
//! yields `|β_j(ξ)⟩`, failure yields the ξ-independent `|χ_j⟩`. Applying the
//! same construction to the failure family gives the next decoding stage.

use serde::{Deserialize, Serialize};

use crate::channel::{symmetric_ket, COEFF_TOL, MULTIPLICITY_TOL};
use crate::error::{Error, Result};
use crate::tensor::{c, Ket, Measurement, Operator, Outcome};

const NORM_TOL: f64 = 1e-10;

/// Minimum-error measurement for `rank` symmetric states in a `d`-level
/// space: projectors onto the Fourier columns `|μ_j⟩`, plus an inconclusive
/// complement when `rank < d`.
pub fn me_measurement(rank: usize, d: usize) -> Result<Measurement> {
    if rank == 0 || rank > d {
        return Err(Error::InvalidDimension(format!(
            "rank {rank} must lie in 1..={d}"
        )));
    }
    me_parts(rank, d, 0).and_then(Measurement::merged)
}

/// Labeled elements of the minimum-error measurement, tagged with `stage`.
pub(crate) fn me_parts(rank: usize, d: usize, stage: usize) -> Result<Vec<(Outcome, Operator)>> {
    let uniform = vec![1.0 / (rank as f64).sqrt(); rank];
    let mut parts = Vec::with_capacity(rank + 1);
    let mut span = Operator::zeros(d, d);
    for j in 0..rank {
        let p = Operator::projector(&symmetric_ket(&uniform, d, j)?);
        span = span.add(&p)?;
        parts.push((Outcome::Guess { stage, index: j }, p));
    }
    if rank < d {
        parts.push((Outcome::Inconclusive, Operator::identity(d).add(&span.scale(c(-1.0)))?));
    }
    Ok(parts)
}

/// Probabilistic map `|α_j⟩ → |β_j(ξ)⟩` for one family.
#[derive(Clone, Debug)]
pub struct SeparationMap {
    xi: f64,
    dim: usize,
    coeffs: Vec<f64>,
    support: Vec<usize>,
    b_coeffs: Vec<f64>,
    p_success: f64,
    kraus_success: Operator,
    kraus_failure: Operator,
    failure_coeffs: Option<Vec<f64>>,
}

struct FamilyShape {
    support: Vec<usize>,
    min_sq: f64,
    in_min_class: Vec<bool>,
}

fn family_shape(coeffs: &[f64]) -> Result<FamilyShape> {
    if coeffs.is_empty() {
        return Err(Error::InvalidCoefficients("empty family".into()));
    }
    if let Some(bad) = coeffs.iter().find(|a| !a.is_finite() || **a < 0.0) {
        return Err(Error::InvalidCoefficients(format!("coefficient {bad} is negative")));
    }
    let norm: f64 = coeffs.iter().map(|a| a * a).sum();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidCoefficients(format!("squared coefficients sum to {norm}")));
    }
    let support: Vec<usize> = (0..coeffs.len()).filter(|&l| coeffs[l] > COEFF_TOL).collect();
    let min_sq = support
        .iter()
        .map(|&l| coeffs[l] * coeffs[l])
        .fold(f64::INFINITY, f64::min);
    let in_min_class = coeffs
        .iter()
        .map(|&a| a > COEFF_TOL && (a * a - min_sq).abs() <= MULTIPLICITY_TOL)
        .collect();
    Ok(FamilyShape {
        support,
        min_sq,
        in_min_class,
    })
}

/// Failure-state coefficients `√((c_l² − c_min²)/(1 − D_sup c_min²))`, or
/// `None` when the family is uniform on its support.
pub fn failure_coefficients(coeffs: &[f64]) -> Result<Option<Vec<f64>>> {
    let shape = family_shape(coeffs)?;
    Ok(failure_from_shape(coeffs, &shape))
}

fn failure_from_shape(coeffs: &[f64], shape: &FamilyShape) -> Option<Vec<f64>> {
    let excess: Vec<f64> = coeffs
        .iter()
        .zip(&shape.in_min_class)
        .map(|(&a, &is_min)| {
            if a > COEFF_TOL && !is_min {
                a * a - shape.min_sq
            } else {
                0.0
            }
        })
        .collect();
    // Equal to 1 − D_sup·c_min² up to the multiplicity tolerance.
    let total: f64 = excess.iter().sum();
    if total <= MULTIPLICITY_TOL {
        return None;
    }
    Some(excess.iter().map(|e| (e / total).sqrt()).collect())
}

impl SeparationMap {
    /// Map acting on the `coeffs.len()`-level space.
    pub fn new(coeffs: &[f64], xi: f64) -> Result<Self> {
        Self::in_dimension(coeffs, xi, coeffs.len())
    }

    /// Map embedded in a `dim`-level space; levels beyond the family pass
    /// through the success branch unchanged.
    pub fn in_dimension(coeffs: &[f64], xi: f64, dim: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::InvalidXi(xi));
        }
        if dim < coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: coeffs.len(),
                actual: dim,
            });
        }
        let shape = family_shape(coeffs)?;
        let d_sup = shape.support.len() as f64;
        let failure_coeffs = failure_from_shape(coeffs, &shape);

        let mut s_diag = vec![c(1.0); dim];
        let mut f_diag = vec![c(0.0); dim];
        let (p_success, b_coeffs) = match failure_coeffs {
            None => (1.0, coeffs.to_vec()),
            Some(_) => {
                let p = 1.0 / ((1.0 - xi) + xi / (d_sup * shape.min_sq));
                let b = coeffs
                    .iter()
                    .map(|&a| {
                        if a > COEFF_TOL {
                            ((1.0 - xi) * a * a + xi / d_sup).sqrt()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                for &l in &shape.support {
                    if shape.in_min_class[l] {
                        continue;
                    }
                    let a2 = coeffs[l] * coeffs[l];
                    s_diag[l] = c((p * (1.0 - xi + xi / (d_sup * a2))).sqrt());
                    f_diag[l] = c((p * xi / d_sup * (1.0 / shape.min_sq - 1.0 / a2)).max(0.0).sqrt());
                }
                (p, b)
            }
        };

        Ok(Self {
            xi,
            dim,
            coeffs: coeffs.to_vec(),
            support: shape.support,
            b_coeffs,
            p_success,
            kraus_success: Operator::diagonal(&s_diag),
            kraus_failure: Operator::diagonal(&f_diag),
            failure_coeffs,
        })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Phase period of the family (the original Schmidt rank).
    pub fn period(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Target coefficients `b_l(ξ)`.
    pub fn b_coeffs(&self) -> &[f64] {
        &self.b_coeffs
    }

    pub fn p_success(&self) -> f64 {
        self.p_success
    }

    pub fn kraus_success(&self) -> &Operator {
        &self.kraus_success
    }

    pub fn kraus_failure(&self) -> &Operator {
        &self.kraus_failure
    }

    /// `None` when the input family is uniform on its support.
    pub fn failure_coeffs(&self) -> Option<&[f64]> {
        self.failure_coeffs.as_deref()
    }

    /// Whether the failure branch can fire at all.
    pub fn can_fail(&self) -> bool {
        self.p_success < 1.0
    }
}

/// Builds the separation map for a family at parameter `xi`.
pub fn separation_map(coeffs: &[f64], xi: f64) -> Result<SeparationMap> {
    SeparationMap::new(coeffs, xi)
}

/// `|β_j(ξ)⟩`.
pub fn separated_state(map: &SeparationMap, j: usize) -> Result<Ket> {
    if j >= map.period() {
        return Err(Error::IndexOutOfRange {
            index: j,
            bound: map.period(),
        });
    }
    symmetric_ket(&map.b_coeffs, map.dim, j)
}

/// `|χ_j⟩`, the state left behind by a failed mapping.
pub fn failure_state(map: &SeparationMap, j: usize) -> Result<Ket> {
    let chi = map.failure_coeffs.as_ref().ok_or(Error::EmptyFailureBranch)?;
    if j >= map.period() {
        return Err(Error::IndexOutOfRange {
            index: j,
            bound: map.period(),
        });
    }
    symmetric_ket(chi, map.dim, j)
}

/// Unitary on system ⊗ ancilla (index `2·n + a`) with
/// `U|ψ⟩|0⟩ = A_s|ψ⟩|0⟩ + A_f|ψ⟩|1⟩`.
///
/// Both Kraus operators are diagonal, so each level gets its own rotation
/// `[[s, −f], [f, s]]`; the `|1⟩`-ancilla input column is the orthogonal
/// completion.
pub fn dilation_unitary(map: &SeparationMap) -> Operator {
    let dim = map.dim;
    Operator::from_fn(2 * dim, 2 * dim, |row, col| {
        let (n_out, a_out) = (row / 2, row % 2);
        let (n_in, a_in) = (col / 2, col % 2);
        if n_out != n_in {
            return c(0.0);
        }
        let s = map.kraus_success.entry(n_in, n_in);
        let f = map.kraus_failure.entry(n_in, n_in);
        match (a_out, a_in) {
            (0, 0) | (1, 1) => s,
            (1, 0) => f,
            _ => -f,
        }
    })
}

/// Success probability of the next stage, applied at `ξ = 1` to the
/// failure family of `coeffs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NextStage {
    Available(f64),
    /// The failure family spans at most one level (or does not exist), so
    /// another stage cannot extract anything.
    Exhausted,
}

impl NextStage {
    pub fn probability(&self) -> f64 {
        match self {
            NextStage::Available(p) => *p,
            NextStage::Exhausted => 0.0,
        }
    }
}

/// `(D − μ) · min_{c_l ≠ c_min} (c_l² − c_min²)/(1 − D c_min²)`.
pub fn stage_success_probability(coeffs: &[f64]) -> Result<NextStage> {
    let Some(chi) = failure_coefficients(coeffs)? else {
        return Ok(NextStage::Exhausted);
    };
    let shape = family_shape(&chi)?;
    if shape.support.len() <= 1 {
        return Ok(NextStage::Exhausted);
    }
    Ok(NextStage::Available(SeparationMap::new(&chi, 1.0)?.p_success()))
}

/// Bayes posterior `p(ρ_j | ω_l)` of hypothesis `j` given outcome `l`.
pub fn confidence(
    family: &[Ket],
    priors: &[f64],
    m: &Measurement,
    outcome: usize,
    hypothesis: usize,
) -> Result<f64> {
    if family.len() != priors.len() {
        return Err(Error::DimensionMismatch {
            expected: family.len(),
            actual: priors.len(),
        });
    }
    let total: f64 = priors.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProbabilities(format!("priors sum to {total}")));
    }
    if hypothesis >= family.len() {
        return Err(Error::IndexOutOfRange {
            index: hypothesis,
            bound: family.len(),
        });
    }
    let elem = m.elements().get(outcome).ok_or(Error::IndexOutOfRange {
        index: outcome,
        bound: m.len(),
    })?;
    let weights = family
        .iter()
        .zip(priors)
        .map(|(k, p)| Ok(p * elem.expectation(k)?.re.max(0.0)))
        .collect::<Result<Vec<f64>>>()?;
    let norm: f64 = weights.iter().sum();
    if norm < 1e-14 {
        return Err(Error::UnreachableOutcome);
    }
    Ok((weights[hypothesis] / norm).clamp(0.0, 1.0))
}

/// Per-stage separation parameter; `ξ = 1` is the maximum-confidence map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    #[serde(default = "Stage::default_xi")]
    pub xi: f64,
}

impl Stage {
    fn default_xi() -> f64 {
        1.0
    }

    pub fn max_confidence() -> Self {
        Stage { xi: 1.0 }
    }
}

impl Default for Stage {
    fn default() -> Self {
        Stage::max_confidence()
    }
}

/// What Bob does with the family left after the last planned stage fails.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalAction {
    Me,
    Abstain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub stages: Vec<Stage>,
    #[serde(rename = "final")]
    pub final_action: FinalAction,
}

impl StagePlan {
    pub fn new(stages: Vec<Stage>, final_action: FinalAction) -> Self {
        Self { stages, final_action }
    }

    /// `n` maximum-confidence stages.
    pub fn max_confidence(n: usize, final_action: FinalAction) -> Self {
        Self::new(vec![Stage::max_confidence(); n], final_action)
    }

    /// Checks ξ ranges and that the plan fits within `rank − 1` stages.
    pub fn validate(&self, rank: usize) -> Result<()> {
        if let Some(bad) = self.stages.iter().find(|s| !(0.0..=1.0).contains(&s.xi)) {
            return Err(Error::InvalidXi(bad.xi));
        }
        let max = rank.saturating_sub(1).max(1);
        if self.stages.len() > max {
            return Err(Error::PlanTooDeep {
                stages: self.stages.len(),
                max,
            });
        }
        Ok(())
    }

    /// Separation maps for the stages that can actually run, and the family
    /// handed to the final action (`None` if no failure reaches it).
    pub fn compile(&self, coeffs: &[f64], dim: usize) -> Result<CompiledPlan> {
        self.validate(coeffs.len())?;
        let mut maps = Vec::new();
        let mut family = Some(coeffs.to_vec());
        for stage in &self.stages {
            let Some(current) = family.as_ref() else { break };
            if family_shape(current)?.support.len() <= 1 {
                break;
            }
            let map = SeparationMap::in_dimension(current, stage.xi, dim)?;
            family = if map.can_fail() {
                map.failure_coeffs().map(<[f64]>::to_vec)
            } else {
                None
            };
            maps.push(map);
        }
        Ok(CompiledPlan {
            maps,
            residual: family,
            final_action: self.final_action,
        })
    }
}

#[derive(Clone, Debug)]
pub struct CompiledPlan {
    pub maps: Vec<SeparationMap>,
    pub residual: Option<Vec<f64>>,
    pub final_action: FinalAction,
}
