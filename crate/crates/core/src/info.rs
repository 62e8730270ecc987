//! Information measures for the dense-coding channel.
//!
//! The strategy formulas here work branch by branch: every decoding stage
//! succeeds with a probability that does not depend on the message, and
//! within a branch the minimum-error outcome distribution is circulant. The
//! total is therefore a probability-weighted sum of per-branch values
//! `log₂(d2·D) − H(M₁|R₁)`. [`mutual_info_from_joint`] computes the same
//! quantity from scratch over the full message × outcome table.

use serde::{Deserialize, Serialize};

use crate::channel::{encode, SchmidtState};
use crate::discrimination::{separation_map, FinalAction, StagePlan};
use crate::error::{Error, Result};
use crate::gates::gxor;
use crate::tensor::{apply, root_of_unity, Ket, Measurement, Operator};

/// Probabilities below this are exact zeros inside entropy sums.
pub const ENTROPY_FLOOR: f64 = 1e-15;

/// `−p log₂ p` with `0 log 0 = 0`.
pub fn entropy_term(p: f64) -> f64 {
    if p < ENTROPY_FLOOR {
        0.0
    } else {
        -p * p.log2()
    }
}

pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs.iter().copied().map(entropy_term).sum()
}

/// Row `l ↦ p_{0l}` of the minimum-error confusion matrix for the family
/// `c`: `p_jl = (1/P)|Σ_m c_m e^{2πi m (j−l)/P}|²`, which depends on `j − l`
/// only.
pub fn me_confusion_row(coeffs: &[f64]) -> Vec<f64> {
    let period = coeffs.len();
    (0..period)
        .map(|l| {
            let amp: num_complex::Complex64 = coeffs
                .iter()
                .enumerate()
                .map(|(m, &a)| root_of_unity(-((m * l) as i64), period) * a)
                .sum();
            amp.norm_sqr() / period as f64
        })
        .collect()
}

/// `H(M₁|R₁)` of a minimum-error readout of the family `c`.
pub fn me_conditional_entropy(coeffs: &[f64]) -> f64 {
    shannon_entropy(&me_confusion_row(coeffs))
}

/// Conditional entropy `H(M₁|R₁)` of equally likely `states` read out by
/// `m`, using Bayes posteriors.
///
/// When every outcome is equally likely overall (true for conclusive
/// measurements on symmetric families) this is
/// `−(1/D) Σ_{j,l} p(l|j) log₂ p(l|j)`; see [`equiprobable_conditional_entropy`].
pub fn conditional_entropy(states: &[Ket], m: &Measurement) -> Result<f64> {
    let table = likelihoods(states, m)?;
    let n = states.len() as f64;
    let mut h = 0.0;
    for l in 0..m.len() {
        let p_l: f64 = table.iter().map(|row| row[l]).sum::<f64>() / n;
        if p_l < ENTROPY_FLOOR {
            continue;
        }
        for row in &table {
            let joint = row[l] / n;
            if joint >= ENTROPY_FLOOR {
                h -= joint * (joint / p_l).log2();
            }
        }
    }
    Ok(h.max(0.0))
}

/// `−(1/D) Σ_{j,l} p(l|j) log₂ p(l|j)`.
pub fn equiprobable_conditional_entropy(states: &[Ket], m: &Measurement) -> Result<f64> {
    let table = likelihoods(states, m)?;
    Ok(table.iter().map(|row| shannon_entropy(row)).sum::<f64>() / states.len() as f64)
}

fn likelihoods(states: &[Ket], m: &Measurement) -> Result<Vec<Vec<f64>>> {
    if states.is_empty() {
        return Err(Error::InvalidDimension("empty state family".into()));
    }
    states
        .iter()
        .map(|s| crate::tensor::born_probabilities(s, m))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfoReport {
    pub strategy: String,
    pub total_bits: f64,
    /// Mutual information restricted to a successful first mapping.
    pub success_branch_bits: Option<f64>,
    /// Per-stage success-branch values, in stage order.
    pub stage_success_bits: Vec<f64>,
    /// Probability of ending in each branch: one entry per executed stage's
    /// success, then the final action.
    pub branch_probabilities: Vec<f64>,
}

fn success_bits(s: &SchmidtState, coeffs: &[f64]) -> f64 {
    ((s.d2() * s.rank()) as f64).log2() - me_conditional_entropy(coeffs)
}

/// Minimum-error decoding: `log₂(d2·D) + (1/D) Σ p_jl log₂ p_jl`.
pub fn mutual_info_me(s: &SchmidtState) -> InfoReport {
    InfoReport {
        strategy: "me".into(),
        total_bits: success_bits(s, s.coeffs()),
        success_branch_bits: None,
        stage_success_bits: Vec::new(),
        branch_probabilities: vec![1.0],
    }
}

/// Separation at `xi` followed by minimum-error decoding; failures give up.
pub fn mutual_info_sep(s: &SchmidtState, xi: f64) -> Result<InfoReport> {
    let log_d2 = (s.d2() as f64).log2();
    let map = separation_map(s.coeffs(), xi)?;
    let p = map.p_success();
    let suc = success_bits(s, map.b_coeffs());
    Ok(InfoReport {
        strategy: format!("sep_me({xi})"),
        total_bits: p * (suc - log_d2) + log_d2,
        success_branch_bits: Some(suc),
        stage_success_bits: vec![suc],
        branch_probabilities: vec![p, 1.0 - p],
    })
}

/// Multistage decoding: each stage separates the current family; a success
/// is read out with the minimum-error measurement, a failure hands the
/// failure family to the next stage and finally to `plan.final_action`.
pub fn mutual_info_multistage(s: &SchmidtState, plan: &StagePlan) -> Result<InfoReport> {
    let log_d2 = (s.d2() as f64).log2();
    let compiled = plan.compile(s.coeffs(), s.rank())?;
    let mut reach = 1.0;
    let mut total = 0.0;
    let mut stage_bits = Vec::with_capacity(compiled.maps.len());
    let mut branches = Vec::with_capacity(compiled.maps.len() + 1);
    for map in &compiled.maps {
        let suc = success_bits(s, map.b_coeffs());
        let p = reach * map.p_success();
        total += p * suc;
        stage_bits.push(suc);
        branches.push(p);
        reach *= 1.0 - map.p_success();
    }
    let final_bits = match (compiled.final_action, compiled.residual.as_deref()) {
        (FinalAction::Me, Some(family)) => success_bits(s, family),
        _ => log_d2,
    };
    total += reach * final_bits;
    branches.push(reach);
    Ok(InfoReport {
        strategy: describe_plan(plan),
        total_bits: total,
        success_branch_bits: stage_bits.first().copied(),
        stage_success_bits: stage_bits,
        branch_probabilities: branches,
    })
}

pub(crate) fn describe_plan(plan: &StagePlan) -> String {
    let stages: Vec<String> = plan.stages.iter().map(|st| format!("sep({})", st.xi)).collect();
    let last = match plan.final_action {
        FinalAction::Me => "me",
        FinalAction::Abstain => "abstain",
    };
    if stages.is_empty() {
        last.to_string()
    } else {
        format!("{}+{last}", stages.join("+"))
    }
}

/// Textbook `I(M;R) = Σ p(m,r) log₂[p(m,r)/(p(m)p(r))]` for a joint table
/// with messages as rows.
pub fn mutual_info_from_joint(joint: &[Vec<f64>]) -> Result<f64> {
    if joint.is_empty() || joint[0].is_empty() {
        return Err(Error::InvalidJoint("empty table".into()));
    }
    let cols = joint[0].len();
    if joint.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidJoint("ragged table".into()));
    }
    if let Some(bad) = joint.iter().flatten().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidJoint(format!("entry {bad} is negative")));
    }
    let total: f64 = joint.iter().flatten().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidJoint(format!("entries sum to {total}")));
    }
    let row_marg: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let col_marg: Vec<f64> = (0..cols).map(|c| joint.iter().map(|r| r[c]).sum()).collect();
    let mut info = 0.0;
    for (r, row) in joint.iter().enumerate() {
        for (c, &p) in row.iter().enumerate() {
            if p >= ENTROPY_FLOOR {
                info += p * (p / (row_marg[r] * col_marg[c])).log2();
            }
        }
    }
    Ok(info.max(0.0))
}

/// Full joint distribution over messages `(j, k)` and outcomes `(l, m)` when
/// Bob applies GXOR, reads system 2 in the computational basis and system 1
/// with `system1`.
///
/// Every cell is a Born probability on the two-system state, with no use of
/// the `|α_j⟩|k⟩` factorization. Rows are `j·d2 + k`; columns are
/// `l·d2 + m` with `l` indexing `system1`'s elements.
pub fn joint_from_measurement(s: &SchmidtState, system1: &Measurement) -> Result<Vec<Vec<f64>>> {
    let (d1, d2) = (s.d1(), s.d2());
    if system1.dim() != d1 {
        return Err(Error::DimensionMismatch {
            expected: d1,
            actual: system1.dim(),
        });
    }
    let g = gxor(d1, d2)?;
    let readouts: Vec<Operator> = (0..d2)
        .map(|m| Ket::basis(d2, m).map(|k| Operator::projector(&k)))
        .collect::<Result<_>>()?;
    let n = s.message_count() as f64;
    let mut rows = vec![Vec::new(); s.message_count()];
    for msg in s.messages() {
        let psi = apply(&g, &encode(s, msg)?)?;
        let row = &mut rows[msg.index(d2)];
        for e in system1.elements() {
            for r in &readouts {
                let p = e.kron(r).expectation(&psi)?.re.max(0.0);
                row.push(p / n);
            }
        }
    }
    Ok(rows)
}

/// `log₂(d2·D) − H(M₁|R₁)` for an arbitrary system-1 measurement.
pub fn mutual_info_reduced(s: &SchmidtState, system1: &Measurement) -> Result<f64> {
    let states = (0..s.rank())
        .map(|j| crate::channel::symmetric_state(s, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(((s.d2() * s.rank()) as f64).log2() - conditional_entropy(&states, system1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::symmetric_state;
    use crate::discrimination::me_measurement;

    fn eq28() -> SchmidtState {
        SchmidtState::from_squared(2, 2, &[0.2, 0.8]).unwrap()
    }

    fn h2(p: f64) -> f64 {
        entropy_term(p) + entropy_term(1.0 - p)
    }

    #[test]
    fn conditional_entropy_limits() {
        let u = SchmidtState::uniform(3, 3, 3).unwrap();
        let fam: Vec<Ket> = (0..3).map(|j| symmetric_state(&u, j).unwrap()).collect();
        let me = me_measurement(3, 3).unwrap();
        assert!(conditional_entropy(&fam, &me).unwrap().abs() < 1e-12);

        let same = vec![Ket::basis(3, 0).unwrap(); 3];
        let h = conditional_entropy(&same, &Measurement::computational(3).unwrap()).unwrap();
        assert!((h - 3f64.log2()).abs() < 1e-12);
        let h = conditional_entropy(&same, &me).unwrap();
        assert!((h - 3f64.log2()).abs() < 1e-12);

        let s = eq28();
        let fam: Vec<Ket> = (0..2).map(|j| symmetric_state(&s, j).unwrap()).collect();
        let h = conditional_entropy(&fam, &me_measurement(2, 2).unwrap()).unwrap();
        assert!((h - h2(0.9)).abs() < 1e-12);
        assert!((h - 0.4689955935892812).abs() < 1e-9);
    }

    #[test]
    fn me_examples() {
        let u = SchmidtState::uniform(3, 4, 3).unwrap();
        assert!((mutual_info_me(&u).total_bits - 12f64.log2()).abs() < 1e-12);
        let product = SchmidtState::new(3, 4, vec![1.0]).unwrap();
        assert!((mutual_info_me(&product).total_bits - 2.0).abs() < 1e-12);
        let r = mutual_info_me(&eq28());
        assert!((r.total_bits - (2.0 - h2(0.9))).abs() < 1e-12);
        assert!((r.total_bits - 1.531004406).abs() < 1e-8);
    }

    #[test]
    fn me_matches_conditional_entropy_route() {
        let s = SchmidtState::from_squared(3, 4, &[0.1, 0.35, 0.55]).unwrap();
        let via_matrix = mutual_info_reduced(&s, &me_measurement(3, 3).unwrap()).unwrap();
        assert!((mutual_info_me(&s).total_bits - via_matrix).abs() < 1e-10);
    }

    #[test]
    fn separation_examples() {
        let s = eq28();
        let r0 = mutual_info_sep(&s, 0.0).unwrap();
        assert!((r0.total_bits - mutual_info_me(&s).total_bits).abs() < 1e-12);
        let r1 = mutual_info_sep(&s, 1.0).unwrap();
        assert!((r1.total_bits - 1.4).abs() < 1e-9);
        assert!((r1.success_branch_bits.unwrap() - 2.0).abs() < 1e-9);
        let product = SchmidtState::new(2, 4, vec![1.0]).unwrap();
        assert!((mutual_info_sep(&product, 0.7).unwrap().total_bits - 2.0).abs() < 1e-12);
    }

    #[test]
    fn multistage_examples() {
        let s = SchmidtState::from_squared(3, 4, &[0.2, 0.2, 0.6]).unwrap();
        let r = mutual_info_multistage(&s, &StagePlan::max_confidence(1, FinalAction::Me)).unwrap();
        let p1 = 3.0 * 0.2;
        assert!((r.total_bits - (p1 * 12f64.log2() + (1.0 - p1) * 2.0)).abs() < 1e-10);

        let s = SchmidtState::from_squared(3, 4, &[0.2, 0.3, 0.5]).unwrap();
        let r = mutual_info_multistage(&s, &StagePlan::max_confidence(2, FinalAction::Abstain)).unwrap();
        let want = 12f64.log2() + (2.0 / 3.0) * (2.0f64 / 3.0).log2() + (1.0 / 3.0) * (1.0f64 / 6.0).log2();
        assert!((r.stage_success_bits[1] - want).abs() < 1e-10);
        assert!((r.branch_probabilities[1] - 0.4 * 0.5).abs() < 1e-12);

        let single = mutual_info_multistage(&s, &StagePlan::max_confidence(1, FinalAction::Abstain)).unwrap();
        assert!((single.total_bits - mutual_info_sep(&s, 1.0).unwrap().total_bits).abs() < 1e-10);
        let with_me = mutual_info_multistage(&s, &StagePlan::max_confidence(1, FinalAction::Me)).unwrap();
        assert!(with_me.total_bits > single.total_bits);

        assert!(matches!(
            mutual_info_multistage(&s, &StagePlan::max_confidence(3, FinalAction::Me)),
            Err(Error::PlanTooDeep { .. })
        ));
    }

    #[test]
    fn joint_table_checks() {
        assert!(mutual_info_from_joint(&[vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap().abs() < 1e-12);
        let diag: Vec<Vec<f64>> = (0..8).map(|i| (0..8).map(|j| if i == j { 0.125 } else { 0.0 }).collect()).collect();
        assert!((mutual_info_from_joint(&diag).unwrap() - 3.0).abs() < 1e-12);
        assert!(mutual_info_from_joint(&[vec![0.5, 0.4]]).is_err());
        assert!(mutual_info_from_joint(&[vec![1.2, -0.2]]).is_err());
    }

    #[test]
    fn joint_matches_reduction_for_me() {
        let s = SchmidtState::from_squared(3, 4, &[0.15, 0.35, 0.5]).unwrap();
        let me = me_measurement(3, 3).unwrap();
        let joint = joint_from_measurement(&s, &me).unwrap();
        let textbook = mutual_info_from_joint(&joint).unwrap();
        assert!((textbook - mutual_info_me(&s).total_bits).abs() < 1e-9);
    }
}
