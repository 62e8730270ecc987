//! Monte Carlo execution of the full protocol circuit.
//!
//! Each trial samples a message, applies the encoding unitary to the shared
//! state, runs GXOR, measures system 2, then runs the decoding strategy on
//! system 1 as a sequence of ancilla-coupled stages. Trials are grouped in
//! fixed-size batches; batch `b` draws from stream `b` of the run seed, so a
//! report does not depend on how many worker threads executed it.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{encoding_operator, resource_state, Message, SchmidtState};
use crate::discrimination::{dilation_unitary, me_parts, FinalAction, SeparationMap, StagePlan};
use crate::error::{Error, Result};
use crate::gates::gxor;
use crate::info::{joint_from_measurement, mutual_info_from_joint};
use crate::tensor::{
    apply, born_probabilities, measure_subsystem, sample_outcome, stream_rng, tensor, Ket, Measurement,
    Operator, Outcome, Subsystem,
};

/// Trials per RNG stream.
pub const BATCH_SIZE: u64 = 2048;

/// Bob's system-1 strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecodingStrategy {
    /// Minimum-error measurement, always conclusive.
    Me,
    /// One separation stage at `xi`; on failure nothing more is tried.
    SepMe { xi: f64 },
    Multistage(StagePlan),
}

impl DecodingStrategy {
    pub fn plan(&self) -> StagePlan {
        match self {
            DecodingStrategy::Me => StagePlan::new(Vec::new(), FinalAction::Me),
            DecodingStrategy::SepMe { xi } => {
                StagePlan::new(vec![crate::discrimination::Stage { xi: *xi }], FinalAction::Abstain)
            }
            DecodingStrategy::Multistage(plan) => plan.clone(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DecodingStrategy::Me => "me".into(),
            DecodingStrategy::SepMe { xi } => format!("sep_me({xi})"),
            DecodingStrategy::Multistage(plan) => crate::info::describe_plan(plan),
        }
    }
}

struct DecoderStage {
    map: SeparationMap,
    dilation: Operator,
}

/// A strategy compiled for one symmetric family in a `dim`-level space.
pub struct Decoder {
    dim: usize,
    rank: usize,
    stages: Vec<DecoderStage>,
    final_action: FinalAction,
    /// `readouts[s]` is the minimum-error measurement labeled with stage `s`.
    readouts: Vec<Measurement>,
}

/// What a decoder run produced.
#[derive(Clone, Debug)]
pub struct Decoded {
    pub outcome: Outcome,
    pub stage_reached: usize,
    pub ancilla: Vec<u8>,
    /// System-1 state after the last measurement that was performed before
    /// the final readout; on an inconclusive result this is the failure state.
    pub residual: Ket,
}

impl Decoder {
    pub fn new(coeffs: &[f64], dim: usize, strategy: &DecodingStrategy) -> Result<Self> {
        let plan = strategy.plan();
        let compiled = plan.compile(coeffs, dim)?;
        let rank = coeffs.len();
        let stages: Vec<DecoderStage> = compiled
            .maps
            .into_iter()
            .map(|map| DecoderStage {
                dilation: dilation_unitary(&map),
                map,
            })
            .collect();
        let readouts = (0..=stages.len())
            .map(|s| Measurement::merged(me_parts(rank, dim, s)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim,
            rank,
            stages,
            final_action: compiled.final_action,
            readouts,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    /// Conditional success probability of each executed stage.
    pub fn stage_success_probabilities(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.map.p_success()).collect()
    }

    pub fn decode<R: Rng + ?Sized>(&self, input: &Ket, rng: &mut R) -> Result<Decoded> {
        let ancilla0 = Ket::basis(2, 0)?;
        let mut state = input.clone();
        let mut ancilla = Vec::with_capacity(self.stages.len());
        for (s, stage) in self.stages.iter().enumerate() {
            let coupled = apply(&stage.dilation, &tensor(&state, &ancilla0))?;
            let (bit, rest) = measure_subsystem(&coupled, (self.dim, 2), Subsystem::B, rng)?;
            ancilla.push(bit as u8);
            state = rest;
            if bit == 0 {
                let outcome = self.read(s, &state, rng)?;
                return Ok(Decoded {
                    outcome,
                    stage_reached: s,
                    ancilla,
                    residual: state,
                });
            }
        }
        let n = self.stages.len();
        let outcome = match self.final_action {
            FinalAction::Me => self.read(n, &state, rng)?,
            FinalAction::Abstain => Outcome::Inconclusive,
        };
        Ok(Decoded {
            outcome,
            stage_reached: n,
            ancilla,
            residual: state,
        })
    }

    fn read<R: Rng + ?Sized>(&self, stage: usize, state: &Ket, rng: &mut R) -> Result<Outcome> {
        let m = &self.readouts[stage];
        let probs = born_probabilities(state, m)?;
        Ok(m.labels()[sample_outcome(&probs, rng)?])
    }

    /// Minimum-error readout of `state`, labeled as the final stage.
    pub fn read_final<R: Rng + ?Sized>(&self, state: &Ket, rng: &mut R) -> Result<Outcome> {
        self.read(self.stages.len(), state, rng)
    }

    /// The POVM on system 1 that the whole strategy implements, one element
    /// per distinguishable record `(stage, guess)` or inconclusive.
    pub fn effective_measurement(&self) -> Result<Measurement> {
        let mut parts = Vec::new();
        let mut prefix = Operator::identity(self.dim);
        for (s, stage) in self.stages.iter().enumerate() {
            let branch = stage.map.kraus_success().matmul(&prefix)?;
            for (label, proj) in me_parts(self.rank, self.dim, s)? {
                parts.push((label, branch.adjoint().matmul(&proj)?.matmul(&branch)?));
            }
            prefix = stage.map.kraus_failure().matmul(&prefix)?;
        }
        match self.final_action {
            FinalAction::Me => {
                for (label, proj) in me_parts(self.rank, self.dim, self.stages.len())? {
                    parts.push((label, prefix.adjoint().matmul(&proj)?.matmul(&prefix)?));
                }
            }
            FinalAction::Abstain => {
                parts.push((Outcome::Inconclusive, prefix.adjoint().matmul(&prefix)?));
            }
        }
        Measurement::merged(parts)
    }
}

/// Everything needed to run trials for one (state, strategy) pair.
pub struct Protocol {
    state: SchmidtState,
    strategy: DecodingStrategy,
    resource: Ket,
    encoders: Vec<Operator>,
    gxor: Operator,
    decoder: Decoder,
    effective: Measurement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub message: Message,
    pub inferred: Outcome,
    pub inferred_k: usize,
    pub stage_reached: usize,
    pub ancilla_outcomes: Vec<u8>,
}

impl Protocol {
    pub fn new(state: &SchmidtState, strategy: &DecodingStrategy) -> Result<Self> {
        let decoder = Decoder::new(state.coeffs(), state.d1(), strategy)?;
        let encoders = state
            .messages()
            .map(|m| encoding_operator(state, m))
            .collect::<Result<Vec<_>>>()?;
        let effective = decoder.effective_measurement()?;
        Ok(Self {
            state: state.clone(),
            strategy: strategy.clone(),
            resource: resource_state(state),
            encoders,
            gxor: gxor(state.d1(), state.d2())?,
            decoder,
            effective,
        })
    }

    pub fn state(&self) -> &SchmidtState {
        &self.state
    }

    pub fn strategy(&self) -> &DecodingStrategy {
        &self.strategy
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    /// Outcome records Bob can produce for system 1.
    pub fn outcome_labels(&self) -> &[Outcome] {
        self.effective.labels()
    }

    pub fn effective_measurement(&self) -> &Measurement {
        &self.effective
    }

    pub fn run_trial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrialRecord> {
        let s = &self.state;
        let message = Message {
            j: rng.random_range(0..s.rank()),
            k: rng.random_range(0..s.d2()),
        };
        let encoded = apply(&self.encoders[message.index(s.d2())], &self.resource)?;
        let bob = apply(&self.gxor, &encoded)?;
        let (inferred_k, system1) = measure_subsystem(&bob, (s.d1(), s.d2()), Subsystem::B, rng)?;
        let d = self.decoder.decode(&system1, rng)?;
        Ok(TrialRecord {
            message,
            inferred: d.outcome,
            inferred_k,
            stage_reached: d.stage_reached,
            ancilla_outcomes: d.ancilla,
        })
    }

    fn column(&self, rec: &TrialRecord) -> usize {
        let label = self
            .effective
            .position(rec.inferred)
            .expect("decoder outcomes are labels of the effective measurement");
        label * self.state.d2() + rec.inferred_k
    }
}

/// Convenience wrapper around [`Protocol::run_trial`].
pub fn run_trial<R: Rng + ?Sized>(s: &SchmidtState, strategy: &DecodingStrategy, rng: &mut R) -> Result<TrialRecord> {
    Protocol::new(s, strategy)?.run_trial(rng)
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Tally {
    counts: Vec<Vec<u64>>,
    stage_attempts: Vec<u64>,
    stage_successes: Vec<u64>,
    k_errors: u64,
    inconclusive: u64,
}

impl Tally {
    fn new(rows: usize, cols: usize, stages: usize) -> Self {
        Self {
            counts: vec![vec![0; cols]; rows],
            stage_attempts: vec![0; stages],
            stage_successes: vec![0; stages],
            k_errors: 0,
            inconclusive: 0,
        }
    }

    fn merge(mut self, other: &Tally) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.stage_attempts.iter_mut().zip(&other.stage_attempts) {
            *x += y;
        }
        for (x, y) in self.stage_successes.iter_mut().zip(&other.stage_successes) {
            *x += y;
        }
        self.k_errors += other.k_errors;
        self.inconclusive += other.inconclusive;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationReport {
    pub seed: u64,
    pub n_trials: u64,
    pub strategy: DecodingStrategy,
    pub d1: usize,
    pub d2: usize,
    pub rank: usize,
    pub outcome_labels: Vec<Outcome>,
    /// Rows `j·d2 + k`, columns `label·d2 + k'`.
    pub joint_counts: Vec<Vec<u64>>,
    /// Born probabilities for the same cells.
    pub analytic_joint: Vec<Vec<f64>>,
    pub stage_attempts: Vec<u64>,
    pub stage_successes: Vec<u64>,
    pub analytic_stage_success: Vec<f64>,
    pub k_errors: u64,
    pub inconclusive: u64,
    pub empirical_mutual_info_bits: f64,
    pub analytic_mutual_info_bits: f64,
}

/// Runs `n_trials` seeded trials on the current rayon pool.
pub fn run_simulation(
    s: &SchmidtState,
    strategy: &DecodingStrategy,
    n_trials: u64,
    seed: u64,
) -> Result<SimulationReport> {
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    let proto = Protocol::new(s, strategy)?;
    let rows = s.message_count();
    let cols = proto.outcome_labels().len() * s.d2();
    let stages = proto.decoder.stage_count();
    let batches = n_trials.div_ceil(BATCH_SIZE);

    let partials: Vec<Tally> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let n = BATCH_SIZE.min(n_trials - b * BATCH_SIZE);
            let mut t = Tally::new(rows, cols, stages);
            for _ in 0..n {
                let rec = proto.run_trial(&mut rng)?;
                t.counts[rec.message.index(s.d2())][proto.column(&rec)] += 1;
                if rec.inferred_k != rec.message.k {
                    t.k_errors += 1;
                }
                for (stage, &bit) in rec.ancilla_outcomes.iter().enumerate() {
                    t.stage_attempts[stage] += 1;
                    if bit == 0 {
                        t.stage_successes[stage] += 1;
                    }
                }
                if rec.inferred == Outcome::Inconclusive {
                    t.inconclusive += 1;
                }
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    let tally = partials
        .iter()
        .fold(Tally::new(rows, cols, stages), |acc, t| acc.merge(t));

    let analytic_joint = joint_from_measurement(s, proto.effective_measurement())?;
    let analytic_mutual_info_bits = mutual_info_from_joint(&analytic_joint)?;
    let mut report = SimulationReport {
        seed,
        n_trials,
        strategy: strategy.clone(),
        d1: s.d1(),
        d2: s.d2(),
        rank: s.rank(),
        outcome_labels: proto.outcome_labels().to_vec(),
        joint_counts: tally.counts,
        analytic_joint,
        stage_attempts: tally.stage_attempts,
        stage_successes: tally.stage_successes,
        analytic_stage_success: proto.decoder.stage_success_probabilities(),
        k_errors: tally.k_errors,
        inconclusive: tally.inconclusive,
        empirical_mutual_info_bits: 0.0,
        analytic_mutual_info_bits,
    };
    report.empirical_mutual_info_bits = empirical_mutual_info(&report)?;
    Ok(report)
}

/// Plug-in mutual information of the tallied joint counts. Inconclusive
/// results are their own outcome symbol.
pub fn empirical_mutual_info(report: &SimulationReport) -> Result<f64> {
    let n = report.n_trials as f64;
    let joint: Vec<Vec<f64>> = report
        .joint_counts
        .iter()
        .map(|r| r.iter().map(|&c| c as f64 / n).collect())
        .collect();
    mutual_info_from_joint(&joint)
}

impl SimulationReport {
    pub fn empirical_stage_success(&self) -> Vec<f64> {
        self.stage_attempts
            .iter()
            .zip(&self.stage_successes)
            .map(|(&a, &s)| if a == 0 { 0.0 } else { s as f64 / a as f64 })
            .collect()
    }

    /// `"j,k|outcome,k'"` key of a cell.
    pub fn cell_key(&self, row: usize, col: usize) -> String {
        let msg = Message::from_index(row, self.d2);
        let label = self.outcome_labels[col / self.d2];
        format!("{},{}|{},{}", msg.j, msg.k, label, col % self.d2)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut counts = BTreeMap::new();
        for (r, row) in self.joint_counts.iter().enumerate() {
            for (c, &n) in row.iter().enumerate() {
                if n > 0 {
                    counts.insert(self.cell_key(r, c), n);
                }
            }
        }
        serde_json::json!({
            "seed": self.seed,
            "n_trials": self.n_trials,
            "strategy": self.strategy,
            "d1": self.d1,
            "d2": self.d2,
            "rank": self.rank,
            "counts": counts,
            "stage_attempts": self.stage_attempts,
            "stage_successes": self.stage_successes,
            "empirical_success_rate": self.empirical_stage_success(),
            "analytic_success_rate": self.analytic_stage_success,
            "k_errors": self.k_errors,
            "inconclusive": self.inconclusive,
            "empirical_mutual_info_bits": self.empirical_mutual_info_bits,
            "analytic_mutual_info_bits": self.analytic_mutual_info_bits,
        })
    }

    /// Cell rows `(key, count, empirical, analytic, 3σ)` for every cell with
    /// nonzero analytic probability or count, in table order.
    pub fn cell_rows(&self) -> Vec<(String, u64, f64, f64, f64)> {
        let n = self.n_trials as f64;
        let mut out = Vec::new();
        for (r, row) in self.joint_counts.iter().enumerate() {
            for (c, &count) in row.iter().enumerate() {
                let p = self.analytic_joint[r][c];
                if count == 0 && p < 1e-15 {
                    continue;
                }
                let sigma3 = 3.0 * (p * (1.0 - p) / n).sqrt();
                out.push((self.cell_key(r, c), count, count as f64 / n, p, sigma3));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrimination::Stage;

    fn eq28() -> SchmidtState {
        SchmidtState::from_squared(2, 2, &[0.2, 0.8]).unwrap()
    }

    fn sigma3(p: f64, n: f64) -> f64 {
        3.0 * (p * (1.0 - p) / n).sqrt()
    }

    #[test]
    fn strategy_json() {
        let s: DecodingStrategy = serde_json::from_str(r#"{"kind":"sep_me","xi":0.5}"#).unwrap();
        assert_eq!(s, DecodingStrategy::SepMe { xi: 0.5 });
        let m: DecodingStrategy =
            serde_json::from_str(r#"{"kind":"multistage","stages":[{"xi":1.0},{}],"final":"abstain"}"#).unwrap();
        assert_eq!(m.plan().stages.len(), 2);
        assert_eq!(serde_json::from_str::<DecodingStrategy>(r#"{"kind":"me"}"#).unwrap(), DecodingStrategy::Me);
    }

    #[test]
    fn uniform_state_decodes_exactly() {
        let u = SchmidtState::uniform(3, 4, 3).unwrap();
        let proto = Protocol::new(&u, &DecodingStrategy::Me).unwrap();
        let mut rng = stream_rng(3, 0);
        for _ in 0..1000 {
            let r = proto.run_trial(&mut rng).unwrap();
            assert_eq!(r.inferred.index(), Some(r.message.j));
            assert_eq!(r.inferred_k, r.message.k);
        }
    }

    #[test]
    fn ancilla_and_me_rates() {
        let s = eq28();
        let n = 10_000.0;
        let sep = Protocol::new(&s, &DecodingStrategy::SepMe { xi: 1.0 }).unwrap();
        let mut rng = stream_rng(11, 0);
        let succ = (0..10_000)
            .filter(|_| sep.run_trial(&mut rng).unwrap().ancilla_outcomes[0] == 0)
            .count() as f64
            / n;
        assert!((succ - 0.4).abs() <= 0.015, "{succ}");

        let me = Protocol::new(&s, &DecodingStrategy::Me).unwrap();
        let right = (0..10_000)
            .filter(|_| {
                let r = me.run_trial(&mut rng).unwrap();
                r.inferred.index() == Some(r.message.j)
            })
            .count() as f64
            / n;
        assert!((right - 0.9).abs() <= 0.009, "{right}");
    }

    #[test]
    fn single_trial_report_matches_run_trial() {
        let s = SchmidtState::from_squared(3, 4, &[0.2, 0.3, 0.5]).unwrap();
        let strat = DecodingStrategy::Multistage(StagePlan::max_confidence(2, FinalAction::Abstain));
        let report = run_simulation(&s, &strat, 1, 77).unwrap();
        let rec = Protocol::new(&s, &strat).unwrap().run_trial(&mut stream_rng(77, 0)).unwrap();
        let row = rec.message.index(4);
        let total: u64 = report.joint_counts.iter().flatten().sum();
        assert_eq!(total, 1);
        let label = report.outcome_labels.iter().position(|l| *l == rec.inferred).unwrap();
        assert_eq!(report.joint_counts[row][label * 4 + rec.inferred_k], 1);
    }

    #[test]
    fn replay_is_independent_of_thread_count() {
        let s = SchmidtState::from_squared(3, 4, &[0.2, 0.3, 0.5]).unwrap();
        let strat = DecodingStrategy::Multistage(StagePlan::new(
            vec![Stage { xi: 0.7 }, Stage { xi: 1.0 }],
            FinalAction::Me,
        ));
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_simulation(&s, &strat, 9_000, 5).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(4));
        assert_eq!(one.to_json(), run(3).to_json());
        assert_ne!(one.joint_counts, run_simulation(&s, &strat, 9_000, 6).unwrap().joint_counts);
    }

    #[test]
    fn effective_measurement_is_a_povm_with_expected_labels() {
        let s = SchmidtState::from_squared(3, 4, &[0.2, 0.3, 0.5]).unwrap();
        let strat = DecodingStrategy::Multistage(StagePlan::max_confidence(2, FinalAction::Me));
        let proto = Protocol::new(&s, &strat).unwrap();
        let labels = proto.outcome_labels();
        assert_eq!(labels.len(), 9);
        assert!(!labels.contains(&Outcome::Inconclusive));
        let sep = Protocol::new(&s, &DecodingStrategy::SepMe { xi: 0.4 }).unwrap();
        assert!(sep.outcome_labels().contains(&Outcome::Inconclusive));
    }

    #[test]
    fn empirical_information_tracks_analytic() {
        let s = eq28();
        let report = run_simulation(&s, &DecodingStrategy::Me, 100_000, 2024).unwrap();
        assert!((report.analytic_mutual_info_bits - 1.531004406).abs() < 1e-8);
        assert!((report.empirical_mutual_info_bits - report.analytic_mutual_info_bits).abs() < 0.02);
        assert_eq!(report.k_errors, 0);
    }

    #[test]
    fn shuffled_labels_carry_little_information() {
        // Independent message and outcome columns.
        let mut rng = stream_rng(99, 0);
        let n = 100_000u64;
        let mut counts = vec![vec![0u64; 4]; 4];
        for _ in 0..n {
            counts[rng.random_range(0..4)][rng.random_range(0..4)] += 1;
        }
        let report = SimulationReport {
            seed: 99,
            n_trials: n,
            strategy: DecodingStrategy::Me,
            d1: 2,
            d2: 2,
            rank: 2,
            outcome_labels: vec![Outcome::guess(0), Outcome::guess(1)],
            joint_counts: counts,
            analytic_joint: vec![vec![1.0 / 16.0; 4]; 4],
            stage_attempts: vec![],
            stage_successes: vec![],
            analytic_stage_success: vec![],
            k_errors: 0,
            inconclusive: 0,
            empirical_mutual_info_bits: 0.0,
            analytic_mutual_info_bits: 0.0,
        };
        assert!(empirical_mutual_info(&report).unwrap() <= 0.05);
    }

    #[test]
    fn diagonal_counts_give_full_information() {
        let u = SchmidtState::uniform(2, 2, 2).unwrap();
        let report = run_simulation(&u, &DecodingStrategy::Me, 4_000, 1).unwrap();
        assert!((report.empirical_mutual_info_bits - 2.0).abs() < 1e-3);
    }

    #[test]
    fn second_stage_success_rate() {
        let s = SchmidtState::from_squared(3, 4, &[0.2, 0.3, 0.5]).unwrap();
        let strat = DecodingStrategy::Multistage(StagePlan::max_confidence(2, FinalAction::Abstain));
        // Roughly 10⁴ first-stage failures.
        let report = run_simulation(&s, &strat, 25_000, 8).unwrap();
        let attempts = report.stage_attempts[1] as f64;
        assert!(attempts > 9_000.0);
        let rate = report.empirical_stage_success()[1];
        assert!((rate - 0.5).abs() <= sigma3(0.5, attempts), "{rate}");
        let p_inc = 0.4 * 0.5;
        let inc = report.inconclusive as f64 / 25_000.0;
        assert!((inc - p_inc).abs() <= sigma3(p_inc, 25_000.0));
    }
}
