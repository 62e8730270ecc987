//! Two-state style key distribution over the symmetric family.
//!
//! Alice sends `|α_j⟩` for a uniformly random dit `j`. Bob separates at
//! `ξ = 1` and keeps the round only when that succeeds, in which case his
//! readout is certain. An intercepting Eve runs her own strategy, settles on
//! a dit `ĵ` (falling back on a guess when she has no conclusive result) and
//! resends `|α_ĵ⟩`. Without noise every error in the sifted key is hers.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::symmetric_ket;
use crate::discrimination::FinalAction;
use crate::error::{Error, Result};
use crate::info::mutual_info_from_joint;
use crate::sim::{Decoder, DecodingStrategy, BATCH_SIZE};
use crate::tensor::{born_probabilities, stream_rng, Ket, Outcome};

/// What Eve does when her strategy ends inconclusive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    #[default]
    GuessUniform,
    /// Minimum-error readout of whatever state she is left with.
    GuessMe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EveStrategy {
    Absent,
    Intercept {
        strategy: DecodingStrategy,
        #[serde(default)]
        fallback: Fallback,
    },
}

impl EveStrategy {
    pub fn intercept(strategy: DecodingStrategy, fallback: Fallback) -> Self {
        EveStrategy::Intercept { strategy, fallback }
    }

    pub fn describe(&self) -> String {
        match self {
            EveStrategy::Absent => "absent".into(),
            EveStrategy::Intercept { strategy, fallback } => {
                let fb = match fallback {
                    Fallback::GuessUniform => "uniform",
                    Fallback::GuessMe => "me",
                };
                format!("{}/{fb}", strategy.describe())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QkdReport {
    pub seed: u64,
    pub n_rounds: u64,
    pub eve: EveStrategy,
    pub kept: u64,
    pub sift_rate: f64,
    pub sifted_errors: u64,
    pub sifted_error_rate: f64,
    /// Plug-in mutual information between Alice's dit and Eve's record
    /// (outcome label and resent dit) over the rounds Bob kept.
    pub eve_info_bits: f64,
    /// The same quantity restricted to rounds where Eve's first stage was
    /// conclusive.
    pub eve_first_stage_info_bits: f64,
    pub eve_first_stage_rounds: u64,
    pub analytic_sift_rate: f64,
    pub analytic_error_rate: f64,
}

impl QkdReport {
    pub const CSV_HEADER: &'static str =
        "eve,n_rounds,kept,sift_rate,analytic_sift_rate,sifted_error_rate,analytic_error_rate,eve_info_bits";
}

struct Eve {
    decoder: Decoder,
    fallback: Fallback,
    labels: Vec<Outcome>,
}

struct Channel {
    alphabet: Vec<Ket>,
    bob: Decoder,
    eve: Option<Eve>,
}

impl Channel {
    fn new(coeffs: &[f64], eve: &EveStrategy) -> Result<Self> {
        let d = coeffs.len();
        if d < 2 {
            return Err(Error::InvalidDimension(format!("alphabet of size {d}")));
        }
        let alphabet = (0..d)
            .map(|j| symmetric_ket(coeffs, d, j))
            .collect::<Result<Vec<_>>>()?;
        let bob = Decoder::new(coeffs, d, &DecodingStrategy::SepMe { xi: 1.0 })?;
        let eve = match eve {
            EveStrategy::Absent => None,
            EveStrategy::Intercept { strategy, fallback } => {
                let decoder = Decoder::new(coeffs, d, strategy)?;
                let labels = decoder.effective_measurement()?.labels().to_vec();
                Some(Eve {
                    decoder,
                    fallback: *fallback,
                    labels,
                })
            }
        };
        Ok(Self { alphabet, bob, eve })
    }

    fn round<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Round> {
        let d = self.alphabet.len();
        let dit = rng.random_range(0..d);
        let (sent, eve) = match &self.eve {
            None => (dit, None),
            Some(eve) => {
                let got = eve.decoder.decode(&self.alphabet[dit], rng)?;
                let guess = match got.outcome.index() {
                    Some(j) => j,
                    None => match eve.fallback {
                        Fallback::GuessUniform => rng.random_range(0..d),
                        Fallback::GuessMe => eve
                            .decoder
                            .read_final(&got.residual, rng)?
                            .index()
                            .ok_or(Error::UnreachableOutcome)?,
                    },
                };
                (guess, Some((got.outcome, guess)))
            }
        };
        let bob = self.bob.decode(&self.alphabet[sent], rng)?.outcome.index();
        Ok(Round { dit, bob, eve })
    }
}

struct Round {
    dit: usize,
    bob: Option<usize>,
    eve: Option<(Outcome, usize)>,
}

#[derive(Clone, Debug)]
struct Tally {
    kept: u64,
    errors: u64,
    /// Rows: Alice's dit. Columns: Eve's record, over kept rounds.
    eve: Vec<Vec<u64>>,
    eve_first: Vec<Vec<u64>>,
}

impl Tally {
    fn new(d: usize, records: usize) -> Self {
        Self {
            kept: 0,
            errors: 0,
            eve: vec![vec![0; records]; d],
            eve_first: vec![vec![0; records]; d],
        }
    }

    fn merge(mut self, other: &Tally) -> Self {
        self.kept += other.kept;
        self.errors += other.errors;
        for (a, b) in self.eve.iter_mut().zip(&other.eve) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.eve_first.iter_mut().zip(&other.eve_first) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self
    }
}

fn plug_in_info(counts: &[Vec<u64>]) -> Result<f64> {
    let n: u64 = counts.iter().flatten().sum();
    if n == 0 {
        return Ok(0.0);
    }
    let joint: Vec<Vec<f64>> = counts
        .iter()
        .map(|r| r.iter().map(|&c| c as f64 / n as f64).collect())
        .collect();
    mutual_info_from_joint(&joint)
}

/// Runs `n_rounds` seeded rounds; batching matches [`crate::sim::run_simulation`].
pub fn simulate_qkd(coeffs: &[f64], eve: &EveStrategy, n_rounds: u64, seed: u64) -> Result<QkdReport> {
    if n_rounds == 0 {
        return Err(Error::Config("n_rounds must be at least 1".into()));
    }
    let channel = Channel::new(coeffs, eve)?;
    let d = coeffs.len();
    let records = channel.eve.as_ref().map_or(1, |e| e.labels.len() * d);
    let batches = n_rounds.div_ceil(BATCH_SIZE);

    let partials = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let n = BATCH_SIZE.min(n_rounds - b * BATCH_SIZE);
            let mut t = Tally::new(d, records);
            for _ in 0..n {
                let r = channel.round(&mut rng)?;
                let Some(kept) = r.bob else { continue };
                t.kept += 1;
                if kept != r.dit {
                    t.errors += 1;
                }
                if let (Some(eve), Some((label, guess))) = (&channel.eve, r.eve) {
                    let pos = eve.labels.iter().position(|l| *l == label).ok_or(Error::UnreachableOutcome)?;
                    let col = pos * d + guess;
                    t.eve[r.dit][col] += 1;
                    if matches!(label, Outcome::Guess { stage: 0, .. }) {
                        t.eve_first[r.dit][col] += 1;
                    }
                }
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    let tally = partials.iter().fold(Tally::new(d, records), |acc, t| acc.merge(t));

    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(QkdReport {
        seed,
        n_rounds,
        eve: eve.clone(),
        kept: tally.kept,
        sift_rate: ratio(tally.kept, n_rounds),
        sifted_errors: tally.errors,
        sifted_error_rate: ratio(tally.errors, tally.kept),
        eve_info_bits: plug_in_info(&tally.eve)?,
        eve_first_stage_info_bits: plug_in_info(&tally.eve_first)?,
        eve_first_stage_rounds: tally.eve_first.iter().flatten().sum(),
        analytic_sift_rate: analytic_sift_rate(coeffs)?,
        analytic_error_rate: analytic_qkd_error(coeffs, eve)?,
    })
}

/// Bob's unambiguous success probability `D·c_min²`.
pub fn analytic_sift_rate(coeffs: &[f64]) -> Result<f64> {
    Ok(Decoder::new(coeffs, coeffs.len(), &DecodingStrategy::SepMe { xi: 1.0 })?.stage_success_probabilities()[0])
}

/// `P(ĵ ≠ j)` for Eve's strategy. Bob's keep probability does not depend on
/// the resent state, and a kept result always equals `ĵ`, so this is also
/// the sifted error rate.
pub fn analytic_qkd_error(coeffs: &[f64], eve: &EveStrategy) -> Result<f64> {
    let (strategy, fallback) = match eve {
        EveStrategy::Absent => return Ok(0.0),
        EveStrategy::Intercept { strategy, fallback } => (strategy, *fallback),
    };
    let d = coeffs.len();
    // A minimum-error fallback is the same as ending the plan with ME.
    let strategy = match fallback {
        Fallback::GuessMe => {
            let mut plan = strategy.plan();
            plan.final_action = FinalAction::Me;
            DecodingStrategy::Multistage(plan)
        }
        Fallback::GuessUniform => strategy.clone(),
    };
    let povm = Decoder::new(coeffs, d, &strategy)?.effective_measurement()?;
    let mut correct = 0.0;
    for j in 0..d {
        let probs = born_probabilities(&symmetric_ket(coeffs, d, j)?, &povm)?;
        for (label, p) in povm.labels().iter().zip(probs) {
            correct += match label.index() {
                Some(l) if l == j => p,
                Some(_) => 0.0,
                None => p / d as f64,
            };
        }
    }
    Ok(1.0 - correct / d as f64)
}

/// CSV row matching [`QkdReport::CSV_HEADER`], floats formatted by `fmt`.
pub fn csv_row(report: &QkdReport, fmt: impl Fn(f64) -> String) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        report.eve.describe(),
        report.n_rounds,
        report.kept,
        fmt(report.sift_rate),
        fmt(report.analytic_sift_rate),
        fmt(report.sifted_error_rate),
        fmt(report.analytic_error_rate),
        fmt(report.eve_info_bits),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrimination::StagePlan;

    fn eq28() -> Vec<f64> {
        vec![0.2f64.sqrt(), 0.8f64.sqrt()]
    }

    fn three() -> Vec<f64> {
        [0.2f64, 0.3, 0.5].iter().map(|x| x.sqrt()).collect()
    }

    fn within_3sigma(x: f64, p: f64, n: f64) -> bool {
        (x - p).abs() <= 3.0 * (p * (1.0 - p) / n).sqrt() + 1e-12
    }

    fn mc() -> DecodingStrategy {
        DecodingStrategy::SepMe { xi: 1.0 }
    }

    #[test]
    fn eve_strategy_json() {
        let e: EveStrategy =
            serde_json::from_str(r#"{"kind":"intercept","strategy":{"kind":"sep_me","xi":1.0}}"#).unwrap();
        assert_eq!(e, EveStrategy::intercept(mc(), Fallback::GuessUniform));
        let a: EveStrategy = serde_json::from_str(r#"{"kind":"absent"}"#).unwrap();
        assert_eq!(a, EveStrategy::Absent);
    }

    #[test]
    fn analytic_values() {
        let c = eq28();
        assert_eq!(analytic_qkd_error(&c, &EveStrategy::Absent).unwrap(), 0.0);
        let me = analytic_qkd_error(&c, &EveStrategy::intercept(DecodingStrategy::Me, Fallback::GuessUniform));
        assert!((me.unwrap() - 0.1).abs() < 1e-12);
        let sep1 = analytic_qkd_error(&c, &EveStrategy::intercept(mc(), Fallback::GuessUniform)).unwrap();
        assert!((sep1 - 0.3).abs() < 1e-12);
        let half = EveStrategy::intercept(DecodingStrategy::SepMe { xi: 0.5 }, Fallback::GuessUniform);
        assert!((analytic_qkd_error(&c, &half).unwrap() - 0.227446).abs() < 1e-6);
        assert!((analytic_sift_rate(&c).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn me_fallback_matches_me_final_action() {
        let c = three();
        let a = EveStrategy::intercept(mc(), Fallback::GuessMe);
        let b = EveStrategy::intercept(
            DecodingStrategy::Multistage(StagePlan::max_confidence(1, FinalAction::Me)),
            Fallback::GuessUniform,
        );
        let (x, y) = (analytic_qkd_error(&c, &a).unwrap(), analytic_qkd_error(&c, &b).unwrap());
        assert!((x - y).abs() < 1e-12);
    }

    #[test]
    fn multistage_eve_beats_single_stage() {
        let c = three();
        let single = analytic_qkd_error(&c, &EveStrategy::intercept(mc(), Fallback::GuessUniform)).unwrap();
        let multi = EveStrategy::intercept(
            DecodingStrategy::Multistage(StagePlan::max_confidence(2, FinalAction::Abstain)),
            Fallback::GuessUniform,
        );
        let multi = analytic_qkd_error(&c, &multi).unwrap();
        assert!((single - 0.8 / 3.0).abs() < 1e-9, "{single}");
        assert!((multi - 0.2).abs() < 1e-9, "{multi}");
    }

    #[test]
    fn absent_eve_gives_clean_key() {
        let r = simulate_qkd(&eq28(), &EveStrategy::Absent, 20_000, 3).unwrap();
        assert_eq!(r.sifted_errors, 0);
        assert!(within_3sigma(r.sift_rate, 0.4, 20_000.0), "{}", r.sift_rate);
    }

    #[test]
    fn intercept_rates_match_analytic() {
        let n = 100_000u64;
        for (eve, p) in [
            (EveStrategy::intercept(DecodingStrategy::Me, Fallback::GuessUniform), 0.1),
            (EveStrategy::intercept(mc(), Fallback::GuessUniform), 0.3),
        ] {
            let r = simulate_qkd(&eq28(), &eve, n, 17).unwrap();
            assert!(within_3sigma(r.sifted_error_rate, p, r.kept as f64), "{} {}", eve.describe(), r.sifted_error_rate);
        }
    }

    #[test]
    fn certain_first_stage_reveals_every_dit() {
        let r = simulate_qkd(&three(), &EveStrategy::intercept(mc(), Fallback::GuessUniform), 60_000, 4).unwrap();
        assert!(r.eve_first_stage_rounds > 5_000);
        assert!((r.eve_first_stage_info_bits - 3f64.log2()).abs() < 0.01);
        assert!(r.eve_info_bits < r.eve_first_stage_info_bits);
    }

    #[test]
    fn replay_is_deterministic() {
        let eve = EveStrategy::intercept(DecodingStrategy::SepMe { xi: 0.3 }, Fallback::GuessMe);
        let a = simulate_qkd(&three(), &eve, 5_000, 9).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate_qkd(&three(), &eve, 5_000, 9).unwrap());
        assert_eq!(a, b);
        assert!(csv_row(&a, |x| format!("{x}")).starts_with("sep_me(0.3)/me,5000,"));
    }
}
