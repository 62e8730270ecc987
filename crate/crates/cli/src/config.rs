//! Experiment configuration: a JSON file whose fields command-line flags
//! may override.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use densecode::qkd::{EveStrategy, Fallback};
use densecode::sim::DecodingStrategy;
use densecode::SchmidtState;
use serde::Deserialize;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d1: Option<usize>,
    pub d2: Option<usize>,
    /// Squared Schmidt coefficients.
    pub squared: Option<Vec<f64>>,
    pub grid: Option<usize>,
    pub margin: Option<f64>,
    pub xi_steps: Option<usize>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub threads: Option<usize>,
    pub strategy: Option<DecodingStrategy>,
    pub eve: Option<OneOrMany<EveStrategy>>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn dims(&self, default: (usize, usize)) -> (usize, usize) {
        (self.d1.unwrap_or(default.0), self.d2.unwrap_or(default.1))
    }

    /// The configured state, or `a² = (0.2, 0.8)` on two qubits.
    pub fn state(&self) -> Result<SchmidtState> {
        let squared = self.squared.clone().unwrap_or_else(|| vec![0.2, 0.8]);
        let (d1, d2) = self.dims((squared.len(), squared.len()));
        Ok(SchmidtState::from_squared(d1, d2, &squared)?)
    }

    pub fn grid(&self) -> Result<usize> {
        let g = self.grid.unwrap_or(60);
        if g < 2 {
            bail!("grid must be at least 2, got {g}");
        }
        Ok(g)
    }

    pub fn trials(&self) -> Result<u64> {
        match self.trials.unwrap_or(100_000) {
            0 => bail!("trials must be at least 1"),
            n => Ok(n),
        }
    }

    pub fn eves(&self) -> Vec<EveStrategy> {
        match &self.eve {
            Some(e) => e.clone().into_vec(),
            None => {
                let intercept = |strategy| EveStrategy::Intercept {
                    strategy,
                    fallback: Fallback::GuessUniform,
                };
                vec![
                    EveStrategy::Absent,
                    intercept(DecodingStrategy::Me),
                    intercept(DecodingStrategy::SepMe { xi: 0.5 }),
                    intercept(DecodingStrategy::SepMe { xi: 1.0 }),
                ]
            }
        }
    }
}
