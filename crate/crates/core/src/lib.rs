//! Dense coding over non-maximally entangled qudit pairs.
//!
//! Alice and Bob share `Σ a_l|l⟩|l⟩`. Alice encodes one of `D·d2` messages
//! with `X^{-k}Z^j` on her half; Bob disentangles with a generalized XOR and
//! is left to tell apart `D` symmetric states. The modules below build the
//! states, the discrimination strategies, their information rates, a seeded
//! Monte Carlo, a QKD variant and parameter sweeps.

pub mod channel;
pub mod discrimination;
pub mod error;
pub mod gates;
pub mod info;
pub mod qkd;
pub mod sim;
pub mod sweep;
pub mod tensor;

pub use channel::{Message, SchmidtState};
pub use discrimination::{FinalAction, SeparationMap, Stage, StagePlan};
pub use error::{Error, Result};
pub use info::{mutual_info_me, mutual_info_multistage, mutual_info_sep, InfoReport};
pub use sim::{run_simulation, DecodingStrategy, SimulationReport};
pub use tensor::{Ket, Measurement, Operator, Outcome};
