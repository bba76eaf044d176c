//! Evolution of fairness in the dictator game under reputation-based
//! voluntary participation.
//!
//! The crate computes, for every third-order social norm, the long-run
//! fairness level of a well-mixed population whose reputations equilibrate
//! much faster than strategies change and whose mutations are rare:
//!
//! * [`norms`]: norm encoding, parsing and wildcard patterns.
//! * [`game`]: the stage game and its three participation scenarios.
//! * [`repchain`]: the reputation Markov chain and expected payoffs.
//! * [`evolution`]: fixation probabilities, the embedded chain and fairness.
//! * [`mc`]: an agent-based simulator used as an independent check.
//! * [`sweep`]: parallel sweeps and their CSV/JSON output.

pub mod error;
pub mod evolution;
pub mod game;
pub mod markov;
pub mod mc;
pub mod norms;
pub mod repchain;
pub mod sweep;

pub use error::{ModelError, ParseError};
pub use evolution::{analyze_norm, NormAnalysis, NormReport};
pub use game::{Action, ModelParams, Reputation, Scenario, Strategy};
pub use norms::{NormPattern, SocialNorm};
