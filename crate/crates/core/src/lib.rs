//! Executable information-flow accounting.
//!
//! The crate is organised around five modules:
//!
//! * [`infocore`]: finite distributions, joints, and the Shannon measures
//!   (self-information, entropy, mutual information, total variation) plus
//!   MacKay's structural/metrical counters.
//! * [`mechanisms`]: local ε-DP mechanisms as row-stochastic channels, the
//!   realized-ε computation, and certificates checking that a channel's mutual
//!   information never exceeds `ε·log₂ e` Sh.
//! * [`causalnet`]: exact enumeration over small categorical Bayesian networks
//!   to quantify how much a message reveals about every other variable.
//! * [`society`]: a seeded, discrete-time simulator of entities exchanging data
//!   through explicit (decided) and implicit (environmental) flows, with a
//!   per-pair information ledger.
//! * [`anonbench`]: k-anonymity and linkage attacks on toy tables, contrasted
//!   with a randomized-response release.

pub mod anonbench;
pub mod causalnet;
mod error;
pub mod infocore;
pub mod mechanisms;
pub mod society;

pub use error::{Error, Result, STATE_SPACE_LIMIT};
pub use infocore::{Dist, Extended, InfoMeasure, Joint, Representation};
pub use mechanisms::{BoundCertificate, Channel, EpsReport};

/// Absolute tolerance used for stochasticity checks and bound comparisons.
pub const TOLERANCE: f64 = 1e-9;
