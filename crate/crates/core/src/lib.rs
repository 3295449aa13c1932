//! Performance measures of finite-state Markov chains and jump processes whose
//! transition laws drift slowly over time.
//!
//! Each measure comes with an exact brute-force oracle (row-vector propagation
//! or ODE integration) and with zeroth, first and second-order approximations
//! built from the current transition law and its derivatives:
//!
//! * [`discounted`]: infinite-horizon discounted reward.
//! * [`hitting`]: reward accumulated up to the hitting time of a set.
//! * [`transient`]: `E r(X_n)`, forward and backward expansions.
//! * [`cumulative`]: `E sum_{j<n} r(X_j)`.
//! * [`jump`]: `E r(X(t))` for continuous-time jump processes.
//!
//! [`examples`] generates the (s,S) inventory chain and test fixtures, and
//! [`cli`] drives the `nsmc` binary.

pub mod cli;
pub mod cumulative;
pub mod discounted;
pub mod error;
pub mod examples;
pub mod hitting;
pub mod jump;
pub mod linalg;
pub mod model;
pub mod transient;

pub use error::{Error, Result};
pub use linalg::{ColVec, Matrix, RowVec};
pub use model::{DriftModel, Expansion, RewardSpec, StochasticMatrix, TransitionSequence};
