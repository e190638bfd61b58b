//! Rumor–truth spreading on directed networks.
//!
//! Every person is uncertain, believes the rumor, or believes the truth.
//! Rumor-believers convert their neighbours to the rumor, truth-believers
//! convert theirs to the truth, and both beliefs are forgotten at per-node
//! rates. This crate provides:
//!
//! * [`graph`]: directed networks and random generators,
//! * [`params`]: rate parameters, validation and random sampling,
//! * [`rates`]: linear and saturating spreading-rate families,
//! * [`stochastic`]: exact individual-level simulation (direct-method SSA)
//!   and a uniformization solver for small networks,
//! * [`meanfield`]: node-level mean-field ODEs and an adaptive integrator,
//! * [`analysis`]: spectral thresholds, regime classification and dominant
//!   equilibria.
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod meanfield;
pub mod params;
pub mod rates;
pub mod stochastic;
pub mod trajectory;

pub use error::{Error, Result};
pub use graph::DirectedNetwork;
pub use linalg::Matrix;
pub use meanfield::ProbabilityState;
pub use params::UrtuParams;
pub use rates::{Rate, RateFamily, RateKind};
pub use stochastic::{NodeState, OsnState};
pub use trajectory::Trajectory;
