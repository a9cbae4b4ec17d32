//! Multi-constraint percentile queries on multi-dimensional weighted MDPs.
//!
//! A query asks for one strategy satisfying several constraints
//! `P[f_l ≥ v] ≥ α` at once, where `f` is one of the payoffs in
//! [`query::PayoffKind`]. [`solve::solve_query`] decides such queries,
//! returns a witness strategy when one exists, and [`sim`] checks
//! strategies exactly or by simulation.

pub mod chain;
pub mod error;
pub mod fixtures;
pub mod format;
pub mod graph;
pub mod horizon;
pub mod lift;
pub mod lp;
pub mod meanpayoff;
pub mod model;
pub mod payoff;
pub mod query;
pub mod rational;
pub mod reach;
pub mod regular;
pub mod sim;
pub mod solve;
pub mod strategy;

pub use error::{Error, Result};
pub use model::{MdpBuilder, StateId, WeightedMdp};
pub use query::{PayoffKind, PercentileConstraint, PercentileQuery};
pub use rational::{rat, Rational};
