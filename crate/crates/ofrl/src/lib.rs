//! Desk-scale offline reinforcement learning laboratory.
//!
//! Implements Fisher-BRC — an actor-critic method whose critic is
//! parameterized as an offset on top of the log behavior density and
//! regularized with an action-gradient penalty — together with BRAC, CQL,
//! unregularized SAC and behavioral-cloning baselines, small continuous
//! environments to run them on, and quadrature oracles that certify the
//! divergence identities the critic regularizer rests on.

pub mod actor;
pub mod autodiff;
pub mod baselines;
pub mod bc;
pub mod checkpoint;
pub mod critic;
pub mod dist;
pub mod env;
pub mod oracle;
pub mod error;
pub mod harness;

pub use error::{OfrlError, Result};
