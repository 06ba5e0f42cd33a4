//! Online policy optimization for a scalar matched-disturbance system with
//! unknown, time-varying residual parameters.
//!
//! The pieces compose as: a [`model::SystemSpec`] defines the plant, cost and
//! sets; [`alg`] updates the policy gain; [`est`] tracks the residual
//! parameter; [`meta::run_meta`] runs the loop; [`metrics`] scores the run;
//! [`harness`] drives configured experiments and writes traces.

pub mod acceptance;
pub mod alg;
pub mod derivatives;
pub mod error;
pub mod est;
pub mod harness;
pub mod meta;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod vecops;

pub use error::{Error, Result};
