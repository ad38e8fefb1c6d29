//! Simulation and certificate laboratory for adaptive control with
//! closed-loop reference models (CRMs).
//!
//! The crate simulates five families of adaptive systems (scalar CRM/ORM
//! MRAC, states-accessible MIMO MRAC, composite MRAC with observer
//! feedback, tuning-function backstepping, adaptive robot control),
//! evaluates the analytical transient bounds of each family as numerical
//! certificates against the simulated trajectories, and reproduces the
//! associated simulation studies as deterministic CSV/JSON/SVG artifacts.

// validation guards are written as `!(x > 0.0)` on purpose: the negated
// form also rejects NaN configuration values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backstepping;
pub mod bounds;
pub mod cmrac;
pub mod error;
pub mod experiment;
pub mod mimo;
pub mod plot;
pub mod robot;
pub mod scalar;
pub mod scenario;
pub mod signal;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
