//! Simulation and statistical verification for collectives of communicating
//! stochastic hybrid agents.
//!
//! The crate is layered:
//!
//! - [`hybrid`] — single-process primitives: piecewise-deterministic and
//!   diffusive hybrid dynamics, sojourn sampling, reset kernels.
//! - [`agent`] — the coordination agent: decaying guards, local clocks, and
//!   additive coupling inputs built from neighbour announcements.
//! - [`swarm`] — the synchronous N-agent engine, the guard/clock abstraction
//!   of a run, jump-time reconstruction, and collective composition.
//! - [`analysis`] — generator/semigroup checks, first-passage and jump-rate
//!   estimation, and mean jump intensity diagnostics.
//! - [`scenario`], [`synthetic`], [`io`] — the on-disk scenario schema,
//!   built-in benchmark scenarios, and trace/estimate serialization.
//!
//! All randomness flows through per-purpose ChaCha8 streams derived in
//! [`rng`], so every run is reproducible bit for bit from its master seed.

// Validation code writes `!(x > 0.0)` rather than `x <= 0.0` on purpose:
// the negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod analysis;
pub mod error;
pub mod hybrid;
pub mod io;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod swarm;
pub mod synthetic;

pub use error::{Result, SimError};
