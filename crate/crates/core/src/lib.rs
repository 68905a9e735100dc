//! Steady states, entanglement and entropy production of driven-dissipative
//! two-qubit machines.
//!
//! The crate covers a small dense linear-algebra kernel, Lindblad steady
//! states, the collective "diamond" model with its closed-form concurrence,
//! the Wootters concurrence, heat currents, quantum-jump trajectories with
//! stochastic entropy production, and the two-emitter Tavis–Cummings cavity
//! model.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cavity;
pub mod concurrence;
pub mod diamond;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod lindblad;
pub mod thermo;
pub mod trajectories;

pub use error::{Error, Result};
