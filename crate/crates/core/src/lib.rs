//! Minimum-compliance topology optimization on structured plane-stress grids.
//!
//! Two optimizer families share one finite-element and sensitivity pipeline:
//! the classical optimality-criteria fixed point and a projected-gradient
//! method whose volume and bound multipliers are obtained from the
//! orthogonality of the projected gradient to the active constraint gradients.
//! Their common fixed point is characterized by a vanishing projected gradient.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid_fe;
pub mod optimizers;
pub mod problems;
pub mod projection;
pub mod simp_model;
pub mod tension_energy;

pub use error::{Error, Result};
