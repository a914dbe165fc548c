//! Symbolic and numeric machinery for the unified Lagrangian-Hamiltonian
//! treatment of cubic Horndeski gravity.

pub mod ad;
pub mod chart;
pub mod dsl;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod hamiltonian;
pub mod ladder;
pub mod lagrangian;
pub mod legendre;
pub mod numeric;
pub mod report;

pub use error::{Error, Result};
