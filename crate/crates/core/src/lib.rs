#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Simulator and compiler for a multiplexed superconducting qubit controller
//! that drives many qubits from one shared IF line and applies Z rotations
//! virtually through the IF phase.

pub mod calibration;
pub mod cli;
pub mod compiler;
pub mod config;
pub mod demux;
pub mod error;
pub mod mixer;
pub mod plot;
pub mod qubit;
pub mod resources;
pub mod signals;

pub use error::{Error, Result};
