//! Cavity QED with Rydberg atoms: single-excitation dynamics, quantum-jump
//! simulation on the photon ladder, photon-atom gate analysis and a dense
//! full-Hilbert-space oracle.

pub mod checks;
pub mod cli;
pub mod csv;
pub mod dynamics;
pub mod error;
pub mod gate;
pub mod mcwf;
pub mod oracle;
pub mod params;
pub mod rk4;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use params::{Config, FockLadderState, PhysicalParams, SingleExcState};
