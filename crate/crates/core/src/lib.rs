//! Fidelity estimation by spectral truncation.
//!
//! The pipeline diagonalizes one state (exactly, or variationally with a
//! parameterized circuit), measures the other state's matrix elements in that
//! eigenbasis (exactly, or through simulated swap tests), and turns the
//! resulting `T` matrix into lower and upper bounds on the Uhlmann fidelity.
//! Certified variants absorb the residual diagonalization error.

pub mod error;
pub mod bench;
pub mod bounds;
pub mod fidelity;
pub mod measure;
pub mod optim;
pub mod qmat;
pub mod seeds;
pub mod states;
pub mod vqsd;

pub use error::{Error, Result};
