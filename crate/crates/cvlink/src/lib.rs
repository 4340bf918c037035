//! Continuous-variable simulator for relaying a real parameter between
//! inertial frames with two-mode angular-phase eigenstates.
//!
//! The crate builds regularized eigenstates of the two-mode angular operator
//! on uniform grids, pushes them through the transforms an observer pair
//! cares about (boosts, clock rotations, photon loss), reads out angular
//! spectra and moments, and runs the end-to-end estimation protocol for the
//! encoded parameter. Everything is deterministic: reductions use fixed
//! chunking and random numbers come from a counter-based generator, so equal
//! seeds give byte-identical outputs at any thread count.

pub mod cli;
pub mod error;
pub mod fock;
pub mod grid;
pub mod interp;
pub mod observables;
pub mod op;
pub mod protocols;
pub mod rng;
pub mod spectral;
pub mod states;
pub mod transforms;

pub use error::{Error, Result};
pub use grid::{det_sum, Grid1D, GridState};
pub use op::{Factor, OperatorSpec};
pub use spectral::spectral_derivative;
pub use states::{
    angle, coherent, eigenstate, superposition, Branch, EigenTag, LambdaState, Structure,
};
