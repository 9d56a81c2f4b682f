//! Bayesian reconstruction of sound-soft obstacles from far-field data.
//!
//! The crate bundles a Nyström boundary-integral forward solver, a
//! total-variation prior on the Fourier coefficients of a star-shaped
//! boundary, and a preconditioned Crank–Nicolson sampler that ties them
//! together through the data misfit.

pub mod cli;
pub mod data;
pub mod forward;
pub mod geometry;
pub mod jet;
pub mod prior;
pub mod sampler;
