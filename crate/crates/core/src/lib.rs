//! Exact-simulation engine for two variational image brushes.
//!
//! * **Steerable** steers the quantum encoding of one image region toward
//!   another with a neural-network-controlled spin chain ([`control`],
//!   [`colorsvd`]).
//! * **Chemical** replays the parameter trajectory of an H2 variational
//!   eigensolver run over the colors of a brush stroke ([`h2chem`], [`vqe`]).
//!
//! [`brushes`] ties both effects to RGBA canvases.

pub mod brushes;
pub mod colorsvd;
pub mod control;
pub mod family_store;
pub mod h2chem;
pub mod statevec;
pub mod vqe;

pub use statevec::{PauliString, PauliSum, Statevector};
