//! Power-of-two (PWR2) long-range Ising chains and their Rydberg
//! "tambourine" realisation.
//!
//! The crate covers coupling-graph construction ([`graph`]), classical
//! ground-state and gap analysis ([`classical`], [`mcmc`]), the local
//! intrinsic dimensionality diagnostic ([`lid`]), sparse exact
//! diagonalisation with entanglement and structure-factor observables
//! ([`quantum`]), the pairwise finite-size-scaling pipeline ([`fss`]), the
//! tambourine geometry ([`rydgeo`]) and a reproducible command-line front end
//! ([`cli`]).

pub mod classical;
pub mod cli;
pub mod error;
pub mod format;
pub mod fss;
pub mod graph;
pub mod lid;
pub mod mcmc;
pub mod quantum;
pub mod rydgeo;

pub use error::{Error, Result};
