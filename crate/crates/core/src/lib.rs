//! Doubly conditional reflected BSDEs on finite scenario trees.
//!
//! The full filtration is realized by a non-recombining [`finprob::ScenarioTree`]
//! and the partial information by a [`finprob::SubFiltration`]. On top of that
//! the crate provides the two-sided Skorokhod map ([`skorokhod`]), Dynkin games
//! over the subfiltration ([`dynkin`]), the reflected BSDE solvers
//! ([`solver`]), the linear-driver structure theory ([`analysis`]) and the
//! optimal switching application ([`switching`]).

pub mod analysis;
pub mod cli;
pub mod dynkin;
pub mod error;
pub mod finprob;
pub mod skorokhod;
pub mod solver;
pub mod switching;

pub use error::{Error, Result};
