//! Reconstruction of translation-invariant spin-chain Hamiltonians from
//! thermal expectation values of local Pauli operators.

pub mod autoencoder;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod pauli;
pub mod protocols;
pub mod reconstruct;

pub use error::{Error, Result};
