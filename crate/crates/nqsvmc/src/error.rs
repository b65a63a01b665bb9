//! Library-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two containers that must agree in length did not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A dense or enumerative path was asked for more sites than it supports.
    #[error("{what} supports at most n = {max} sites, got n = {n}")]
    TooLarge {
        what: &'static str,
        n: usize,
        max: usize,
    },

    /// A computation produced a non-finite value or an underflowed weight.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The symmetrized transition kernel failed its detailed-balance check.
    #[error("transition kernel not reversible: max |S - S^T| = {asymmetry:.3e} exceeds 1e-6")]
    NotReversible { asymmetry: f64 },

    /// Spectral gap of zero: the mixing-time bounds diverge.
    #[error("spectral gap is zero; mixing time unbounded")]
    UnboundedMixingTime,

    /// Malformed Hamiltonian file, circuit text, or snapshot document.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
