//! Variational Monte Carlo for qubit Hamiltonians with a complex-parameter RBM
//! ansatz, a classical surrogate of its diagonal distribution, and Markov-chain
//! samplers driven by classical moves or simulated quantum circuits.
//!
//! Module map:
//! - [`configspace`]: spin configurations, index bijection, monomial basis
//! - [`rbm`]: the RBM state, log-domain matrix elements, analytic gradients
//! - [`surrogate`]: Ising-type surrogate of the diagonal, two-stage fits
//! - [`hamiltonian`]: Pauli-string Hamiltonians and local energies
//! - [`quantumsim`]: statevector simulation of the proposal circuits
//! - [`mcmc`]: Metropolis–Hastings chains, transition matrices, spectral gaps
//! - [`vmc`]: the training loop, estimators, zero-variance extrapolation
//! - [`ed`]: dense exact diagonalization for small systems

pub mod configspace;
pub mod ed;
pub mod error;
pub mod hamiltonian;
pub mod mcmc;
mod numerics;
pub mod quantumsim;
pub mod rbm;
pub mod surrogate;
pub mod vmc;

pub use error::{Error, Result};
