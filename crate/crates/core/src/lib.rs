//! Classical emulation of a measurement-driven Hamiltonian simulation scheme
//! for real polynomial ODE systems.
//!
//! The crate maps `dx/dt = G(x)` onto a cubic, norm-preserving
//! observable–Hamiltonian form ([`mapping`]), advances amplitude-encoded
//! states with piecewise-constant Hamiltonians assembled from measured
//! expectation values ([`quantum`], [`trajectory`]) and computes ensemble
//! diagnostics such as von Neumann entropy and trace distance
//! ([`analysis`]).

pub mod analysis;
pub mod artifact;
pub mod mapping;
pub mod poly;
pub mod quantum;
pub mod trajectory;
