//! Dynamics of two interacting spin-1 systems (qutrits) driven through a
//! linearly ramped longitudinal field.
//!
//! The crate is organised around one conserved quantity: the parity operator
//! `K = cos(pi * (S1z + S2z))` commutes with the Hamiltonian at every instant,
//! which splits the nine-dimensional product space into a four-dimensional
//! block (two decoupled fictitious qubits) and a five-dimensional block whose
//! middle 3x3 core is an su(2) spin-1.
//!
//! * [`specfun`]: complex log-gamma, parabolic cylinder functions and the exact
//!   two-level Cayley-Klein amplitudes built from them.
//! * [`model`]: operators, field protocols, Hamiltonians, block structure.
//! * [`propagator`]: adaptive numerical time evolution in every picture.
//! * [`analytic`]: closed-form transition tables, exact evolution operators,
//!   dark states.
//! * [`entanglement`]: negativity, general and closed form.
//! * [`noise`]: white-noise Monte Carlo ensembles.
//! * [`validation`]: the analytic-versus-numeric check battery.
//!
//! Units: `hbar = 1`. Energies are measured in a reference unit `E0`, times in
//! `hbar / E0`, and the dimensionless sweep variable is `tau = sqrt(alpha) * t`.

pub mod analytic;
pub mod entanglement;
mod error;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod ode;
pub mod propagator;
pub mod specfun;
pub mod validation;

pub use error::{Error, Result};
