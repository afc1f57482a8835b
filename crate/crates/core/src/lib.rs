//! Dissipative dynamics of a one-dimensional electron gas.
//!
//! Two engines share one free-energy functional (Thomas-Fermi, Weizsäcker,
//! soft-core Hartree, Dirac exchange, external potential and lattice-gas
//! entropy): [`diffusion`] integrates the density gradient flow, and [`dks`]
//! propagates damped Kohn-Sham orbitals with a Kostin friction potential.
//! [`oracles`] holds the closed-form references, [`io`] and [`run`] the
//! config-driven runner, and [`verify`] the acceptance suite.

pub mod diffusion;
pub mod dks;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod hartree;
pub mod io;
pub mod oracles;
pub mod run;
pub mod verify;

pub use error::{Error, Result};
