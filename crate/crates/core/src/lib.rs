//! Neural-network variational Monte Carlo for small molecules and ions.
//!
//! The pipeline runs an unrestricted Hartree–Fock calculation in an STO-6G
//! minimal basis, maps Mulliken partial charges onto per-nucleus electron
//! counts for ions, pretrains a permutation-equivariant determinant ansatz on
//! the Hartree–Fock orbitals, and then minimizes the variational energy with
//! Metropolis–Hastings sampling.
//!
//! All lengths are in Bohr and all energies in Hartree.

// Index loops read closer to the index notation of the integral formulas.
#![allow(clippy::needless_range_loop)]

pub mod ansatz;
pub mod autodiff;
pub mod basis;
pub mod charge_init;
pub mod energy;
pub mod error;
pub mod molecule;
pub mod sampler;
pub mod scf;
pub mod trainer;

pub use error::{Error, Result};
