//! Lattice Bogoliubov-Dirac-Fock vacuum: free Dirac algebra, momentum
//! lattices, vacuum states, the self-consistent mean-field solver, charge
//! renormalization and Pauli-Villars regularization.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod output;
pub mod profiles;
pub mod pv;
pub mod quadrature;
pub mod renorm;
pub mod run;
pub mod scf;
pub mod spinor;
pub mod vacuum;

pub use error::{Error, Result};
pub use lattice::{build_lattice, ChargeDensity, CurrentDensity, FourierField, LatticeParams, MomentumLattice};
pub use scf::{scf_solve, scf_solve_charged, ScfConfig, ScfResult};
pub use vacuum::VacuumState;
