//! Ground states of repulsive bosons in single- and double-well traps.
//!
//! Hartree minimizers, tunneling energies, Bogoliubov fluctuation energies and
//! the two-mode Bose-Hubbard crossover, all on uniform 1D grids.

pub mod assembly;
pub mod bogoliubov;
pub mod config;
pub mod error;
pub mod exec;
pub mod fit;
pub mod hartree;
pub mod model;
pub mod tridiag;
pub mod tunneling;
pub mod twomode;

pub use error::{Error, Result};
pub use exec::Exec;
pub use model::{Grid1D, InteractionKernel, KernelShape, TrapKind, TrapSpec, WaveFunction};
