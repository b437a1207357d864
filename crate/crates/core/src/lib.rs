//! Simulator for a two-oscillator engine fueled by projective measurements.
//!
//! Two harmonic oscillators with a Gaussian (non-Hookean) coupling are
//! represented in a truncated product Fock basis. The crate builds the
//! interaction matrix, diagonalizes the Hamiltonian, propagates `|0,0⟩`
//! after the coupling is switched on, and tallies the energy ledger of
//! coupling → measurement → decoupling → extraction cycles.

pub mod basis;
pub mod config;
pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod measurement;
pub mod specfun;

pub use basis::{flat_index, free_energy, unflatten, CompositeIndex, ModeTruncation};
pub use config::{ConfigDocument, EngineConfig, RunConfig};
pub use coupling::{assemble_matrix, CouplingSpec, Geometry, InteractionMatrix};
pub use dynamics::{
    assemble_hamiltonian, energy_series, propagate, spectral_decompose, step_operator, EnergyRecord, HamiltonianMatrix,
    SpectralHamiltonian, StateVector,
};
pub use error::{EngineError, Result};
pub use measurement::{outcome_distribution, run_cycles, CycleLedger, OutcomeDistribution};
