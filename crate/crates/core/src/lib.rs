//! Hybrid quantum-classical electronic-structure solver for linear H3 chains.
//!
//! The crate classically emulates a variational algorithm in which a small
//! quantum device only ever produces three occupation numbers: a 3-qubit
//! circuit (two parametrized Y rotations and two CNOTs) is sampled in the
//! computational basis, the qubit populations are mapped through a
//! calibration-derived affine error-mitigation step onto the polytope of
//! admissible natural-orbital occupations, and a pinned three-determinant
//! two-particle reduced density matrix (2-RDM) is reconstructed from them.
//! The energy is a trace against a two-particle reduced Hamiltonian, so no
//! wavefunction ever has to leave the device. An outer loop alternates the
//! circuit-parameter search with a classical orbital optimization over
//! Givens rotations, and a restricted open-shell Hartree-Fock plus full CI
//! reference stack provides the exact baselines the solver is judged
//! against.
//!
//! Modules mirror the pipeline: [`integrals`] builds the Gaussian-basis
//! one- and two-electron integrals, [`hamiltonian`] contracts them into the
//! pair-space reduced Hamiltonian, [`reference`] provides ROHF and FCI,
//! [`qdevice`] emulates the sampled (and optionally noisy) device,
//! [`mitigation`] owns calibration and the occupation-space correction,
//! [`rdm`] reconstructs pinned reduced density matrices, and [`solver`]
//! wires everything into dissociation scans.

pub mod error;
pub mod hamiltonian;
pub mod integrals;
pub mod mitigation;
pub mod qdevice;
pub mod rdm;
pub mod reference;
pub mod seeds;
pub mod solver;

pub use error::{Error, Result};
