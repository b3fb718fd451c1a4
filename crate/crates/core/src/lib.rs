//! Particle-number-conserving fermionic Hamiltonians, their ground states and
//! unitary dynamics, and M-body reduced density matrices with the entropy
//! bounds that constrain them.
//!
//! Orbitals are 1-based in every public interface.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod fockspace;
pub mod moments;
pub mod operators;
pub mod rdm;
pub mod sparse;
pub mod spectra;
pub mod symmetry;

pub use dynamics::{
    detect_plateau, estimate_saturation_time, evolve_and_measure, fit_early_growth, zero_derivative_check,
    EntropyTrace, GrowthFit, InitialState, TimeGrid, TrajectoryConfig,
};
pub use error::{Error, Result};
pub use fockspace::{
    apply_annihilation_string, apply_creation_string, binomial, enumerate_composites, enumerate_sector, CompositeIndex,
    OccupationState, SectorBasis,
};
pub use moments::{
    brute_force_mean, interaction_lower_bound, maximally_mixed_energy, schatten_norm, spectral_mean, theorem_check,
    SpectralMean, TheoremReport,
};
pub use num_complex::Complex64;
pub use operators::{
    antisymmetrize_and_flatten, assemble_sector_matrix, build_hubbard, build_lattice_hoppings, build_syk,
    sample_random_tensor, Boundary, CouplingTensor, HamiltonianSpec, LatticeKind, LatticeSpec, RawTensor,
    SectorOperator,
};
pub use rdm::{
    compute_rdm, is_maximally_mixed, max_entropy_bound, renyi2_entropy, von_neumann_entropy, EntropyKind, EntropyValue,
    Normalization, ReducedDensityMatrix,
};
pub use spectra::{
    full_diagonalize, ground_state, propagate, CVector, EigenSolution, Eigenpair, Propagator, SolverOptions,
};
pub use symmetry::{
    block_count, block_decompose, block_dimension, block_trace, charge_sector_of, refined_entropy_bound,
    BlockDecomposition, BlockLabel, ChargePartition,
};
