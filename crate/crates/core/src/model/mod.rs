//! Operators, field protocols, the two-qutrit Hamiltonian and its block structure.

mod blocks;
mod field;
mod hamiltonian;
mod spin1;

pub use blocks::{
    block_decompose, embed, fictitious_qubit_hamiltonians, h3_block, index_of, ket_label, map_4d_state,
    picture_hamiltonian, product_index, quantum_numbers, restrict, submatrix, unmap_4d_state, BlockDecomposition,
    LinearHamiltonian, Picture, BASIS4, BASIS5, CORE3, M_VALUES, QUBIT_LABELS,
};
pub(crate) use blocks::check_isotropic;
pub use field::{FieldProtocol, SampledField};
pub use hamiltonian::{build_full_hamiltonian, constant_of_motion_k, Decay, DerivedParameters, HamiltonianSpec};
pub use spin1::{build_spin1_operators, pauli_x, pauli_y, pauli_z, Spin1Operators};

#[cfg(test)]
mod tests;
