
use crate::linalg::{c, CMat, I, ONE, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct Spin1Operators {
    pub sigma_x: CMat,
    pub sigma_y: CMat,
    pub sigma_z: CMat,
}

/// Spin-1 "Pauli" matrices in the basis `|1>, |0>, |-1>`, normalised so that
/// `[sx, sy] = 2i sz` as for spin 1/2.
pub fn build_spin1_operators() -> Spin1Operators {
    let sigma_x = CMat::from_row_slice(3, 3, &[ZERO, ONE, ZERO, ONE, ZERO, ONE, ZERO, ONE, ZERO]);
    let sigma_y = CMat::from_row_slice(3, 3, &[ZERO, -I, ZERO, I, ZERO, -I, ZERO, I, ZERO]);
    let sigma_z = CMat::from_row_slice(3, 3, &[ONE, ZERO, ZERO, ZERO, ZERO, ZERO, ZERO, ZERO, -ONE]);
    Spin1Operators { sigma_x, sigma_y, sigma_z }
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(-1.0, 0.0)])
}
