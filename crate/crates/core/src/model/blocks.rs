use serde::{Deserialize, Serialize};

use super::hamiltonian::{build_full_hamiltonian, HamiltonianSpec};
use super::spin1::{build_spin1_operators, pauli_x, pauli_z};
use crate::linalg::{frobenius, re, CMat, CVec, ZERO};
use crate::{Error, Result};

/// Magnetic quantum numbers in basis order.
pub const M_VALUES: [f64; 3] = [1.0, 0.0, -1.0];

/// Product-basis index of `|m1 m2>` from the per-qutrit indices (0 for m = 1, 1 for 0, 2 for -1).
pub const fn product_index(i1: usize, i2: usize) -> usize {
    3 * i1 + i2
}

/// Index of `|m1 m2>` for integer quantum numbers in {1, 0, -1}.
pub fn index_of(m1: i32, m2: i32) -> Result<usize> {
    let idx = |m: i32| match m {
        1 => Ok(0),
        0 => Ok(1),
        -1 => Ok(2),
        _ => Err(Error::OutOfRange(format!("spin projection {m} not in {{1, 0, -1}}"))),
    };
    Ok(product_index(idx(m1)?, idx(m2)?))
}

/// `(m1, m2)` of a product-basis index.
pub fn quantum_numbers(index: usize) -> (i32, i32) {
    let m = |i: usize| 1 - i as i32;
    (m(index / 3), m(index % 3))
}

/// Ket label such as `|1-1>`.
pub fn ket_label(index: usize) -> String {
    let (m1, m2) = quantum_numbers(index);
    format!("|{m1}{m2}>")
}

/// `|10>, |01>, |0-1>, |-10>` (K = -1).
pub const BASIS4: [usize; 4] = [1, 3, 5, 7];
/// `|11>, |1-1>, |00>, |-11>, |-1-1>` (K = +1).
pub const BASIS5: [usize; 5] = [0, 2, 4, 6, 8];
/// `|1-1>, |00>, |-11>`: the su(2) core of the five-dimensional block.
pub const CORE3: [usize; 3] = [2, 4, 6];
/// Fictitious two-qubit labels matching `BASIS4` entry by entry.
pub const QUBIT_LABELS: [&str; 4] = ["++", "+-", "-+", "--"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockDecomposition {
    pub basis4: Vec<String>,
    pub basis5: Vec<String>,
    pub index4: [usize; 4],
    pub index5: [usize; 5],
    /// `(qutrit ket, qubit ket)` pairs.
    pub qubit_map: Vec<(String, String)>,
}

impl Default for BlockDecomposition {
    fn default() -> Self {
        BlockDecomposition {
            basis4: BASIS4.iter().map(|&k| ket_label(k)).collect(),
            basis5: BASIS5.iter().map(|&k| ket_label(k)).collect(),
            index4: BASIS4,
            index5: BASIS5,
            qubit_map: BASIS4
                .iter()
                .zip(QUBIT_LABELS)
                .map(|(&k, q)| (ket_label(k), format!("|{q}>")))
                .collect(),
        }
    }
}

impl BlockDecomposition {
    /// Reassemble the 9x9 matrix from its two blocks.
    pub fn reassemble(&self, h_minus: &CMat, h_plus: &CMat) -> CMat {
        let mut h = CMat::zeros(9, 9);
        for (a, &i) in self.index4.iter().enumerate() {
            for (b, &j) in self.index4.iter().enumerate() {
                h[(i, j)] = h_minus[(a, b)];
            }
        }
        for (a, &i) in self.index5.iter().enumerate() {
            for (b, &j) in self.index5.iter().enumerate() {
                h[(i, j)] = h_plus[(a, b)];
            }
        }
        h
    }
}

pub fn submatrix(m: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

pub fn embed(v: &CVec, idx: &[usize]) -> CVec {
    let mut out = CVec::zeros(9);
    for (a, &i) in idx.iter().enumerate() {
        out[i] = v[a];
    }
    out
}

pub fn restrict(v: &CVec, idx: &[usize]) -> CVec {
    CVec::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Split a K-symmetric 9x9 operator into its 4x4 (K = -1) and 5x5 (K = +1) blocks.
pub fn block_decompose(h: &CMat) -> Result<(CMat, CMat, BlockDecomposition)> {
    if h.shape() != (9, 9) {
        return Err(Error::Dimension { expected: 9, got: h.nrows() });
    }
    let tolerance = 1e-12 * frobenius(h);
    let mut worst: f64 = 0.0;
    for &i in &BASIS4 {
        for &j in &BASIS5 {
            worst = worst.max(h[(i, j)].norm()).max(h[(j, i)].norm());
        }
    }
    if worst > tolerance {
        return Err(Error::SymmetryViolation { magnitude: worst, tolerance });
    }
    Ok((submatrix(h, &BASIS4), submatrix(h, &BASIS5), BlockDecomposition::default()))
}

/// `H1 = (Omega_+/2) sz + gamma_- sx` and `H2 = (Omega_-/2) sz + gamma_+ sx`.
pub fn fictitious_qubit_hamiltonians(spec: &HamiltonianSpec, t: f64) -> Result<(CMat, CMat)> {
    let (w1, w2) = spec.fields(t)?;
    let h1 = pauli_z() * re(0.5 * (w1 + w2)) + pauli_x() * re(spec.gamma_minus());
    let h2 = pauli_z() * re(0.5 * (w1 - w2)) + pauli_x() * re(spec.gamma_plus());
    Ok((h1, h2))
}

pub(crate) fn check_isotropic(spec: &HamiltonianSpec, require_no_gamma_z: bool) -> Result<()> {
    let scale = spec.gamma_x.abs().max(spec.gamma_y.abs()).max(f64::MIN_POSITIVE);
    if (spec.gamma_x - spec.gamma_y).abs() > 1e-12 * scale {
        return Err(Error::Precondition(format!(
            "su(2) core needs gamma_x = gamma_y (got {} and {})",
            spec.gamma_x, spec.gamma_y
        )));
    }
    if require_no_gamma_z && spec.gamma_z != 0.0 {
        return Err(Error::Precondition(format!("su(2) core needs gamma_z = 0 (got {})", spec.gamma_z)));
    }
    Ok(())
}

/// `H3 = gamma Sx + Omega_- Sz` on `|1-1>, |00>, |-11>`.
pub fn h3_block(spec: &HamiltonianSpec, t: f64) -> Result<CMat> {
    check_isotropic(spec, true)?;
    let (w1, w2) = spec.fields(t)?;
    let s = build_spin1_operators();
    Ok(s.sigma_x * re(spec.gamma_plus()) + s.sigma_z * re(w1 - w2))
}

/// Relabel four amplitudes on `BASIS4` as the fictitious two-qubit state.
pub fn map_4d_state(amplitudes: &CVec) -> Result<CVec> {
    if amplitudes.len() != 4 {
        return Err(Error::Dimension { expected: 4, got: amplitudes.len() });
    }
    Ok(amplitudes.clone())
}

pub fn unmap_4d_state(qubits: &CVec) -> Result<CVec> {
    map_4d_state(qubits)
}

/// Invariant subspace (or reduced problem) a propagation runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Picture {
    Full9,
    Minus4,
    Plus5,
    Core3,
    Qubit1,
    Qubit2,
}

impl Picture {
    pub fn dimension(self) -> usize {
        match self {
            Picture::Full9 => 9,
            Picture::Minus4 => 4,
            Picture::Plus5 => 5,
            Picture::Core3 => 3,
            Picture::Qubit1 | Picture::Qubit2 => 2,
        }
    }

    /// Product-basis indices spanned, for the qutrit pictures.
    pub fn product_indices(self) -> Option<&'static [usize]> {
        const FULL: [usize; 9] = [0, 1, 2, 3, 4, 5, 6, 7, 8];
        match self {
            Picture::Full9 => Some(&FULL),
            Picture::Minus4 => Some(&BASIS4),
            Picture::Plus5 => Some(&BASIS5),
            Picture::Core3 => Some(&CORE3),
            Picture::Qubit1 | Picture::Qubit2 => None,
        }
    }

    pub fn for_dimension(n: usize) -> Result<Picture> {
        match n {
            9 => Ok(Picture::Full9),
            4 => Ok(Picture::Minus4),
            5 => Ok(Picture::Plus5),
            3 => Ok(Picture::Core3),
            2 => Ok(Picture::Qubit1),
            _ => Err(Error::Dimension { expected: 9, got: n }),
        }
    }
}

/// `H(t) = constant + w1(t) diag(d1) + w2(t) diag(d2)` restricted to a picture.
#[derive(Debug, Clone)]
pub struct LinearHamiltonian {
    pub picture: Picture,
    pub constant: CMat,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl LinearHamiltonian {
    pub fn new(spec: &HamiltonianSpec, picture: Picture) -> Result<Self> {
        spec.validate()?;
        if let Some(idx) = picture.product_indices() {
            if picture == Picture::Core3 {
                // The middle three states decouple from the corners only without gamma_-.
                check_isotropic(spec, false)?;
            }
            let constant = submatrix(&spec.coupling_matrix(), idx);
            let d1 = idx.iter().map(|&k| quantum_numbers(k).0 as f64).collect();
            let d2 = idx.iter().map(|&k| quantum_numbers(k).1 as f64).collect();
            return Ok(LinearHamiltonian { picture, constant, d1, d2 });
        }
        let (g, d2) = match picture {
            Picture::Qubit1 => (spec.gamma_minus(), vec![0.5, -0.5]),
            _ => (spec.gamma_plus(), vec![-0.5, 0.5]),
        };
        Ok(LinearHamiltonian {
            picture,
            constant: pauli_x() * re(g),
            d1: vec![0.5, -0.5],
            d2,
        })
    }

    pub fn dimension(&self) -> usize {
        self.d1.len()
    }

    pub fn at(&self, w1: f64, w2: f64) -> CMat {
        let mut h = self.constant.clone();
        for k in 0..self.dimension() {
            h[(k, k)] += re(w1 * self.d1[k] + w2 * self.d2[k]);
        }
        h
    }

    /// Off-diagonal entries as `(row, col, value)`.
    pub fn off_diagonal(&self) -> Vec<(usize, usize, crate::linalg::C64)> {
        let n = self.dimension();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.constant[(i, j)] != ZERO {
                    out.push((i, j, self.constant[(i, j)]));
                }
            }
        }
        out
    }
}

/// Full Hamiltonian restricted to a picture at time `t`.
pub fn picture_hamiltonian(spec: &HamiltonianSpec, picture: Picture, t: f64) -> Result<CMat> {
    match picture.product_indices() {
        Some(idx) if picture != Picture::Core3 => Ok(submatrix(&build_full_hamiltonian(spec, t)?, idx)),
        _ => {
            let lin = LinearHamiltonian::new(spec, picture)?;
            let (w1, w2) = spec.fields(t)?;
            Ok(lin.at(w1, w2))
        }
    }
}
