//! Closed-form results: sweep transition tables, noisy limits, exact evolution
//! operators, dark states and stationary mixtures.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::Serialize;

use crate::linalg::{kron, outer, re, CMat, CVec, C64, ZERO};
use crate::model::{check_isotropic, embed, index_of, ket_label, HamiltonianSpec, BASIS4, CORE3};
use crate::propagator::spin1_representation;
use crate::specfun::lz_cayley_klein;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LmszParameters {
    pub alpha: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    /// `2 gamma^2 / alpha`, with `gamma = gamma_x + gamma_y`.
    pub beta_prime: f64,
}

impl LmszParameters {
    pub fn from_couplings(alpha: f64, gamma_plus: f64, gamma_minus: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(LmszParameters {
            alpha,
            beta_plus: gamma_plus * gamma_plus / alpha,
            beta_minus: gamma_minus * gamma_minus / alpha,
            beta_prime: 2.0 * gamma_plus * gamma_plus / alpha,
        })
    }

    pub fn from_spec(spec: &HamiltonianSpec) -> Result<Self> {
        Self::from_couplings(spec.reference_alpha(), spec.gamma_plus(), spec.gamma_minus())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::NonPositiveAlpha(alpha));
    }
    Ok(())
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    Ok(())
}

/// `1 - exp(-2 pi beta)`.
pub fn lz_probability(beta: f64) -> f64 {
    -(-2.0 * PI * beta).exp_m1()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableEntry {
    pub state: String,
    pub probability: f64,
}

/// Final-state probabilities from one initial basis state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionTable {
    pub initial: String,
    pub entries: Vec<TableEntry>,
}

impl TransitionTable {
    fn new(initial: usize, finals: &[usize], probs: &[f64]) -> Self {
        TransitionTable {
            initial: ket_label(initial),
            entries: finals
                .iter()
                .zip(probs)
                .map(|(&k, &p)| TableEntry { state: ket_label(k), probability: p })
                .collect(),
        }
    }

    pub fn get(&self, state: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.state == state).map(|e| e.probability)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.probability).collect()
    }
}

/// `(P1, P2) = (1 - e^{-2 pi beta_-}, 1 - e^{-2 pi beta_+})`.
pub fn lmsz_p1_p2(gamma_minus: f64, gamma_plus: f64, alpha: f64) -> Result<(f64, f64)> {
    let p = LmszParameters::from_couplings(alpha, gamma_plus, gamma_minus)?;
    Ok((lz_probability(p.beta_minus), lz_probability(p.beta_plus)))
}

/// Asymptotic table over the four states of the `K = -1` block, from `|-10>`.
pub fn joint_probabilities_4d(p1: f64, p2: f64) -> Result<TransitionTable> {
    table_4d_from(index_of(-1, 0)?, p1, p2)
}

/// Same for any initial state of the block: qubit `j` of the fictitious pair flips
/// with probability `Pj`, independently.
pub fn table_4d_from(initial: usize, p1: f64, p2: f64) -> Result<TransitionTable> {
    check_probability(p1)?;
    check_probability(p2)?;
    let start = BASIS4
        .iter()
        .position(|&k| k == initial)
        .ok_or_else(|| Error::Precondition(format!("{} is not in the four-dimensional block", ket_label(initial))))?;
    let (q1, q2) = (start / 2, start % 2);
    let probs: Vec<f64> = (0..4)
        .map(|k| {
            let f1 = if k / 2 != q1 { p1 } else { 1.0 - p1 };
            let f2 = if k % 2 != q2 { p2 } else { 1.0 - p2 };
            f1 * f2
        })
        .collect();
    Ok(TransitionTable::new(initial, &BASIS4, &probs))
}

/// Spin-1 table from `|1-1>` over `|-11>, |00>, |1-1>`: `(P3^2, 2 P3 (1 - P3), (1 - P3)^2)`.
pub fn spin1_probabilities(p3: f64) -> Result<TransitionTable> {
    let t = spin1_table_from(index_of(1, -1)?, p3)?;
    let order = [index_of(-1, 1)?, index_of(0, 0)?, index_of(1, -1)?];
    let probs: Vec<f64> = order.iter().map(|&k| t.get(&ket_label(k)).unwrap()).collect();
    Ok(TransitionTable::new(t_initial(&t)?, &order, &probs))
}

fn t_initial(t: &TransitionTable) -> Result<usize> {
    Ok((0..9).find(|&k| ket_label(k) == t.initial).expect("label from ket_label"))
}

/// Spin-1 table from any core state, built from the spin-1 image of a two-level
/// flip with probability `P3`.
pub fn spin1_table_from(initial: usize, p3: f64) -> Result<TransitionTable> {
    check_probability(p3)?;
    let start = CORE3
        .iter()
        .position(|&k| k == initial)
        .ok_or_else(|| Error::Precondition(format!("{} is not in the su(2) core", ket_label(initial))))?;
    let q = 1.0 - p3;
    let m = [
        [q * q, 2.0 * p3 * q, p3 * p3],
        [2.0 * p3 * q, (1.0 - 2.0 * p3).powi(2), 2.0 * p3 * q],
        [p3 * p3, 2.0 * p3 * q, q * q],
    ];
    let probs: Vec<f64> = (0..3).map(|k| m[k][start]).collect();
    Ok(TransitionTable::new(initial, &CORE3, &probs))
}

/// Large-Gamma noisy two-level formula `(1 - exp(-2 pi g^2 / alpha)) / 2`.
pub fn noisy_qubit_probability(g: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(0.5 * lz_probability(g * g / alpha))
}

/// Large-Gamma noisy spin-1 triple from `|1-1>` over `|-11>, |00>, |1-1>`.
pub fn noisy_spin1_probabilities(beta_prime: f64) -> Result<TransitionTable> {
    if !(beta_prime >= 0.0) {
        return Err(Error::NegativeParameter(beta_prime));
    }
    let e1 = (-PI * beta_prime).exp();
    let e3 = (-3.0 * PI * beta_prime).exp();
    let probs = [
        (2.0 + e3 - 3.0 * e1) / 6.0,
        (1.0 - e3) / 3.0,
        (2.0 + e3 + 3.0 * e1) / 6.0,
    ];
    Ok(TransitionTable::new(
        index_of(1, -1)?,
        &[index_of(-1, 1)?, index_of(0, 0)?, index_of(1, -1)?],
        &probs,
    ))
}

/// Exact 2x2 propagator in the (up, down) basis for `(tau/2) sz + g sx`, `g = coupling`
/// in units of `sqrt(alpha)` (either sign).
pub fn exact_two_level(coupling: f64, tau: f64, tau_i: f64) -> Result<CMat> {
    let ck = lz_cayley_klein(coupling * coupling, tau, tau_i)?;
    let b = if coupling < 0.0 { -ck.b } else { ck.b };
    Ok(CMat::from_row_slice(2, 2, &[ck.a.conj(), -b.conj(), b, ck.a]))
}

/// `U_- = U_1 (x) U_2` on the four-dimensional block for `Omega_+ = Omega_- = alpha t`
/// (single ramped field), with `U_1` driven by `beta_-` and `U_2` by `beta_+`.
pub fn exact_u_minus(beta_plus: f64, beta_minus: f64, tau: f64, tau_i: f64) -> Result<CMat> {
    for b in [beta_plus, beta_minus] {
        if !(b >= 0.0) {
            return Err(Error::NegativeParameter(b));
        }
    }
    let u1 = exact_two_level(beta_minus.sqrt(), tau, tau_i)?;
    let u2 = exact_two_level(beta_plus.sqrt(), tau, tau_i)?;
    Ok(kron(&u1, &u2))
}

/// Five-dimensional propagator: corner phases `exp(-/+ i int Omega_+ dt)` on
/// `|11>`, `|-1-1>` and the spin-1 image of the two-level solution with
/// parameter `beta_core` on the core `|1-1>, |00>, |-11>`.
pub fn exact_u_plus(beta_core: f64, omega_plus_integral: f64, tau: f64, tau_i: f64) -> Result<CMat> {
    if !(beta_core >= 0.0) {
        return Err(Error::NegativeParameter(beta_core));
    }
    let ck = lz_cayley_klein(beta_core, tau, tau_i)?;
    let u3 = spin1_representation(ck.a.conj(), -ck.b.conj());
    let mut u = CMat::zeros(5, 5);
    u[(0, 0)] = (-C64::i() * omega_plus_integral).exp();
    u[(4, 4)] = (C64::i() * omega_plus_integral).exp();
    for i in 0..3 {
        for j in 0..3 {
            u[(i + 1, j + 1)] = u3[(i, j)];
        }
    }
    Ok(u)
}

fn check_linear(name: &str, f: impl Fn(f64) -> Result<f64>, alpha: f64, times: &[f64]) -> Result<()> {
    for &t in times {
        let v = f(t)?;
        if (v - alpha * t).abs() > 1e-12 * (1.0 + (alpha * t).abs()) {
            return Err(Error::Precondition(format!("{name}(t) must equal alpha t (alpha = {alpha}) at t = {t}, got {v}")));
        }
    }
    Ok(())
}

/// `exact_u_minus` for a spec whose `Omega_+` and `Omega_-` both equal `alpha t`
/// (the single-field scenario), with signed couplings.
pub fn exact_u_minus_for_spec(spec: &HamiltonianSpec, tau: f64, tau_i: f64) -> Result<CMat> {
    let alpha = spec.reference_alpha();
    let sa = alpha.sqrt();
    let times = [tau_i / sa, 0.5 * (tau + tau_i) / sa, tau / sa];
    check_linear("Omega_+", |t| spec.fields(t).map(|(a, b)| a + b), alpha, &times)?;
    check_linear("Omega_-", |t| spec.fields(t).map(|(a, b)| a - b), alpha, &times)?;
    let u1 = exact_two_level(spec.gamma_minus() / sa, tau, tau_i)?;
    let u2 = exact_two_level(spec.gamma_plus() / sa, tau, tau_i)?;
    Ok(kron(&u1, &u2))
}

/// `exact_u_plus` for an isotropic spec (`gamma_x = gamma_y`, `gamma_z = 0`) with
/// `Omega_- = alpha t`; the core parameter is `gamma^2 / (2 alpha)`.
pub fn exact_u_plus_for_spec(spec: &HamiltonianSpec, tau: f64, tau_i: f64) -> Result<CMat> {
    check_isotropic(spec, true)?;
    let alpha = spec.reference_alpha();
    let sa = alpha.sqrt();
    let times = [tau_i / sa, 0.5 * (tau + tau_i) / sa, tau / sa];
    check_linear("Omega_-", |t| spec.fields(t).map(|(a, b)| a - b), alpha, &times)?;
    let (t_i, t) = (tau_i / sa, tau / sa);
    let omega_plus = spec.omega1.integral(t_i, t)? + spec.omega2.integral(t_i, t)?;
    let g = spec.gamma_plus();
    let mut u = exact_u_plus(g * g / (2.0 * alpha), omega_plus, tau, tau_i)?;
    if g < 0.0 {
        // gamma -> -gamma is conjugation by diag(1, -1, 1) on the core.
        for (i, j) in [(1, 2), (2, 1), (2, 3), (3, 2)] {
            u[(i, j)] = -u[(i, j)];
        }
    }
    Ok(u)
}

/// Instantaneous energy `c1 w1(t) + c2 w2(t) + constant`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DarkEnergy {
    pub c1: f64,
    pub c2: f64,
    pub constant: f64,
}

impl DarkEnergy {
    pub fn at(&self, spec: &HamiltonianSpec, t: f64) -> Result<f64> {
        let (w1, w2) = spec.fields(t)?;
        Ok(self.c1 * w1 + self.c2 * w2 + self.constant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DarkVariant {
    /// `gamma_x = gamma_y`, `w1(t) = w2(t)`.
    IsotropicParallel,
    /// `gamma_x = -gamma_y`, `w1(t) = -w2(t)`.
    AntisotropicAntiparallel,
}

#[derive(Debug, Clone, Serialize)]
pub struct DarkStateSet {
    pub labels: Vec<String>,
    #[serde(skip)]
    pub states: Vec<CVec>,
    pub energies: Vec<DarkEnergy>,
    pub validity: String,
}

fn superpose(a: usize, b: usize, sign: f64) -> CVec {
    let mut v = CVec::zeros(9);
    v[a] = re(FRAC_1_SQRT_2);
    v[b] = re(sign * FRAC_1_SQRT_2);
    v
}

/// Four dark states of the `K = -1` block, energies expressed through the spec's couplings.
pub fn dark_states_4d(variant: DarkVariant, spec: &HamiltonianSpec) -> Result<DarkStateSet> {
    let i = |m1, m2| index_of(m1, m2).expect("valid quantum numbers");
    let (pairs, g, validity) = match variant {
        DarkVariant::IsotropicParallel => (
            [(i(1, 0), i(0, 1)), (i(0, -1), i(-1, 0))],
            spec.gamma_plus(),
            "gamma_x = gamma_y and omega1(t) = omega2(t)",
        ),
        DarkVariant::AntisotropicAntiparallel => (
            [(i(1, 0), i(0, -1)), (i(0, 1), i(-1, 0))],
            spec.gamma_minus(),
            "gamma_x = -gamma_y and omega1(t) = -omega2(t)",
        ),
    };
    // psi_{1/2} = (first pair, +/-), E = w1 +/- g;  psi_{3/4}: E_{3/4} = -E_{2/1}.
    let states = vec![
        superpose(pairs[0].0, pairs[0].1, 1.0),
        superpose(pairs[0].0, pairs[0].1, -1.0),
        superpose(pairs[1].0, pairs[1].1, 1.0),
        superpose(pairs[1].0, pairs[1].1, -1.0),
    ];
    let energies = vec![
        DarkEnergy { c1: 1.0, c2: 0.0, constant: g },
        DarkEnergy { c1: 1.0, c2: 0.0, constant: -g },
        DarkEnergy { c1: -1.0, c2: 0.0, constant: g },
        DarkEnergy { c1: -1.0, c2: 0.0, constant: -g },
    ];
    let labels = (1..=4).map(|j| format!("psi{j}")).collect();
    Ok(DarkStateSet { labels, states, energies, validity: validity.into() })
}

/// Five stationary states of the `K = +1` block: the corners `|11>`, `|-1-1>`
/// (any field, any gamma_z) and the three eigenvectors of `gamma Sx` on the core.
pub fn dark_states_5d(spec: &HamiltonianSpec) -> Result<DarkStateSet> {
    let g = spec.gamma_plus();
    let half = re(0.5);
    let r = re(FRAC_1_SQRT_2);
    let core = |v: [C64; 3]| embed(&CVec::from_vec(v.to_vec()), &CORE3);
    let states = vec![
        crate::linalg::basis_vector(9, index_of(1, 1)?),
        crate::linalg::basis_vector(9, index_of(-1, -1)?),
        core([half, r, half]),
        core([r, ZERO, -r]),
        core([half, -r, half]),
    ];
    let gz = spec.gamma_z;
    let energies = vec![
        DarkEnergy { c1: 1.0, c2: 1.0, constant: gz },
        DarkEnergy { c1: -1.0, c2: -1.0, constant: gz },
        DarkEnergy { c1: 0.0, c2: 0.0, constant: 2f64.sqrt() * g },
        DarkEnergy { c1: 0.0, c2: 0.0, constant: 0.0 },
        DarkEnergy { c1: 0.0, c2: 0.0, constant: -2f64.sqrt() * g },
    ];
    Ok(DarkStateSet {
        labels: ["|11>", "|-1-1>", "psi5", "psi6", "psi7"].iter().map(|s| s.to_string()).collect(),
        states,
        energies,
        validity: "corners: always; psi5-7: gamma_x = gamma_y, gamma_z = 0, omega1(t) = omega2(t)".into(),
    })
}

/// Weights of the stationary mixture `k1 |11><11| + k2 |-1-1><-1-1| + sum_j p_j |psi_j><psi_j|`
/// with `psi_1..4` the isotropic-parallel 4D dark states and `psi_5..7` the core ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureWeights {
    pub k1: f64,
    pub k2: f64,
    pub p: [f64; 7],
}

impl MixtureWeights {
    pub fn uniform() -> Self {
        MixtureWeights { k1: 1.0 / 9.0, k2: 1.0 / 9.0, p: [1.0 / 9.0; 7] }
    }

    fn all(&self) -> impl Iterator<Item = f64> + '_ {
        [self.k1, self.k2].into_iter().chain(self.p.iter().copied())
    }
}

/// The nine stationary states in mixture order: `|11>, |-1-1>, psi_1..psi_7`.
pub fn stationary_states(spec: &HamiltonianSpec) -> Result<(Vec<CVec>, Vec<DarkEnergy>)> {
    let d4 = dark_states_4d(DarkVariant::IsotropicParallel, spec)?;
    let d5 = dark_states_5d(spec)?;
    let mut states = vec![d5.states[0].clone(), d5.states[1].clone()];
    let mut energies = vec![d5.energies[0], d5.energies[1]];
    states.extend(d4.states);
    energies.extend(d4.energies);
    states.extend(d5.states[2..].iter().cloned());
    energies.extend(d5.energies[2..].iter().copied());
    Ok((states, energies))
}

pub fn stationary_mixture(spec: &HamiltonianSpec, weights: &MixtureWeights) -> Result<CMat> {
    let sum: f64 = weights.all().sum();
    if weights.all().any(|w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
        return Err(Error::WeightNormalization(sum));
    }
    let (states, _) = stationary_states(spec)?;
    let mut rho = CMat::zeros(9, 9);
    for (w, v) in weights.all().zip(&states) {
        rho += outer(v) * re(w);
    }
    Ok(rho)
}

/// Boltzmann weights `p_j ~ exp(-E_j(t0) / kT)` of the nine stationary states.
pub fn thermal_weights(spec: &HamiltonianSpec, k_t: f64, t0: f64) -> Result<MixtureWeights> {
    if !(k_t > 0.0) {
        return Err(Error::Precondition(format!("temperature must be positive, got {k_t}")));
    }
    let (_, energies) = stationary_states(spec)?;
    let e: Vec<f64> = energies.iter().map(|d| d.at(spec, t0)).collect::<Result<_>>()?;
    let e_min = e.iter().copied().fold(f64::INFINITY, f64::min);
    let boltz: Vec<f64> = e.iter().map(|x| (-(x - e_min) / k_t).exp()).collect();
    let z: f64 = boltz.iter().sum();
    let mut p = [0.0; 7];
    for j in 0..7 {
        p[j] = boltz[j + 2] / z;
    }
    Ok(MixtureWeights { k1: boltz[0] / z, k2: boltz[1] / z, p })
}

/// `|<00|U_+|1-1>|^2 = 2 |a3|^2 |b3|^2` helper on a 5x5 propagator.
pub fn middle_transfer(u_plus: &CMat) -> f64 {
    u_plus[(2, 1)].norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigenvalues, max_abs, unitarity_defect};
    use crate::model::{build_full_hamiltonian, FieldProtocol};

    #[test]
    fn p1_p2_values_and_errors() {
        let (p1, p2) = lmsz_p1_p2(0.0, 0.22f64.sqrt(), 1.0).unwrap();
        assert_eq!(p1, 0.0);
        assert!((p2 - 0.748_9).abs() < 1e-4);
        assert!((p2 - (1.0 - (-0.44 * PI).exp())).abs() < 1e-15);
        let (p1, _) = lmsz_p1_p2(30.0, 0.0, 1.0).unwrap();
        assert!((p1 - 1.0).abs() < 1e-15);
        assert!(matches!(lmsz_p1_p2(0.1, 0.1, 0.0), Err(Error::NonPositiveAlpha(_))));
    }

    #[test]
    fn joint_table_examples() {
        let t = joint_probabilities_4d(0.0, 0.0).unwrap();
        assert_eq!(t.get("|-10>"), Some(1.0));
        let t = joint_probabilities_4d(1.0, 0.0).unwrap();
        assert_eq!(t.get("|01>"), Some(1.0));
        let t = joint_probabilities_4d(0.5, 0.75).unwrap();
        assert_eq!(t.probabilities(), vec![0.375, 0.125, 0.375, 0.125]);
        assert!(matches!(joint_probabilities_4d(1.2, 0.0), Err(Error::InvalidProbability(_))));
    }

    #[test]
    fn spin1_table_examples() {
        assert_eq!(spin1_probabilities(0.0).unwrap().probabilities(), vec![0.0, 0.0, 1.0]);
        assert_eq!(spin1_probabilities(0.5).unwrap().probabilities(), vec![0.25, 0.5, 0.25]);
        let t = spin1_probabilities(0.9).unwrap().probabilities();
        for (a, b) in t.iter().zip([0.81, 0.18, 0.01]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(spin1_probabilities(0.3).unwrap().initial, "|1-1>");
    }

    #[test]
    fn tables_sum_to_one() {
        for p in [0.0, 0.13, 0.5, 0.77, 1.0] {
            for q in [0.0, 0.4, 1.0] {
                for &k in &BASIS4 {
                    assert!((table_4d_from(k, p, q).unwrap().total() - 1.0).abs() < 1e-12);
                }
            }
            for &k in &CORE3 {
                assert!((spin1_table_from(k, p).unwrap().total() - 1.0).abs() < 1e-12);
            }
        }
        for bp in [0.0, 0.05, 0.5, 3.0] {
            assert!((noisy_spin1_probabilities(bp).unwrap().total() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn noisy_formulas() {
        assert_eq!(noisy_qubit_probability(0.0, 1.0).unwrap(), 0.0);
        assert!((noisy_qubit_probability(100.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let p = noisy_qubit_probability(0.5f64.sqrt(), 1.0).unwrap();
        assert!((p - 0.4784).abs() < 1e-4);
        assert_eq!(noisy_spin1_probabilities(0.0).unwrap().probabilities(), vec![0.0, 0.0, 1.0]);
        for p in noisy_spin1_probabilities(50.0).unwrap().probabilities() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(noisy_spin1_probabilities(-1.0).is_err());
    }

    #[test]
    fn exact_operators_are_unitary_and_start_at_identity() {
        let u = exact_u_minus(0.5, 0.25, -3.0, -3.0).unwrap();
        assert!(max_abs(&(u - crate::linalg::identity(4))) < 1e-12);
        let u = exact_u_minus(0.5, 0.5, 20.0, -20.0).unwrap();
        assert!(unitarity_defect(&u) < 1e-8);
        let u = exact_u_plus(0.3, 0.0, -4.0, -4.0).unwrap();
        assert!(max_abs(&(u - crate::linalg::identity(5))) < 1e-12);
        let u = exact_u_plus(0.3, 1.7, 6.0, -9.0).unwrap();
        assert!(unitarity_defect(&u) < 1e-8);
        let ck = lz_cayley_klein(0.3, 6.0, -9.0).unwrap();
        assert!((middle_transfer(&u) - 2.0 * ck.a.norm_sqr() * ck.b.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn dark_states_are_eigenvectors() {
        let t = 0.37;
        for (variant, spec) in [
            (DarkVariant::IsotropicParallel, HamiltonianSpec::both_fields_parallel(1.3, 0.2, 0.2, 0.4)),
            (DarkVariant::AntisotropicAntiparallel, HamiltonianSpec::both_fields_antiparallel(1.3, 0.25, -0.25, -0.3)),
        ] {
            let set = dark_states_4d(variant, &spec).unwrap();
            let h = build_full_hamiltonian(&spec, t).unwrap();
            for (v, e) in set.states.iter().zip(&set.energies) {
                let e = e.at(&spec, t).unwrap();
                assert!((&h * v - v * re(e)).norm() < 1e-14);
            }
            let e: Vec<f64> = set.energies.iter().map(|d| d.at(&spec, t).unwrap()).collect();
            assert!((e[2] + e[1]).abs() < 1e-15 && (e[3] + e[0]).abs() < 1e-15);
        }
        let spec = HamiltonianSpec::both_fields_parallel(1.3, 0.2, 0.2, 0.0);
        let h = build_full_hamiltonian(&spec, t).unwrap();
        let set = dark_states_5d(&spec).unwrap();
        for (v, e) in set.states.iter().zip(&set.energies) {
            let e = e.at(&spec, t).unwrap();
            assert!((&h * v - v * re(e)).norm() < 1e-14);
        }
        assert_eq!(set.energies[3].constant, 0.0);
    }

    #[test]
    fn stationary_states_are_orthonormal() {
        let spec = HamiltonianSpec::both_fields_parallel(1.0, 0.2, 0.2, 0.0);
        let (states, _) = stationary_states(&spec).unwrap();
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let overlap = a.dotc(b);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((overlap - re(expected)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn mixtures() {
        let spec = HamiltonianSpec::both_fields_parallel(1.0, 0.2, 0.2, 0.0);
        let mut w = MixtureWeights { k1: 1.0, k2: 0.0, p: [0.0; 7] };
        let rho = stationary_mixture(&spec, &w).unwrap();
        assert_eq!(rho[(0, 0)], re(1.0));
        assert!((rho.trace() - re(1.0)).norm() < 1e-15);
        let rho = stationary_mixture(&spec, &MixtureWeights::uniform()).unwrap();
        assert!(hermitian_eigenvalues(&rho).unwrap().iter().all(|&l| l > -1e-12));
        w.k2 = 0.5;
        assert!(matches!(stationary_mixture(&spec, &w), Err(Error::WeightNormalization(_))));
        let spec = HamiltonianSpec::new(0.2, 0.2, 0.0, FieldProtocol::Constant { omega: 0.5 }, FieldProtocol::Constant { omega: 0.5 });
        let th = thermal_weights(&spec, 0.7, 0.0).unwrap();
        let total: f64 = th.all().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Lowest level |-1-1> (E = -1) dominates.
        assert!(th.k2 > th.k1 && th.all().all(|w| w <= th.k2));
    }

    #[test]
    fn exact_operators_match_propagator() {
        use crate::model::Picture;
        use crate::propagator::{evolve_operator, WindowSpec};
        let alpha = 2.0;
        let window = WindowSpec::new(-6.0, 4.0).with_tolerances(1e-12, 1e-14);

        let spec = HamiltonianSpec::stm_single_field(alpha, 0.5, 0.2, 0.3);
        let p = LmszParameters::from_spec(&spec).unwrap();
        let numeric = evolve_operator(&spec, &window, Picture::Minus4).unwrap();
        let exact = exact_u_minus(p.beta_plus, p.beta_minus, 4.0, -6.0).unwrap();
        assert!(max_abs(&(numeric - exact)) < 1e-8);

        let spec = HamiltonianSpec::stm_single_field(alpha, 0.35, 0.35, 0.0);
        let g = spec.gamma_plus();
        let numeric = evolve_operator(&spec, &window, Picture::Plus5).unwrap();
        let exact = exact_u_plus(g * g / (2.0 * alpha), (16.0 - 36.0) / 2.0, 4.0, -6.0).unwrap();
        assert!(max_abs(&(numeric - exact)) < 1e-8);
    }

    #[test]
    fn spec_wrappers_handle_signs_and_preconditions() {
        use crate::model::Picture;
        use crate::propagator::{evolve_operator, WindowSpec};
        let window = WindowSpec::new(-5.0, 3.0).with_tolerances(1e-12, 1e-14);
        let spec = HamiltonianSpec::stm_single_field(0.7, -0.2, 0.45, 0.1);
        let numeric = evolve_operator(&spec, &window, Picture::Minus4).unwrap();
        assert!(max_abs(&(numeric - exact_u_minus_for_spec(&spec, 3.0, -5.0).unwrap())) < 1e-8);

        let spec = HamiltonianSpec::stm_single_field(0.7, -0.3, -0.3, 0.0);
        let numeric = evolve_operator(&spec, &window, Picture::Plus5).unwrap();
        assert!(max_abs(&(numeric - exact_u_plus_for_spec(&spec, 3.0, -5.0).unwrap())) < 1e-8);

        let parallel = HamiltonianSpec::both_fields_parallel(1.0, 0.3, 0.3, 0.0);
        assert!(exact_u_plus_for_spec(&parallel, 1.0, -1.0).is_err());
        assert!(exact_u_minus_for_spec(&parallel, 1.0, -1.0).is_err());
        let aniso = HamiltonianSpec::stm_single_field(1.0, 0.3, 0.2, 0.0);
        assert!(matches!(exact_u_plus_for_spec(&aniso, 1.0, -1.0), Err(Error::Precondition(_))));
    }
}
