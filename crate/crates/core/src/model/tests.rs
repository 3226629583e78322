use proptest::prelude::*;

use super::*;
use crate::linalg::{c, commutator, frobenius, is_hermitian, kron, max_abs, re, CMat, CVec, ONE, ZERO};

fn heisenberg(g: f64) -> HamiltonianSpec {
    HamiltonianSpec::new(g, g, g, FieldProtocol::zero(), FieldProtocol::zero())
}

fn constant_spec(gx: f64, gy: f64, gz: f64, w1: f64, w2: f64) -> HamiltonianSpec {
    HamiltonianSpec::new(
        gx,
        gy,
        gz,
        FieldProtocol::Constant { omega: w1 },
        FieldProtocol::Constant { omega: w2 },
    )
}

#[test]
fn decoupled_hamiltonian_is_diagonal_zeeman() {
    let h = build_full_hamiltonian(&constant_spec(0.0, 0.0, 0.0, 0.7, -1.3), 0.0).unwrap();
    for k in 0..9 {
        let (m1, m2) = quantum_numbers(k);
        assert_eq!(h[(k, k)], re(0.7 * m1 as f64 - 1.3 * m2 as f64));
    }
    assert_eq!(max_abs(&(h.clone() - CMat::from_diagonal(&h.diagonal()))), 0.0);
}

#[test]
fn heisenberg_corner_element() {
    let h = build_full_hamiltonian(&heisenberg(0.8), 0.0).unwrap();
    assert!((h[(index_of(1, 1).unwrap(), index_of(1, 1).unwrap())] - re(0.8)).norm() < 1e-15);
    assert!(is_hermitian(&h, 0.0));
}

#[test]
fn heisenberg_five_block_core() {
    let g = 0.6;
    let spec = HamiltonianSpec::new(g / 2.0, g / 2.0, 0.0, FieldProtocol::zero(), FieldProtocol::zero());
    let (_, h_plus, _) = block_decompose(&build_full_hamiltonian(&spec, 0.0).unwrap()).unwrap();
    // Order |11>, |1-1>, |00>, |-11>, |-1-1>: gamma couples the middle three only.
    assert_eq!(h_plus[(1, 2)], re(g));
    assert_eq!(h_plus[(2, 3)], re(g));
    assert_eq!(h_plus[(1, 3)], ZERO);
    assert_eq!(h_plus[(0, 2)], ZERO);
    assert_eq!(h_plus[(4, 2)], ZERO);
}

#[test]
fn parity_operator_entries() {
    let k = constant_of_motion_k();
    let i10 = index_of(1, 0).unwrap();
    let i00 = index_of(0, 0).unwrap();
    assert_eq!(k[(i10, i10)], re(-1.0));
    assert_eq!(k[(i00, i00)], re(1.0));
    for &i in &BASIS4 {
        assert_eq!(k[(i, i)], re(-1.0));
    }
    for &i in &BASIS5 {
        assert_eq!(k[(i, i)], re(1.0));
    }
}

#[test]
fn bases_partition_the_product_space() {
    let mut all: Vec<usize> = BASIS4.iter().chain(BASIS5.iter()).copied().collect();
    all.sort();
    assert_eq!(all, (0..9).collect::<Vec<_>>());
    let d = BlockDecomposition::default();
    assert_eq!(d.basis4, vec!["|10>", "|01>", "|0-1>", "|-10>"]);
    assert_eq!(d.basis5, vec!["|11>", "|1-1>", "|00>", "|-11>", "|-1-1>"]);
    assert_eq!(d.qubit_map[3], ("|-10>".to_string(), "|-->".to_string()));
}

#[test]
fn diagonal_hamiltonian_has_diagonal_blocks() {
    let h = build_full_hamiltonian(&constant_spec(0.0, 0.0, 0.4, 1.0, 2.0), 0.0).unwrap();
    let (hm, hp, _) = block_decompose(&h).unwrap();
    assert_eq!(max_abs(&(hm.clone() - CMat::from_diagonal(&hm.diagonal()))), 0.0);
    assert_eq!(max_abs(&(hp.clone() - CMat::from_diagonal(&hp.diagonal()))), 0.0);
}

#[test]
fn symmetry_violation_is_reported() {
    let s = build_spin1_operators();
    let h = kron(&s.sigma_x, &crate::linalg::identity(3));
    assert!(matches!(block_decompose(&h), Err(crate::Error::SymmetryViolation { .. })));
}

#[test]
fn qubit_hamiltonian_special_cases() {
    let spec = constant_spec(0.3, 0.3, 0.1, 0.5, 0.5);
    let (h1, h2) = fictitious_qubit_hamiltonians(&spec, 0.0).unwrap();
    assert_eq!(h1[(0, 1)], ZERO);
    assert_eq!(h2[(0, 0)], ZERO);
    assert_eq!(h2[(1, 1)], ZERO);
}

#[test]
fn h3_special_cases_and_precondition() {
    let spec = constant_spec(0.0, 0.0, 0.0, 0.9, 0.2);
    let h = h3_block(&spec, 0.0).unwrap();
    assert_eq!(h, CMat::from_diagonal(&CVec::from_vec(vec![re(0.7), ZERO, re(-0.7)])));
    let spec = constant_spec(0.25, 0.25, 0.0, 0.4, 0.4);
    assert_eq!(h3_block(&spec, 0.0).unwrap(), build_spin1_operators().sigma_x * re(0.5));
    assert!(h3_block(&constant_spec(0.25, 0.2, 0.0, 0.4, 0.4), 0.0).is_err());
    assert!(h3_block(&constant_spec(0.25, 0.25, 0.1, 0.4, 0.4), 0.0).is_err());
}

#[test]
fn four_dimensional_state_mapping() {
    let minus_minus = map_4d_state(&CVec::from_vec(vec![ZERO, ZERO, ZERO, ONE])).unwrap();
    assert_eq!(minus_minus[3], ONE);
    // (|10> + |01>)/sqrt2 -> |+> (x) (|+> + |->)/sqrt2: a product of qubit states.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = map_4d_state(&CVec::from_vec(vec![re(s), re(s), ZERO, ZERO])).unwrap();
    let product = crate::linalg::kron_vec(&CVec::from_vec(vec![ONE, ZERO]), &CVec::from_vec(vec![re(s), re(s)]));
    assert!((q.clone() - product).norm() < 1e-15);
    assert_eq!(unmap_4d_state(&q).unwrap(), CVec::from_vec(vec![re(s), re(s), ZERO, ZERO]));
    assert!(map_4d_state(&CVec::zeros(3)).is_err());
}

#[test]
fn labels_round_trip() {
    for k in 0..9 {
        let (m1, m2) = quantum_numbers(k);
        assert_eq!(index_of(m1, m2).unwrap(), k);
    }
    assert_eq!(ket_label(index_of(-1, 0).unwrap()), "|-10>");
}

#[test]
fn reference_alpha_defaults() {
    assert_eq!(HamiltonianSpec::stm_single_field(2.5, 0.1, 0.1, 0.0).reference_alpha(), 2.5);
    assert_eq!(HamiltonianSpec::both_fields_antiparallel(3.0, 0.1, 0.1, 0.0).reference_alpha(), 3.0);
    assert_eq!(heisenberg(1.0).reference_alpha(), 1.0);
    assert_eq!(heisenberg(1.0).with_sweep_rate(4.0).reference_alpha(), 4.0);
}

#[test]
fn derived_parameters() {
    let d = DerivedParameters::at(&HamiltonianSpec::stm_single_field(2.0, 0.3, 0.1, 0.0), 1.5).unwrap();
    assert_eq!((d.omega_plus, d.omega_minus), (3.0, 3.0));
    assert!((d.gamma_plus - 0.4).abs() < 1e-15 && (d.gamma_minus - 0.2).abs() < 1e-15);
    assert_eq!(d.gamma, None);
    let d = DerivedParameters::at(&HamiltonianSpec::both_fields_parallel(2.0, 0.3, 0.3, 0.0), 1.0).unwrap();
    assert_eq!(d.gamma, Some(0.6));
    assert_eq!(d.omega_minus, 0.0);
}

#[test]
fn pictures_match_extracted_blocks() {
    let spec = HamiltonianSpec::stm_single_field(1.3, 0.4, 0.25, 0.7);
    let h = build_full_hamiltonian(&spec, 0.8).unwrap();
    let (hm, hp, _) = block_decompose(&h).unwrap();
    let (w1, w2) = spec.fields(0.8).unwrap();
    let l4 = LinearHamiltonian::new(&spec, Picture::Minus4).unwrap();
    let l5 = LinearHamiltonian::new(&spec, Picture::Plus5).unwrap();
    let l9 = LinearHamiltonian::new(&spec, Picture::Full9).unwrap();
    assert!(max_abs(&(l4.at(w1, w2) - hm)) < 1e-15);
    assert!(max_abs(&(l5.at(w1, w2) - hp)) < 1e-15);
    assert!(max_abs(&(l9.at(w1, w2) - h)) < 1e-15);
    assert!(LinearHamiltonian::new(&spec, Picture::Core3).is_err());
    let (h1, h2) = fictitious_qubit_hamiltonians(&spec, 0.8).unwrap();
    assert!(max_abs(&(LinearHamiltonian::new(&spec, Picture::Qubit1).unwrap().at(w1, w2) - h1)) < 1e-15);
    assert!(max_abs(&(LinearHamiltonian::new(&spec, Picture::Qubit2).unwrap().at(w1, w2) - h2)) < 1e-15);
}

fn any_spec() -> impl Strategy<Value = (HamiltonianSpec, f64)> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -3.0..3.0f64, -3.0..3.0f64, -5.0..5.0f64).prop_map(
        |(gx, gy, gz, a1, w2, t)| {
            let spec = HamiltonianSpec::new(
                gx,
                gy,
                gz,
                FieldProtocol::LinearRamp { alpha: a1 },
                FieldProtocol::Constant { omega: w2 },
            );
            (spec, t)
        },
    )
}

proptest! {
    #[test]
    fn hamiltonian_commutes_with_parity((spec, t) in any_spec()) {
        let h = build_full_hamiltonian(&spec, t).unwrap();
        let k = constant_of_motion_k();
        prop_assert!(frobenius(&commutator(&h, &k)) <= 1e-12 * frobenius(&h).max(1.0));
    }

    #[test]
    fn blocks_reassemble_exactly((spec, t) in any_spec()) {
        let h = build_full_hamiltonian(&spec, t).unwrap();
        let (hm, hp, d) = block_decompose(&h).unwrap();
        prop_assert_eq!(d.reassemble(&hm, &hp), h);
    }

    #[test]
    fn four_block_is_two_free_qubits((spec, t) in any_spec()) {
        let h = build_full_hamiltonian(&spec, t).unwrap();
        let (hm, _, _) = block_decompose(&h).unwrap();
        let (h1, h2) = fictitious_qubit_hamiltonians(&spec, t).unwrap();
        let id = crate::linalg::identity(2);
        let two_qubit = kron(&h1, &id) + kron(&id, &h2);
        prop_assert!(max_abs(&(two_qubit - hm)) < 1e-12);
    }

    #[test]
    fn h3_is_the_extracted_core(g in -2.0..2.0f64, a in -3.0..3.0f64, w in -3.0..3.0f64, t in -5.0..5.0f64) {
        let spec = HamiltonianSpec::new(
            g / 2.0, g / 2.0, 0.0,
            FieldProtocol::LinearRamp { alpha: a },
            FieldProtocol::Constant { omega: w },
        );
        let h = build_full_hamiltonian(&spec, t).unwrap();
        let (_, hp, _) = block_decompose(&h).unwrap();
        let core = submatrix(&hp, &[1, 2, 3]);
        prop_assert!(max_abs(&(h3_block(&spec, t).unwrap() - core)) < 1e-12);
    }

    #[test]
    fn mapping_preserves_norm(v in proptest::collection::vec(-1.0..1.0f64, 8)) {
        let w = CVec::from_iterator(4, (0..4).map(|k| c(v[2 * k], v[2 * k + 1])));
        let q = map_4d_state(&w).unwrap();
        prop_assert!((q.norm() - w.norm()).abs() < 1e-15);
        prop_assert_eq!(unmap_4d_state(&q).unwrap(), w);
    }
}
