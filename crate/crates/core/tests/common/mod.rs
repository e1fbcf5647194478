//! Dense reference implementations built from explicit Kronecker products.
#![allow(dead_code)]

use cbs_core::{Observable, PauliString, StateVector};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type CMat = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn single(letter: char) -> CMat {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    match letter {
        'I' => CMat::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => CMat::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => CMat::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        'Z' => CMat::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => panic!("bad letter {letter}"),
    }
}

/// `P_{N-1} ⊗ ... ⊗ P_0`, so qubit 0 is the least significant index bit.
pub fn pauli_matrix(p: &PauliString) -> CMat {
    let mut m = CMat::identity(1, 1);
    for q in (0..p.n_qubits()).rev() {
        m = m.kronecker(&single(p.letter(q).as_char()));
    }
    m
}

pub fn observable_matrix(o: &Observable) -> CMat {
    let dim = 1usize << o.n_qubits();
    let mut m = CMat::zeros(dim, dim);
    for t in o.terms() {
        m += pauli_matrix(&t.string) * c(t.coeff, 0.0);
    }
    m
}

pub fn column(psi: &StateVector) -> DVector<Complex64> {
    DVector::from_column_slice(psi.amplitudes())
}

pub fn dense_expectation(o: &Observable, psi: &StateVector) -> f64 {
    let v = column(psi);
    (v.adjoint() * observable_matrix(o) * &v)[(0, 0)].re
}

/// Sorted eigenvalues of a Hermitian matrix.
pub fn eigenvalues(m: &CMat) -> Vec<f64> {
    let mut e: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

pub fn spectral_norm(o: &Observable) -> f64 {
    eigenvalues(&observable_matrix(o))
        .iter()
        .fold(0.0, |acc: f64, e| acc.max(e.abs()))
}

pub fn random_string(rng: &mut ChaCha8Rng, n: usize) -> PauliString {
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    PauliString::from_masks(n, rng.random::<u64>() & full, rng.random::<u64>() & full).unwrap()
}

/// Random Hermitian Pauli sum with up to `m` terms.
pub fn random_observable(seed: u64, n: usize, m: usize) -> Observable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<_> = (0..m)
        .map(|_| {
            let s = random_string(&mut rng, n);
            (rng.random_range(-1.0..1.0), s)
        })
        .collect();
    Observable::new(
        n,
        terms
            .into_iter()
            .map(|(coeff, string)| cbs_core::PauliTerm::new(coeff, string).unwrap()),
    )
    .unwrap()
}

pub fn fixture(name: &str) -> Observable {
    let path = format!("{}/fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"));
    Observable::from_json(&std::fs::read(path).unwrap()).unwrap()
}
