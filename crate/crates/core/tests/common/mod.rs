//! Dense-matrix ladder operators built independently of the library's
//! bit tricks: explicit Kronecker products with a sign string on the
//! lower modes. Everything here is the slow, obviously-correct version.

#![allow(dead_code)]

use fermi_core::fock::FermionicState;
use fermi_core::Complex64;
use nalgebra::{DMatrix, DVector};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn identity2() -> DMatrix<Complex64> {
    DMatrix::identity(2, 2)
}

fn pauli_z() -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![ONE, -ONE]))
}

/// `|0><1|` on one mode.
fn lower() -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(2, 2, ZERO);
    m[(0, 1)] = ONE;
    m
}

/// Annihilator of `mode` on `n` modes: a sign string on every lower mode,
/// the lowering operator on `mode`, identity above. Mode 1 is the lowest
/// bit of the basis index, so higher modes come first in the product.
pub fn annihilation_matrix(n: u32, mode: u32) -> DMatrix<Complex64> {
    assert!(mode >= 1 && mode <= n);
    let mut mat = DMatrix::identity(1, 1);
    for j in (1..=n).rev() {
        let factor = if j == mode {
            lower()
        } else if j < mode {
            pauli_z()
        } else {
            identity2()
        };
        mat = mat.kronecker(&factor);
    }
    mat
}

pub fn creation_matrix(n: u32, mode: u32) -> DMatrix<Complex64> {
    annihilation_matrix(n, mode).adjoint()
}

pub fn state_vector(psi: &FermionicState) -> DVector<Complex64> {
    let mut v = DVector::from_element(psi.dim(), ZERO);
    for (basis, amp) in psi.terms() {
        v[basis.mask() as usize] = amp;
    }
    v
}

pub fn anticommutator(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a * b + b * a
}

pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
