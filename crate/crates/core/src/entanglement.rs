//! Parity superselection checks, marginal spectra and entropy measures.
//!
//! For pure states whose support sits inside one particle-number-parity
//! sector, the two marginals of any bipartition share their nonzero
//! spectrum, so "the" entanglement entropy is well defined. Outside a
//! sector that symmetry can break down; [`spectral_mismatch`] measures the
//! breakdown and [`entanglement_entropy`] refuses to average it away.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FermionicState;
use crate::reductions::{
    coefficient_matrix, modes_to_gmask, partial_trace, DensityOperator, ModePartition,
};

/// Amplitudes and matrix elements below this are treated as absent when
/// classifying parity.
pub const SUPPORT_TOLERANCE: f64 = 1e-12;

/// Eigenvalues below this are treated as exact zeros by the entropy.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

/// Eigenvalues above this survive into the nonzero part of a spectrum when
/// comparing the two sides of a cut.
pub const SPECTRUM_TRUNCATION: f64 = 1e-10;

/// Eigenvalues may undershoot zero by at most this much before the operator
/// is rejected as non-positive.
pub const NEGATIVE_EIGENVALUE_TOLERANCE: f64 = 1e-10;

/// Largest spectral mismatch at which a single entanglement entropy is
/// still reported.
pub const ENTROPY_AMBIGUITY_TOLERANCE: f64 = 1e-9;

/// Particle-number parity of a pure state's support.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityClass {
    Even,
    Odd,
    Mixed,
}

impl std::fmt::Display for ParityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParityClass::Even => "even",
            ParityClass::Odd => "odd",
            ParityClass::Mixed => "mixed",
        })
    }
}

/// Parity classification of a density operator. A mixture may populate both
/// sectors without coherence between them; only cross-sector matrix
/// elements actually violate the superselection rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityParityClass {
    Even,
    Odd,
    MixedSectorsNoCoherence,
    Violating,
}

impl std::fmt::Display for DensityParityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DensityParityClass::Even => "even",
            DensityParityClass::Odd => "odd",
            DensityParityClass::MixedSectorsNoCoherence => "mixed-sectors-no-coherence",
            DensityParityClass::Violating => "violating",
        })
    }
}

/// Eigenvalues of a density operator, sorted in descending order. The
/// length always equals the operator's dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Wraps and sorts a list of eigenvalues.
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_unstable_by(|a, b| b.total_cmp(a));
        Spectrum { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Leading eigenvalues above [`SPECTRUM_TRUNCATION`].
    pub fn nonzero(&self) -> &[f64] {
        let end = self.values.partition_point(|&v| v > SPECTRUM_TRUNCATION);
        &self.values[..end]
    }
}

/// Classifies the support of a pure state by particle-number parity.
/// A state with (numerically) empty support counts as even.
pub fn parity_check(psi: &FermionicState) -> ParityClass {
    let mut even = false;
    let mut odd = false;
    for (basis, amp) in psi.terms() {
        if amp.norm() <= SUPPORT_TOLERANCE {
            continue;
        }
        if basis.has_even_parity() {
            even = true;
        } else {
            odd = true;
        }
    }
    match (even, odd) {
        (true, true) => ParityClass::Mixed,
        (false, true) => ParityClass::Odd,
        _ => ParityClass::Even,
    }
}

/// Classifies a density operator: does it live in one parity sector, mix
/// sectors incoherently, or carry cross-sector coherences?
pub fn density_parity_check(rho: &DensityOperator) -> DensityParityClass {
    let dim = rho.dim();
    let mut even = false;
    let mut odd = false;
    for r in 0..dim {
        let pr = (r as u32).count_ones() % 2;
        for c in 0..dim {
            if rho.matrix()[(r, c)].norm() <= SUPPORT_TOLERANCE {
                continue;
            }
            let pc = (c as u32).count_ones() % 2;
            if pr != pc {
                return DensityParityClass::Violating;
            }
            if pr == 0 {
                even = true;
            } else {
                odd = true;
            }
        }
    }
    match (even, odd) {
        (true, true) => DensityParityClass::MixedSectorsNoCoherence,
        (false, true) => DensityParityClass::Odd,
        _ => DensityParityClass::Even,
    }
}

/// Eigenvalues of a density operator, descending. Rejects inputs whose
/// Hermiticity deviation exceeds 1e-10 and spectra outside
/// `[-1e-10, 1 + 1e-10]`.
pub fn spectrum(rho: &DensityOperator) -> Result<Spectrum> {
    let dev = rho.hermiticity_deviation();
    if dev > 1e-10 {
        return Err(Error::NonHermitian { deviation: dev });
    }
    let eig = rho.matrix().clone().symmetric_eigen();
    let spec = Spectrum::new(eig.eigenvalues.iter().copied().collect());
    check_spectrum_range(&spec)?;
    Ok(spec)
}

fn check_spectrum_range(spec: &Spectrum) -> Result<()> {
    for &v in spec.values() {
        if v < -NEGATIVE_EIGENVALUE_TOLERANCE {
            return Err(Error::NegativeEigenvalue { value: v });
        }
        if v > 1.0 + 1e-10 {
            return Err(Error::InvalidDensity(format!("eigenvalue {v} exceeds 1")));
        }
    }
    let sum = spec.sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidDensity(format!(
            "eigenvalues sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Von Neumann entropy in nats. Eigenvalues below [`EIGENVALUE_FLOOR`]
/// contribute nothing; values below `-1e-10` are an error.
pub fn von_neumann_entropy(spec: &Spectrum) -> Result<f64> {
    let mut acc = 0.0;
    for &v in spec.values() {
        if v < -NEGATIVE_EIGENVALUE_TOLERANCE {
            return Err(Error::NegativeEigenvalue { value: v });
        }
        if v < EIGENVALUE_FLOOR {
            continue;
        }
        acc -= v * v.ln();
    }
    Ok(acc)
}

/// Mutual information `S(A) + S(B) - S(AB)` (nats) of a density operator
/// across a cut that must cover exactly the operator's modes.
pub fn mutual_information(rho: &DensityOperator, cut: &ModePartition) -> Result<f64> {
    if !cut.covers(rho.modes()) {
        return Err(Error::InvalidPartition(format!(
            "cut {} does not cover modes {:?}",
            cut.label(),
            rho.modes()
        )));
    }
    let s_a = von_neumann_entropy(&spectrum(&partial_trace(rho, cut.traced())?)?)?;
    let s_b = von_neumann_entropy(&spectrum(&partial_trace(rho, cut.kept())?)?)?;
    let s_ab = von_neumann_entropy(&spectrum(rho)?)?;
    Ok(s_a + s_b - s_ab)
}

/// Spectrum of one side of a cut, computed from the state's coefficient
/// matrix: the marginal is `C C^dagger`, and when the other side is smaller
/// the same nonzero spectrum is read off `C^dagger C` and padded with exact
/// zeros. This keeps the cost at the smaller side's dimension cubed.
fn side_spectrum(psi: &FermionicState, side: &[u32], norm_sqr: f64) -> Result<Spectrum> {
    let gmask = modes_to_gmask(psi.n_modes(), side)?;
    let c = coefficient_matrix(psi, gmask);
    let rows = c.nrows();
    let cols = c.ncols();
    let gram: DMatrix<Complex64> = if rows <= cols {
        &c * c.adjoint()
    } else {
        c.adjoint() * &c
    };
    let eig = gram.symmetric_eigen();
    let mut values: Vec<f64> = eig.eigenvalues.iter().map(|v| v / norm_sqr).collect();
    values.resize(rows, 0.0);
    let spec = Spectrum::new(values);
    check_spectrum_range(&spec)?;
    Ok(spec)
}

/// Eigenvalue spectra of the two marginals of a pure state across a cut.
pub fn marginal_spectra(psi: &FermionicState, cut: &ModePartition) -> Result<(Spectrum, Spectrum)> {
    let all: Vec<u32> = (1..=psi.n_modes()).collect();
    if !cut.covers(&all) {
        return Err(Error::InvalidPartition(format!(
            "cut {} does not cover modes 1..={}",
            cut.label(),
            psi.n_modes()
        )));
    }
    let norm_sqr = psi.norm_sqr();
    if (norm_sqr - 1.0).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "state must be normalized (norm^2 = {norm_sqr:.6})"
        )));
    }
    let spec_a = side_spectrum(psi, cut.kept(), norm_sqr)?;
    let spec_b = side_spectrum(psi, cut.traced(), norm_sqr)?;
    Ok((spec_a, spec_b))
}

/// L1 distance between the nonzero parts of two spectra, the shorter list
/// padded with zeros. Zero exactly when the nonzero multisets agree.
pub fn spectrum_distance(a: &Spectrum, b: &Spectrum) -> f64 {
    let na = a.nonzero();
    let nb = b.nonzero();
    let len = na.len().max(nb.len());
    (0..len)
        .map(|i| {
            let va = na.get(i).copied().unwrap_or(0.0);
            let vb = nb.get(i).copied().unwrap_or(0.0);
            (va - vb).abs()
        })
        .sum()
}

/// How differently the two sides of a cut are mixed: the L1 distance
/// between the marginals' nonzero spectra.
pub fn spectral_mismatch(psi: &FermionicState, cut: &ModePartition) -> Result<f64> {
    let (a, b) = marginal_spectra(psi, cut)?;
    Ok(spectrum_distance(&a, &b))
}

/// Entanglement entropy of a pure state across a cut (nats). Refuses to
/// answer when the two sides' spectra disagree beyond
/// [`ENTROPY_AMBIGUITY_TOLERANCE`], returning both candidate entropies in
/// the error instead.
pub fn entanglement_entropy(psi: &FermionicState, cut: &ModePartition) -> Result<f64> {
    let (a, b) = marginal_spectra(psi, cut)?;
    let mismatch = spectrum_distance(&a, &b);
    let entropy_a = von_neumann_entropy(&a)?;
    if mismatch > ENTROPY_AMBIGUITY_TOLERANCE {
        let entropy_b = von_neumann_entropy(&b)?;
        return Err(Error::AmbiguousEntanglement {
            mismatch,
            entropy_a,
            entropy_b,
        });
    }
    Ok(entropy_a)
}
