//! Occupation-number basis states and sparse fermionic state vectors.
//!
//! A basis state is the set of occupied modes, represented as a bitmask with
//! mode `k` at bit `k - 1`. The canonical basis vector for a set
//! `{m1 < m2 < ...}` is the one produced by applying the creation operators
//! in ascending mode order to the vacuum, so applying a ladder operator for
//! mode `k` costs a sign of `(-1)^(number of occupied modes below k)`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Amplitudes with magnitude below this are dropped after operator
/// application to keep state maps sparse.
pub const AMPLITUDE_PRUNE_TOLERANCE: f64 = 1e-14;

/// Returns `+1.0` or `-1.0` according to the parity of the number of set
/// bits of `mask` strictly below bit `bit`.
#[inline]
pub(crate) fn sign_below(mask: u32, bit: u32) -> f64 {
    let below = mask & ((1u32 << bit) - 1);
    if below.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// A single occupation-number basis vector, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct FockBasisState(u32);

impl FockBasisState {
    /// The vacuum (no occupied modes).
    pub const VACUUM: FockBasisState = FockBasisState(0);

    /// Wraps a raw occupation mask.
    pub fn from_mask(mask: u32) -> Self {
        FockBasisState(mask)
    }

    /// Builds a basis state from a strictly increasing list of 1-based mode
    /// indices. Repeated or out-of-order indices are rejected: the canonical
    /// ordering is part of the state's definition, not a convention the
    /// caller may shuffle.
    pub fn from_modes(modes: &[u32]) -> Result<Self> {
        let mut mask = 0u32;
        let mut prev = 0u32;
        for &m in modes {
            if m == 0 {
                return Err(Error::ModeOutOfRange { mode: m, n: 0 });
            }
            if m <= prev {
                return Err(Error::Parse(format!(
                    "occupation list must be strictly increasing, got {m} after {prev}"
                )));
            }
            if m > crate::ABSOLUTE_MAX_MODES {
                return Err(Error::ModeOutOfRange { mode: m, n: 0 });
            }
            mask |= 1 << (m - 1);
            prev = m;
        }
        Ok(FockBasisState(mask))
    }

    pub fn mask(&self) -> u32 {
        self.0
    }

    pub fn is_occupied(&self, mode: u32) -> bool {
        mode >= 1 && self.0 & (1 << (mode - 1)) != 0
    }

    /// Occupied modes in ascending order.
    pub fn occupied_modes(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.0.count_ones() as usize);
        let mut m = self.0;
        while m != 0 {
            out.push(m.trailing_zeros() + 1);
            m &= m - 1;
        }
        out
    }

    pub fn occupation_count(&self) -> u32 {
        self.0.count_ones()
    }

    /// True when the number of occupied modes is even.
    pub fn has_even_parity(&self) -> bool {
        self.0.count_ones().is_multiple_of(2)
    }

    /// Occupation pattern as a bit string with mode 1 leftmost, e.g. the
    /// state with modes {1,2} occupied out of 4 prints as `1100`.
    pub fn pattern(&self, n: u32) -> String {
        (0..n)
            .map(|b| if self.0 & (1 << b) != 0 { '1' } else { '0' })
            .collect()
    }
}

/// A (not necessarily normalized) vector in the Fock space of `n` modes,
/// stored as a sparse map from occupation mask to complex amplitude.
///
/// The map is ordered so iteration, serialization and reports are
/// deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct FermionicState {
    n: u32,
    amps: BTreeMap<u32, Complex64>,
}

impl FermionicState {
    /// The zero vector (useful as an accumulator).
    pub fn zero(n: u32) -> Result<Self> {
        crate::check_mode_count(n)?;
        Ok(FermionicState {
            n,
            amps: BTreeMap::new(),
        })
    }

    /// The vacuum state |0>.
    pub fn vacuum(n: u32) -> Result<Self> {
        let mut s = Self::zero(n)?;
        s.amps.insert(0, Complex64::new(1.0, 0.0));
        Ok(s)
    }

    /// Builds a state from `(basis, amplitude)` terms. Duplicate basis
    /// states are rejected rather than summed: a duplicate in input data is
    /// almost always a mistake.
    pub fn from_terms(n: u32, terms: &[(FockBasisState, Complex64)]) -> Result<Self> {
        let mut s = Self::zero(n)?;
        for &(basis, amp) in terms {
            s.check_basis(basis)?;
            if s.amps.insert(basis.mask(), amp).is_some() {
                return Err(Error::Parse(format!(
                    "duplicate occupation pattern {}",
                    basis.pattern(n)
                )));
            }
        }
        Ok(s)
    }

    /// Convenience constructor: terms given as occupation lists.
    pub fn from_occupation_terms(n: u32, terms: &[(&[u32], Complex64)]) -> Result<Self> {
        let converted: Vec<(FockBasisState, Complex64)> = terms
            .iter()
            .map(|&(occ, amp)| FockBasisState::from_modes(occ).map(|b| (b, amp)))
            .collect::<Result<_>>()?;
        Self::from_terms(n, &converted)
    }

    fn check_basis(&self, basis: FockBasisState) -> Result<()> {
        if basis.mask() >> self.n != 0 {
            let worst = 32 - basis.mask().leading_zeros();
            return Err(Error::ModeOutOfRange {
                mode: worst,
                n: self.n,
            });
        }
        Ok(())
    }

    fn check_mode(&self, mode: u32) -> Result<u32> {
        if mode == 0 || mode > self.n {
            return Err(Error::ModeOutOfRange { mode, n: self.n });
        }
        Ok(mode - 1)
    }

    pub fn n_modes(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    /// Amplitude of a basis state (zero if absent).
    pub fn amplitude(&self, basis: FockBasisState) -> Complex64 {
        self.amps
            .get(&basis.mask())
            .copied()
            .unwrap_or_else(|| Complex64::new(0.0, 0.0))
    }

    /// Iterates stored `(basis, amplitude)` terms in ascending mask order.
    pub fn terms(&self) -> impl Iterator<Item = (FockBasisState, Complex64)> + '_ {
        self.amps
            .iter()
            .map(|(&m, &a)| (FockBasisState::from_mask(m), a))
    }

    pub fn support_size(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Returns the state scaled to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm <= AMPLITUDE_PRUNE_TOLERANCE {
            return Err(Error::Precondition(
                "cannot normalize a (near-)zero vector".into(),
            ));
        }
        let mut out = self.clone();
        for a in out.amps.values_mut() {
            *a /= norm;
        }
        Ok(out)
    }

    fn prune(&mut self) {
        self.amps
            .retain(|_, a| a.norm() >= AMPLITUDE_PRUNE_TOLERANCE);
    }

    /// Applies the creation operator for `mode`. The result is in general
    /// unnormalized; terms already occupying `mode` vanish.
    pub fn apply_creation(&self, mode: u32) -> Result<Self> {
        let bit = self.check_mode(mode)?;
        let mut out = Self::zero(self.n)?;
        for (&mask, &amp) in &self.amps {
            if mask & (1 << bit) != 0 {
                continue;
            }
            let signed = amp * sign_below(mask, bit);
            *out.amps
                .entry(mask | (1 << bit))
                .or_insert_with(|| Complex64::new(0.0, 0.0)) += signed;
        }
        out.prune();
        Ok(out)
    }

    /// Applies the annihilation operator for `mode` (unnormalized result).
    pub fn apply_annihilation(&self, mode: u32) -> Result<Self> {
        let bit = self.check_mode(mode)?;
        let mut out = Self::zero(self.n)?;
        for (&mask, &amp) in &self.amps {
            if mask & (1 << bit) == 0 {
                continue;
            }
            let signed = amp * sign_below(mask, bit);
            *out.amps
                .entry(mask & !(1 << bit))
                .or_insert_with(|| Complex64::new(0.0, 0.0)) += signed;
        }
        out.prune();
        Ok(out)
    }

    /// `<self|other>`; both states must live on the same number of modes.
    pub fn inner_product(&self, other: &FermionicState) -> Result<Complex64> {
        if self.n != other.n {
            return Err(Error::ModeMismatch(format!(
                "inner product between {}-mode and {}-mode states",
                self.n, other.n
            )));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (&mask, &a) in &self.amps {
            if let Some(&b) = other.amps.get(&mask) {
                acc += a.conj() * b;
            }
        }
        Ok(acc)
    }

    /// Dense matrix of `|self><other|` over the full 2^n-dimensional space,
    /// indexed by occupation mask.
    pub fn outer_product(&self, other: &FermionicState) -> Result<DMatrix<Complex64>> {
        if self.n != other.n {
            return Err(Error::ModeMismatch(format!(
                "outer product between {}-mode and {}-mode states",
                self.n, other.n
            )));
        }
        let dim = self.dim();
        let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for (&row, &a) in &self.amps {
            for (&col, &b) in &other.amps {
                m[(row as usize, col as usize)] = a * b.conj();
            }
        }
        Ok(m)
    }

    /// Scales the state by a complex factor.
    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for a in out.amps.values_mut() {
            *a *= factor;
        }
        out.prune();
        out
    }

    /// Sum of two states on the same modes.
    pub fn add(&self, other: &FermionicState) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::ModeMismatch(format!(
                "sum of {}-mode and {}-mode states",
                self.n, other.n
            )));
        }
        let mut out = self.clone();
        for (&mask, &amp) in &other.amps {
            *out.amps
                .entry(mask)
                .or_insert_with(|| Complex64::new(0.0, 0.0)) += amp;
        }
        out.prune();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn canonical_order_is_ascending_creation() {
        // |{1,2}> is defined as create(1) applied after create(2).
        let vac = FermionicState::vacuum(2).unwrap();
        let psi = vac.apply_creation(2).unwrap().apply_creation(1).unwrap();
        let basis = FockBasisState::from_modes(&[1, 2]).unwrap();
        assert_abs_diff_eq!(psi.amplitude(basis).re, 1.0, epsilon = 0.0);
        assert_eq!(psi.support_size(), 1);

        // Creating in the opposite order flips the sign.
        let swapped = vac.apply_creation(1).unwrap().apply_creation(2).unwrap();
        assert_abs_diff_eq!(swapped.amplitude(basis).re, -1.0, epsilon = 0.0);
    }

    #[test]
    fn double_occupation_vanishes() {
        let one = FermionicState::vacuum(2)
            .unwrap()
            .apply_creation(1)
            .unwrap();
        let twice = one.apply_creation(1).unwrap();
        assert_eq!(twice.support_size(), 0);
        assert_eq!(twice.norm(), 0.0);
    }

    #[test]
    fn annihilating_second_mode_of_pair_costs_a_sign() {
        // b_2 |{1,2}> = -|{1}>: mode 1 sits below mode 2 in the canonical
        // product, so removing mode 2 hops over it once.
        let pair = FermionicState::from_occupation_terms(2, &[(&[1, 2], c(1.0, 0.0))]).unwrap();
        let out = pair.apply_annihilation(2).unwrap();
        let one = FockBasisState::from_modes(&[1]).unwrap();
        assert_eq!(out.support_size(), 1);
        assert_abs_diff_eq!(out.amplitude(one).re, -1.0, epsilon = 0.0);

        // Removing mode 1 instead hops over nothing.
        let out1 = pair.apply_annihilation(1).unwrap();
        let two = FockBasisState::from_modes(&[2]).unwrap();
        assert_abs_diff_eq!(out1.amplitude(two).re, 1.0, epsilon = 0.0);
    }

    #[test]
    fn annihilating_empty_mode_gives_zero() {
        let one = FermionicState::from_occupation_terms(2, &[(&[1], c(1.0, 0.0))]).unwrap();
        assert_eq!(one.apply_annihilation(2).unwrap().support_size(), 0);
    }

    #[test]
    fn basis_states_are_orthonormal() {
        let a = FermionicState::from_occupation_terms(3, &[(&[1, 3], c(1.0, 0.0))]).unwrap();
        let b = FermionicState::from_occupation_terms(3, &[(&[2], c(1.0, 0.0))]).unwrap();
        assert_eq!(a.inner_product(&a).unwrap(), c(1.0, 0.0));
        assert_eq!(a.inner_product(&b).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn inner_product_conjugates_the_left_side() {
        let a = FermionicState::from_occupation_terms(1, &[(&[1], c(0.0, 1.0))]).unwrap();
        let b = FermionicState::from_occupation_terms(1, &[(&[1], c(2.0, 0.0))]).unwrap();
        assert_eq!(a.inner_product(&b).unwrap(), c(0.0, -2.0));
    }

    #[test]
    fn uniform_two_mode_projector_is_all_quarters() {
        let g = c(0.5, 0.0);
        let psi = FermionicState::from_occupation_terms(
            2,
            &[(&[], g), (&[1], g), (&[2], g), (&[1, 2], g)],
        )
        .unwrap();
        let m = psi.outer_product(&psi).unwrap();
        for r in 0..4 {
            for col in 0..4 {
                assert_abs_diff_eq!(m[(r, col)].re, 0.25, epsilon = 1e-15);
                assert_abs_diff_eq!(m[(r, col)].im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn tiny_amplitudes_are_pruned_by_operators() {
        let psi =
            FermionicState::from_occupation_terms(2, &[(&[], c(1.0, 0.0)), (&[2], c(1e-15, 0.0))])
                .unwrap();
        // The tiny term survives construction but not operator application.
        assert_eq!(psi.support_size(), 2);
        let out = psi.apply_creation(1).unwrap();
        assert_eq!(out.support_size(), 1);
    }

    #[test]
    fn duplicate_terms_are_rejected() {
        let err =
            FermionicState::from_occupation_terms(2, &[(&[1], c(1.0, 0.0)), (&[1], c(0.5, 0.0))]);
        assert!(err.is_err());
    }

    #[test]
    fn occupation_lists_must_be_strictly_increasing() {
        assert!(FockBasisState::from_modes(&[2, 1]).is_err());
        assert!(FockBasisState::from_modes(&[1, 1]).is_err());
        assert!(FockBasisState::from_modes(&[1, 2, 5]).is_ok());
    }

    #[test]
    fn mode_cap_is_enforced() {
        assert!(FermionicState::vacuum(14).is_ok());
        assert!(matches!(
            FermionicState::vacuum(15),
            Err(Error::ModeCapExceeded { n: 15, cap: 14 })
        ));
    }

    #[test]
    fn pattern_prints_mode_one_first() {
        let b = FockBasisState::from_modes(&[1, 2]).unwrap();
        assert_eq!(b.pattern(4), "1100");
        let b2 = FockBasisState::from_modes(&[2, 4]).unwrap();
        assert_eq!(b2.pattern(4), "0101");
    }
}
