//! Density operators on subsets of modes and the signed partial trace.
//!
//! Tracing modes out of a fermionic density operator is defined on matrix
//! elements: `|x><y|` contributes to the reduced operator only when `x` and
//! `y` occupy exactly the same traced modes, and the surviving element is
//! weighted by the parity of the permutation that sorts each occupation
//! list into (retained modes ascending, traced modes ascending). Dropping
//! those parities silently changes off-diagonal signs, which is precisely
//! the effect the rest of the crate quantifies.
//!
//! Two independent reduction routes are provided:
//!
//! * [`partial_trace`] / [`pure_reduction`] implement the block-sort sign
//!   rule directly.
//! * [`reduced_state_oracle`] never sorts anything: it demands that every
//!   normal-ordered subsystem monomial has the same expectation value in
//!   the reduced state as its embedding has in the full state, and solves
//!   the resulting linear system. Agreement between the two routes is a
//!   strong end-to-end check on the sign bookkeeping.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{ColPivQR, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use serde::de::Error as _;

use crate::error::{Error, Result};
use crate::fock::{sign_below, FermionicState};

/// Residual bound for the oracle's linear solve.
pub const ORACLE_RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Largest subsystem the oracle will reduce to; the monomial system has
/// `16^k` entries for `k` retained modes.
pub const ORACLE_KEPT_CAP: usize = 5;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Parity sign of sorting the occupied modes of `occ` from ascending order
/// into (retained ascending, traced ascending). One inversion per pair of
/// an occupied traced mode sitting below an occupied retained mode.
#[inline]
pub(crate) fn block_sort_sign(occ: u32, traced: u32) -> f64 {
    let kept_occ = u64::from(occ & !traced);
    let mut t = occ & traced;
    let mut inversions = 0u32;
    while t != 0 {
        let b = t.trailing_zeros();
        t &= t - 1;
        inversions += (kept_occ >> (b + 1)).count_ones();
    }
    if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Packs the bits of `mask` at the positions selected by `selector` into a
/// compact little-endian index.
#[inline]
pub(crate) fn compress_bits(mask: u32, selector: u32) -> u32 {
    let mut out = 0u32;
    let mut next = 0u32;
    let mut sel = selector;
    while sel != 0 {
        let p = sel.trailing_zeros();
        sel &= sel - 1;
        if mask & (1 << p) != 0 {
            out |= 1 << next;
        }
        next += 1;
    }
    out
}

/// Inverse of [`compress_bits`]: spreads the low bits of `packed` onto the
/// positions of `selector`.
#[inline]
pub(crate) fn expand_bits(packed: u32, selector: u32) -> u32 {
    let mut out = 0u32;
    let mut next = 0u32;
    let mut sel = selector;
    while sel != 0 {
        let p = sel.trailing_zeros();
        sel &= sel - 1;
        if packed & (1 << next) != 0 {
            out |= 1 << p;
        }
        next += 1;
    }
    out
}

fn validate_mode_list(modes: &[u32]) -> Result<()> {
    let mut prev = 0u32;
    for &m in modes {
        if m == 0 {
            return Err(Error::ModeOutOfRange { mode: 0, n: 0 });
        }
        if m <= prev {
            return Err(Error::InvalidPartition(format!(
                "mode list must be strictly increasing, got {m} after {prev}"
            )));
        }
        prev = m;
    }
    Ok(())
}

/// A Hermitian, unit-trace operator on an explicit subset of modes.
///
/// `modes` are the 1-based labels of the retained modes in ascending order;
/// row/column index `i` of the matrix is the local occupation mask in which
/// bit `j` stands for `modes[j]`.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    modes: Vec<u32>,
    mat: DMatrix<Complex64>,
}

impl DensityOperator {
    /// Projector onto a normalized pure state, on modes `1..=n`.
    pub fn from_pure(psi: &FermionicState) -> Result<Self> {
        let norm_sqr = psi.norm_sqr();
        if (norm_sqr - 1.0).abs() > 1e-6 {
            return Err(Error::Precondition(format!(
                "state must be normalized (norm^2 = {norm_sqr:.6})"
            )));
        }
        let mut mat = psi.outer_product(psi)?;
        mat /= Complex64::new(norm_sqr, 0.0);
        Ok(DensityOperator {
            modes: (1..=psi.n_modes()).collect(),
            mat,
        })
    }

    /// Builds a density operator from its mode labels and matrix, checking
    /// shape, Hermiticity and unit trace. Positivity is only checked by
    /// [`DensityOperator::validate`] since it costs a diagonalization.
    pub fn from_parts(modes: Vec<u32>, mat: DMatrix<Complex64>) -> Result<Self> {
        validate_mode_list(&modes)?;
        if let Some(&max) = modes.last() {
            crate::check_mode_count(max)?;
        }
        crate::check_mode_count(modes.len() as u32)?;
        let dim = 1usize << modes.len();
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::InvalidDensity(format!(
                "matrix is {}x{}, expected {dim}x{dim} for {} modes",
                mat.nrows(),
                mat.ncols(),
                modes.len()
            )));
        }
        let rho = DensityOperator { modes, mat };
        let dev = rho.hermiticity_deviation();
        if dev > 1e-12 {
            return Err(Error::NonHermitian { deviation: dev });
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::InvalidDensity(format!(
                "trace is {} + {}i, expected 1",
                tr.re, tr.im
            )));
        }
        Ok(rho)
    }

    /// Internal constructor for outputs that satisfy the invariants by
    /// construction (reductions of valid inputs).
    pub(crate) fn from_parts_unchecked(modes: Vec<u32>, mat: DMatrix<Complex64>) -> Self {
        DensityOperator { modes, mat }
    }

    pub fn modes(&self) -> &[u32] {
        &self.modes
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev = 0f64;
        for r in 0..self.dim() {
            for c in r..self.dim() {
                dev = dev.max((self.mat[(r, c)] - self.mat[(c, r)].conj()).norm());
            }
        }
        dev
    }

    /// Full invariant check: Hermitian and unit trace within 1e-12,
    /// eigenvalues at least -1e-10.
    pub fn validate(&self) -> Result<()> {
        let dev = self.hermiticity_deviation();
        if dev > 1e-12 {
            return Err(Error::NonHermitian { deviation: dev });
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::InvalidDensity(format!(
                "trace is {} + {}i, expected 1",
                tr.re, tr.im
            )));
        }
        let eig = self.mat.clone().symmetric_eigen();
        if let Some(min) = eig.eigenvalues.iter().copied().min_by(f64::total_cmp) {
            if min < -1e-10 {
                return Err(Error::NegativeEigenvalue { value: min });
            }
        }
        Ok(())
    }

    /// Matrix element `<row_occ| rho |col_occ>` where the occupation lists
    /// name modes of this operator's subsystem.
    pub fn element(&self, row_occ: &[u32], col_occ: &[u32]) -> Result<Complex64> {
        let r = self.local_index(row_occ)?;
        let c = self.local_index(col_occ)?;
        Ok(self.mat[(r, c)])
    }

    fn local_index(&self, occ: &[u32]) -> Result<usize> {
        let mask = self.local_mask(occ)?;
        Ok(mask as usize)
    }

    /// Maps a list of 1-based mode labels to a local bitmask over this
    /// operator's mode positions.
    fn local_mask(&self, labels: &[u32]) -> Result<u32> {
        let mut mask = 0u32;
        for &label in labels {
            let pos = self.modes.binary_search(&label).map_err(|_| {
                Error::ModeMismatch(format!(
                    "mode {label} is not part of subsystem {:?}",
                    self.modes
                ))
            })?;
            if mask & (1 << pos) != 0 {
                return Err(Error::InvalidPartition(format!(
                    "mode {label} listed twice"
                )));
            }
            mask |= 1 << pos;
        }
        Ok(mask)
    }
}

/// A bipartition of a set of modes into two non-empty sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModePartition {
    kept: Vec<u32>,
    traced: Vec<u32>,
}

impl ModePartition {
    /// Partition of modes `1..=n` given the kept side.
    pub fn new(n: u32, kept: &[u32]) -> Result<Self> {
        let mut kept = kept.to_vec();
        kept.sort_unstable();
        for w in kept.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidPartition(format!(
                    "mode {} listed twice",
                    w[0]
                )));
            }
        }
        for &m in &kept {
            if m == 0 || m > n {
                return Err(Error::ModeOutOfRange { mode: m, n });
            }
        }
        let traced: Vec<u32> = (1..=n).filter(|m| !kept.contains(m)).collect();
        Self::from_sides_sorted(kept, traced)
    }

    /// Partition from both sides explicitly.
    pub fn from_sides(a: &[u32], b: &[u32]) -> Result<Self> {
        let mut kept = a.to_vec();
        let mut traced = b.to_vec();
        kept.sort_unstable();
        traced.sort_unstable();
        for w in kept.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidPartition(format!(
                    "mode {} listed twice",
                    w[0]
                )));
            }
        }
        for w in traced.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidPartition(format!(
                    "mode {} listed twice",
                    w[0]
                )));
            }
        }
        Self::from_sides_sorted(kept, traced)
    }

    fn from_sides_sorted(kept: Vec<u32>, traced: Vec<u32>) -> Result<Self> {
        if kept.is_empty() || traced.is_empty() {
            return Err(Error::InvalidPartition(
                "both sides of a cut must be non-empty".into(),
            ));
        }
        if kept.first() == Some(&0) || traced.first() == Some(&0) {
            return Err(Error::ModeOutOfRange { mode: 0, n: 0 });
        }
        if kept.iter().any(|m| traced.contains(m)) {
            return Err(Error::InvalidPartition(
                "the two sides of a cut must be disjoint".into(),
            ));
        }
        Ok(ModePartition { kept, traced })
    }

    /// Parses the `"1,2|3,4"` cut syntax.
    pub fn from_label(s: &str) -> Result<Self> {
        let mut sides = s.split('|');
        let (a, b) = match (sides.next(), sides.next(), sides.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::Parse(format!(
                    "cut must have exactly two |-separated sides, got {s:?}"
                )))
            }
        };
        let parse_side = |side: &str| -> Result<Vec<u32>> {
            side.split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<u32>()
                        .map_err(|_| Error::Parse(format!("bad mode index {tok:?} in cut")))
                })
                .collect()
        };
        Self::from_sides(&parse_side(a)?, &parse_side(b)?)
    }

    pub fn kept(&self) -> &[u32] {
        &self.kept
    }

    pub fn traced(&self) -> &[u32] {
        &self.traced
    }

    pub fn total_modes(&self) -> usize {
        self.kept.len() + self.traced.len()
    }

    /// The same partition with the two sides exchanged.
    pub fn swapped(&self) -> Self {
        ModePartition {
            kept: self.traced.clone(),
            traced: self.kept.clone(),
        }
    }

    /// True when the union of the sides equals exactly `modes`.
    pub fn covers(&self, modes: &[u32]) -> bool {
        let mut all: Vec<u32> = self
            .kept
            .iter()
            .chain(self.traced.iter())
            .copied()
            .collect();
        all.sort_unstable();
        all == modes
    }

    /// Canonical text form, e.g. `1,2|3,4`.
    pub fn label(&self) -> String {
        let side = |v: &[u32]| {
            v.iter()
                .map(|m| m.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!("{}|{}", side(&self.kept), side(&self.traced))
    }
}

impl std::fmt::Display for ModePartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl serde::Serialize for ModePartition {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.label())
    }
}

impl<'de> serde::Deserialize<'de> for ModePartition {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        ModePartition::from_label(&s).map_err(D::Error::custom)
    }
}

/// Traces the given modes out of `rho` using the block-sort sign rule.
///
/// An element `|x><y|` survives only when `x` and `y` agree on the traced
/// modes; it lands on `|x\T><y\T|` weighted by the product of the two
/// block-sort parities. Tracing nothing returns a copy; tracing everything
/// leaves the 1x1 operator `[1]`.
pub fn partial_trace(rho: &DensityOperator, traced: &[u32]) -> Result<DensityOperator> {
    let traced_local = rho.local_mask(traced)?;
    if traced_local == 0 {
        return Ok(rho.clone());
    }
    let m = rho.modes.len() as u32;
    let full = ((1u64 << m) - 1) as u32;
    let kept_local = full & !traced_local;
    let kept_modes: Vec<u32> = rho
        .modes
        .iter()
        .enumerate()
        .filter(|(pos, _)| kept_local & (1 << pos) != 0)
        .map(|(_, &label)| label)
        .collect();
    let dim = rho.dim();
    let out_dim = 1usize << kept_local.count_ones();
    let mut out = DMatrix::from_element(out_dim, out_dim, ZERO);
    for r in 0..dim {
        let x = r as u32;
        let sx = block_sort_sign(x, traced_local);
        let xt = x & traced_local;
        let xk = compress_bits(x, kept_local) as usize;
        for c in 0..dim {
            let y = c as u32;
            if y & traced_local != xt {
                continue;
            }
            let sy = block_sort_sign(y, traced_local);
            let yk = compress_bits(y, kept_local) as usize;
            out[(xk, yk)] += rho.mat[(r, c)] * (sx * sy);
        }
    }
    Ok(DensityOperator::from_parts_unchecked(kept_modes, out))
}

/// Coefficient matrix of a pure state with respect to a kept/traced split:
/// row = kept-side occupation, column = traced-side occupation, entry =
/// block-sort sign times the amplitude. The reduced operator on the kept
/// side is `C C^dagger` (for a normalized state).
pub(crate) fn coefficient_matrix(psi: &FermionicState, kept_gmask: u32) -> DMatrix<Complex64> {
    let n = psi.n_modes();
    let full = ((1u64 << n) - 1) as u32;
    let traced_gmask = full & !kept_gmask;
    let rows = 1usize << kept_gmask.count_ones();
    let cols = 1usize << traced_gmask.count_ones();
    let mut c = DMatrix::from_element(rows, cols, ZERO);
    for (basis, amp) in psi.terms() {
        let mask = basis.mask();
        let r = compress_bits(mask, kept_gmask) as usize;
        let col = compress_bits(mask, traced_gmask) as usize;
        c[(r, col)] += amp * block_sort_sign(mask, traced_gmask);
    }
    c
}

pub(crate) fn modes_to_gmask(n: u32, modes: &[u32]) -> Result<u32> {
    let mut mask = 0u32;
    for &m in modes {
        if m == 0 || m > n {
            return Err(Error::ModeOutOfRange { mode: m, n });
        }
        if mask & (1 << (m - 1)) != 0 {
            return Err(Error::InvalidPartition(format!("mode {m} listed twice")));
        }
        mask |= 1 << (m - 1);
    }
    Ok(mask)
}

/// Reduces a normalized pure state directly to the kept modes without
/// forming the full projector. Equivalent to `partial_trace` of
/// [`DensityOperator::from_pure`], but usable when the full matrix would be
/// too large.
pub fn pure_reduction(psi: &FermionicState, kept: &[u32]) -> Result<DensityOperator> {
    let norm_sqr = psi.norm_sqr();
    if (norm_sqr - 1.0).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "state must be normalized (norm^2 = {norm_sqr:.6})"
        )));
    }
    let kept_gmask = modes_to_gmask(psi.n_modes(), kept)?;
    let c = coefficient_matrix(psi, kept_gmask);
    let mut mat = &c * c.adjoint();
    mat /= Complex64::new(norm_sqr, 0.0);
    let mut kept_sorted = kept.to_vec();
    kept_sorted.sort_unstable();
    Ok(DensityOperator::from_parts_unchecked(kept_sorted, mat))
}

/// Applies the normal-ordered monomial
/// `create(S1, ascending) . vacuum_projector(kept) . annihilate(S2)` to the
/// basis mask `y`. `s1` and `s2` are submasks of `kept`; bits outside
/// `kept` ride along untouched but contribute to the signs. Returns the
/// image mask and its sign, or None when the term vanishes.
fn apply_monomial(y: u32, kept: u32, s1: u32, s2: u32) -> Option<(u32, f64)> {
    if y & kept != s2 {
        return None;
    }
    let mut mask = y;
    let mut sign = 1.0;
    // Annihilators act smallest mode first (the rightmost factor of the
    // adjoint of an ascending creation string).
    let mut rem = s2;
    while rem != 0 {
        let b = rem.trailing_zeros();
        rem &= rem - 1;
        sign *= sign_below(mask, b);
        mask &= !(1u32 << b);
    }
    // Creators act largest mode first so the result matches the canonical
    // ascending product.
    let mut bits = [0u32; 32];
    let mut cnt = 0usize;
    let mut rem = s1;
    while rem != 0 {
        let b = rem.trailing_zeros();
        rem &= rem - 1;
        bits[cnt] = b;
        cnt += 1;
    }
    for i in (0..cnt).rev() {
        let b = bits[i];
        sign *= sign_below(mask, b);
        mask |= 1u32 << b;
    }
    Some((mask, sign))
}

struct OracleBasis {
    amat: DMatrix<Complex64>,
    qr: ColPivQR<Complex64, Dyn, Dyn>,
}

fn oracle_basis(kept_count: usize) -> Arc<OracleBasis> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<OracleBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("oracle cache poisoned");
    guard
        .entry(kept_count)
        .or_insert_with(|| {
            let dim = 1usize << kept_count;
            let unknowns = dim * dim;
            let full = (dim - 1) as u32;
            let mut amat = DMatrix::from_element(unknowns, unknowns, ZERO);
            for s1 in 0..dim as u32 {
                for s2 in 0..dim as u32 {
                    let row = (s1 as usize) * dim + s2 as usize;
                    for y in 0..dim as u32 {
                        if let Some((x, sign)) = apply_monomial(y, full, s1, s2) {
                            // tr(rho M) pairs rho[y, x] with M[x, y].
                            let col = (y as usize) * dim + x as usize;
                            amat[(row, col)] += Complex64::new(sign, 0.0);
                        }
                    }
                }
            }
            let qr = amat.clone().col_piv_qr();
            Arc::new(OracleBasis { amat, qr })
        })
        .clone()
}

/// Reduces `rho` to the given kept modes without using the block-sort sign
/// rule: for every subsystem monomial `M`, the reduced state must satisfy
/// `tr(rho_A M) = tr(rho M_embedded)`. Collecting all monomials gives a
/// linear system for the entries of `rho_A`, solved here with a residual
/// check of [`ORACLE_RESIDUAL_TOLERANCE`].
pub fn reduced_state_oracle(rho: &DensityOperator, kept: &[u32]) -> Result<DensityOperator> {
    let kept_pos = rho.local_mask(kept)?;
    let a = kept_pos.count_ones() as usize;
    if a > ORACLE_KEPT_CAP {
        return Err(Error::Precondition(format!(
            "oracle reduction supports at most {ORACLE_KEPT_CAP} retained modes, asked for {a}"
        )));
    }
    let dim = 1usize << a;
    let unknowns = dim * dim;
    let basis = oracle_basis(a);

    let gdim = rho.dim();
    let mut b = DVector::from_element(unknowns, ZERO);
    for s1 in 0..dim as u32 {
        for s2 in 0..dim as u32 {
            let row = (s1 as usize) * dim + s2 as usize;
            let gs1 = expand_bits(s1, kept_pos);
            let gs2 = expand_bits(s2, kept_pos);
            let mut acc = ZERO;
            for y in 0..gdim as u32 {
                if let Some((x, sign)) = apply_monomial(y, kept_pos, gs1, gs2) {
                    acc += rho.mat[(y as usize, x as usize)] * sign;
                }
            }
            b[row] = acc;
        }
    }

    let x = basis.qr.solve(&b).ok_or(Error::SingularSystem {
        residual: f64::INFINITY,
    })?;
    let residual = (&basis.amat * &x - &b)
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    if residual > ORACLE_RESIDUAL_TOLERANCE {
        return Err(Error::SingularSystem { residual });
    }

    let mut mat = DMatrix::from_element(dim, dim, ZERO);
    for r in 0..dim {
        for c in 0..dim {
            mat[(r, c)] = x[r * dim + c];
        }
    }
    let mut kept_sorted = kept.to_vec();
    kept_sorted.sort_unstable();
    Ok(DensityOperator::from_parts_unchecked(kept_sorted, mat))
}

/// Embeds an operator on the subsystem `op_modes` into the algebra of
/// `target_modes`, preserving all expectation values: the embedded operator
/// satisfies `tr(rho embed(X)) = tr(rho_A X)` for every state. The matrix
/// is decomposed in the normal-ordered monomial basis of the subsystem and
/// each monomial is re-applied globally with its anticommutation signs.
pub fn embed_operator(
    op: &DMatrix<Complex64>,
    op_modes: &[u32],
    target_modes: &[u32],
) -> Result<DMatrix<Complex64>> {
    validate_mode_list(op_modes)?;
    validate_mode_list(target_modes)?;
    crate::check_mode_count(target_modes.len() as u32)?;
    let a = op_modes.len();
    let dim = 1usize << a;
    if op.nrows() != dim || op.ncols() != dim {
        return Err(Error::InvalidDensity(format!(
            "operator is {}x{}, expected {dim}x{dim} for {a} modes",
            op.nrows(),
            op.ncols()
        )));
    }
    let mut kept_pos = 0u32;
    for &m in op_modes {
        let pos = target_modes.binary_search(&m).map_err(|_| {
            Error::ModeMismatch(format!("mode {m} is not part of the target mode set"))
        })?;
        kept_pos |= 1 << pos;
    }
    let gdim = 1usize << target_modes.len();
    let mut out = DMatrix::from_element(gdim, gdim, ZERO);
    for s1 in 0..dim as u32 {
        for s2 in 0..dim as u32 {
            let coeff = op[(s1 as usize, s2 as usize)];
            if coeff == ZERO {
                continue;
            }
            let gs1 = expand_bits(s1, kept_pos);
            let gs2 = expand_bits(s2, kept_pos);
            for y in 0..gdim as u32 {
                if let Some((x, sign)) = apply_monomial(y, kept_pos, gs1, gs2) {
                    out[(x as usize, y as usize)] += coeff * sign;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_mode_state(g: [Complex64; 4]) -> FermionicState {
        FermionicState::from_occupation_terms(
            2,
            &[(&[], g[0]), (&[1], g[1]), (&[2], g[2]), (&[1, 2], g[3])],
        )
        .unwrap()
        .normalized()
        .unwrap()
    }

    #[test]
    fn block_sort_sign_counts_crossings() {
        // {1,2} with mode 1 traced: mode 1 must hop over mode 2.
        assert_eq!(block_sort_sign(0b11, 0b01), -1.0);
        // {1,2} with mode 2 traced: nothing to hop over.
        assert_eq!(block_sort_sign(0b11, 0b10), 1.0);
        // {1,2,3} tracing mode 2: hops over mode 3 only.
        assert_eq!(block_sort_sign(0b111, 0b010), -1.0);
        // {1,3} tracing mode 2 (unoccupied): no crossings.
        assert_eq!(block_sort_sign(0b101, 0b010), 1.0);
    }

    #[test]
    fn tracing_one_mode_of_a_general_two_mode_state() {
        // For gamma_0|0> + gamma_1|1_1> + gamma_2|1_2> + gamma_12|1_1 1_2>,
        // the mode-1 marginal has <0|rho|1_1> = g0 g1* + g2 g12*, while the
        // mode-2 marginal has <0|rho|1_2> = g0 g2* - g1 g12*: the second
        // off-diagonal picks up the crossing sign.
        let g = [c(0.6, 0.1), c(0.2, -0.3), c(-0.4, 0.2), c(0.3, 0.4)];
        let psi = two_mode_state(g);
        let nn = c(g.iter().map(|z| z.norm_sqr()).sum::<f64>(), 0.0);
        let rho = DensityOperator::from_pure(&psi).unwrap();

        let rho1 = partial_trace(&rho, &[2]).unwrap();
        let want1 = (g[0] * g[1].conj() + g[2] * g[3].conj()) / nn;
        let got1 = rho1.element(&[], &[1]).unwrap();
        assert_abs_diff_eq!(got1.re, want1.re, epsilon = 1e-14);
        assert_abs_diff_eq!(got1.im, want1.im, epsilon = 1e-14);

        let rho2 = partial_trace(&rho, &[1]).unwrap();
        let want2 = (g[0] * g[2].conj() - g[1] * g[3].conj()) / nn;
        let got2 = rho2.element(&[], &[2]).unwrap();
        assert_abs_diff_eq!(got2.re, want2.re, epsilon = 1e-14);
        assert_abs_diff_eq!(got2.im, want2.im, epsilon = 1e-14);
    }

    #[test]
    fn tracing_middle_mode_of_triple_occupation_keeps_plus_sign() {
        let psi = FermionicState::from_occupation_terms(3, &[(&[1, 2, 3], c(1.0, 0.0))]).unwrap();
        let rho = DensityOperator::from_pure(&psi).unwrap();
        let reduced = partial_trace(&rho, &[2]).unwrap();
        assert_eq!(reduced.modes(), &[1, 3]);
        let diag = reduced.element(&[1, 3], &[1, 3]).unwrap();
        assert_abs_diff_eq!(diag.re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn partial_trace_preserves_trace_and_hermiticity() {
        let g = [c(0.5, 0.0), c(0.1, 0.7), c(-0.3, 0.2), c(0.2, -0.1)];
        let rho = DensityOperator::from_pure(&two_mode_state(g)).unwrap();
        for traced in [vec![1u32], vec![2u32], vec![1u32, 2u32]] {
            let red = partial_trace(&rho, &traced).unwrap();
            assert_abs_diff_eq!(red.trace().re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(red.trace().im, 0.0, epsilon = 1e-12);
            assert!(red.hermiticity_deviation() < 1e-12);
        }
    }

    #[test]
    fn sequential_traces_compose() {
        let psi = FermionicState::from_occupation_terms(
            3,
            &[
                (&[], c(0.4, 0.0)),
                (&[1, 2], c(0.5, 0.2)),
                (&[1, 3], c(-0.3, 0.4)),
                (&[2, 3], c(0.2, -0.4)),
            ],
        )
        .unwrap()
        .normalized()
        .unwrap();
        let rho = DensityOperator::from_pure(&psi).unwrap();
        let step = partial_trace(&partial_trace(&rho, &[3]).unwrap(), &[1]).unwrap();
        let direct = partial_trace(&rho, &[1, 3]).unwrap();
        assert_eq!(step.modes(), direct.modes());
        for r in 0..step.dim() {
            for col in 0..step.dim() {
                let d = (step.matrix()[(r, col)] - direct.matrix()[(r, col)]).norm();
                assert!(d < 1e-13, "mismatch at ({r},{col}): {d}");
            }
        }
    }

    #[test]
    fn pure_reduction_matches_partial_trace() {
        let psi = FermionicState::from_occupation_terms(
            3,
            &[
                (&[1], c(0.3, 0.1)),
                (&[2], c(0.2, -0.5)),
                (&[1, 2, 3], c(0.4, 0.2)),
                (&[3], c(-0.1, 0.6)),
            ],
        )
        .unwrap()
        .normalized()
        .unwrap();
        let rho = DensityOperator::from_pure(&psi).unwrap();
        for kept in [vec![1u32], vec![2u32], vec![1u32, 3u32], vec![2u32, 3u32]] {
            let traced: Vec<u32> = (1..=3).filter(|m| !kept.contains(m)).collect();
            let fast = pure_reduction(&psi, &kept).unwrap();
            let slow = partial_trace(&rho, &traced).unwrap();
            assert_eq!(fast.modes(), slow.modes());
            for r in 0..fast.dim() {
                for col in 0..fast.dim() {
                    let d = (fast.matrix()[(r, col)] - slow.matrix()[(r, col)]).norm();
                    assert!(d < 1e-13);
                }
            }
        }
    }

    #[test]
    fn oracle_agrees_with_partial_trace_on_a_mixed_state() {
        // Mix two pure states that straddle parity sectors.
        let psi1 = two_mode_state([c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]);
        let psi2 = two_mode_state([c(0.1, 0.2), c(-0.4, 0.3), c(0.6, 0.0), c(0.2, -0.2)]);
        let m1 = DensityOperator::from_pure(&psi1).unwrap();
        let m2 = DensityOperator::from_pure(&psi2).unwrap();
        let mat = m1.matrix() * Complex64::new(0.3, 0.0) + m2.matrix() * Complex64::new(0.7, 0.0);
        let rho = DensityOperator::from_parts(vec![1, 2], mat).unwrap();
        for kept in [vec![1u32], vec![2u32]] {
            let traced: Vec<u32> = (1..=2).filter(|m| !kept.contains(m)).collect();
            let via_trace = partial_trace(&rho, &traced).unwrap();
            let via_oracle = reduced_state_oracle(&rho, &kept).unwrap();
            for r in 0..via_trace.dim() {
                for col in 0..via_trace.dim() {
                    let d = (via_trace.matrix()[(r, col)] - via_oracle.matrix()[(r, col)]).norm();
                    assert!(d < 1e-12, "oracle disagrees at ({r},{col}): {d}");
                }
            }
        }
    }

    #[test]
    fn embedded_raising_operator_carries_the_crossing_sign() {
        // Raising mode 2, embedded over both modes, applied to |1_1>.
        let mut raise = DMatrix::from_element(2, 2, c(0.0, 0.0));
        raise[(1, 0)] = c(1.0, 0.0);
        let g = embed_operator(&raise, &[2], &[1, 2]).unwrap();
        // Column of |1_1> = mask 0b01: image must be -|1_1 1_2>.
        assert_abs_diff_eq!(g[(0b11, 0b01)].re, -1.0, epsilon = 0.0);
        // Column of vacuum: image is +|1_2>.
        assert_abs_diff_eq!(g[(0b10, 0b00)].re, 1.0, epsilon = 0.0);
    }

    #[test]
    fn embedded_local_vacuum_sandwich_is_the_number_operator() {
        // create(1) |0><0| annihilate(1) on the single-mode subsystem {1}
        // embeds to the occupation-number operator of mode 1.
        let mut op = DMatrix::from_element(2, 2, c(0.0, 0.0));
        op[(1, 1)] = c(1.0, 0.0);
        let g = embed_operator(&op, &[1], &[1, 2, 3]).unwrap();
        for y in 0..8u32 {
            for x in 0..8u32 {
                let want = if x == y && y & 1 != 0 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(g[(x as usize, y as usize)].re, want, epsilon = 0.0);
                assert_abs_diff_eq!(g[(x as usize, y as usize)].im, 0.0, epsilon = 0.0);
            }
        }
    }

    #[test]
    fn embedding_preserves_expectation_values() {
        let psi = FermionicState::from_occupation_terms(
            3,
            &[
                (&[], c(0.2, 0.1)),
                (&[1], c(0.4, -0.2)),
                (&[2, 3], c(0.3, 0.3)),
                (&[1, 2], c(-0.2, 0.5)),
            ],
        )
        .unwrap()
        .normalized()
        .unwrap();
        let rho = DensityOperator::from_pure(&psi).unwrap();
        let rho_a = partial_trace(&rho, &[3]).unwrap();
        // An arbitrary (non-Hermitian) operator on modes {1,2}.
        let mut op = DMatrix::from_element(4, 4, c(0.0, 0.0));
        op[(0, 3)] = c(0.7, -0.4);
        op[(2, 1)] = c(-0.3, 0.9);
        op[(1, 1)] = c(0.5, 0.0);
        let emb = embed_operator(&op, &[1, 2], &[1, 2, 3]).unwrap();

        let tr_local: Complex64 = (0..4)
            .flat_map(|r| (0..4).map(move |cc| (r, cc)))
            .map(|(r, cc)| rho_a.matrix()[(r, cc)] * op[(cc, r)])
            .sum();
        let tr_global: Complex64 = (0..8)
            .flat_map(|r| (0..8).map(move |cc| (r, cc)))
            .map(|(r, cc)| rho.matrix()[(r, cc)] * emb[(cc, r)])
            .sum();
        assert_abs_diff_eq!(tr_local.re, tr_global.re, epsilon = 1e-13);
        assert_abs_diff_eq!(tr_local.im, tr_global.im, epsilon = 1e-13);
    }

    #[test]
    fn partition_validation_and_labels() {
        let p = ModePartition::new(4, &[1, 3]).unwrap();
        assert_eq!(p.kept(), &[1, 3]);
        assert_eq!(p.traced(), &[2, 4]);
        assert_eq!(p.label(), "1,3|2,4");
        assert_eq!(ModePartition::from_label("1,3|2,4").unwrap(), p);
        assert!(p.covers(&[1, 2, 3, 4]));
        assert!(!p.covers(&[1, 2, 3]));
        assert!(ModePartition::new(4, &[]).is_err());
        assert!(ModePartition::new(4, &[1, 2, 3, 4]).is_err());
        assert!(ModePartition::from_label("1,2|2,3").is_err());
        assert!(ModePartition::from_label("1,2").is_err());
        assert!(ModePartition::from_label("1,x|2").is_err());
    }

    #[test]
    fn tracing_nothing_and_everything() {
        let g = [c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)];
        let rho = DensityOperator::from_pure(&two_mode_state(g)).unwrap();
        let same = partial_trace(&rho, &[]).unwrap();
        assert_eq!(same.modes(), &[1, 2]);
        assert_eq!(same.matrix(), rho.matrix());
        let scalar = partial_trace(&rho, &[1, 2]).unwrap();
        assert_eq!(scalar.dim(), 1);
        assert_abs_diff_eq!(scalar.matrix()[(0, 0)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn from_parts_rejects_bad_matrices() {
        let mut mat = DMatrix::from_element(2, 2, c(0.0, 0.0));
        mat[(0, 0)] = c(0.5, 0.0);
        mat[(1, 1)] = c(0.5, 0.0);
        mat[(0, 1)] = c(0.1, 0.2);
        // Not Hermitian: the mirror element is missing.
        assert!(DensityOperator::from_parts(vec![1], mat.clone()).is_err());
        mat[(1, 0)] = c(0.1, -0.2);
        assert!(DensityOperator::from_parts(vec![1], mat.clone()).is_ok());
        mat[(1, 1)] = c(0.6, 0.0);
        assert!(DensityOperator::from_parts(vec![1], mat).is_err());
    }
}
