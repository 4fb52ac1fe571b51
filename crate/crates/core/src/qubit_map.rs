//! Mapping fermionic mode states onto qubit registers, and the question of
//! whether any choice of per-pattern phases makes that map faithful.
//!
//! The map itself is trivial bookkeeping: occupation pattern `z` becomes the
//! computational basis string `z`, with a free phase `exp(i phi_z)` per
//! pattern. Populations always survive. Off-diagonals of reduced pair
//! states do not: the fermionic side carries anticommutation signs that the
//! qubit-side partial trace never produces. For the even-parity four-mode
//! family each pair marginal has two independent off-diagonal elements,
//! each a sum of two amplitude products with definite signs
//! ([`OFFDIAG_TABLE`]); equality of magnitudes forces a linear congruence
//! on the phases for every sign pattern, and [`decide_solvability`] settles
//! the resulting integer system exactly. A certified contradiction means no
//! phase assignment reproduces all pair-marginal magnitudes.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entanglement::{parity_check, ParityClass};
use crate::error::{Error, Result};
use crate::fock::{FermionicState, FockBasisState};
use crate::reductions::{compress_bits, pure_reduction};

/// Threshold below which an amplitude product no longer activates a phase
/// congruence.
pub const ACTIVATION_TOLERANCE: f64 = 1e-12;

/// Bound for the numeric faithfulness check of a solvable phase assignment.
pub const OFFDIAG_ERROR_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The eight even-parity occupation patterns of four modes, in the
/// positional order used for amplitude lists and phase variables:
/// vacuum, {1,2}, {1,3}, {1,4}, {2,3}, {2,4}, {3,4}, {1,2,3,4}.
pub const ALPHA_PATTERNS: [u32; 8] = [
    0b0000, 0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100, 0b1111,
];

const A0: u32 = ALPHA_PATTERNS[0];
const A12: u32 = ALPHA_PATTERNS[1];
const A13: u32 = ALPHA_PATTERNS[2];
const A14: u32 = ALPHA_PATTERNS[3];
const A23: u32 = ALPHA_PATTERNS[4];
const A24: u32 = ALPHA_PATTERNS[5];
const A34: u32 = ALPHA_PATTERNS[6];
const A1234: u32 = ALPHA_PATTERNS[7];

/// Builds the even-sector four-mode state with the given amplitudes in
/// [`ALPHA_PATTERNS`] order. The result is not normalized.
pub fn even_four_mode_state(alphas: &[Complex64; 8]) -> FermionicState {
    let terms: Vec<(FockBasisState, Complex64)> = ALPHA_PATTERNS
        .iter()
        .zip(alphas.iter())
        .map(|(&mask, &amp)| (FockBasisState::from_mask(mask), amp))
        .collect();
    FermionicState::from_terms(4, &terms).expect("static patterns are valid")
}

/// One signed amplitude product `sign * alpha_left * conj(alpha_right)`.
#[derive(Clone, Copy, Debug)]
pub struct OffdiagTerm {
    pub left: u32,
    pub right: u32,
    pub sign: i8,
}

impl OffdiagTerm {
    const fn new(left: u32, right: u32, sign: i8) -> Self {
        OffdiagTerm { left, right, sign }
    }

    pub fn product(&self, psi: &FermionicState) -> Complex64 {
        let l = psi.amplitude(FockBasisState::from_mask(self.left));
        let r = psi.amplitude(FockBasisState::from_mask(self.right));
        l * r.conj() * f64::from(self.sign)
    }
}

/// Closed form of the two independent off-diagonals of one pair marginal:
/// `even` is `<vacuum| rho_ij |1_i 1_j>`, `odd` is `<1_i| rho_ij |1_j>`.
#[derive(Clone, Copy, Debug)]
pub struct PairOffdiagForm {
    pub pair: (u32, u32),
    pub even: [OffdiagTerm; 2],
    pub odd: [OffdiagTerm; 2],
}

impl PairOffdiagForm {
    /// Evaluates both closed forms on a (normalized) state.
    pub fn eval(&self, psi: &FermionicState) -> (Complex64, Complex64) {
        let even = self.even[0].product(psi) + self.even[1].product(psi);
        let odd = self.odd[0].product(psi) + self.odd[1].product(psi);
        (even, odd)
    }
}

/// Signed closed forms of every pair marginal's off-diagonals for the
/// even-parity four-mode family. The minus signs are exactly the
/// anticommutation crossings a qubit-side partial trace cannot reproduce.
pub const OFFDIAG_TABLE: [PairOffdiagForm; 6] = [
    PairOffdiagForm {
        pair: (1, 2),
        even: [
            OffdiagTerm::new(A0, A12, 1),
            OffdiagTerm::new(A34, A1234, 1),
        ],
        odd: [OffdiagTerm::new(A13, A23, 1), OffdiagTerm::new(A14, A24, 1)],
    },
    PairOffdiagForm {
        pair: (3, 4),
        even: [
            OffdiagTerm::new(A0, A34, 1),
            OffdiagTerm::new(A12, A1234, 1),
        ],
        odd: [OffdiagTerm::new(A13, A14, 1), OffdiagTerm::new(A23, A24, 1)],
    },
    PairOffdiagForm {
        pair: (1, 3),
        even: [
            OffdiagTerm::new(A0, A13, 1),
            OffdiagTerm::new(A24, A1234, -1),
        ],
        odd: [
            OffdiagTerm::new(A14, A34, 1),
            OffdiagTerm::new(A12, A23, -1),
        ],
    },
    PairOffdiagForm {
        pair: (2, 4),
        even: [
            OffdiagTerm::new(A0, A24, 1),
            OffdiagTerm::new(A13, A1234, -1),
        ],
        odd: [
            OffdiagTerm::new(A12, A14, 1),
            OffdiagTerm::new(A23, A34, -1),
        ],
    },
    PairOffdiagForm {
        pair: (1, 4),
        even: [
            OffdiagTerm::new(A0, A14, 1),
            OffdiagTerm::new(A23, A1234, 1),
        ],
        odd: [
            OffdiagTerm::new(A12, A24, -1),
            OffdiagTerm::new(A13, A34, -1),
        ],
    },
    PairOffdiagForm {
        pair: (2, 3),
        even: [
            OffdiagTerm::new(A0, A23, 1),
            OffdiagTerm::new(A14, A1234, 1),
        ],
        odd: [OffdiagTerm::new(A12, A13, 1), OffdiagTerm::new(A24, A34, 1)],
    },
];

/// Looks up the closed-form row for a pair (in either order).
pub fn offdiag_form(i: u32, j: u32) -> Option<&'static PairOffdiagForm> {
    OFFDIAG_TABLE
        .iter()
        .find(|f| f.pair == (i, j) || f.pair == (j, i))
}

/// The two independent off-diagonals of the pair marginal `rho_{i,j}` of a
/// normalized pure state, computed through the signed reduction.
#[derive(Clone, Copy, Debug)]
pub struct PairOffdiagonals {
    /// `<vacuum| rho_ij |1_i 1_j>`
    pub even: Complex64,
    /// `<1_i| rho_ij |1_j>`
    pub odd: Complex64,
}

pub fn pair_offdiagonals(psi: &FermionicState, i: u32, j: u32) -> Result<PairOffdiagonals> {
    if i == j {
        return Err(Error::InvalidPartition(format!(
            "pair ({i},{j}) repeats a mode"
        )));
    }
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let rho = pure_reduction(psi, &[lo, hi])?;
    Ok(PairOffdiagonals {
        even: rho.matrix()[(0b00, 0b11)],
        odd: rho.matrix()[(0b01, 0b10)],
    })
}

/// A qubit register state; basis index bit `k - 1` is qubit `k`, matching
/// the occupation masks on the fermionic side.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitState {
    n: u32,
    amps: Vec<Complex64>,
}

impl QubitState {
    pub fn new(n: u32, amps: Vec<Complex64>) -> Result<Self> {
        crate::check_mode_count(n)?;
        if amps.len() != 1usize << n {
            return Err(Error::Precondition(format!(
                "amplitude vector has length {}, expected {}",
                amps.len(),
                1usize << n
            )));
        }
        Ok(QubitState { n, amps })
    }

    pub fn n_qubits(&self) -> u32 {
        self.n
    }

    pub fn amplitude(&self, mask: u32) -> Complex64 {
        self.amps[mask as usize]
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Projector onto this state as a density matrix on qubits `1..=n`.
    pub fn density(&self) -> QubitDensity {
        let dim = self.amps.len();
        let mut mat = DMatrix::from_element(dim, dim, ZERO);
        for r in 0..dim {
            for c in 0..dim {
                mat[(r, c)] = self.amps[r] * self.amps[c].conj();
            }
        }
        QubitDensity {
            qubits: (1..=self.n).collect(),
            mat,
        }
    }
}

/// A density matrix on an explicit subset of qubits.
#[derive(Clone, Debug)]
pub struct QubitDensity {
    qubits: Vec<u32>,
    mat: DMatrix<Complex64>,
}

impl QubitDensity {
    pub fn qubits(&self) -> &[u32] {
        &self.qubits
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }
}

/// Standard qubit partial trace: no parities, pure index bookkeeping.
pub fn qubit_partial_trace(rho: &QubitDensity, traced: &[u32]) -> Result<QubitDensity> {
    let mut traced_local = 0u32;
    for &label in traced {
        let pos = rho.qubits.binary_search(&label).map_err(|_| {
            Error::ModeMismatch(format!(
                "qubit {label} is not part of subsystem {:?}",
                rho.qubits
            ))
        })?;
        if traced_local & (1 << pos) != 0 {
            return Err(Error::InvalidPartition(format!(
                "qubit {label} listed twice"
            )));
        }
        traced_local |= 1 << pos;
    }
    if traced_local == 0 {
        return Ok(rho.clone());
    }
    let m = rho.qubits.len() as u32;
    let full = ((1u64 << m) - 1) as u32;
    let kept_local = full & !traced_local;
    let kept_qubits: Vec<u32> = rho
        .qubits
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
        let xt = x & traced_local;
        let xk = compress_bits(x, kept_local) as usize;
        for c in 0..dim {
            let y = c as u32;
            if y & traced_local != xt {
                continue;
            }
            let yk = compress_bits(y, kept_local) as usize;
            out[(xk, yk)] += rho.mat[(r, c)];
        }
    }
    Ok(QubitDensity {
        qubits: kept_qubits,
        mat: out,
    })
}

/// Off-diagonals of the qubit pair marginal, at the same matrix positions
/// as [`pair_offdiagonals`] reads on the fermionic side.
pub fn qubit_pair_offdiagonals(psi: &QubitState, i: u32, j: u32) -> Result<PairOffdiagonals> {
    if i == j {
        return Err(Error::InvalidPartition(format!(
            "pair ({i},{j}) repeats a mode"
        )));
    }
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let traced: Vec<u32> = (1..=psi.n).filter(|&q| q != lo && q != hi).collect();
    let rho = qubit_partial_trace(&psi.density(), &traced)?;
    Ok(PairOffdiagonals {
        even: rho.matrix()[(0b00, 0b11)],
        odd: rho.matrix()[(0b01, 0b10)],
    })
}

/// One phase angle per occupation pattern, in `[0, 2 pi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseAssignment {
    n: u32,
    phases: BTreeMap<u32, f64>,
}

impl PhaseAssignment {
    pub fn new(n: u32, phases: BTreeMap<u32, f64>) -> Self {
        let phases = phases
            .into_iter()
            .map(|(m, p)| (m, p.rem_euclid(2.0 * PI)))
            .collect();
        PhaseAssignment { n, phases }
    }

    /// All phases zero on the given patterns (the identity encoding).
    pub fn zeros(n: u32, patterns: &[u32]) -> Self {
        PhaseAssignment {
            n,
            phases: patterns.iter().map(|&m| (m, 0.0)).collect(),
        }
    }

    /// Zero phases on exactly the support of a state.
    pub fn zeros_for(psi: &FermionicState) -> Self {
        PhaseAssignment {
            n: psi.n_modes(),
            phases: psi.terms().map(|(b, _)| (b.mask(), 0.0)).collect(),
        }
    }

    pub fn get(&self, pattern: u32) -> Option<f64> {
        self.phases.get(&pattern).copied()
    }

    pub fn n_modes(&self) -> u32 {
        self.n
    }

    /// Pattern-string keyed view for reports, e.g. `"1100" -> 3.14159...`.
    pub fn labeled(&self) -> BTreeMap<String, f64> {
        self.phases
            .iter()
            .map(|(&m, &p)| (FockBasisState::from_mask(m).pattern(self.n), p))
            .collect()
    }
}

/// Maps a fermionic state onto the qubit register: pattern `z` keeps its
/// amplitude times `exp(i phi_z)`. Every support pattern needs a phase.
pub fn jw_map(psi: &FermionicState, phases: &PhaseAssignment) -> Result<QubitState> {
    let n = psi.n_modes();
    let mut amps = vec![ZERO; 1usize << n];
    for (basis, amp) in psi.terms() {
        let phi = phases
            .get(basis.mask())
            .ok_or_else(|| Error::MissingPhase {
                pattern: basis.pattern(n),
            })?;
        amps[basis.mask() as usize] = amp * Complex64::from_polar(1.0, phi);
    }
    QubitState::new(n, amps)
}

/// A single congruence `sum_k coeffs[k] * phi_k = rhs_half_turns * pi
/// (mod 2 pi)` over the phase variables, in canonical form: coefficients
/// are coprime with a positive leading entry and `rhs_half_turns` is 0 or
/// 1. `sources` lists the pair/column combinations that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseConstraint {
    pub coeffs: Vec<i64>,
    pub rhs_half_turns: i64,
    pub sources: Vec<String>,
}

/// The deduplicated congruence system over the pattern phases.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseConstraintSystem {
    /// Phase variables, as occupation patterns in [`ALPHA_PATTERNS`] order.
    pub variables: Vec<u32>,
    pub rows: Vec<PhaseConstraint>,
}

fn var_index(pattern: u32) -> usize {
    ALPHA_PATTERNS
        .iter()
        .position(|&p| p == pattern)
        .expect("table patterns are phase variables")
}

fn canonicalize_row(coeffs: &mut [i64], rhs: &mut i64) {
    if let Some(first) = coeffs.iter().find(|&&c| c != 0) {
        if *first < 0 {
            for c in coeffs.iter_mut() {
                *c = -*c;
            }
            *rhs = -*rhs;
        }
    }
    *rhs = rhs.rem_euclid(2);
}

fn build_rows(filter: Option<&FermionicState>) -> Vec<PhaseConstraint> {
    let mut rows: Vec<PhaseConstraint> = Vec::new();
    for odd_column in [false, true] {
        for form in &OFFDIAG_TABLE {
            let terms = if odd_column { &form.odd } else { &form.even };
            if let Some(psi) = filter {
                // A congruence only constrains anything when both products
                // interfere; with one of them absent any phase choice
                // reproduces the magnitude.
                let p1 = terms[0].product(psi);
                let p2 = terms[1].product(psi);
                if p1.norm() <= ACTIVATION_TOLERANCE || p2.norm() <= ACTIVATION_TOLERANCE {
                    continue;
                }
            }
            let mut coeffs = vec![0i64; ALPHA_PATTERNS.len()];
            // Relative phase of the second product minus the first must
            // match the relative sign of the two fermionic terms.
            coeffs[var_index(terms[1].left)] += 1;
            coeffs[var_index(terms[1].right)] -= 1;
            coeffs[var_index(terms[0].left)] -= 1;
            coeffs[var_index(terms[0].right)] += 1;
            let mut rhs = if terms[0].sign == terms[1].sign { 0 } else { 1 };
            canonicalize_row(&mut coeffs, &mut rhs);
            let source = format!(
                "({},{}) {}",
                form.pair.0,
                form.pair.1,
                if odd_column { "odd" } else { "even" }
            );
            if let Some(existing) = rows
                .iter_mut()
                .find(|r| r.coeffs == coeffs && r.rhs_half_turns == rhs)
            {
                existing.sources.push(source);
            } else {
                rows.push(PhaseConstraint {
                    coeffs,
                    rhs_half_turns: rhs,
                    sources: vec![source],
                });
            }
        }
    }
    rows
}

/// The full congruence system a faithful phase assignment must satisfy
/// when every amplitude product can interfere (the generic case).
pub fn build_phase_constraints() -> PhaseConstraintSystem {
    PhaseConstraintSystem {
        variables: ALPHA_PATTERNS.to_vec(),
        rows: build_rows(None),
    }
}

/// The congruences actually activated by a concrete state: rows whose two
/// amplitude products both exceed [`ACTIVATION_TOLERANCE`].
pub fn active_phase_constraints(psi: &FermionicState) -> PhaseConstraintSystem {
    PhaseConstraintSystem {
        variables: ALPHA_PATTERNS.to_vec(),
        rows: build_rows(Some(psi)),
    }
}

/// An integer combination of system rows whose left side cancels while the
/// right side is an odd multiple of pi: a certificate that no phase
/// assignment exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolvabilityWitness {
    /// Multiplier per system row.
    pub combination: Vec<i64>,
    /// The combined right side in half turns; always odd.
    pub rhs_parity: i64,
}

/// Outcome of [`decide_solvability`].
#[derive(Clone, Debug)]
pub enum Solvability {
    Solvable { phases: PhaseAssignment },
    Contradiction { witness: SolvabilityWitness },
}

struct Elimination {
    a: Vec<Vec<i64>>,
    rhs: Vec<i64>,
    tracker: Vec<Vec<i64>>,
    pivots: Vec<(usize, usize)>,
    rank: usize,
}

/// Row echelon form over the integers using only unimodular operations
/// (swap, negate, add an integer multiple of another row). Unlike
/// fraction-free elimination this never rescales a row, so the solution
/// set of the congruence system modulo 2 pi is preserved exactly.
fn eliminate(rows: &[PhaseConstraint], vars: usize) -> Elimination {
    let nrows = rows.len();
    let mut a: Vec<Vec<i64>> = rows.iter().map(|r| r.coeffs.clone()).collect();
    let mut rhs: Vec<i64> = rows.iter().map(|r| r.rhs_half_turns).collect();
    let mut tracker: Vec<Vec<i64>> = (0..nrows)
        .map(|i| (0..nrows).map(|j| i64::from(i == j)).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut rank = 0usize;

    for col in 0..vars {
        loop {
            let mut best: Option<usize> = None;
            for r in rank..nrows {
                if a[r][col] != 0 && best.is_none_or(|b| a[r][col].abs() < a[b][col].abs()) {
                    best = Some(r);
                }
            }
            let Some(p) = best else { break };
            let mut remainder_left = false;
            let pivot_coeffs = a[p].clone();
            let pivot_tracker = tracker[p].clone();
            let pivot_rhs = rhs[p];
            for r in rank..nrows {
                if r == p || a[r][col] == 0 {
                    continue;
                }
                let k = a[r][col] / pivot_coeffs[col];
                if k != 0 {
                    for (x, &px) in a[r].iter_mut().zip(&pivot_coeffs) {
                        *x -= k * px;
                    }
                    rhs[r] -= k * pivot_rhs;
                    for (x, &px) in tracker[r].iter_mut().zip(&pivot_tracker) {
                        *x -= k * px;
                    }
                }
                if a[r][col] != 0 {
                    remainder_left = true;
                }
            }
            if remainder_left {
                continue;
            }
            a.swap(p, rank);
            rhs.swap(p, rank);
            tracker.swap(p, rank);
            if a[rank][col] < 0 {
                for x in &mut a[rank] {
                    *x = -*x;
                }
                rhs[rank] = -rhs[rank];
                for x in &mut tracker[rank] {
                    *x = -*x;
                }
            }
            pivots.push((rank, col));
            rank += 1;
            break;
        }
    }

    Elimination {
        a,
        rhs,
        tracker,
        pivots,
        rank,
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn gcd128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// An exact phase in units of pi. Back substitution stays in rationals so
/// the solution satisfies the congruences exactly, not just within float
/// error of the eliminated coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct HalfTurns {
    num: i128,
    den: i128,
}

impl HalfTurns {
    const ZERO: HalfTurns = HalfTurns { num: 0, den: 1 };

    fn new(num: i128, den: i128) -> Self {
        let (mut num, mut den) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = gcd128(num, den);
        if g > 1 {
            num /= g;
            den /= g;
        }
        HalfTurns { num, den }
    }

    fn integer(v: i128) -> Self {
        HalfTurns { num: v, den: 1 }
    }

    fn sub(self, other: HalfTurns) -> Self {
        HalfTurns::new(
            self.num * other.den - other.num * self.den,
            self.den * other.den,
        )
    }

    fn scale(self, k: i128) -> Self {
        HalfTurns::new(self.num * k, self.den)
    }

    fn div(self, k: i128) -> Self {
        HalfTurns::new(self.num, self.den * k)
    }

    /// Whether the value is an even integer, i.e. zero modulo one turn.
    fn is_even_integer(self) -> bool {
        self.den == 1 && self.num.rem_euclid(2) == 0
    }

    fn to_phase(self) -> f64 {
        self.num as f64 / self.den as f64 * PI
    }
}

fn canonical_combination(mut v: Vec<i64>) -> Vec<i64> {
    let g = v.iter().copied().fold(0, gcd);
    if g > 1 {
        for c in v.iter_mut() {
            *c /= g;
        }
    }
    if let Some(first) = v.iter().find(|&&c| c != 0) {
        if *first < 0 {
            for c in v.iter_mut() {
                *c = -*c;
            }
        }
    }
    v
}

/// Picks the canonical contradiction witness: among all primitive integer
/// null combinations with odd right side, the one with the fewest rows
/// involved, ties broken toward the lexicographically greatest multiplier
/// vector. Candidates are enumerated as small combinations of the null
/// basis produced by the elimination.
fn canonical_witness(elim: &Elimination, nrows: usize) -> Option<Vec<i64>> {
    let zero_rows: Vec<usize> = (elim.rank..nrows).collect();
    let d = zero_rows.len();
    if d == 0 {
        return None;
    }
    let mut candidates: std::collections::BTreeSet<Vec<i64>> = std::collections::BTreeSet::new();
    let mut consider = |lambda: &[i64]| {
        let mut combo = vec![0i64; nrows];
        let mut parity = 0i64;
        for (i, &z) in zero_rows.iter().enumerate() {
            if lambda[i] == 0 {
                continue;
            }
            for (dst, &t) in combo.iter_mut().zip(&elim.tracker[z]) {
                *dst += lambda[i] * t;
            }
            parity += lambda[i] * elim.rhs[z];
        }
        if combo.iter().all(|&c| c == 0) || parity.rem_euclid(2) == 0 {
            return;
        }
        candidates.insert(canonical_combination(combo));
    };
    if d <= 4 {
        let range = 3i64;
        let mut lambda = vec![-range; d];
        loop {
            consider(&lambda);
            let mut i = 0;
            loop {
                if i == d {
                    break;
                }
                lambda[i] += 1;
                if lambda[i] > range {
                    lambda[i] = -range;
                    i += 1;
                } else {
                    break;
                }
            }
            if i == d {
                break;
            }
        }
    } else {
        // Large null spaces: basis vectors and pairwise sums/differences.
        for i in 0..d {
            let mut l = vec![0i64; d];
            l[i] = 1;
            consider(&l);
            for j in (i + 1)..d {
                for (si, sj) in [(1, 1), (1, -1)] {
                    let mut l = vec![0i64; d];
                    l[i] = si;
                    l[j] = sj;
                    consider(&l);
                }
            }
        }
    }
    candidates.into_iter().min_by(|x, y| {
        let sx = x.iter().filter(|&&c| c != 0).count();
        let sy = y.iter().filter(|&&c| c != 0).count();
        sx.cmp(&sy).then_with(|| y.cmp(x))
    })
}

/// Decides the congruence system exactly. When solvable, returns one phase
/// assignment (free phases set to zero); otherwise a certified integer
/// witness of the contradiction.
pub fn decide_solvability(system: &PhaseConstraintSystem) -> Result<Solvability> {
    let vars = system.variables.len();
    let nrows = system.rows.len();
    let elim = eliminate(&system.rows, vars);

    let contradictory = (elim.rank..nrows).any(|r| elim.rhs[r].rem_euclid(2) != 0);
    if contradictory {
        let combination = canonical_witness(&elim, nrows).ok_or_else(|| {
            Error::Precondition("internal: contradictory system without witness".into())
        })?;
        // Certify before returning: the combination must cancel every
        // variable and leave an odd right side.
        let mut parity = 0i64;
        for v in 0..vars {
            let mut acc = 0i64;
            for (r, row) in system.rows.iter().enumerate() {
                acc += combination[r] * row.coeffs[v];
            }
            if acc != 0 {
                return Err(Error::Precondition(
                    "internal: witness fails to cancel the left side".into(),
                ));
            }
        }
        for (r, row) in system.rows.iter().enumerate() {
            parity += combination[r] * row.rhs_half_turns;
        }
        if parity.rem_euclid(2) != 1 {
            return Err(Error::Precondition(
                "internal: witness right side is even".into(),
            ));
        }
        return Ok(Solvability::Contradiction {
            witness: SolvabilityWitness {
                combination,
                rhs_parity: parity,
            },
        });
    }

    // Back-substitute the echelon rows in exact rationals; free variables
    // stay zero, so each pivot row is satisfied exactly, hence so is every
    // integer combination of them, i.e. every original congruence.
    let mut xs = vec![HalfTurns::ZERO; vars];
    for &(row, col) in elim.pivots.iter().rev() {
        let mut acc = HalfTurns::integer(elim.rhs[row] as i128);
        for (&x, &coeff) in xs[col + 1..].iter().zip(&elim.a[row][col + 1..]) {
            acc = acc.sub(x.scale(coeff as i128));
        }
        xs[col] = acc.div(elim.a[row][col] as i128);
    }

    // Defensive re-check against the original rows, still exact.
    for row in &system.rows {
        let mut residue = HalfTurns::integer(-(row.rhs_half_turns as i128));
        for (c, &coeff) in row.coeffs.iter().enumerate() {
            residue = residue.sub(xs[c].scale(-(coeff as i128)));
        }
        if !residue.is_even_integer() {
            return Err(Error::Precondition(format!(
                "internal: phase solution leaves {}/{} half turns on a congruence",
                residue.num, residue.den
            )));
        }
    }

    let phases: BTreeMap<u32, f64> = system
        .variables
        .iter()
        .zip(xs.iter())
        .map(|(&pattern, &x)| (pattern, x.to_phase()))
        .collect();
    Ok(Solvability::Solvable {
        phases: PhaseAssignment::new(4, phases),
    })
}

/// Verdict of the faithfulness analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Solvable,
    Contradiction,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Solvable => "solvable",
            Verdict::Contradiction => "contradiction",
        })
    }
}

/// One activated congruence as it appears in a report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ActivatedRow {
    pub sources: Vec<String>,
    pub coeffs: Vec<i64>,
    pub rhs_half_turns: i64,
}

/// Result of [`faithfulness_check`], serialized deterministically.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    pub verdict: Verdict,
    /// Phase variables as occupation pattern strings, mode 1 leftmost.
    pub variables: Vec<String>,
    pub activated_rows: Vec<ActivatedRow>,
    /// Row multipliers certifying a contradiction, aligned with
    /// `activated_rows`; absent when solvable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<i64>>,
    /// A working phase assignment keyed by pattern; absent when
    /// contradictory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phases: Option<BTreeMap<String, f64>>,
    /// Largest deviation between qubit-side and fermionic pair off-diagonal
    /// magnitudes under the returned phases; absent when contradictory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_offdiag_error: Option<f64>,
}

impl FaithfulnessReport {
    /// True when phases exist and the numeric check stayed within
    /// [`OFFDIAG_ERROR_TOLERANCE`].
    pub fn is_faithful(&self) -> bool {
        self.verdict == Verdict::Solvable
            && self
                .max_offdiag_error
                .is_some_and(|e| e <= OFFDIAG_ERROR_TOLERANCE)
    }
}

/// Largest absolute difference between qubit-side and fermionic-side pair
/// off-diagonal magnitudes over all six pairs and both positions.
pub fn max_pair_magnitude_deviation(psi: &FermionicState, phases: &PhaseAssignment) -> Result<f64> {
    let mapped = jw_map(psi, phases)?;
    let mut worst = 0.0f64;
    for form in &OFFDIAG_TABLE {
        let (i, j) = form.pair;
        let fermi = pair_offdiagonals(psi, i, j)?;
        let qubit = qubit_pair_offdiagonals(&mapped, i, j)?;
        worst = worst.max((fermi.even.norm() - qubit.even.norm()).abs());
        worst = worst.max((fermi.odd.norm() - qubit.odd.norm()).abs());
    }
    Ok(worst)
}

/// Full faithfulness analysis of a normalized even-parity four-mode state:
/// extract the activated congruences, decide them exactly, and when a
/// phase assignment exists verify it numerically against every pair
/// marginal.
pub fn faithfulness_check(psi: &FermionicState) -> Result<FaithfulnessReport> {
    if psi.n_modes() != 4 {
        return Err(Error::Precondition(format!(
            "faithfulness analysis needs a four-mode state, got {}",
            psi.n_modes()
        )));
    }
    if parity_check(psi) != ParityClass::Even {
        return Err(Error::Precondition(
            "faithfulness analysis needs an even-parity state".into(),
        ));
    }
    let norm_sqr = psi.norm_sqr();
    if (norm_sqr - 1.0).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "state must be normalized (norm^2 = {norm_sqr:.6})"
        )));
    }

    let system = active_phase_constraints(psi);
    let variables = system
        .variables
        .iter()
        .map(|&m| FockBasisState::from_mask(m).pattern(4))
        .collect();
    let activated_rows = system
        .rows
        .iter()
        .map(|r| ActivatedRow {
            sources: r.sources.clone(),
            coeffs: r.coeffs.clone(),
            rhs_half_turns: r.rhs_half_turns,
        })
        .collect();

    match decide_solvability(&system)? {
        Solvability::Solvable { phases } => {
            let err = max_pair_magnitude_deviation(psi, &phases)?;
            Ok(FaithfulnessReport {
                verdict: Verdict::Solvable,
                variables,
                activated_rows,
                witness: None,
                phases: Some(phases.labeled()),
                max_offdiag_error: Some(err),
            })
        }
        Solvability::Contradiction { witness } => Ok(FaithfulnessReport {
            verdict: Verdict::Contradiction,
            variables,
            activated_rows,
            witness: Some(witness.combination),
            phases: None,
            max_offdiag_error: None,
        }),
    }
}
