//! Entanglement analysis for systems of fermionic modes.
//!
//! The crate works in the occupation-number picture: a basis state over `n`
//! modes is a subset of occupied modes, written canonically with creation
//! operators in ascending mode order acting on the vacuum. Because creation
//! and annihilation operators anticommute, reducing a state to a subset of
//! modes is *not* the index bookkeeping it is for qubits; every matrix
//! element picks up the parity of the permutation that separates retained
//! from traced modes. Getting those signs right (and measuring what goes
//! wrong when one ignores them) is the point of this crate.
//!
//! Modules:
//!
//! * [`fock`] — basis states, sparse state vectors, ladder operators.
//! * [`reductions`] — density operators, the signed partial trace, an
//!   independent reduction oracle built from operator expectation values,
//!   and embedding of subsystem operators.
//! * [`entanglement`] — parity superselection checks, marginal spectra,
//!   entropies, mutual information, and the spectral mismatch between the
//!   two sides of a cut.
//! * [`qubit_map`] — the per-pattern-phase map onto qubit registers,
//!   qubit-side partial traces, pair-marginal off-diagonals, and the integer
//!   congruence system deciding whether any phase choice makes the qubit
//!   image magnitude-faithful.
//! * [`verifier`] — seeded randomized campaigns and the worked examples.
//! * [`formats`] — JSON state/density files and the small text parsers used
//!   by the command line.
//!
//! Mode indices are 1-based everywhere in the public API; internally mode
//! `k` is bit `k - 1` of an occupation mask.

pub mod entanglement;
pub mod error;
pub mod fock;
pub mod formats;
pub mod qubit_map;
pub mod reductions;
pub mod verifier;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Default cap on the number of modes (a 14-mode density matrix already
/// holds 16384^2 complex entries).
pub const DEFAULT_MAX_MODES: u32 = 14;

/// Hard ceiling: occupation masks are `u32` and dense matrices beyond this
/// are hopeless anyway.
const ABSOLUTE_MAX_MODES: u32 = 30;

/// Current mode cap. `FERMI_MAX_MODES` overrides the default of
/// [`DEFAULT_MAX_MODES`]; unparsable or out-of-range values are ignored.
pub fn max_modes() -> u32 {
    std::env::var("FERMI_MAX_MODES")
        .ok()
        .and_then(|v| v.trim().parse::<u32>().ok())
        .filter(|&v| (1..=ABSOLUTE_MAX_MODES).contains(&v))
        .unwrap_or(DEFAULT_MAX_MODES)
}

pub(crate) fn check_mode_count(n: u32) -> Result<()> {
    let cap = max_modes();
    if n > cap {
        return Err(Error::ModeCapExceeded { n, cap });
    }
    Ok(())
}
