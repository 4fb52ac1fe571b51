//! On-disk formats and flag-value parsers.
//!
//! States are stored as a list of occupation terms, densities as dense
//! real/imaginary matrices. Floats serialize as shortest round-trip
//! decimals, so write-then-read reproduces every value bit for bit. All
//! parsers here are total: arbitrary input bytes produce `Ok` or a parse
//! error, never a panic.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entanglement::Spectrum;
use crate::error::{Error, Result};
use crate::fock::{FermionicState, FockBasisState};
use crate::reductions::{DensityOperator, ModePartition};

/// Tolerance for the `"normalized": true` claim in a state file.
pub const NORMALIZATION_CLAIM_TOLERANCE: f64 = 1e-9;

/// One `amplitude * |occ|` term of a state file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateTerm {
    /// Occupied modes, 1-based, strictly increasing.
    pub occ: Vec<u32>,
    pub re: f64,
    pub im: f64,
}

/// Serialized fermionic pure state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateFile {
    pub modes: u32,
    pub terms: Vec<StateTerm>,
    /// When true the file claims unit norm and loading verifies it; when
    /// false or missing the state is normalized on load.
    #[serde(default)]
    pub normalized: bool,
}

impl StateFile {
    pub fn from_state(psi: &FermionicState) -> Self {
        StateFile {
            modes: psi.n_modes(),
            terms: psi
                .terms()
                .map(|(basis, amp)| StateTerm {
                    occ: basis.occupied_modes(),
                    re: amp.re,
                    im: amp.im,
                })
                .collect(),
            normalized: (psi.norm_sqr() - 1.0).abs() <= NORMALIZATION_CLAIM_TOLERANCE,
        }
    }

    pub fn into_state(self) -> Result<FermionicState> {
        for t in &self.terms {
            if !t.re.is_finite() || !t.im.is_finite() {
                return Err(Error::Parse("non-finite amplitude in state file".into()));
            }
        }
        let terms: Vec<(FockBasisState, Complex64)> = self
            .terms
            .iter()
            .map(|t| FockBasisState::from_modes(&t.occ).map(|b| (b, Complex64::new(t.re, t.im))))
            .collect::<Result<_>>()?;
        let psi = FermionicState::from_terms(self.modes, &terms)?;
        if self.normalized {
            let norm_sqr = psi.norm_sqr();
            if (norm_sqr - 1.0).abs() > NORMALIZATION_CLAIM_TOLERANCE {
                return Err(Error::Parse(format!(
                    "file claims unit norm but norm^2 = {norm_sqr:.12}"
                )));
            }
            Ok(psi)
        } else {
            psi.normalized()
        }
    }
}

/// Parses a state file from raw JSON bytes.
pub fn parse_state_json(bytes: &[u8]) -> Result<FermionicState> {
    let file: StateFile = serde_json::from_slice(bytes)?;
    file.into_state()
}

pub fn state_to_json(psi: &FermionicState) -> String {
    serde_json::to_string_pretty(&StateFile::from_state(psi)).expect("state files serialize")
}

pub fn read_state_file(path: &Path) -> Result<FermionicState> {
    parse_state_json(&std::fs::read(path)?)
}

pub fn write_state_file(path: &Path, psi: &FermionicState) -> Result<()> {
    std::fs::write(path, state_to_json(psi) + "\n")?;
    Ok(())
}

/// Serialized density operator: dense matrix split into real and
/// imaginary parts, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityFile {
    /// Mode labels the operator acts on, 1-based, strictly increasing.
    pub modes: Vec<u32>,
    pub matrix_re: Vec<Vec<f64>>,
    pub matrix_im: Vec<Vec<f64>>,
}

impl DensityFile {
    pub fn from_density(rho: &DensityOperator) -> Self {
        let mat = rho.matrix();
        let dim = rho.dim();
        let rows = |part: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..dim)
                .map(|r| (0..dim).map(|c| part(&mat[(r, c)])).collect())
                .collect()
        };
        DensityFile {
            modes: rho.modes().to_vec(),
            matrix_re: rows(|z| z.re),
            matrix_im: rows(|z| z.im),
        }
    }

    pub fn into_density(self) -> Result<DensityOperator> {
        let m = self.modes.len();
        if m > 16 {
            return Err(Error::Parse(format!(
                "density file spans {m} modes; dense storage is capped at 16"
            )));
        }
        let dim = 1usize << m;
        for part in [&self.matrix_re, &self.matrix_im] {
            if part.len() != dim || part.iter().any(|row| row.len() != dim) {
                return Err(Error::Parse(format!(
                    "density matrix must be {dim}x{dim} for {m} modes"
                )));
            }
            if part.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Parse("non-finite entry in density file".into()));
            }
        }
        let mat = DMatrix::from_fn(dim, dim, |r, c| {
            Complex64::new(self.matrix_re[r][c], self.matrix_im[r][c])
        });
        let rho = DensityOperator::from_parts(self.modes, mat)?;
        rho.validate()?;
        Ok(rho)
    }
}

/// Parses a density file from raw JSON bytes, including positivity and
/// trace validation.
pub fn parse_density_json(bytes: &[u8]) -> Result<DensityOperator> {
    let file: DensityFile = serde_json::from_slice(bytes)?;
    file.into_density()
}

pub fn density_to_json(rho: &DensityOperator) -> String {
    serde_json::to_string_pretty(&DensityFile::from_density(rho)).expect("density files serialize")
}

pub fn read_density_file(path: &Path) -> Result<DensityOperator> {
    parse_density_json(&std::fs::read(path)?)
}

pub fn write_density_file(path: &Path, rho: &DensityOperator) -> Result<()> {
    std::fs::write(path, density_to_json(rho) + "\n")?;
    Ok(())
}

/// Parses a comma-separated 1-based mode list; empty input is an empty
/// list. Duplicates and ordering are validated downstream where the
/// context (partition, trace list) is known.
pub fn parse_mode_list(s: &str) -> Result<Vec<u32>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            tok.parse::<u32>()
                .map_err(|_| Error::Parse(format!("invalid mode index {tok:?}")))
                .and_then(|m| {
                    if m == 0 {
                        Err(Error::Parse("mode indices are 1-based".into()))
                    } else {
                        Ok(m)
                    }
                })
        })
        .collect()
}

/// Parses a cut such as `1,2|3,4` into a partition.
pub fn parse_cut_spec(s: &str) -> Result<ModePartition> {
    ModePartition::from_label(s)
}

fn parse_real_atom(tok: &str) -> Result<f64> {
    let tok = tok.trim();
    let bad = || Error::Parse(format!("invalid coefficient {tok:?}"));
    if let Some(rest) = tok.strip_prefix('\u{221a}') {
        let v: f64 = rest.trim().parse().map_err(|_| bad())?;
        if v < 0.0 || !v.is_finite() {
            return Err(bad());
        }
        return Ok(v.sqrt());
    }
    if let Some(rest) = tok.strip_prefix("sqrt(") {
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        let v: f64 = inner.trim().parse().map_err(|_| bad())?;
        if v < 0.0 || !v.is_finite() {
            return Err(bad());
        }
        return Ok(v.sqrt());
    }
    let v: f64 = tok.parse().map_err(|_| bad())?;
    if !v.is_finite() {
        return Err(bad());
    }
    Ok(v)
}

fn parse_real_expr(tok: &str) -> Result<f64> {
    let tok = tok.trim();
    let (sign, rest) = match tok.strip_prefix('-') {
        Some(r) => (-1.0, r),
        None => (1.0, tok.strip_prefix('+').unwrap_or(tok)),
    };
    let rest = rest.trim();
    if rest.is_empty() {
        return Err(Error::Parse(format!("invalid coefficient {tok:?}")));
    }
    match rest.split_once('/') {
        Some((num, den)) => {
            let d = parse_real_atom(den)?;
            if d == 0.0 {
                return Err(Error::Parse(format!("division by zero in {tok:?}")));
            }
            let v = sign * parse_real_atom(num)? / d;
            if !v.is_finite() {
                return Err(Error::Parse(format!("coefficient {tok:?} overflows")));
            }
            Ok(v)
        }
        None => Ok(sign * parse_real_atom(rest)?),
    }
    .map(|v| if v == 0.0 { 0.0 } else { v })
}

/// Splits `a+bi` at the sign separating real and imaginary parts, skipping
/// a leading sign and exponent signs.
fn split_complex(tok: &str) -> Option<(&str, &str)> {
    let bytes = tok.as_bytes();
    for i in (1..bytes.len()).rev() {
        let b = bytes[i];
        if (b == b'+' || b == b'-') && !matches!(bytes[i - 1], b'e' | b'E') {
            return Some((&tok[..i], &tok[i..]));
        }
    }
    None
}

/// Parses one coefficient: a real expression (decimals, `1/3`, `√2`,
/// `sqrt(2)`, `1/√2`), a pure imaginary (`0.5i`, `-i`), or a sum `a+bi`.
pub fn parse_complex_coeff(tok: &str) -> Result<Complex64> {
    let tok = tok.trim();
    if tok.is_empty() {
        return Err(Error::Parse("empty coefficient".into()));
    }
    let imag_part = |t: &str| -> Result<f64> {
        let t = t.trim();
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => parse_real_expr(t),
        }
    };
    if let Some(head) = tok.strip_suffix(['i', 'j']) {
        match split_complex(head) {
            Some((re, im)) => Ok(Complex64::new(parse_real_expr(re)?, imag_part(im)?)),
            None => Ok(Complex64::new(0.0, imag_part(head)?)),
        }
    } else {
        Ok(Complex64::new(parse_real_expr(tok)?, 0.0))
    }
}

/// Parses the eight even-sector amplitudes in positional order: vacuum,
/// {1,2}, {1,3}, {1,4}, {2,3}, {2,4}, {3,4}, {1,2,3,4}.
pub fn parse_alpha_list(s: &str) -> Result<[Complex64; 8]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 8 {
        return Err(Error::Parse(format!(
            "expected 8 comma-separated coefficients, got {}",
            parts.len()
        )));
    }
    let mut out = [Complex64::new(0.0, 0.0); 8];
    for (slot, tok) in out.iter_mut().zip(parts) {
        *slot = parse_complex_coeff(tok)?;
    }
    Ok(out)
}

/// One row of an analysis report: everything `analyze` knows about one
/// state and cut.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub state_id: String,
    pub cut: String,
    pub parity: String,
    pub spectrum_a: Vec<f64>,
    pub spectrum_b: Vec<f64>,
    pub mismatch: f64,
    /// Entropies are absent when a spectrum carries no weight.
    pub entropy_a: f64,
    pub entropy_b: f64,
    pub mutual_information: f64,
}

pub const ANALYSIS_CSV_HEADER: &str =
    "state_id,cut,parity,spectrum_a,spectrum_b,mismatch,entropy_a,entropy_b,mutual_information";

fn join_spectrum(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

impl AnalysisRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.state_id,
            self.cut.replace(',', ";"),
            self.parity,
            join_spectrum(&self.spectrum_a),
            join_spectrum(&self.spectrum_b),
            self.mismatch,
            self.entropy_a,
            self.entropy_b,
            self.mutual_information,
        )
    }
}

/// Truncated nonzero spectrum as stored in reports.
pub fn report_spectrum(spec: &Spectrum) -> Vec<f64> {
    spec.nonzero().to_vec()
}
