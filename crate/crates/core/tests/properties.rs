//! Randomized cross-checks: every fast path in the crate is replayed
//! against a slower, independently built reference on generated inputs.

mod common;

use common::{annihilation_matrix, anticommutator, creation_matrix, max_abs, state_vector};
use fermi_core::entanglement::{marginal_spectra, spectral_mismatch, spectrum, spectrum_distance};
use fermi_core::fock::{FermionicState, FockBasisState};
use fermi_core::formats::{
    parse_alpha_list, parse_complex_coeff, parse_cut_spec, parse_state_json, state_to_json,
};
use fermi_core::qubit_map::{
    decide_solvability, faithfulness_check, PhaseConstraint, PhaseConstraintSystem, Solvability,
    Verdict, ALPHA_PATTERNS, OFFDIAG_ERROR_TOLERANCE,
};
use fermi_core::reductions::{
    embed_operator, partial_trace, pure_reduction, reduced_state_oracle, DensityOperator,
    ModePartition,
};
use fermi_core::verifier::{canonical_bipartitions, sample_pure, Sector};
use fermi_core::Complex64;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn max_matrix_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn ladder_matrices_satisfy_canonical_anticommutation() {
    for n in 1..=5u32 {
        let dim = 1usize << n;
        let id = DMatrix::<Complex64>::identity(dim, dim);
        for i in 1..=n {
            let bi = annihilation_matrix(n, i);
            for j in 1..=n {
                let bj = annihilation_matrix(n, j);
                let cj = creation_matrix(n, j);
                assert!(max_abs(&anticommutator(&bi, &bj)) < 1e-14);
                let mut mixed = anticommutator(&bi, &cj);
                if i == j {
                    mixed -= &id;
                }
                assert!(max_abs(&mixed) < 1e-14, "pair ({i},{j}) on {n} modes");
            }
        }
    }
}

fn amplitude() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn state(n: u32) -> impl Strategy<Value = FermionicState> {
    prop::collection::vec(amplitude(), 1usize << n).prop_filter_map("norm too small", move |amps| {
        let norm_sqr: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if norm_sqr < 1e-3 {
            return None;
        }
        let terms: Vec<(FockBasisState, Complex64)> = amps
            .iter()
            .enumerate()
            .map(|(mask, &amp)| (FockBasisState::from_mask(mask as u32), amp))
            .collect();
        Some(
            FermionicState::from_terms(n, &terms)
                .unwrap()
                .normalized()
                .unwrap(),
        )
    })
}

fn any_state(lo: u32, hi: u32) -> impl Strategy<Value = FermionicState> {
    (lo..=hi).prop_flat_map(state)
}

fn mixed_density(n: u32) -> impl Strategy<Value = DensityOperator> {
    prop::collection::vec((state(n), 0.05..1.0f64), 1..=3).prop_map(move |parts| {
        let total: f64 = parts.iter().map(|(_, w)| w).sum();
        let dim = 1usize << n;
        let mut mat = DMatrix::from_element(dim, dim, ZERO);
        for (psi, w) in &parts {
            mat += psi.outer_product(psi).unwrap() * Complex64::new(w / total, 0.0);
        }
        DensityOperator::from_parts((1..=n).collect(), mat).unwrap()
    })
}

fn any_mixed(lo: u32, hi: u32) -> impl Strategy<Value = DensityOperator> {
    (lo..=hi).prop_flat_map(mixed_density)
}

/// Even four-mode states with a random support pattern, so both solver
/// verdicts actually occur.
fn even_four_state() -> impl Strategy<Value = FermionicState> {
    (prop::collection::vec(amplitude(), 8), 1u32..=255).prop_filter_map(
        "norm too small",
        |(amps, keep)| {
            let norm_sqr: f64 = amps
                .iter()
                .enumerate()
                .filter(|(t, _)| keep & (1 << *t) != 0)
                .map(|(_, z)| z.norm_sqr())
                .sum();
            if norm_sqr < 1e-3 {
                return None;
            }
            let terms: Vec<(FockBasisState, Complex64)> = ALPHA_PATTERNS
                .iter()
                .enumerate()
                .map(|(t, &mask)| {
                    let amp = if keep & (1 << t) != 0 { amps[t] } else { ZERO };
                    (FockBasisState::from_mask(mask), amp)
                })
                .collect();
            Some(
                FermionicState::from_terms(4, &terms)
                    .unwrap()
                    .normalized()
                    .unwrap(),
            )
        },
    )
}

fn coefficient() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, (-1.0..1.0f64).prop_map(|x| x * 1e-9)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn ladder_application_matches_matrix_oracle(psi in any_state(1, 5)) {
        let n = psi.n_modes();
        let v = state_vector(&psi);
        for k in 1..=n {
            let lib = state_vector(&psi.apply_annihilation(k).unwrap());
            let oracle = annihilation_matrix(n, k) * &v;
            prop_assert!((lib - oracle).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);

            let lib = state_vector(&psi.apply_creation(k).unwrap());
            let oracle = creation_matrix(n, k) * &v;
            prop_assert!((lib - oracle).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
        }
    }

    #[test]
    fn pure_reduction_matches_signed_partial_trace(psi in any_state(2, 5)) {
        let rho = DensityOperator::from_pure(&psi).unwrap();
        for cut in canonical_bipartitions(psi.n_modes()) {
            let fast = pure_reduction(&psi, cut.kept()).unwrap();
            let slow = partial_trace(&rho, cut.traced()).unwrap();
            prop_assert!(max_matrix_diff(fast.matrix(), slow.matrix()) < 1e-12);
        }
    }

    #[test]
    fn gram_spectra_match_reduction_spectra(psi in any_state(2, 6)) {
        for cut in canonical_bipartitions(psi.n_modes()) {
            let (a, b) = marginal_spectra(&psi, &cut).unwrap();
            let sa = spectrum(&pure_reduction(&psi, cut.kept()).unwrap()).unwrap();
            let sb = spectrum(&pure_reduction(&psi, cut.traced()).unwrap()).unwrap();
            prop_assert!(spectrum_distance(&a, &sa) < 1e-9);
            prop_assert!(spectrum_distance(&b, &sb) < 1e-9);
        }
    }

    #[test]
    fn definite_parity_marginals_share_a_spectrum(
        seed in any::<u64>(),
        n in 2u32..=6,
        odd in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sector = if odd { Sector::Odd } else { Sector::Even };
        let psi = sample_pure(n, sector, &mut rng).unwrap();
        for cut in canonical_bipartitions(n) {
            prop_assert!(spectral_mismatch(&psi, &cut).unwrap() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oracle_reduction_matches_signed_partial_trace(rho in any_mixed(2, 4)) {
        let n = rho.modes().len() as u32;
        for cut in canonical_bipartitions(n) {
            for (kept, traced) in [
                (cut.kept(), cut.traced()),
                (cut.traced(), cut.kept()),
            ] {
                let via_trace = partial_trace(&rho, traced).unwrap();
                let via_oracle = reduced_state_oracle(&rho, kept).unwrap();
                prop_assert!(
                    max_matrix_diff(via_trace.matrix(), via_oracle.matrix()) < 1e-10
                );
            }
        }
    }

    #[test]
    fn partial_traces_compose(rho in any_mixed(3, 5)) {
        let n = rho.modes().len() as u32;
        for cut in canonical_bipartitions(n) {
            let Some((first, rest)) = cut.traced().split_first() else {
                continue;
            };
            if rest.is_empty() {
                continue;
            }
            let once = partial_trace(&rho, cut.traced()).unwrap();
            let stepped =
                partial_trace(&partial_trace(&rho, &[*first]).unwrap(), rest).unwrap();
            prop_assert!(max_matrix_diff(once.matrix(), stepped.matrix()) < 1e-12);
        }
    }

    #[test]
    fn embedded_operators_preserve_expectations(
        (rho, entries) in (3u32..=4).prop_flat_map(|n| {
            (mixed_density(n), prop::collection::vec(amplitude(), 16))
        }),
    ) {
        let n = rho.modes().len() as u32;
        let all: Vec<u32> = (1..=n).collect();
        let x = DMatrix::from_iterator(4, 4, entries.iter().copied());
        for i in 1..=n {
            for j in (i + 1)..=n {
                let traced: Vec<u32> =
                    all.iter().copied().filter(|&m| m != i && m != j).collect();
                let reduced = partial_trace(&rho, &traced).unwrap();
                let wanted = (reduced.matrix() * &x).trace();
                let embedded = embed_operator(&x, &[i, j], &all).unwrap();
                let got = (rho.matrix() * &embedded).trace();
                prop_assert!((wanted - got).norm() < 1e-10);
            }
        }
    }
}

proptest! {
    #[test]
    fn congruence_decisions_carry_valid_certificates(
        rows in prop::collection::vec(
            (prop::collection::vec(-2i64..=2, 8), 0i64..=1),
            1..=8,
        ),
    ) {
        let system = PhaseConstraintSystem {
            variables: ALPHA_PATTERNS.to_vec(),
            rows: rows
                .into_iter()
                .map(|(coeffs, rhs)| PhaseConstraint {
                    coeffs,
                    rhs_half_turns: rhs,
                    sources: Vec::new(),
                })
                .collect(),
        };
        match decide_solvability(&system).unwrap() {
            Solvability::Solvable { phases } => {
                for row in &system.rows {
                    let mut lhs = 0.0;
                    for (&var, &c) in system.variables.iter().zip(&row.coeffs) {
                        lhs += c as f64 * phases.get(var).unwrap();
                    }
                    let m = (lhs - row.rhs_half_turns as f64 * PI).rem_euclid(2.0 * PI);
                    let dist = m.min(2.0 * PI - m);
                    prop_assert!(dist < 1e-9, "congruence missed by {:.3e}", dist);
                }
            }
            Solvability::Contradiction { witness } => {
                prop_assert_eq!(witness.combination.len(), system.rows.len());
                for v in 0..system.variables.len() {
                    let cancel: i64 = system
                        .rows
                        .iter()
                        .zip(&witness.combination)
                        .map(|(r, &u)| u * r.coeffs[v])
                        .sum();
                    prop_assert_eq!(cancel, 0);
                }
                let parity: i64 = system
                    .rows
                    .iter()
                    .zip(&witness.combination)
                    .map(|(r, &u)| u * r.rhs_half_turns)
                    .sum();
                prop_assert_eq!(parity, witness.rhs_parity);
                prop_assert_eq!(parity.rem_euclid(2), 1);
            }
        }
    }

    #[test]
    fn faithfulness_reports_are_self_certifying(psi in even_four_state()) {
        let report = faithfulness_check(&psi).unwrap();
        match report.verdict {
            Verdict::Solvable => {
                let err = report.max_offdiag_error.unwrap();
                prop_assert!(err <= OFFDIAG_ERROR_TOLERANCE, "error {:.3e}", err);
                prop_assert!(report.is_faithful());
                prop_assert!(report.witness.is_none());
            }
            Verdict::Contradiction => {
                let witness = report.witness.unwrap();
                prop_assert_eq!(witness.len(), report.activated_rows.len());
                for v in 0..ALPHA_PATTERNS.len() {
                    let cancel: i64 = report
                        .activated_rows
                        .iter()
                        .zip(&witness)
                        .map(|(r, &u)| u * r.coeffs[v])
                        .sum();
                    prop_assert_eq!(cancel, 0);
                }
                let parity: i64 = report
                    .activated_rows
                    .iter()
                    .zip(&witness)
                    .map(|(r, &u)| u * r.rhs_half_turns)
                    .sum();
                prop_assert_eq!(parity.rem_euclid(2), 1);
                prop_assert!(report.phases.is_none());
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_stream_separated(
        seed in any::<u64>(),
        stream in 0u64..1024,
        n in 2u32..=6,
    ) {
        let sample = |s: u64, t: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            rng.set_stream(t);
            sample_pure(n, Sector::Unrestricted, &mut rng).unwrap()
        };
        let a = sample(seed, stream);
        let b = sample(seed, stream);
        let mut delta_next = 0.0f64;
        let c = sample(seed, stream + 1);
        for mask in 0..(1u32 << n) {
            let basis = FockBasisState::from_mask(mask);
            prop_assert_eq!(a.amplitude(basis), b.amplitude(basis));
            delta_next += (a.amplitude(basis) - c.amplitude(basis)).norm();
        }
        prop_assert!(delta_next > 1e-9);
    }

    #[test]
    fn state_files_round_trip_exactly(psi in any_state(1, 6)) {
        let json = state_to_json(&psi);
        let back = parse_state_json(json.as_bytes()).unwrap();
        prop_assert_eq!(back.n_modes(), psi.n_modes());
        for mask in 0..(1u32 << psi.n_modes()) {
            let basis = FockBasisState::from_mask(mask);
            prop_assert_eq!(psi.amplitude(basis), back.amplitude(basis));
        }
    }

    #[test]
    fn complex_coefficients_round_trip(re in coefficient(), im in coefficient()) {
        let token = format!("{re:?}{im:+?}i");
        let parsed = parse_complex_coeff(&token).unwrap();
        prop_assert_eq!(parsed, Complex64::new(re, im));

        let real_only = format!("{re:?}");
        let parsed = parse_complex_coeff(&real_only).unwrap();
        prop_assert_eq!(parsed, Complex64::new(re, 0.0));
    }

    #[test]
    fn alpha_lists_round_trip(
        entries in prop::collection::vec((coefficient(), coefficient()), 8),
    ) {
        let joined = entries
            .iter()
            .map(|(re, im)| format!("{re:?}{im:+?}i"))
            .collect::<Vec<_>>()
            .join(",");
        let parsed = parse_alpha_list(&joined).unwrap();
        for (slot, &(re, im)) in parsed.iter().zip(&entries) {
            prop_assert_eq!(*slot, Complex64::new(re, im));
        }
    }

    #[test]
    fn cut_labels_round_trip(n in 2u32..=8, raw_mask in 1u32..u32::MAX) {
        let full = (1u32 << n) - 1;
        let mask = raw_mask & full;
        prop_assume!(mask != 0 && mask != full);
        let kept = FockBasisState::from_mask(mask).occupied_modes();
        let cut = ModePartition::new(n, &kept).unwrap();
        let reparsed = parse_cut_spec(&cut.label()).unwrap();
        prop_assert_eq!(reparsed.kept(), cut.kept());
        prop_assert_eq!(reparsed.traced(), cut.traced());
    }
}
