#![no_main]

use fermi_core::formats::{parse_state_json, state_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(psi) = parse_state_json(data) else {
        return;
    };
    // Anything that loads is unit norm (verified claim or rescaled) and
    // survives a write/read trip, losing at most pruned sub-threshold
    // amplitudes.
    assert!((psi.norm_sqr() - 1.0).abs() <= 1e-9);
    let again =
        parse_state_json(state_to_json(&psi).as_bytes()).expect("serialized state must re-parse");
    assert_eq!(again.n_modes(), psi.n_modes());
    for (basis, amp) in psi.terms() {
        assert!((again.amplitude(basis) - amp).norm() <= 1e-13);
    }
});
