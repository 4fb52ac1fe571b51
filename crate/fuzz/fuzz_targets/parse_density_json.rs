#![no_main]

use fermi_core::formats::{density_to_json, parse_density_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(rho) = parse_density_json(data) else {
        return;
    };
    // Loading validates shape, Hermiticity, trace, and positivity; the
    // matrix itself is stored untouched, so the round trip is exact.
    let again = parse_density_json(density_to_json(&rho).as_bytes())
        .expect("serialized density must re-parse");
    assert_eq!(again.modes(), rho.modes());
    assert_eq!(again.matrix(), rho.matrix());
});
