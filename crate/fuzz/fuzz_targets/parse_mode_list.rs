#![no_main]

use fermi_core::formats::parse_mode_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(modes) = parse_mode_list(s) else {
        return;
    };
    assert!(modes.iter().all(|&m| m >= 1));
    let joined = modes
        .iter()
        .map(|m| m.to_string())
        .collect::<Vec<_>>()
        .join(",");
    assert_eq!(
        parse_mode_list(&joined).expect("canonical list must re-parse"),
        modes
    );
});
