#![no_main]

use fermi_core::formats::parse_cut_spec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cut) = parse_cut_spec(s) else { return };
    assert!(!cut.kept().is_empty() && !cut.traced().is_empty());
    let again = parse_cut_spec(&cut.label()).expect("canonical label must re-parse");
    assert_eq!(again.kept(), cut.kept());
    assert_eq!(again.traced(), cut.traced());
});
