#![no_main]

use fermi_core::formats::parse_complex_coeff;
use libfuzzer_sys::fuzz_target;

fn canonical_token(re: f64, im: f64) -> String {
    if im.is_sign_negative() {
        format!("{:?}-{:?}i", re, -im)
    } else {
        format!("{:?}+{:?}i", re, im)
    }
}

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(z) = parse_complex_coeff(s) else {
        return;
    };
    assert!(z.re.is_finite() && z.im.is_finite());
    let again =
        parse_complex_coeff(&canonical_token(z.re, z.im)).expect("canonical form must re-parse");
    assert_eq!(again, z);
});
