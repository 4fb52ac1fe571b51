#![no_main]

use fermi_core::formats::parse_alpha_list;
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
    let Ok(alphas) = parse_alpha_list(s) else {
        return;
    };
    assert!(alphas.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    let joined = alphas
        .iter()
        .map(|z| canonical_token(z.re, z.im))
        .collect::<Vec<_>>()
        .join(",");
    let again = parse_alpha_list(&joined).expect("canonical form must re-parse");
    assert_eq!(again, alphas);
});
