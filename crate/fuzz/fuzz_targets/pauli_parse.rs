#![no_main]

use krausim::pauli::PauliString;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = text.parse::<PauliString>() {
        let back: PauliString = p.to_string().parse().expect("display output parses");
        assert_eq!(back, p);
    }
});
