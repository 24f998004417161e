#![no_main]

use krausim::dump::CircuitDump;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(dump) = CircuitDump::from_json(text) {
        // Anything accepted must serialize and parse back.
        let again = dump.to_json().expect("serialize accepted dump");
        CircuitDump::from_json(&again).expect("reparse serialized dump");
    }
});
