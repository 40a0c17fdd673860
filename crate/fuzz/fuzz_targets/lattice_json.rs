#![no_main]

use ffdga::io::{lattice_from_json, lattice_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(lat) = lattice_from_json(text) {
        // Anything we accept must survive a write/read cycle unchanged.
        let again = lattice_from_json(&lattice_to_json(&lat)).expect("re-parse");
        assert_eq!(lat, again);
    }
});
