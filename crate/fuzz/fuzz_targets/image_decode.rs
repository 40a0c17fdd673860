#![no_main]

use ffdga_cli::imageio::{decode_gray, encode_gray};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_gray(data) {
        // Saving quantizes to 8 bits once; after that the cycle is stable.
        let once = decode_gray(&encode_gray(&img, true).expect("encode")).expect("re-decode");
        let twice = decode_gray(&encode_gray(&once, false).expect("encode")).expect("re-decode");
        assert_eq!(once, twice);
    }
});
