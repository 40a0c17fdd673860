#![no_main]

use ffdga::io::{read_landmarks, write_landmarks};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(points) = read_landmarks(data) {
        let mut buf = Vec::new();
        write_landmarks(&mut buf, &points).expect("write");
        assert_eq!(read_landmarks(buf.as_slice()).expect("re-read"), points);
    }
});
