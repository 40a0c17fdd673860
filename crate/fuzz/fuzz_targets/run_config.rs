#![no_main]

use ffdga_cli::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut cfg = RunConfig::default();
    if cfg.apply_str(text).is_ok() && cfg.validate().is_ok() {
        let _ = cfg.encoding();
        let _ = cfg.bench();
    }
});
