#![no_main]

use ffdga::genome::{decode_genome, EncodingSpec, Genome};
use libfuzzer_sys::fuzz_target;

// First byte picks bits/param, second the radius, the rest are genome bits.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let bits = (data[0] % 12) as u32 + 1;
    let radius = data[1] as f64 / 16.0;
    let Ok(enc) = EncodingSpec::new(bits, radius) else { return };
    let raw: Vec<bool> = data[2..].iter().flat_map(|b| (0..8).map(move |i| b >> i & 1 == 1)).collect();
    let n_nodes = raw.len() / (2 * bits as usize);
    let Ok(g) = Genome::new(raw[..n_nodes * 2 * bits as usize].to_vec(), bits) else { return };
    if let Ok(vs) = decode_genome(&g, &enc, n_nodes) {
        for [dx, dy] in vs {
            assert!(dx.hypot(dy) <= radius + 1e-9);
        }
    }
});
