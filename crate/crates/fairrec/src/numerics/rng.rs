use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named, independently seeded RNG stream.
///
/// Every source of randomness in the crate draws from a stream derived from
/// `(seed, label, index)`; there is no hidden global RNG. The mixing is a
/// fixed FNV-1a so streams are stable across platforms.
pub fn stream_rng(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut h: u64 = 0xcbf29ce484222325;
    let absorb = |bytes: &[u8], h: &mut u64| {
        for &b in bytes {
            *h ^= b as u64;
            *h = h.wrapping_mul(0x100000001b3);
        }
    };
    absorb(&seed.to_le_bytes(), &mut h);
    absorb(label.as_bytes(), &mut h);
    absorb(&index.to_le_bytes(), &mut h);
    for chunk in 0..4 {
        h ^= chunk;
        h = h.wrapping_mul(0x100000001b3);
        key[chunk as usize * 8..chunk as usize * 8 + 8].copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
