//! Seeded random streams.
//!
//! Every random consumer gets its own ChaCha8 stream, keyed by the master
//! seed and selected by a (component, index) pair. Replicates therefore draw
//! the same numbers no matter how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Stream `index` of `component` under `seed`.
pub fn stream(seed: u64, component: &str, index: u64) -> StreamRng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    let mut sel = fnv1a(component.as_bytes()) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    rng.set_stream(splitmix64(&mut sel));
    rng
}

/// Derives a child seed, for handing a sub-computation its own master seed.
pub fn derive_seed(seed: u64, component: &str, index: u64) -> u64 {
    let mut state = seed ^ fnv1a(component.as_bytes()).rotate_left(17) ^ index;
    splitmix64(&mut state)
}
