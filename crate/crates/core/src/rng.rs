//! Seed derivation.
//!
//! Every random choice in the crate flows from one 64-bit run seed. A
//! subsystem asks for a generator with a fixed string label (and an optional
//! counter such as a retry number); the derived seed is
//! `splitmix64(seed ^ fnv1a(label) ^ splitmix64(counter))`, so results do not
//! depend on the order in which subsystems draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn derive_seed(seed: u64, label: &str, counter: u64) -> u64 {
    splitmix64(seed ^ fnv1a(label) ^ splitmix64(counter))
}

pub fn derived_rng(seed: u64, label: &str, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label, counter))
}
