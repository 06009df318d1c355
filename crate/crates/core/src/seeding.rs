//! Counter-based seed splitting. A child seed depends only on the base seed
//! and the child's own key, so inserting new grid points or runs never
//! shifts the random streams of existing ones.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and an ordered key of 64-bit words.
pub fn derive_seed(base: u64, key: &[u64]) -> u64 {
    key.iter()
        .fold(splitmix64(base), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Seed for the `index`-th independent run (evaluation seeds, repetitions).
pub fn run_seed(base: u64, index: u64) -> u64 {
    derive_seed(base, &[0x5255_4e00, index])
}
