//! Deterministic, order-independent randomness derivation.
//!
//! Cost corruption and heuristic inflation must return the same value for
//! the same query no matter how many other queries happened in between, so
//! every random decision here is a pure hash of its inputs rather than a
//! draw from a shared stream. Stable across platforms and runs.

/// splitmix64 finalizer. Bijective on u64, good avalanche.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Hash two words into one.
pub fn mix2(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b)
}

/// Hash three words into one.
pub fn mix3(a: u64, b: u64, c: u64) -> u64 {
    splitmix64(mix2(a, b) ^ c)
}

/// Map a hash to a float in [0, 1) using the top 53 bits.
pub fn unit_open(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Map a hash to a float in (0, 1] using the top 53 bits.
pub fn unit_closed(h: u64) -> f64 {
    ((h >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
}
