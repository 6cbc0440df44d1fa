//! Counter-based seed expansion.
//!
//! Every random choice in the toolkit draws from `derive(root, stream, index)`
//! so that one user seed fixes all of them, and adding a consumer in one
//! stream never shifts the numbers another stream sees.

/// Independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Dropout = 1,
    Trial = 2,
    Truncation = 3,
    Bootstrap = 4,
    TieBreak = 5,
    Sampling = 6,
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive(root: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ splitmix64(stream as u64)) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}
