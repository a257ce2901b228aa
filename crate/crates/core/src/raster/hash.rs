//! Reproducible per-pixel random numbers.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One splitmix64 step on `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform value in `[0, 1)` determined only by `(seed, object_id, pixel_index)`.
pub fn per_pixel_unit(seed: u64, object_id: u32, pixel_index: u64) -> f64 {
    let mixed = seed ^ u64::from(object_id).wrapping_mul(GOLDEN_GAMMA) ^ pixel_index;
    (splitmix64(mixed) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
