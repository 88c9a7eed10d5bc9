//! Dense numeric containers. All linear algebra in the crate flows through
//! these aliases so the backing implementation stays swappable.

/// Dense real-valued matrix.
pub type RealMatrix = nalgebra::DMatrix<f64>;

/// Dense real-valued column vector.
pub type RealVector = nalgebra::DVector<f64>;

/// Largest absolute entry (max-norm).
pub fn max_abs(m: &RealMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Largest absolute entry of a vector.
pub fn max_abs_vec(v: &RealVector) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Deterministic sub-seed derivation for independent random streams.
///
/// SplitMix64 finalizer over the combined words; collisions between distinct
/// (base, tags) tuples are not a concern at simulation scale.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut z = base ^ 0x9e37_79b9_7f4a_7c15;
    for &t in tags {
        z = z.wrapping_add(t).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z ^= z >> 27;
    }
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
