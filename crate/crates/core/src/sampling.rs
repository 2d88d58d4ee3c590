//! Deterministic quasi-random sample points.

const PRIMES: [u32; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u32) -> f64 {
    let b = u64::from(b);
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton sequence in `[0,1)^dim`, skipping index 0 (the origin).
///
/// Panics if `dim` exceeds the built-in prime table (24).
pub fn halton(count: usize, dim: usize) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "halton dimension {dim} too large");
    (1..=count as u64).map(|i| PRIMES[..dim].iter().map(|&p| radical_inverse(i, p)).collect()).collect()
}

/// Halton points mapped affinely into the box `[lo_i, hi_i]`.
pub fn halton_box(count: usize, lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    assert_eq!(lo.len(), hi.len());
    halton(count, lo.len())
        .into_iter()
        .map(|u| u.iter().zip(lo.iter().zip(hi)).map(|(t, (a, b))| a + t * (b - a)).collect())
        .collect()
}
