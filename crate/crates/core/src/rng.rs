//! Seeding and shuffling helpers.
//!
//! Every random choice in the crate flows through a [`ChaCha8Rng`] built from
//! a `u64` seed, so results are reproducible across platforms and releases of
//! the `rand` crate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type DetRng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from an ordered list of components.
///
/// Distinct component lists give unrelated seeds; appending components never
/// disturbs seeds derived from a shorter prefix.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x005E_ED0F_C0FF_EE00u64, |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn rng_from_seed(seed: u64) -> DetRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fisher–Yates shuffle (Durstenfeld's in-place variant). Every permutation
/// of `items` is equally likely.
pub fn shuffle<T, R: Rng + ?Sized>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Uniformly random permutation of `0..len`.
pub fn random_permutation<R: Rng + ?Sized>(len: usize, rng: &mut R) -> alloc::vec::Vec<usize> {
    let mut p: alloc::vec::Vec<usize> = (0..len).collect();
    shuffle(&mut p, rng);
    p
}

/// Rearranges `perm` into the next permutation in lexicographic order.
/// Returns `false` (leaving `perm` sorted ascending) after the last one.
pub fn next_permutation(perm: &mut [usize]) -> bool {
    let len = perm.len();
    if len < 2 {
        return false;
    }
    let mut i = len - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        perm.reverse();
        return false;
    }
    let mut j = len - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// `len!` saturating at `u128::MAX`.
pub fn factorial(len: usize) -> u128 {
    (1..=len as u128).fold(1u128, |acc, x| acc.saturating_mul(x))
}
