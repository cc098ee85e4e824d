//! SplitMix64 generator and the byte hash built on its output mix.
//!
//! Everything random in the pipeline (few-shot sampling, epoch shuffles,
//! feature hashing, synthetic corpora) is derived from these two functions so
//! that any implementation following the same definitions reproduces the same
//! index sequences bit for bit.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a byte string.
///
/// `h = len`; every 8-byte little-endian word `w` (the last one zero padded)
/// folds in as `h = mix64((h + GOLDEN) ^ w)`; the result is
/// `mix64(h + GOLDEN)`. All arithmetic is mod 2^64.
pub fn hash_bytes(bytes: &[u8]) -> u64 {
    let mut h = bytes.len() as u64;
    for chunk in bytes.chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        h = mix64(h.wrapping_add(GOLDEN_GAMMA) ^ u64::from_le_bytes(word));
    }
    mix64(h.wrapping_add(GOLDEN_GAMMA))
}

/// Seed of the stream reserved for `purpose`: `seed ^ hash_bytes(purpose)`.
#[inline]
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    seed ^ hash_bytes(purpose.as_bytes())
}

/// SplitMix64. Single owner; never shared between consumers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prng {
    state: u64,
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Generator for the namespaced stream `seed ^ hash(purpose)`.
    pub fn for_purpose(seed: u64, purpose: &str) -> Self {
        Self::new(derive_seed(seed, purpose))
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// `next_u64() % bound`. The modulo bias is part of the definition.
    #[inline]
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        self.next_u64() % bound
    }

    /// Uniform in [0, 1) from the top 53 bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Fisher-Yates: for `i` from `len-1` down to 1, swap `i` with
    /// `below(i + 1)`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
