//! Seedable, splittable random streams.
//!
//! Every stochastic routine takes a [`RandomStream`]. Independent streams for
//! parallel work are derived from a master seed and an index, so the output of
//! a batch never depends on how it is scheduled.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// ChaCha12 generator addressed by `(seed, stream)`.
#[derive(Clone, Debug)]
pub struct RandomStream {
    inner: ChaCha12Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, 0)
    }

    /// The `index`-th independent substream of `seed`.
    pub fn derive(seed: u64, index: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(index);
        Self { inner }
    }

    /// Draws a fresh seed from this stream, for handing to derived substreams.
    pub fn next_seed(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Mixes a seed with a label so that unrelated uses of one master seed get
/// unrelated streams (SplitMix64 finalizer).
pub fn mix_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
