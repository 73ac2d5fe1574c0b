//! Counter-based random streams.
//!
//! Every stochastic operation takes an [`RngStream`] identified by
//! `(master_seed, stream_index)`. The stream is a ChaCha12 keystream whose
//! key is derived from the master seed and whose 64-bit stream id is the
//! index, so replicas can be handed out to any number of threads without
//! changing what each replica draws.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer, used to derive child seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent master seed from `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed) ^ mix64(index.wrapping_add(0x6A09_E667_F3BC_C909)))
}

#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_index);
        Self {
            master_seed,
            stream_index,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// A child stream that depends only on this stream's identity and
    /// `index`, never on how much of this stream has been consumed.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream::new(derive_seed(self.master_seed, self.stream_index), index)
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        // 53 random bits, offset by half an ulp so 0 is never returned.
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
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
