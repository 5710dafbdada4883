//! Seeded random streams.
//!
//! Every chain, generator and predictive evaluation draws from its own
//! [`RngStream`], identified by a `(seed, stream_id)` pair. Two streams with the
//! same pair produce bitwise-identical sequences.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derive an independent stream for a sub-task (chain, candidate, repeat).
    ///
    /// The child keeps the seed and mixes `child` into the stream id, so the
    /// result does not depend on how far this stream has advanced.
    pub fn fork(&self, child: u64) -> RngStream {
        let mixed = splitmix(self.stream_id ^ splitmix(child.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        RngStream::new(self.seed, mixed)
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
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
