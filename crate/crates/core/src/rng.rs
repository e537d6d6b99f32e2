use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random stream with independent substreams.
///
/// The same `(seed, stream)` pair always yields the same draw sequence, so
/// parallel replicates mapped to distinct stream ids give identical results
/// regardless of how they are scheduled.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh stream sharing this stream's seed.
    pub fn substream(&self, stream: u64) -> Self {
        Self::new(self.seed, stream)
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
