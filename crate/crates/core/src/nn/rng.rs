//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator seeded from a 64-bit key. Keys are built
//! by folding the run seed and a list of words (stream purpose, epoch, batch,
//! sample position, ...) through the SplitMix64 finalizer. Identical keys give
//! identical streams; streams with different keys are independent for all
//! practical purposes.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Purpose tag mixed into a stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    WeightInit = 1,
    Dropout = 2,
    Shuffle = 3,
    Synthetic = 4,
}

#[derive(Debug, Clone)]
pub struct Rng {
    key: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::from_key(splitmix64(seed))
    }

    fn from_key(key: u64) -> Self {
        Self {
            key,
            inner: ChaCha8Rng::seed_from_u64(key),
        }
    }

    /// Sub-stream for one purpose of a run seeded with `seed`.
    pub fn substream(seed: u64, stream: Stream) -> Self {
        Self::new(seed).derive(&[stream as u64])
    }

    /// Child stream keyed by this stream's key and `words`. Does not advance `self`.
    pub fn derive(&self, words: &[u64]) -> Self {
        let key = words
            .iter()
            .fold(self.key, |acc, &w| splitmix64(acc ^ splitmix64(w)));
        Self::from_key(key)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Fills `buf` with uniform 32-bit words.
    pub fn fill_u32(&mut self, buf: &mut [u32]) {
        self.inner.fill(buf);
    }

    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}
