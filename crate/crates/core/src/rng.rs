//! Reproducible random streams.
//!
//! Every run owns a ChaCha8 stream keyed by `(master_seed, run_index)`: the
//! master seed selects the key and the run index selects the stream, so runs
//! are independent of scheduling order and identical across platforms.

use rand::distr::{Distribution, Uniform};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct RunRng {
    inner: ChaCha8Rng,
}

impl RunRng {
    pub fn new(master_seed: u64, run_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(run_index);
        Self { inner }
    }

    /// Uniform index in `0..n` by unbiased widening-multiply rejection.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let dist = Uniform::new(0u64, n as u64).expect("non-empty range");
        dist.sample(&mut self.inner) as usize
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            // Still consume a draw so the stream layout does not depend on p.
            let _ = self.inner.next_u64();
            return true;
        }
        self.inner.random::<f64>() < p
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

impl RngCore for RunRng {
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
