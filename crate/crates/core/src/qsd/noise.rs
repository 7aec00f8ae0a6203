use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// Counter-addressed source of Wiener increments.
///
/// Increment `k` of seed `s` is drawn from its own ChaCha stream, so it depends
/// only on `(s, k)` and never on the order in which increments are requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    seed: u64,
    counter: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn at(seed: u64, counter: u64) -> Self {
        Self { seed, counter }
    }

    /// Stream for trajectory `k` of an ensemble started from `base_seed`.
    pub fn for_trajectory(base_seed: u64, k: usize) -> Self {
        Self::new(base_seed.wrapping_add(k as u64))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Standard normal variate number `counter`.
    pub fn normal_at(&self, counter: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(counter);
        StandardNormal.sample(&mut rng)
    }

    /// Next increment `dB` with variance `dt`; advances the counter.
    pub fn next_increment(&mut self, dt: f64) -> f64 {
        let z = self.normal_at(self.counter);
        self.counter += 1;
        z * dt.sqrt()
    }

    /// Increment over `k` consecutive fine steps of size `dt`, i.e. the sum of
    /// the next `k` fine increments. Coarse and fine integrations driven this
    /// way sample the same Brownian path.
    pub fn next_coarse_increment(&mut self, dt: f64, k: usize) -> f64 {
        (0..k).map(|_| self.next_increment(dt)).sum()
    }
}
