use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Uniform `b`-subsets of `{0, …, n−1}` without replacement.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    n: usize,
    b: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(n: usize, b: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Self::with_rng(n, b, rng)
    }

    pub fn with_rng(n: usize, b: usize, rng: ChaCha8Rng) -> Result<Self> {
        if b == 0 || b > n {
            return Err(Error::InvalidParameter(format!("batch size {b} outside 1..={n}")));
        }
        Ok(Self { n, b, rng })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn batch_size(&self) -> usize {
        self.b
    }

    /// Next batch in increasing index order (Floyd's algorithm).
    pub fn sample(&mut self) -> Vec<usize> {
        if self.b == self.n {
            return (0..self.n).collect();
        }
        let mut chosen = BTreeSet::new();
        for j in (self.n - self.b)..self.n {
            let t = self.rng.gen_range(0..=j);
            if !chosen.insert(t) {
                chosen.insert(j);
            }
        }
        chosen.into_iter().collect()
    }
}
