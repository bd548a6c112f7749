use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Draws index blocks without replacement from a shuffled pool.
///
/// The pool `0..n` is permuted with a ChaCha8 generator seeded from `seed`
/// and cut into contiguous blocks of `block_size`. Once fewer than
/// `block_size` unused indices remain, the pool is reshuffled, so every
/// epoch of `n / block_size` blocks touches each index at most once.
#[derive(Debug, Clone)]
pub struct BlockSampler {
    n_indices: usize,
    block_size: usize,
    seed: u64,
    rng: ChaCha8Rng,
    permutation: Vec<usize>,
    cursor: usize,
    epoch: usize,
}

impl BlockSampler {
    pub fn new(n_indices: usize, block_size: usize, seed: u64) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::InvalidArgument("block size must be at least 1".into()));
        }
        if block_size > n_indices {
            return Err(Error::BlockTooLarge {
                block: block_size,
                pool: n_indices,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut permutation: Vec<usize> = (0..n_indices).collect();
        permutation.shuffle(&mut rng);
        Ok(Self {
            n_indices,
            block_size,
            seed,
            rng,
            permutation,
            cursor: 0,
            epoch: 0,
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn pool_size(&self) -> usize {
        self.n_indices
    }

    /// Blocks drawn before the pool is reshuffled.
    pub fn blocks_per_epoch(&self) -> usize {
        self.n_indices / self.block_size
    }

    /// Completed reshuffles so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn next_block(&mut self) -> &[usize] {
        if self.cursor + self.block_size > self.n_indices {
            self.permutation.shuffle(&mut self.rng);
            self.cursor = 0;
            self.epoch += 1;
        }
        let start = self.cursor;
        self.cursor += self.block_size;
        &self.permutation[start..self.cursor]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pairs_partition_small_pool() {
        let mut s = BlockSampler::new(4, 2, 1).unwrap();
        let mut seen: Vec<usize> = s.next_block().to_vec();
        seen.extend_from_slice(s.next_block());
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn full_block_is_a_permutation() {
        let mut s = BlockSampler::new(7, 7, 3).unwrap();
        for _ in 0..4 {
            let mut b = s.next_block().to_vec();
            b.sort_unstable();
            assert_eq!(b, (0..7).collect::<Vec<_>>());
        }
    }

    #[test]
    fn seeded_sequences_repeat() {
        let mut a = BlockSampler::new(50, 7, 42).unwrap();
        let mut b = BlockSampler::new(50, 7, 42).unwrap();
        for _ in 0..30 {
            assert_eq!(a.next_block(), b.next_block());
        }
        let mut c = BlockSampler::new(50, 7, 43).unwrap();
        let first: Vec<usize> = BlockSampler::new(50, 7, 42).unwrap().next_block().to_vec();
        assert_ne!(c.next_block(), first.as_slice());
    }

    #[test]
    fn oversized_block_rejected() {
        assert!(matches!(
            BlockSampler::new(3, 4, 0),
            Err(Error::BlockTooLarge { block: 4, pool: 3 })
        ));
        assert!(BlockSampler::new(3, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn epochs_never_repeat_an_index(n in 1usize..200, j in 1usize..50, seed in any::<u64>()) {
            prop_assume!(j <= n);
            let mut s = BlockSampler::new(n, j, seed).unwrap();
            for _ in 0..3 {
                let mut seen = vec![false; n];
                for _ in 0..s.blocks_per_epoch() {
                    for &i in s.next_block() {
                        prop_assert!(!seen[i]);
                        seen[i] = true;
                    }
                }
                if n % j == 0 {
                    prop_assert!(seen.iter().all(|&v| v));
                }
            }
        }
    }
}
