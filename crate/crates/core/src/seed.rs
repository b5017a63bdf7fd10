//! Seeded randomness and the ID/level seed hypervector banks.
//!
//! Every stochastic choice in a run descends from one [`RngStream`], built
//! from a 64-bit seed over ChaCha8. The stream is consumed in a fixed
//! order: ID hypervectors, then level hypervectors, then the encoding tie
//! breaker, then whatever the clustering algorithm draws.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hv::{mask_tail, words_for, Hypervector, Mode, TieBreaker};

/// Deterministic, platform-independent pseudo-random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn fill_words(&mut self, words: &mut [u64]) {
        for w in words {
            *w = self.inner.next_u64();
        }
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n as u64) as usize
    }

    /// Uniform real in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Fisher-Yates shuffle, last index first.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// A fresh tie mask per call.
impl TieBreaker for RngStream {
    fn fill(&mut self, words: &mut [u64]) {
        self.fill_words(words);
    }
}

fn random_hv(rng: &mut RngStream, dim: usize, mode: Mode) -> Hypervector {
    let mut words = vec![0u64; words_for(dim)];
    rng.fill_words(&mut words);
    mask_tail(&mut words, dim);
    match mode {
        Mode::Binary => Hypervector::from_words(dim, words).expect("word count"),
        Mode::Integer => {
            let bits = Hypervector::from_words(dim, words).expect("word count");
            Hypervector::from_ints((0..dim).map(|i| if bits.get(i) == 1 { 1 } else { -1 }).collect())
        }
    }
}

/// `count` i.i.d. random hypervectors: fair bits, or uniform `{-1,+1}`.
pub fn generate_random_hvs(rng: &mut RngStream, count: usize, dim: usize, mode: Mode) -> Result<Vec<Hypervector>> {
    if count == 0 {
        return Err(Error::InvalidCount("random hypervector count must be at least 1"));
    }
    if dim == 0 {
        return Err(Error::InvalidCount("dimension must be at least 1"));
    }
    Ok((0..count).map(|_| random_hv(rng, dim, mode)).collect())
}

/// Positions flipped between consecutive levels.
pub fn level_block(dim: usize, q: usize) -> usize {
    dim / (2 * (q - 1))
}

/// Level chain `L_1..L_q` with linearly decaying similarity.
///
/// `L_1` is random. A random permutation of the positions is drawn once
/// and cut into `q - 1` disjoint blocks of `floor(d / (2(q-1)))` positions;
/// `L_{i+1}` is `L_i` with block `i` flipped (bits) or negated (bipolar).
/// Residual positions are never touched, so `δ(L_i, L_j) = |i-j|·block/d`.
pub fn generate_level_hvs(rng: &mut RngStream, q: usize, dim: usize, mode: Mode) -> Result<Vec<Hypervector>> {
    if q < 2 {
        return Err(Error::InvalidQuantization(q));
    }
    if dim == 0 {
        return Err(Error::InvalidCount("dimension must be at least 1"));
    }
    let first = random_hv(rng, dim, mode);
    let mut order: Vec<usize> = (0..dim).collect();
    rng.shuffle(&mut order);
    let block = level_block(dim, q);

    let mut levels = Vec::with_capacity(q);
    levels.push(first);
    for step in 0..q - 1 {
        let positions = &order[step * block..(step + 1) * block];
        let prev = levels.last().unwrap();
        let next = match mode {
            Mode::Binary => {
                let mut words = prev.words().unwrap().to_vec();
                for &p in positions {
                    words[p / 64] ^= 1 << (p % 64);
                }
                Hypervector::from_words(dim, words)?
            }
            Mode::Integer => {
                let mut values = prev.ints().unwrap().to_vec();
                for &p in positions {
                    values[p] = -values[p];
                }
                Hypervector::from_ints(values)
            }
        };
        levels.push(next);
    }
    Ok(levels)
}

/// ID and level banks plus the encoding tie breaker for one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedSet {
    pub ids: Vec<Hypervector>,
    pub levels: Vec<Hypervector>,
    /// Binary tie bits shared by every sample under shared-tie encoding.
    pub tie_breaker: Hypervector,
    /// Root of the per-sample tie streams.
    pub tie_seed: u64,
    pub mode: Mode,
    pub dim: usize,
    pub seed: u64,
}

impl SeedSet {
    pub fn generate(rng: &mut RngStream, n_features: usize, q: usize, dim: usize, mode: Mode) -> Result<Self> {
        let ids = generate_random_hvs(rng, n_features, dim, mode)?;
        let levels = generate_level_hvs(rng, q, dim, mode)?;
        let tie_breaker = random_hv(rng, dim, Mode::Binary);
        let tie_seed = rng.next_u64();
        Ok(Self {
            ids,
            levels,
            tie_breaker,
            tie_seed,
            mode,
            dim,
            seed: rng.seed(),
        })
    }

    pub fn q(&self) -> usize {
        self.levels.len()
    }

    /// Independent tie stream for sample `row`, so samples can be encoded
    /// in any order.
    pub fn sample_ties(&self, row: usize) -> RngStream {
        RngStream::new(self.tie_seed ^ (row as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    /// Level hypervector for a 1-based level index.
    pub fn level(&self, index: usize) -> Result<&Hypervector> {
        if index == 0 || index > self.levels.len() {
            return Err(Error::LevelOutOfRange {
                level: index,
                q: self.levels.len(),
            });
        }
        Ok(&self.levels[index - 1])
    }
}
