//! Hypervector representations and the point-wise algebra.
//!
//! Binary hypervectors live in `{0,1}^d`, packed 64 bits per word so that
//! Hamming distance reduces to XOR plus popcount. Integer hypervectors hold
//! bipolar seeds (`{-1,+1}^d`) and the unnormalized integer compounds
//! produced by bundling them.
//!
//! All operations are pure; hypervectors are never mutated after
//! construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

/// Representation family of a hypervector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Binary,
    Integer,
}

impl Mode {
    pub fn metric(self) -> Metric {
        match self {
            Mode::Binary => Metric::NormalizedHamming,
            Mode::Integer => Metric::Cosine,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Payload {
    Bits(Vec<u64>),
    Ints(Vec<i32>),
}

/// A `d`-dimensional binary or integer hypervector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypervector {
    dim: usize,
    payload: Payload,
}

#[inline]
pub(crate) fn words_for(dim: usize) -> usize {
    dim.div_ceil(WORD_BITS)
}

#[inline]
fn tail_mask(dim: usize) -> u64 {
    match dim % WORD_BITS {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// Clears the padding bits past `dim` in the last word.
#[inline]
pub(crate) fn mask_tail(words: &mut [u64], dim: usize) {
    if let Some(last) = words.last_mut() {
        *last &= tail_mask(dim);
    }
}

/// Number of differing bits between two packed words slices.
#[inline]
pub fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

impl Hypervector {
    pub fn zeros(dim: usize, mode: Mode) -> Self {
        let payload = match mode {
            Mode::Binary => Payload::Bits(vec![0; words_for(dim)]),
            Mode::Integer => Payload::Ints(vec![0; dim]),
        };
        Self { dim, payload }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let dim = bits.len();
        let mut words = vec![0u64; words_for(dim)];
        for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
        }
        Self {
            dim,
            payload: Payload::Bits(words),
        }
    }

    /// Parses a bit string such as `"1010"`; position 0 is the first character.
    pub fn from_bit_str(s: &str) -> Self {
        let bits: Vec<bool> = s.chars().filter(|c| !c.is_whitespace()).map(|c| c == '1').collect();
        Self::from_bits(&bits)
    }

    /// Builds a binary hypervector from packed words. Padding bits are cleared.
    pub fn from_words(dim: usize, mut words: Vec<u64>) -> Result<Self> {
        if words.len() != words_for(dim) {
            return Err(Error::LengthMismatch {
                left: words.len(),
                right: words_for(dim),
            });
        }
        mask_tail(&mut words, dim);
        Ok(Self {
            dim,
            payload: Payload::Bits(words),
        })
    }

    pub fn from_ints(values: Vec<i32>) -> Self {
        Self {
            dim: values.len(),
            payload: Payload::Ints(values),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> Mode {
        match self.payload {
            Payload::Bits(_) => Mode::Binary,
            Payload::Ints(_) => Mode::Integer,
        }
    }

    /// Packed words of a binary hypervector.
    pub fn words(&self) -> Option<&[u64]> {
        match &self.payload {
            Payload::Bits(w) => Some(w),
            Payload::Ints(_) => None,
        }
    }

    pub fn ints(&self) -> Option<&[i32]> {
        match &self.payload {
            Payload::Ints(v) => Some(v),
            Payload::Bits(_) => None,
        }
    }

    pub fn bit(&self, i: usize) -> Option<bool> {
        let w = self.words()?;
        (i < self.dim).then(|| (w[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1)
    }

    /// Element `i` as an integer (bits read as 0/1).
    pub fn get(&self, i: usize) -> i32 {
        match &self.payload {
            Payload::Bits(w) => ((w[i / WORD_BITS] >> (i % WORD_BITS)) & 1) as i32,
            Payload::Ints(v) => v[i],
        }
    }

    pub fn to_bit_string(&self) -> String {
        (0..self.dim).map(|i| if self.get(i) == 1 { '1' } else { '0' }).collect()
    }

    /// Bitwise complement (binary) or element negation (integer).
    pub fn complement(&self) -> Self {
        let payload = match &self.payload {
            Payload::Bits(w) => {
                let mut out: Vec<u64> = w.iter().map(|x| !x).collect();
                mask_tail(&mut out, self.dim);
                Payload::Bits(out)
            }
            Payload::Ints(v) => Payload::Ints(v.iter().map(|x| -x).collect()),
        };
        Self {
            dim: self.dim,
            payload,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.payload {
            Payload::Bits(w) => w.iter().all(|&x| x == 0),
            Payload::Ints(v) => v.iter().all(|&x| x == 0),
        }
    }

    /// Euclidean norm; for binary vectors bits count as 0/1.
    pub fn norm(&self) -> f64 {
        match &self.payload {
            Payload::Bits(w) => (w.iter().map(|x| x.count_ones() as f64).sum::<f64>()).sqrt(),
            Payload::Ints(v) => (v.iter().map(|&x| (x as i64 * x as i64) as f64).sum::<f64>()).sqrt(),
        }
    }

    /// Elements as `f64`, bits read as 0/1.
    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i) as f64).collect()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.mode() != other.mode() {
            return Err(Error::ModeMismatch);
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }
}

/// Source of tie-breaking bits for even-count binary majority votes.
///
/// `fill` writes one candidate bit per dimension; the bundle only consults
/// positions where the vote is exactly split.
pub trait TieBreaker {
    fn fill(&mut self, words: &mut [u64]);
}

/// Tie bits copied from a fixed binary hypervector.
#[derive(Clone, Copy, Debug)]
pub struct FixedTies<'a>(pub &'a Hypervector);

impl TieBreaker for FixedTies<'_> {
    fn fill(&mut self, words: &mut [u64]) {
        let src = self.0.words().expect("tie-breaker must be binary");
        words.copy_from_slice(src);
    }
}

/// Bit-sliced vertical counter for binary majority votes.
///
/// Plane `p` holds bit `p` of every per-dimension count, so adding a
/// hypervector is a ripple-carry over a handful of word planes rather than
/// `d` scalar increments.
#[derive(Clone, Debug)]
pub struct MajorityCounter {
    dim: usize,
    words: usize,
    planes: Vec<Vec<u64>>,
    count: usize,
}

impl MajorityCounter {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            words: words_for(dim),
            planes: Vec::new(),
            count: 0,
        }
    }

    /// Number of hypervectors added so far.
    pub fn count(&self) -> usize {
        self.count
    }

    fn reserve_plane(&mut self) {
        if self.count + 1 >= (1usize << self.planes.len()) {
            self.planes.push(vec![0; self.words]);
        }
    }

    #[inline]
    fn ripple(planes: &mut [Vec<u64>], w: usize, mut carry: u64) {
        for plane in planes.iter_mut() {
            if carry == 0 {
                break;
            }
            let next = plane[w] & carry;
            plane[w] ^= carry;
            carry = next;
        }
    }

    pub fn add_words(&mut self, v: &[u64]) {
        debug_assert_eq!(v.len(), self.words);
        self.reserve_plane();
        for (w, &x) in v.iter().enumerate() {
            Self::ripple(&mut self.planes, w, x);
        }
        self.count += 1;
    }

    /// Adds `a XOR b` without materializing it.
    pub fn add_xor(&mut self, a: &[u64], b: &[u64]) {
        debug_assert_eq!(a.len(), self.words);
        self.reserve_plane();
        for w in 0..self.words {
            Self::ripple(&mut self.planes, w, a[w] ^ b[w]);
        }
        self.count += 1;
    }

    /// Count of set bits at dimension `i`.
    pub fn count_at(&self, i: usize) -> usize {
        self.planes
            .iter()
            .enumerate()
            .map(|(p, plane)| (((plane[i / WORD_BITS] >> (i % WORD_BITS)) & 1) as usize) << p)
            .sum()
    }

    /// Resolves the vote: a bit is set when more than half the inputs set it.
    /// Exact ties (only possible for an even count) take the tie bit.
    pub fn majority(&self, ties: &mut dyn TieBreaker) -> Result<Hypervector> {
        if self.count == 0 {
            return Err(Error::EmptyInput("bundle of zero hypervectors"));
        }
        let threshold = self.count / 2;
        let mut gt = vec![0u64; self.words];
        let mut eq = vec![u64::MAX; self.words];
        for (p, plane) in self.planes.iter().enumerate().rev() {
            let t_bit = (threshold >> p) & 1 == 1;
            for w in 0..self.words {
                let c = plane[w];
                if t_bit {
                    eq[w] &= c;
                } else {
                    gt[w] |= eq[w] & c;
                    eq[w] &= !c;
                }
            }
        }
        if self.count.is_multiple_of(2) {
            let mut tie = vec![0u64; self.words];
            ties.fill(&mut tie);
            for w in 0..self.words {
                gt[w] |= eq[w] & tie[w];
            }
        }
        Hypervector::from_words(self.dim, gt)
    }
}

/// Binding: XOR for binary, element product for integer.
pub fn bind(a: &Hypervector, b: &Hypervector) -> Result<Hypervector> {
    a.check_compatible(b)?;
    let payload = match (&a.payload, &b.payload) {
        (Payload::Bits(x), Payload::Bits(y)) => Payload::Bits(x.iter().zip(y).map(|(p, q)| p ^ q).collect()),
        (Payload::Ints(x), Payload::Ints(y)) => Payload::Ints(x.iter().zip(y).map(|(p, q)| p * q).collect()),
        _ => unreachable!("modes checked"),
    };
    Ok(Hypervector { dim: a.dim, payload })
}

/// Bundling: per-bit majority for binary, element sum for integer.
///
/// Integer compounds are left unnormalized. The tie breaker is consulted
/// only for binary inputs of even count.
pub fn bundle(vs: &[&Hypervector], ties: &mut dyn TieBreaker) -> Result<Hypervector> {
    let first = vs.first().ok_or(Error::EmptyInput("bundle of zero hypervectors"))?;
    for v in &vs[1..] {
        first.check_compatible(v)?;
    }
    match &first.payload {
        Payload::Bits(_) => {
            let mut counter = MajorityCounter::new(first.dim);
            for v in vs {
                counter.add_words(v.words().unwrap());
            }
            counter.majority(ties)
        }
        Payload::Ints(_) => {
            let mut sum = vec![0i32; first.dim];
            for v in vs {
                for (s, x) in sum.iter_mut().zip(v.ints().unwrap()) {
                    *s += x;
                }
            }
            Ok(Hypervector::from_ints(sum))
        }
    }
}

/// Reads `len <= 64` bits starting at bit `start` (no wraparound).
#[inline]
fn read_bits(words: &[u64], start: usize, len: usize) -> u64 {
    if len == 0 {
        return 0;
    }
    let w = start / WORD_BITS;
    let off = start % WORD_BITS;
    let mut v = words[w] >> off;
    if off != 0 && off + len > WORD_BITS {
        v |= words[w + 1] << (WORD_BITS - off);
    }
    if len < WORD_BITS {
        v &= (1u64 << len) - 1;
    }
    v
}

/// Circular shift: element `i` moves to position `(i + times) mod d`.
pub fn permute(a: &Hypervector, times: usize) -> Hypervector {
    let dim = a.dim;
    if dim == 0 {
        return a.clone();
    }
    let shift = times % dim;
    if shift == 0 {
        return a.clone();
    }
    let payload = match &a.payload {
        Payload::Ints(v) => {
            let mut out = vec![0; dim];
            for (i, &x) in v.iter().enumerate() {
                out[(i + shift) % dim] = x;
            }
            Payload::Ints(out)
        }
        Payload::Bits(src) => {
            let n = words_for(dim);
            let mut out = vec![0u64; n];
            for (w, slot) in out.iter_mut().enumerate() {
                let dst = w * WORD_BITS;
                let len = WORD_BITS.min(dim - dst);
                // Output bit j reads source bit (j - shift) mod d.
                let from = (dst + dim - shift) % dim;
                let first = len.min(dim - from);
                let mut v = read_bits(src, from, first);
                if first < len {
                    v |= read_bits(src, 0, len - first) << first;
                }
                *slot = v;
            }
            Payload::Bits(out)
        }
    };
    Hypervector { dim, payload }
}

/// Which similarity measure a value was computed with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// Fraction of differing bits; lower is more similar.
    NormalizedHamming,
    /// Cosine of the angle; higher is more similar.
    Cosine,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub value: f64,
    pub metric: Metric,
}

impl Similarity {
    /// Value oriented so that larger always means more similar.
    pub fn affinity(&self) -> f64 {
        match self.metric {
            Metric::NormalizedHamming => -self.value,
            Metric::Cosine => self.value,
        }
    }

    /// Similarity of a hypervector to itself under `metric`.
    pub fn identical(metric: Metric) -> Self {
        let value = match metric {
            Metric::NormalizedHamming => 0.0,
            Metric::Cosine => 1.0,
        };
        Self { value, metric }
    }
}

fn dot(a: &[i32], b: &[i32]) -> i64 {
    a.iter().zip(b).map(|(&x, &y)| x as i64 * y as i64).sum()
}

/// Normalized Hamming distance (binary) or cosine similarity (integer).
pub fn similarity(a: &Hypervector, b: &Hypervector) -> Result<Similarity> {
    a.check_compatible(b)?;
    match (&a.payload, &b.payload) {
        (Payload::Bits(x), Payload::Bits(y)) => Ok(Similarity {
            value: hamming_words(x, y) as f64 / a.dim as f64,
            metric: Metric::NormalizedHamming,
        }),
        (Payload::Ints(x), Payload::Ints(y)) => {
            let nx = dot(x, x);
            let ny = dot(y, y);
            if nx == 0 || ny == 0 {
                return Err(Error::ZeroVector);
            }
            Ok(Similarity {
                value: dot(x, y) as f64 / ((nx as f64).sqrt() * (ny as f64).sqrt()),
                metric: Metric::Cosine,
            })
        }
        _ => unreachable!("modes checked"),
    }
}
