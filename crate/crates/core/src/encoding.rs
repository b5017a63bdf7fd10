//! Quantization and record / N-gram encoding of raw samples into query
//! hypervectors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classic::PointMatrix;
use crate::error::{Error, Result};
use crate::hv::{bundle, permute, FixedTies, Hypervector, MajorityCounter, Mode, TieBreaker};
use crate::seed::SeedSet;

/// A labelled table of real-valued samples.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub name: String,
    pub features: PointMatrix,
    /// Dense labels in `0..k`.
    pub labels: Vec<usize>,
    /// Declared cluster count.
    pub k: usize,
}

impl RawDataset {
    pub fn new(name: impl Into<String>, features: PointMatrix, labels: Vec<usize>, k: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: features.rows(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::LabelOutOfRange { label, k });
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            features: self.features.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            k: self.k,
        }
    }
}

/// Per-sample level indices in `1..=q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelMatrix {
    rows: usize,
    cols: usize,
    q: usize,
    levels: Vec<u16>,
}

impl LevelMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn row(&self, i: usize) -> &[u16] {
        &self.levels[i * self.cols..(i + 1) * self.cols]
    }
}

/// Per-feature min-max quantization into `q` equal-width value bins.
///
/// `v` in a column spanning `[lo, hi]` maps to
/// `clamp(floor((v - lo) / (hi - lo) * q), 0, q - 1) + 1`; constant columns
/// map to level 1.
pub fn quantize(dataset: &RawDataset, q: usize) -> Result<LevelMatrix> {
    if q < 2 {
        return Err(Error::InvalidQuantization(q));
    }
    if q > u16::MAX as usize {
        return Err(Error::Config(format!("q = {q} exceeds the supported level count")));
    }
    let pts = &dataset.features;
    let (rows, cols) = (pts.rows(), pts.cols());
    let ranges: Vec<(f64, f64)> = (0..cols)
        .map(|j| {
            pts.column(j)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        })
        .collect();
    let mut levels = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for (j, (&v, &(lo, hi))) in pts.row(i).iter().zip(&ranges).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteFeature { row: i, column: j });
            }
            let level = if hi > lo {
                let bin = ((v - lo) / (hi - lo) * q as f64).floor() as i64;
                bin.clamp(0, q as i64 - 1) as usize + 1
            } else {
                1
            };
            levels.push(level as u16);
        }
    }
    Ok(LevelMatrix { rows, cols, q, levels })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Record,
    Ngram,
}

/// Where binary encoding takes its bits for even-count majority ties.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieSource {
    /// A fresh seeded stream per sample: tied positions carry sample noise.
    #[default]
    PerSample,
    /// One tie mask per run, reused by every sample.
    Shared,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub encoding: Encoding,
    pub mode: Mode,
    pub dim: usize,
    pub q: usize,
    #[serde(default)]
    pub ties: TieSource,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            encoding: Encoding::Record,
            mode: Mode::Binary,
            dim: 10_000,
            q: 16,
            ties: TieSource::PerSample,
        }
    }
}

/// Query hypervectors with their ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDataset {
    pub queries: Vec<Hypervector>,
    pub labels: Vec<usize>,
    pub encoding: Encoding,
    pub mode: Mode,
    pub q: usize,
    pub dim: usize,
    pub k: usize,
    pub source: String,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

fn check_row(row: &[u16], seeds: &SeedSet, need_ids: bool) -> Result<()> {
    if row.is_empty() {
        return Err(Error::EmptyInput("sample without features"));
    }
    if need_ids && seeds.ids.len() < row.len() {
        return Err(Error::DimensionMismatch {
            left: row.len(),
            right: seeds.ids.len(),
        });
    }
    Ok(())
}

/// Record-based encoding: bundle over features of `L_{level_j} * ID_j`.
pub fn encode_record(row: &[u16], seeds: &SeedSet, ties: &mut dyn TieBreaker) -> Result<Hypervector> {
    check_row(row, seeds, true)?;
    match seeds.mode {
        Mode::Binary => {
            let mut counter = MajorityCounter::new(seeds.dim);
            for (j, &level) in row.iter().enumerate() {
                let value = seeds.level(level as usize)?;
                counter.add_xor(value.words().unwrap(), seeds.ids[j].words().unwrap());
            }
            counter.majority(ties)
        }
        Mode::Integer => {
            let mut sum = vec![0i32; seeds.dim];
            for (j, &level) in row.iter().enumerate() {
                let value = seeds.level(level as usize)?.ints().unwrap();
                let id = seeds.ids[j].ints().unwrap();
                for ((s, v), i) in sum.iter_mut().zip(value).zip(id) {
                    *s += v * i;
                }
            }
            Ok(Hypervector::from_ints(sum))
        }
    }
}

/// N-gram-based encoding: bundle over features of `ρ^{j-1} L_{level_j}`.
pub fn encode_ngram(row: &[u16], seeds: &SeedSet, ties: &mut dyn TieBreaker) -> Result<Hypervector> {
    check_row(row, seeds, false)?;
    let permuted = row
        .iter()
        .enumerate()
        .map(|(j, &level)| Ok(permute(seeds.level(level as usize)?, j)))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Hypervector> = permuted.iter().collect();
    bundle(&refs, ties)
}

/// Quantizes and encodes every sample. Rows are encoded in parallel; the
/// output does not depend on scheduling. Tie bits for sample `i` come from
/// [`SeedSet::sample_ties`] or the shared mask, per `config.ties`.
pub fn encode_dataset(dataset: &RawDataset, config: &EncoderConfig, seeds: &SeedSet) -> Result<EncodedDataset> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset has no samples"));
    }
    if seeds.mode != config.mode || seeds.dim != config.dim || seeds.q() != config.q {
        return Err(Error::Config("seed set does not match encoder configuration".into()));
    }
    let levels = quantize(dataset, config.q)?;
    let encode = match config.encoding {
        Encoding::Record => encode_record,
        Encoding::Ngram => encode_ngram,
    };
    let queries = (0..levels.rows())
        .into_par_iter()
        .map(|i| match config.ties {
            TieSource::PerSample => encode(levels.row(i), seeds, &mut seeds.sample_ties(i)),
            TieSource::Shared => encode(levels.row(i), seeds, &mut FixedTies(&seeds.tie_breaker)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedDataset {
        queries,
        labels: dataset.labels.clone(),
        encoding: config.encoding,
        mode: config.mode,
        q: config.q,
        dim: config.dim,
        k: dataset.k,
        source: dataset.name.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hv::{bind, similarity};
    use crate::seed::RngStream;

    fn dataset(rows: &[Vec<f64>]) -> RawDataset {
        let labels = vec![0; rows.len()];
        RawDataset::new("t", PointMatrix::from_rows(rows).unwrap(), labels, 2).unwrap()
    }

    #[test]
    fn quantize_endpoints_and_midpoint() {
        let d = dataset(&[vec![0.0, 5.0], vec![10.0, 5.0], vec![5.0, 5.0]]);
        let l = quantize(&d, 16).unwrap();
        assert_eq!(l.row(0), &[1, 1]);
        assert_eq!(l.row(1), &[16, 1]);
        assert_eq!(l.row(2), &[9, 1]);
    }

    #[test]
    fn quantize_rejects_one_level() {
        let d = dataset(&[vec![0.0]]);
        assert!(matches!(quantize(&d, 1), Err(Error::InvalidQuantization(1))));
    }

    /// Pencil-and-paper d=4 toy: n=2 features, q=2.
    fn toy_seeds(mode: Mode) -> SeedSet {
        let bits = |s: &str| Hypervector::from_bit_str(s);
        SeedSet {
            ids: vec![bits("1100"), bits("1010")],
            levels: vec![bits("0000"), bits("1111")],
            tie_breaker: bits("0110"),
            tie_seed: 0,
            mode,
            dim: 4,
            seed: 0,
        }
    }

    #[test]
    fn record_toy_trace() {
        let seeds = toy_seeds(Mode::Binary);
        // Row levels (1, 2): L1*ID1 = 1100, L2*ID2 = 0101.
        // Bit 1 has two votes, bit 2 none; bits 0 and 3 tie and take the
        // tie bits (0 and 0).
        let hv = encode_record(&[1, 2], &seeds, &mut FixedTies(&seeds.tie_breaker)).unwrap();
        assert_eq!(hv.to_bit_string(), "0100");
    }

    #[test]
    fn record_single_feature_is_bound_pair() {
        let mut rng = RngStream::new(1);
        let seeds = SeedSet::generate(&mut rng, 1, 4, 256, Mode::Binary).unwrap();
        let hv = encode_record(&[3], &seeds, &mut FixedTies(&seeds.tie_breaker)).unwrap();
        assert_eq!(hv, bind(&seeds.levels[2], &seeds.ids[0]).unwrap());
    }

    #[test]
    fn ngram_single_feature_is_level() {
        let mut rng = RngStream::new(1);
        let seeds = SeedSet::generate(&mut rng, 1, 4, 256, Mode::Integer).unwrap();
        assert_eq!(encode_ngram(&[2], &seeds, &mut FixedTies(&seeds.tie_breaker)).unwrap(), seeds.levels[1]);
    }

    #[test]
    fn ngram_is_position_sensitive() {
        // d=8, n=3 toy: L1 = 11000000, L2 = 00000011.
        let bits = |s: &str| Hypervector::from_bit_str(s);
        let seeds = SeedSet {
            ids: vec![],
            levels: vec![bits("11000000"), bits("00000011")],
            tie_breaker: bits("00000000"),
            tie_seed: 0,
            mode: Mode::Binary,
            dim: 8,
            seed: 0,
        };
        // (1,1,2): 11000000 + ρ(L1) 01100000 + ρ²(L2) 11000000 (wraps).
        // Votes 2,3,1 on bits 0..2 -> 11000000.
        assert_eq!(encode_ngram(&[1, 1, 2], &seeds, &mut FixedTies(&seeds.tie_breaker)).unwrap().to_bit_string(), "11000000");
        // (2,1,1): 00000011 + 01100000 + 00110000; only bit 2 reaches 2 votes.
        assert_eq!(encode_ngram(&[2, 1, 1], &seeds, &mut FixedTies(&seeds.tie_breaker)).unwrap().to_bit_string(), "00100000");
    }

    #[test]
    fn integer_record_is_unnormalized_sum() {
        let mut rng = RngStream::new(4);
        let seeds = SeedSet::generate(&mut rng, 3, 4, 64, Mode::Integer).unwrap();
        let hv = encode_record(&[1, 2, 4], &seeds, &mut FixedTies(&seeds.tie_breaker)).unwrap();
        assert!(hv.ints().unwrap().iter().all(|x| x.abs() <= 3 && x % 2 != 0));
    }

    #[test]
    fn encode_dataset_deterministic_and_rowwise() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i * i % 7) as f64, 3.0]).collect();
        let d = dataset(&rows);
        let cfg = EncoderConfig {
            dim: 1000,
            ..EncoderConfig::default()
        };
        let seeds = SeedSet::generate(&mut RngStream::new(5), 3, cfg.q, cfg.dim, cfg.mode).unwrap();
        let a = encode_dataset(&d, &cfg, &seeds).unwrap();
        let b = encode_dataset(&d, &cfg, &seeds).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        // Row-wise independence given fixed quantization ranges.
        let levels = quantize(&d, cfg.q).unwrap();
        for i in [0, 5, 11] {
            assert_eq!(encode_record(levels.row(i), &seeds, &mut seeds.sample_ties(i)).unwrap(), a.queries[i]);
        }
        let shared = EncoderConfig {
            ties: TieSource::Shared,
            ..cfg
        };
        let c = encode_dataset(&d, &shared, &seeds).unwrap();
        assert_eq!(
            encode_record(levels.row(5), &seeds, &mut FixedTies(&seeds.tie_breaker)).unwrap(),
            c.queries[5]
        );
    }

    #[test]
    fn per_sample_ties_separate_identical_rows() {
        // Two features make every position a two-vote majority, and the two
        // bound pairs disagree on about half of them.
        let d = dataset(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        let base = EncoderConfig {
            dim: 2000,
            ..EncoderConfig::default()
        };
        let seeds = SeedSet::generate(&mut RngStream::new(8), 2, base.q, base.dim, base.mode).unwrap();
        let noisy = encode_dataset(&d, &base, &seeds).unwrap();
        let gap = similarity(&noisy.queries[0], &noisy.queries[2]).unwrap().value;
        assert!((0.15..0.35).contains(&gap), "{gap}");
        let shared = EncoderConfig {
            ties: TieSource::Shared,
            ..base
        };
        let quiet = encode_dataset(&d, &shared, &seeds).unwrap();
        assert_eq!(quiet.queries[0], quiet.queries[2]);
    }

    #[test]
    fn adjacent_levels_closer_than_extremes() {
        let rows: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64]).collect();
        let d = dataset(&rows);
        let cfg = EncoderConfig::default();
        let seeds = SeedSet::generate(&mut RngStream::new(6), 1, cfg.q, cfg.dim, cfg.mode).unwrap();
        let e = encode_dataset(&d, &cfg, &seeds).unwrap();
        let near = similarity(&e.queries[0], &e.queries[1]).unwrap().value;
        let far = similarity(&e.queries[0], &e.queries[15]).unwrap().value;
        assert!(near < far);
    }

    #[test]
    fn empty_dataset_rejected() {
        let d = RawDataset::new("e", PointMatrix::new(0, 2, vec![]).unwrap(), vec![], 2).unwrap();
        let cfg = EncoderConfig::default();
        let seeds = SeedSet::generate(&mut RngStream::new(0), 2, cfg.q, 64, cfg.mode).unwrap();
        assert!(encode_dataset(&d, &EncoderConfig { dim: 64, ..cfg }, &seeds).is_err());
    }

    mod props {
        use super::*;
        use crate::classic::PointMatrix;
        use crate::hv::similarity;
        use crate::seed::RngStream;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn each_query_depends_only_on_its_row(
                seed in any::<u64>(),
                (rows, cols, values) in (1usize..12, 1usize..6)
                    .prop_flat_map(|(r, c)| (Just(r), Just(c), proptest::collection::vec(-10.0f64..10.0, r * c))),
                ngram in any::<bool>(),
                integer in any::<bool>(),
            ) {
                let data = RawDataset::new("p", PointMatrix::new(rows, cols, values).unwrap(), vec![0; rows], 2).unwrap();
                let mode = if integer { Mode::Integer } else { Mode::Binary };
                let encoding = if ngram { Encoding::Ngram } else { Encoding::Record };
                let config = EncoderConfig { encoding, mode, dim: 256, q: 8, ties: TieSource::PerSample };
                let seeds = SeedSet::generate(&mut RngStream::new(seed), cols, 8, 256, mode).unwrap();
                let encoded = encode_dataset(&data, &config, &seeds).unwrap();
                let levels = quantize(&data, 8).unwrap();
                prop_assert_eq!(encoded.len(), rows);
                prop_assert_eq!(encoded.labels.len(), rows);
                for i in (0..rows).rev() {
                    let mut ties = seeds.sample_ties(i);
                    let alone = if ngram {
                        encode_ngram(levels.row(i), &seeds, &mut ties)
                    } else {
                        encode_record(levels.row(i), &seeds, &mut ties)
                    }
                    .unwrap();
                    prop_assert_eq!(alone.mode(), mode);
                    prop_assert_eq!(alone.dim(), 256);
                    prop_assert_eq!(&alone, &encoded.queries[i]);
                }
            }

            #[test]
            fn adjacent_levels_encode_closer_than_extremes(seed in any::<u64>()) {
                let features = PointMatrix::new(16, 1, (0..16).map(f64::from).collect()).unwrap();
                let data = RawDataset::new("line", features, vec![0; 16], 2).unwrap();
                let seeds = SeedSet::generate(&mut RngStream::new(seed), 1, 16, 10_000, Mode::Binary).unwrap();
                let encoded = encode_dataset(&data, &EncoderConfig::default(), &seeds).unwrap();
                let q = &encoded.queries;
                let near = similarity(&q[0], &q[1]).unwrap().value;
                let far = similarity(&q[0], &q[15]).unwrap().value;
                prop_assert!(near < far);
            }
        }
    }
}
