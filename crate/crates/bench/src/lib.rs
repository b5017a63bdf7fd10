//! Fixtures shared by the kernel benchmarks.

use hdclust::classic::SimilarityMatrix;
use hdclust::encoding::{LevelMatrix, RawDataset};
use hdclust::hdc::query_similarity_matrix;
use hdclust::seed::generate_random_hvs;
use hdclust::{EncoderConfig, Hypervector, Mode, PointMatrix, RngStream, SeedSet};

pub fn random_binary(count: usize, dim: usize, seed: u64) -> Vec<Hypervector> {
    generate_random_hvs(&mut RngStream::new(seed), count, dim, Mode::Binary).expect("count > 0")
}

/// Uniform random features in `[0, 1)` with round-robin labels.
pub fn random_dataset(rows: usize, cols: usize, k: usize, seed: u64) -> RawDataset {
    let mut rng = RngStream::new(seed);
    let data = (0..rows * cols).map(|_| rng.unit()).collect();
    let features = PointMatrix::new(rows, cols, data).expect("finite values");
    RawDataset::new("random", features, (0..rows).map(|i| i % k).collect(), k).expect("valid dataset")
}

pub fn seeds_for(dataset: &RawDataset, config: &EncoderConfig, seed: u64) -> SeedSet {
    SeedSet::generate(&mut RngStream::new(seed), dataset.n_features(), config.q, config.dim, config.mode)
        .expect("valid seed parameters")
}

pub fn levels_for(dataset: &RawDataset, q: usize) -> LevelMatrix {
    hdclust::encoding::quantize(dataset, q).expect("valid quantization")
}

pub fn similarity_fixture(count: usize, dim: usize, seed: u64) -> SimilarityMatrix {
    query_similarity_matrix(&random_binary(count, dim, seed)).expect("uniform queries")
}
