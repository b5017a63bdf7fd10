//! Hyperdimensional clustering.
//!
//! Tabular data is quantized, encoded into high-dimensional binary or
//! integer hypervectors, and clustered by an assign/regenerate loop seeded
//! either randomly or from similarities between the encoded samples.
//! Classical k-means, hierarchical clustering and affinity propagation run
//! on the same data for comparison.

pub mod classic;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod experiment;
pub mod hdc;
pub mod hv;
pub mod metrics;
pub mod seed;

pub use classic::{ApConfig, PointMatrix, SimilarityMatrix};
pub use dataset::{DatasetSpec, Registry};
pub use encoding::{EncodedDataset, EncoderConfig, Encoding, RawDataset, TieSource};
pub use error::{Error, Result};
pub use experiment::{Algorithm, ExperimentConfig, RunRecord, RunReport};
pub use hdc::{ClusterModel, HdcMethod, RefinementConfig};
pub use hv::{Hypervector, Mode};
pub use metrics::{Accuracy, RunStats};
pub use seed::{RngStream, SeedSet};
