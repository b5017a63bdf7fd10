//! Clustering in hyperspace: the iterative assign/regenerate refinement,
//! HDCluster's random initialization and the four similarity-based
//! initializations.
//!
//! The similarity-based methods pick initial clusters from the encoded data
//! rather than from random points of `{0,1}^d`:
//!
//! * **SB k-means**: 1-d k-means over the similarity of every query to a
//!   random anchor query.
//! * **Bin width**: `k` equal-width bins over that same profile; empty bins
//!   get random cluster hypervectors.
//! * **Bin height**: `k` near-equal-count groups of the sorted profile.
//! * **SB affinity propagation**: affinity propagation over the full
//!   pairwise query similarity matrix.
//!
//! Every method then builds its initial cluster hypervectors by bundling
//! the members of each initial group, and [`refine`] takes over.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classic::{affinity_propagation, kmeans, ApConfig, PointMatrix, SimilarityMatrix};
use crate::encoding::EncodedDataset;
use crate::error::{Error, Result};
use crate::hv::{hamming_words, similarity, Hypervector, MajorityCounter, Mode, Similarity, TieBreaker};
use crate::seed::{generate_random_hvs, RngStream};

/// Stopping rules for the refinement loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementConfig {
    pub max_iterations: usize,
    /// Integer mode stops once every center keeps cosine above this.
    pub cosine_threshold: f64,
    /// Binary mode stops once every center moves less than this.
    pub hamming_threshold: f64,
    /// A single assignment against the initial centers, no regeneration.
    pub one_pass: bool,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            cosine_threshold: 0.99,
            hamming_threshold: 0.01,
            one_pass: false,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        for (name, t) in [("cosine", self.cosine_threshold), ("hamming", self.hamming_threshold)] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("{name} threshold {t} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// Max normalized Hamming (binary) or min cosine (integer) between
    /// consecutive center sets.
    pub change: f64,
    pub reassigned: usize,
    pub empty_clusters: usize,
    /// All-zero integer centers; they lose every assignment.
    pub zero_centers: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterModel {
    pub centers: Vec<Hypervector>,
    pub assignments: Vec<usize>,
    /// Regenerate-and-reassign rounds executed.
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<IterationTrace>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centers.len()
    }
}

fn check_centers(queries: &[Hypervector], centers: &[Hypervector]) -> Result<()> {
    if centers.is_empty() {
        return Err(Error::InvalidCount("need at least one center"));
    }
    let reference = queries.first().unwrap_or(&centers[0]);
    for c in centers.iter().chain(queries) {
        if c.mode() != reference.mode() {
            return Err(Error::ModeMismatch);
        }
        if c.dim() != reference.dim() {
            return Err(Error::DimensionMismatch {
                left: c.dim(),
                right: reference.dim(),
            });
        }
    }
    Ok(())
}

fn dot(a: &[i32], b: &[i32]) -> i64 {
    a.iter().zip(b).map(|(&x, &y)| x as i64 * y as i64).sum()
}

/// Nearest center per query: minimum Hamming (binary) or maximum cosine
/// (integer). Ties go to the lowest center index; all-zero integer centers
/// never win.
pub fn assign(queries: &[Hypervector], centers: &[Hypervector]) -> Result<Vec<usize>> {
    check_centers(queries, centers)?;
    match centers[0].mode() {
        Mode::Binary => Ok(queries
            .par_iter()
            .map(|q| {
                let qw = q.words().unwrap();
                let mut best = (0, u32::MAX);
                for (c, center) in centers.iter().enumerate() {
                    let d = hamming_words(qw, center.words().unwrap());
                    if d < best.1 {
                        best = (c, d);
                    }
                }
                best.0
            })
            .collect()),
        Mode::Integer => {
            let norms: Vec<f64> = centers.iter().map(Hypervector::norm).collect();
            if norms.iter().all(|&n| n == 0.0) {
                return Err(Error::ZeroVector);
            }
            queries
                .par_iter()
                .map(|q| {
                    let qv = q.ints().unwrap();
                    let qn = q.norm();
                    if qn == 0.0 {
                        return Err(Error::ZeroVector);
                    }
                    let mut best = (0, f64::NEG_INFINITY);
                    for (c, center) in centers.iter().enumerate() {
                        if norms[c] == 0.0 {
                            continue;
                        }
                        let cos = dot(qv, center.ints().unwrap()) as f64 / (qn * norms[c]);
                        if cos > best.1 {
                            best = (c, cos);
                        }
                    }
                    Ok(best.0)
                })
                .collect()
        }
    }
}

/// Bundles each cluster's members into its new center. Empty clusters keep
/// their previous center. Binary clusters of even size draw a tie mask from
/// `ties`, in cluster order.
pub fn regenerate(
    queries: &[Hypervector],
    assignments: &[usize],
    previous: &[Hypervector],
    ties: &mut dyn TieBreaker,
) -> Result<Vec<Hypervector>> {
    check_centers(queries, previous)?;
    if assignments.len() != queries.len() {
        return Err(Error::LengthMismatch {
            left: assignments.len(),
            right: queries.len(),
        });
    }
    let k = previous.len();
    if let Some(&index) = assignments.iter().find(|&&a| a >= k) {
        return Err(Error::IndexOutOfRange { index, len: k });
    }
    let dim = previous[0].dim();
    match previous[0].mode() {
        Mode::Binary => {
            let mut counters: Vec<MajorityCounter> = (0..k).map(|_| MajorityCounter::new(dim)).collect();
            for (q, &a) in queries.iter().zip(assignments) {
                counters[a].add_words(q.words().unwrap());
            }
            counters
                .iter()
                .zip(previous)
                .map(|(c, prev)| if c.count() == 0 { Ok(prev.clone()) } else { c.majority(ties) })
                .collect()
        }
        Mode::Integer => {
            let mut sums = vec![vec![0i32; dim]; k];
            let mut counts = vec![0usize; k];
            for (q, &a) in queries.iter().zip(assignments) {
                counts[a] += 1;
                for (s, x) in sums[a].iter_mut().zip(q.ints().unwrap()) {
                    *s += x;
                }
            }
            Ok(sums
                .into_iter()
                .zip(counts)
                .zip(previous)
                .map(|((s, n), prev)| if n == 0 { prev.clone() } else { Hypervector::from_ints(s) })
                .collect())
        }
    }
}

/// Max Hamming (binary) or min cosine (integer) between matched centers.
fn center_change(old: &[Hypervector], new: &[Hypervector]) -> f64 {
    match old[0].mode() {
        Mode::Binary => old
            .iter()
            .zip(new)
            .map(|(a, b)| hamming_words(a.words().unwrap(), b.words().unwrap()) as f64 / a.dim() as f64)
            .fold(0.0, f64::max),
        Mode::Integer => old
            .iter()
            .zip(new)
            .map(|(a, b)| {
                if a == b {
                    1.0
                } else {
                    similarity(a, b).map_or(0.0, |s| s.value)
                }
            })
            .fold(1.0, f64::min),
    }
}

/// Alternates regeneration and assignment from `initial` centers until the
/// centers stop moving or `max_iterations` rounds have run.
///
/// One round regenerates every center from the current assignment and then
/// reassigns all queries. The rng supplies tie masks for binary bundles.
pub fn refine(
    queries: &[Hypervector],
    initial: Vec<Hypervector>,
    config: &RefinementConfig,
    rng: &mut RngStream,
) -> Result<ClusterModel> {
    config.validate()?;
    let mut centers = initial;
    let mut assignments = assign(queries, &centers)?;
    if config.one_pass {
        return Ok(ClusterModel {
            centers,
            assignments,
            iterations: 0,
            converged: false,
            trace: Vec::new(),
        });
    }
    let mode = centers[0].mode();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let next = regenerate(queries, &assignments, &centers, rng)?;
        let change = center_change(&centers, &next);
        centers = next;
        let reassigned_to = assign(queries, &centers)?;
        let reassigned = reassigned_to.iter().zip(&assignments).filter(|(a, b)| a != b).count();
        assignments = reassigned_to;

        let mut occupied = vec![false; centers.len()];
        for &a in &assignments {
            occupied[a] = true;
        }
        trace.push(IterationTrace {
            change,
            reassigned,
            empty_clusters: occupied.iter().filter(|&&o| !o).count(),
            zero_centers: centers.iter().filter(|c| mode == Mode::Integer && c.is_zero()).count(),
        });
        let done = match mode {
            Mode::Binary => change < config.hamming_threshold,
            Mode::Integer => change > config.cosine_threshold,
        };
        if done {
            converged = true;
            break;
        }
    }
    Ok(ClusterModel {
        centers,
        assignments,
        iterations,
        converged,
        trace,
    })
}

/// HDCluster's initialization: `k` fresh random hypervectors.
pub fn init_hdcluster(k: usize, dim: usize, mode: Mode, rng: &mut RngStream) -> Result<Vec<Hypervector>> {
    generate_random_hvs(rng, k, dim, mode)
}

/// Similarity of every query to the anchor; the anchor's own entry is the
/// analytic self-similarity.
pub fn similarity_profile(queries: &[Hypervector], anchor: usize) -> Result<Vec<f64>> {
    let a = queries.get(anchor).ok_or(Error::IndexOutOfRange {
        index: anchor,
        len: queries.len(),
    })?;
    queries
        .par_iter()
        .enumerate()
        .map(|(j, q)| {
            if j == anchor {
                Ok(Similarity::identical(a.mode().metric()).value)
            } else {
                similarity(a, q).map(|s| s.value)
            }
        })
        .collect()
}

/// 1-d k-means (k-means++ seeded) over a similarity profile.
pub fn init_sb_kmeans(profile: &[f64], k: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    let points = PointMatrix::new(profile.len(), 1, profile.to_vec())?;
    Ok(kmeans(&points, k, rng, 300)?.assignments)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinWidthInit {
    pub assignments: Vec<usize>,
    /// Bins that received no sample and need a random center.
    pub empty: Vec<bool>,
    /// The profile was constant: everything fell into bin 0.
    pub degenerate: bool,
}

/// `k` equal-width bins spanning `[min, max]` of the profile.
pub fn init_bin_width(profile: &[f64], k: usize) -> Result<BinWidthInit> {
    if profile.is_empty() {
        return Err(Error::EmptyInput("empty similarity profile"));
    }
    if k == 0 {
        return Err(Error::InvalidCount("k must be at least 1"));
    }
    let lo = profile.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = hi <= lo;
    let assignments: Vec<usize> = profile
        .iter()
        .map(|&v| {
            if degenerate {
                0
            } else {
                (((v - lo) / (hi - lo) * k as f64).floor() as usize).min(k - 1)
            }
        })
        .collect();
    let mut empty = vec![true; k];
    for &a in &assignments {
        empty[a] = false;
    }
    Ok(BinWidthInit {
        assignments,
        empty,
        degenerate,
    })
}

/// `k` contiguous groups of the sorted profile; the first `N mod k` groups
/// hold one extra sample. Equal values keep input order.
pub fn init_bin_height(profile: &[f64], k: usize) -> Result<Vec<usize>> {
    let n = profile.len();
    if k == 0 {
        return Err(Error::InvalidCount("k must be at least 1"));
    }
    if n < k {
        return Err(Error::InsufficientSamples { needed: k, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| profile[a].total_cmp(&profile[b]));
    let (base, extra) = (n / k, n % k);
    let mut assignments = vec![0; n];
    let mut pos = 0;
    for group in 0..k {
        let size = base + usize::from(group < extra);
        for &i in &order[pos..pos + size] {
            assignments[i] = group;
        }
        pos += size;
    }
    Ok(assignments)
}

/// Pairwise query similarities oriented so larger means closer:
/// `-δ` for binary, cosine for integer. The diagonal is left at zero.
pub fn query_similarity_matrix(queries: &[Hypervector]) -> Result<SimilarityMatrix> {
    let n = queries.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Ok(0.0)
                    } else {
                        similarity(&queries[i], &queries[j]).map(|s| s.affinity())
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    SimilarityMatrix::new(n, rows.concat())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffinityInit {
    pub assignments: Vec<usize>,
    pub exemplars: Vec<usize>,
    pub converged: bool,
    pub ap_iterations: usize,
    pub no_exemplar: bool,
}

impl AffinityInit {
    pub fn n_clusters(&self) -> usize {
        self.exemplars.len()
    }
}

/// Affinity propagation over the query similarity matrix.
pub fn init_sb_affinity(queries: &[Hypervector], ap: &ApConfig) -> Result<AffinityInit> {
    let sim = query_similarity_matrix(queries)?;
    let r = affinity_propagation(&sim, ap)?;
    Ok(AffinityInit {
        assignments: r.assignments,
        exemplars: r.exemplars,
        converged: r.converged,
        ap_iterations: r.iterations,
        no_exemplar: r.no_exemplar,
    })
}

/// Initial cluster hypervectors from an initial grouping: members are
/// bundled, empty groups get fresh random hypervectors. Draws happen in
/// cluster order.
pub fn centers_from_assignments(
    queries: &[Hypervector],
    assignments: &[usize],
    k: usize,
    rng: &mut RngStream,
) -> Result<Vec<Hypervector>> {
    let first = queries.first().ok_or(Error::EmptyInput("no queries"))?;
    let (dim, mode) = (first.dim(), first.mode());
    let mut members: Vec<Vec<&Hypervector>> = vec![Vec::new(); k];
    for (q, &a) in queries.iter().zip(assignments) {
        members
            .get_mut(a)
            .ok_or(Error::IndexOutOfRange { index: a, len: k })?
            .push(q);
    }
    members
        .iter()
        .map(|m| {
            if m.is_empty() {
                Ok(generate_random_hvs(rng, 1, dim, mode)?.remove(0))
            } else {
                crate::hv::bundle(m, rng)
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HdcMethod {
    HdCluster,
    SbKmeans,
    BinWidth,
    BinHeight,
    SbAffinity,
}

/// Everything a run of one HDC method produced.
#[derive(Clone, Debug, PartialEq)]
pub struct HdcOutcome {
    pub model: ClusterModel,
    pub anchor: Option<usize>,
    pub initial_assignments: Option<Vec<usize>>,
    /// Initial clusters seeded by random hypervectors.
    pub random_centers: usize,
    pub affinity: Option<AffinityInit>,
}

/// Initializes with `method` and refines.
///
/// The anchor of the profile-based methods is drawn from `rng` first,
/// followed by any draws the initializer, center construction and
/// refinement make.
pub fn cluster(
    encoded: &EncodedDataset,
    method: HdcMethod,
    refinement: &RefinementConfig,
    ap: &ApConfig,
    rng: &mut RngStream,
) -> Result<HdcOutcome> {
    let queries = &encoded.queries;
    let n = queries.len();
    let k = encoded.k;
    if n == 0 {
        return Err(Error::EmptyInput("no queries"));
    }
    let mut anchor = None;
    let mut profile = || -> Result<Vec<f64>> {
        let a = rng.below(n);
        anchor = Some(a);
        similarity_profile(queries, a)
    };
    let (initial, k_eff, affinity) = match method {
        HdcMethod::HdCluster => {
            let centers = init_hdcluster(k, encoded.dim, encoded.mode, rng)?;
            let model = refine(queries, centers, refinement, rng)?;
            return Ok(HdcOutcome {
                model,
                anchor: None,
                initial_assignments: None,
                random_centers: k,
                affinity: None,
            });
        }
        HdcMethod::SbKmeans => {
            let p = profile()?;
            if n < k {
                return Err(Error::InsufficientSamples { needed: k, got: n });
            }
            (init_sb_kmeans(&p, k, rng)?, k, None)
        }
        HdcMethod::BinWidth => (init_bin_width(&profile()?, k)?.assignments, k, None),
        HdcMethod::BinHeight => (init_bin_height(&profile()?, k)?, k, None),
        HdcMethod::SbAffinity => {
            let init = init_sb_affinity(queries, ap)?;
            (init.assignments.clone(), init.n_clusters(), Some(init))
        }
    };
    let mut occupied = vec![false; k_eff];
    for &a in &initial {
        occupied[a] = true;
    }
    let centers = centers_from_assignments(queries, &initial, k_eff, rng)?;
    let model = refine(queries, centers, refinement, rng)?;
    Ok(HdcOutcome {
        model,
        anchor,
        initial_assignments: Some(initial),
        random_centers: occupied.iter().filter(|&&o| !o).count(),
        affinity,
    })
}
