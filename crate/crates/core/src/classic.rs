//! Traditional clustering: Lloyd k-means, centroid-linkage agglomerative
//! clustering and affinity propagation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::RngStream;

/// Dense row-major `N x D` matrix of finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PointMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::InvalidCount("points need at least one coordinate"));
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteFeature {
                row: pos / cols,
                column: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::LengthMismatch {
                left: bad.len(),
                right: cols,
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.data[i * self.cols + j])
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let data = indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center; ties go to the lowest index.
fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = squared_euclidean(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// Sum of squared distances to the assigned centers.
    pub objective: f64,
    pub iterations: usize,
    /// Stopped by a repeated assignment or a flat objective, not the cap.
    pub converged: bool,
    /// Objective after each assignment step.
    pub objective_trace: Vec<f64>,
}

/// k-means++ seeding: first center uniform, then proportional to D².
fn kmeans_plus_plus(points: &PointMatrix, k: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    let n = points.rows();
    let mut centers = vec![points.row(rng.below(n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| squared_euclidean(points.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.unit() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.below(n)
        };
        let c = points.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_euclidean(points.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

/// Lloyd's algorithm from k-means++ seeds.
///
/// Stops when assignments repeat, the objective's relative change drops
/// below 1e-9, or after `max_iterations` assignment steps. Empty clusters
/// keep their previous center.
pub fn kmeans(points: &PointMatrix, k: usize, rng: &mut RngStream, max_iterations: usize) -> Result<KMeansResult> {
    let n = points.rows();
    if k == 0 {
        return Err(Error::InvalidCount("k must be at least 1"));
    }
    if n < k {
        return Err(Error::InsufficientSamples { needed: k, got: n });
    }
    let dim = points.cols();
    let mut centers = kmeans_plus_plus(points, k, rng);
    let mut assignments: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iterations.max(1) {
        iterations += 1;
        let mut objective = 0.0;
        let next: Vec<usize> = (0..n)
            .map(|i| {
                let (c, d) = nearest(points.row(i), &centers);
                objective += d;
                c
            })
            .collect();
        let unchanged = next == assignments;
        let prev_objective = trace.last().copied();
        trace.push(objective);
        assignments = next;
        if unchanged {
            converged = true;
            break;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }

        if let Some(prev) = prev_objective {
            let scale = prev.abs().max(f64::MIN_POSITIVE);
            if (prev - objective).abs() / scale < 1e-9 {
                converged = true;
                break;
            }
        }
    }

    let objective = assignments
        .iter()
        .enumerate()
        .map(|(i, &c)| squared_euclidean(points.row(i), &centers[c]))
        .sum();
    Ok(KMeansResult {
        assignments,
        centers,
        objective,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Bottom-up clustering with mean representatives.
///
/// Starts from singletons, repeatedly merges the closest pair of clusters
/// (Euclidean distance between their means, ties to the lowest index pair)
/// and replaces the pair by the mean of all its points, until `k` remain.
/// Returned labels follow the order of each cluster's first point.
pub fn hierarchical(points: &PointMatrix, k: usize) -> Result<Vec<usize>> {
    let n = points.rows();
    if k == 0 {
        return Err(Error::InvalidCount("k must be at least 1"));
    }
    if n < k {
        return Err(Error::InsufficientSamples { needed: k, got: n });
    }
    let mut means: Vec<Vec<f64>> = (0..n).map(|i| points.row(i).to_vec()).collect();
    let mut sizes = vec![1usize; n];
    let mut active = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();
    // Squared distances; the upper triangle (i < j) is authoritative.
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            dist[i * n + j] = squared_euclidean(&means[i], &means[j]);
        }
    }

    for _ in 0..n - k {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in (0..n).filter(|&i| active[i]) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                let d = dist[i * n + j];
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        let (a, b, _) = best;
        let total = (sizes[a] + sizes[b]) as f64;
        let merged: Vec<f64> = means[a]
            .iter()
            .zip(&means[b])
            .map(|(x, y)| (x * sizes[a] as f64 + y * sizes[b] as f64) / total)
            .collect();
        means[a] = merged;
        sizes[a] += sizes[b];
        active[b] = false;
        for o in owner.iter_mut().filter(|o| **o == b) {
            *o = a;
        }
        for other in (0..n).filter(|&o| active[o] && o != a) {
            let d = squared_euclidean(&means[a], &means[other]);
            let (lo, hi) = if other < a { (other, a) } else { (a, other) };
            dist[lo * n + hi] = d;
        }
    }

    let mut dense = vec![usize::MAX; n];
    let mut next = 0;
    Ok(owner
        .iter()
        .map(|&o| {
            if dense[o] == usize::MAX {
                dense[o] = next;
                next += 1;
            }
            dense[o]
        })
        .collect())
}

/// Square similarity matrix (larger = more similar) with the preference on
/// its diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    s: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds from a row-major `n x n` block. Diagonal entries are kept as
    /// given until a preference is applied.
    pub fn new(n: usize, s: Vec<f64>) -> Result<Self> {
        if s.len() != n * n {
            return Err(Error::LengthMismatch {
                left: s.len(),
                right: n * n,
            });
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && !s[i * n + j].is_finite() {
                    return Err(Error::NonFiniteFeature { row: i, column: j });
                }
            }
        }
        Ok(Self { n, s })
    }

    /// Fills off-diagonal entries from `f(i, j)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut s = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s[i * n + j] = f(i, j);
                }
            }
        }
        Self::new(n, s)
    }

    /// Negative squared Euclidean distances between rows.
    pub fn negative_squared_euclidean(points: &PointMatrix) -> Result<Self> {
        let n = points.rows();
        let mut s = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = -squared_euclidean(points.row(i), points.row(j));
                s[i * n + j] = d;
                s[j * n + i] = d;
            }
        }
        Self::new(n, s)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[i * self.n + j]
    }

    /// Median of the off-diagonal entries.
    pub fn median_off_diagonal(&self) -> f64 {
        let mut v: Vec<f64> = (0..self.n)
            .flat_map(|i| (0..self.n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        v.sort_by(f64::total_cmp);
        let m = v.len();
        if m == 0 {
            return 0.0;
        }
        if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        }
    }

    pub fn set_preference(&mut self, p: f64) {
        for k in 0..self.n {
            self.s[k * self.n + k] = p;
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            s: self.s.iter().map(|x| x * factor).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    /// Median of the off-diagonal similarities.
    Median,
    /// Keep the diagonal already present in the matrix.
    Diagonal,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApConfig {
    /// Weight on the previous message, in `[0.5, 1)`.
    pub damping: f64,
    pub max_iterations: usize,
    /// Iterations with an unchanged exemplar set required to stop.
    pub convergence_window: usize,
    pub preference: Preference,
}

impl Default for ApConfig {
    fn default() -> Self {
        Self {
            damping: 0.9,
            max_iterations: 1000,
            convergence_window: 50,
            preference: Preference::Median,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApResult {
    pub exemplars: Vec<usize>,
    /// Dense labels in exemplar order.
    pub assignments: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    /// No point had positive net evidence; a single fallback exemplar was used.
    pub no_exemplar: bool,
    pub responsibilities: Vec<f64>,
    pub availabilities: Vec<f64>,
}

/// Affinity propagation by damped responsibility/availability updates.
pub fn affinity_propagation(sim: &SimilarityMatrix, cfg: &ApConfig) -> Result<ApResult> {
    let n = sim.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    if !(0.5..1.0).contains(&cfg.damping) {
        return Err(Error::Config(format!("damping {} outside [0.5, 1)", cfg.damping)));
    }
    let mut sim = sim.clone();
    match cfg.preference {
        Preference::Median => {
            let m = sim.median_off_diagonal();
            sim.set_preference(m);
        }
        Preference::Fixed(p) => sim.set_preference(p),
        Preference::Diagonal => {}
    }
    let s = &sim.s;
    let lambda = cfg.damping;
    let mut r = vec![0.0f64; n * n];
    let mut a = vec![0.0f64; n * n];
    let mut col = vec![0.0f64; n];
    let mut exemplars_mask = vec![false; n];
    let mut stable = 0usize;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;

        for i in 0..n {
            let row = i * n;
            let (mut best, mut best_k, mut second) = (f64::NEG_INFINITY, 0, f64::NEG_INFINITY);
            for k in 0..n {
                let v = a[row + k] + s[row + k];
                if v > best {
                    second = best;
                    best = v;
                    best_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let competitor = if k == best_k { second } else { best };
                let fresh = s[row + k] - competitor;
                r[row + k] = lambda * r[row + k] + (1.0 - lambda) * fresh;
            }
        }

        for k in 0..n {
            let mut sum = r[k * n + k];
            for i in (0..n).filter(|&i| i != k) {
                sum += r[i * n + k].max(0.0);
            }
            col[k] = sum;
        }
        for i in 0..n {
            for k in 0..n {
                let idx = i * n + k;
                let fresh = if i == k {
                    col[k] - r[idx]
                } else {
                    (col[k] - r[idx].max(0.0)).min(0.0)
                };
                a[idx] = lambda * a[idx] + (1.0 - lambda) * fresh;
            }
        }

        let mask: Vec<bool> = (0..n).map(|k| r[k * n + k] + a[k * n + k] > 0.0).collect();
        if mask == exemplars_mask {
            stable += 1;
        } else {
            stable = 1;
            exemplars_mask = mask;
        }
        if stable >= cfg.convergence_window && exemplars_mask.iter().any(|&e| e) {
            converged = true;
            break;
        }
    }

    let mut exemplars: Vec<usize> = (0..n).filter(|&k| exemplars_mask[k]).collect();
    let no_exemplar = exemplars.is_empty();
    if no_exemplar {
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..n {
            let total: f64 = (0..n).map(|j| sim.get(j, i)).sum();
            if total > best.1 {
                best = (i, total);
            }
        }
        exemplars.push(best.0);
    }
    let assignments = (0..n)
        .map(|i| {
            if let Some(pos) = exemplars.iter().position(|&e| e == i) {
                return pos;
            }
            let mut best = (0, f64::NEG_INFINITY);
            for (pos, &e) in exemplars.iter().enumerate() {
                let v = sim.get(i, e);
                if v > best.1 {
                    best = (pos, v);
                }
            }
            best.0
        })
        .collect();

    Ok(ApResult {
        exemplars,
        assignments,
        converged,
        iterations,
        no_exemplar,
        responsibilities: r,
        availabilities: a,
    })
}
