//! Clustering accuracy against ground truth and multi-run statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts of (predicted cluster, true label) pairs. Predicted ids are
/// compacted to the clusters that actually occur.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contingency {
    pub table: Vec<Vec<usize>>,
    pub n_pred: usize,
    pub n_true: usize,
}

impl Contingency {
    pub fn new(assignments: &[usize], labels: &[usize], k: usize) -> Result<Self> {
        if assignments.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: assignments.len(),
                right: labels.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::LabelOutOfRange { label, k });
        }
        let max_id = assignments.iter().copied().max().map_or(0, |m| m + 1);
        let mut dense = vec![usize::MAX; max_id];
        let mut n_pred = 0;
        for &a in assignments {
            if dense[a] == usize::MAX {
                dense[a] = n_pred;
                n_pred += 1;
            }
        }
        let mut table = vec![vec![0usize; k]; n_pred];
        for (&a, &l) in assignments.iter().zip(labels) {
            table[dense[a]][l] += 1;
        }
        Ok(Self { table, n_pred, n_true: k })
    }

    pub fn total(&self) -> usize {
        self.table.iter().flatten().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyMethod {
    /// One-to-one optimal matching of clusters to labels.
    Matching,
    /// Each cluster mapped to its majority label (more clusters than labels).
    Majority,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Accuracy {
    pub value: f64,
    pub method: AccuracyMethod,
}

/// Maximum-weight assignment of rows to distinct columns (`rows <= cols`).
/// Returns the column chosen for each row.
pub fn max_weight_matching(weights: &[Vec<usize>]) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let m = weights[0].len();
    assert!(n <= m, "matching needs rows <= cols");
    let max = weights.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost = |i: usize, j: usize| max - weights[i][j] as i64;

    // Shortest augmenting path Hungarian method, 1-based with a virtual column 0.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=m {
        if row_of[j] != 0 {
            col_of[row_of[j] - 1] = j - 1;
        }
    }
    col_of
}

/// Accuracy under an explicit mapping. Matching needs at most `k`
/// occupied clusters.
pub fn accuracy_by(assignments: &[usize], labels: &[usize], k: usize, method: AccuracyMethod) -> Result<f64> {
    let c = Contingency::new(assignments, labels, k)?;
    let n = c.total();
    if n == 0 {
        return Err(Error::EmptyInput("accuracy of zero samples"));
    }
    let hits: usize = match method {
        AccuracyMethod::Matching => {
            if c.n_pred > k {
                return Err(Error::Config(format!("{} clusters cannot be matched to {k} labels", c.n_pred)));
            }
            let cols = max_weight_matching(&c.table);
            cols.iter().enumerate().map(|(r, &col)| c.table[r][col]).sum()
        }
        AccuracyMethod::Majority => c.table.iter().map(|row| row.iter().copied().max().unwrap_or(0)).sum(),
    };
    Ok(hits as f64 / n as f64)
}

/// Fraction of samples whose cluster maps to their true label.
///
/// With at most `k` occupied clusters the mapping is the optimal
/// one-to-one matching; with more, each cluster takes its majority label.
pub fn accuracy(assignments: &[usize], labels: &[usize], k: usize) -> Result<Accuracy> {
    let c = Contingency::new(assignments, labels, k)?;
    let method = if c.n_pred <= k {
        AccuracyMethod::Matching
    } else {
        AccuracyMethod::Majority
    };
    Ok(Accuracy {
        value: accuracy_by(assignments, labels, k, method)?,
        method,
    })
}

/// Summary statistics with boxplot whiskers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Smallest value within `q1 - 1.5 IQR`.
    pub whisker_low: f64,
    /// Largest value within `q3 + 1.5 IQR`.
    pub whisker_high: f64,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn aggregate(values: &[f64]) -> Result<RunStats> {
    if values.is_empty() {
        return Err(Error::EmptyInput("no values to aggregate"));
    }
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let whisker_low = *sorted.iter().find(|&&v| v >= q1 - 1.5 * iqr).unwrap();
    let whisker_high = *sorted.iter().rev().find(|&&v| v <= q3 + 1.5 * iqr).unwrap();
    Ok(RunStats {
        count: n,
        mean,
        std,
        min: sorted[0],
        q1,
        median: quantile(&sorted, 0.5),
        q3,
        max: sorted[n - 1],
        whisker_low,
        whisker_high,
    })
}
