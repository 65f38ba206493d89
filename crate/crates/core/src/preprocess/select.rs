//! Correlation-based feature selection.

use crate::matrix::FeatureMatrix;

/// Selection knobs: the |r| cutoff, names to drop unconditionally, and names
/// that correlation pruning may never remove (the raw pollutant columns).
#[derive(Debug, Clone)]
pub struct SelectOptions {
    pub threshold: f64,
    pub forced_drops: Vec<String>,
    pub always_keep: Vec<String>,
}

/// Pearson correlation of two equal-length columns; 0 when either is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Drops, for every pair with `|r|` strictly above the threshold, the feature
/// later in the matrix's column order — unless that feature is protected by
/// `always_keep`. `forced_drops` are removed unconditionally first. Returns
/// the selected names in their original order.
pub fn select_features(matrix: &FeatureMatrix, opts: &SelectOptions) -> Vec<String> {
    let names = matrix.names();
    let n = names.len();
    let mut dropped = vec![false; n];
    for (i, name) in names.iter().enumerate() {
        if opts.forced_drops.iter().any(|d| d == name) {
            dropped[i] = true;
        }
    }
    let columns: Vec<Vec<f64>> = (0..n).map(|c| matrix.column(c)).collect();
    for i in 0..n {
        if dropped[i] {
            continue;
        }
        for j in (i + 1)..n {
            if dropped[j] || opts.always_keep.iter().any(|k| k == &names[j]) {
                continue;
            }
            if pearson(&columns[i], &columns[j]).abs() > opts.threshold {
                dropped[j] = true;
            }
        }
    }
    names
        .iter()
        .enumerate()
        .filter(|&(i, _)| !dropped[i])
        .map(|(_, name)| name.clone())
        .collect()
}
