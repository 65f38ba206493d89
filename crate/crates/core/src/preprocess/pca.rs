//! Principal component analysis by eigendecomposition of the sample
//! covariance, with deterministic component ordering and signs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Fitted projection: orthonormal component rows, the training column means,
/// and the explained-variance ratio of each retained component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaState {
    /// `k x d`, one component per row.
    pub components: Vec<Vec<f64>>,
    pub component_means: Vec<f64>,
    pub variance_ratio: Vec<f64>,
}

impl PcaState {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn n_features(&self) -> usize {
        self.component_means.len()
    }
}

/// Fits PCA on the matrix and retains the smallest number of leading
/// components whose cumulative explained-variance ratio reaches
/// `variance_threshold` (at least one component is always kept).
///
/// Components are eigenvectors of the sample covariance, ordered by
/// descending eigenvalue; each component's sign is fixed so its
/// largest-magnitude entry is positive.
pub fn pca_fit(matrix: &FeatureMatrix, variance_threshold: f64) -> Result<PcaState> {
    let n = matrix.n_rows();
    let d = matrix.n_cols();
    if n < 2 || d == 0 {
        return Err(Error::InputShape(format!(
            "PCA needs at least 2 rows and 1 column, got {n}x{d}"
        )));
    }
    if !(0.0 < variance_threshold && variance_threshold <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "PCA variance threshold must lie in (0, 1], got {variance_threshold}"
        )));
    }
    if !matrix.all_finite() {
        return Err(Error::NonFinite("PCA input".into()));
    }

    let mut means = vec![0.0; d];
    for r in 0..n {
        for (c, m) in means.iter_mut().enumerate() {
            *m += matrix.get(r, c);
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }

    // Sample covariance (n - 1 normalization).
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for r in 0..n {
        let row = matrix.row(r);
        for i in 0..d {
            let di = row[i] - means[i];
            for j in i..d {
                cov[(i, j)] += di * (row[j] - means[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / (n as f64 - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    // Descending eigenvalue, original index as the deterministic tie-break.
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0))
        .collect();
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return Err(Error::Pipeline("PCA input matrix is constant".into()));
    }

    let mut cumulative = 0.0;
    let mut k = d;
    for (i, &ev) in eigenvalues.iter().enumerate() {
        cumulative += ev / total;
        if cumulative >= variance_threshold {
            k = i + 1;
            break;
        }
    }
    let k = k.max(1);

    let mut components = Vec::with_capacity(k);
    for &col in order.iter().take(k) {
        let mut comp: Vec<f64> = (0..d).map(|r| eig.eigenvectors[(r, col)]).collect();
        let mut lead = 0;
        for (i, v) in comp.iter().enumerate() {
            if v.abs() > comp[lead].abs() {
                lead = i;
            }
        }
        if comp[lead] < 0.0 {
            for v in &mut comp {
                *v = -*v;
            }
        }
        components.push(comp);
    }

    Ok(PcaState {
        components,
        component_means: means,
        variance_ratio: eigenvalues[..k].iter().map(|&ev| ev / total).collect(),
    })
}

/// Projects centered rows onto the retained components. Output columns are
/// named `pc1..pck`.
pub fn pca_apply(matrix: &FeatureMatrix, state: &PcaState) -> Result<FeatureMatrix> {
    let d = state.n_features();
    if matrix.n_cols() != d {
        return Err(Error::InputShape(format!(
            "PCA expects {d} features, got {}",
            matrix.n_cols()
        )));
    }
    let k = state.n_components();
    let mut data = Vec::with_capacity(matrix.n_rows() * k);
    for r in 0..matrix.n_rows() {
        let row = matrix.row(r);
        for comp in &state.components {
            let mut z = 0.0;
            for c in 0..d {
                z += (row[c] - state.component_means[c]) * comp[c];
            }
            data.push(z);
        }
    }
    let names = (1..=k).map(|i| format!("pc{i}")).collect();
    FeatureMatrix::new(names, matrix.n_rows(), k, data)
}
