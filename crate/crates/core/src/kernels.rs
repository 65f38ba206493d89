//! Kernel functions and Gram-matrix construction.
//!
//! The regression never materializes the feature map: data enters the dual
//! problem only through pairwise kernel values, so these two functions are the
//! whole interface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Kernel family and parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelSpec {
    /// `exp(-gamma * ||x - y||^2)` with `gamma > 0`.
    Rbf { gamma: f64 },
    /// `(gamma * <x, y> + coef0) ^ degree` with `gamma > 0`, `degree >= 1`,
    /// `coef0 >= 0`.
    Polynomial { gamma: f64, degree: u32, coef0: f64 },
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        let spec = KernelSpec::Rbf { gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn polynomial(gamma: f64, degree: u32, coef0: f64) -> Result<Self> {
        let spec = KernelSpec::Polynomial {
            gamma,
            degree,
            coef0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// RBF with the scale-aware default width `1 / (d * var)`, where `var` is
    /// the mean per-column population variance of the training matrix. Falls
    /// back to `1 / d` when the matrix is constant.
    pub fn rbf_scaled(train: &FeatureMatrix) -> Result<Self> {
        let d = train.n_cols();
        if d == 0 {
            return Err(Error::InputShape("cannot scale RBF on 0 features".into()));
        }
        let var = train.mean_column_variance();
        let gamma = if var > 0.0 {
            1.0 / (d as f64 * var)
        } else {
            1.0 / d as f64
        };
        KernelSpec::rbf(gamma)
    }

    /// Polynomial with default parameters: degree 3, `gamma = 1/d`, coef0 1.
    pub fn polynomial_default(n_features: usize) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InputShape(
                "cannot scale polynomial kernel on 0 features".into(),
            ));
        }
        KernelSpec::polynomial(1.0 / n_features as f64, 3, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } => {
                if !gamma.is_finite() || gamma <= 0.0 {
                    return Err(Error::InvalidParam(format!("RBF gamma must be > 0, got {gamma}")));
                }
            }
            KernelSpec::Polynomial {
                gamma,
                degree,
                coef0,
            } => {
                if !gamma.is_finite() || gamma <= 0.0 {
                    return Err(Error::InvalidParam(format!(
                        "polynomial gamma must be > 0, got {gamma}"
                    )));
                }
                if degree < 1 {
                    return Err(Error::InvalidParam("polynomial degree must be >= 1".into()));
                }
                if !coef0.is_finite() || coef0 < 0.0 {
                    return Err(Error::InvalidParam(format!(
                        "polynomial coef0 must be >= 0, got {coef0}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Short human-readable form for logs and reports, e.g. `rbf(gamma=0.25)`.
    pub fn describe(&self) -> String {
        match *self {
            KernelSpec::Rbf { gamma } => format!("rbf(gamma={gamma})"),
            KernelSpec::Polynomial {
                gamma,
                degree,
                coef0,
            } => format!("poly(degree={degree},gamma={gamma},coef0={coef0})"),
        }
    }
}

/// Integer power by repeated squaring; exact for the small degrees used here.
fn powi(base: f64, mut times: u32) -> f64 {
    let mut tmp = base;
    let mut ret = 1.0;
    while times > 0 {
        if times % 2 == 1 {
            ret *= tmp;
        }
        tmp *= tmp;
        times /= 2;
    }
    ret
}

/// Evaluates the kernel on two vectors of equal dimension.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::InputShape(format!(
            "kernel inputs must be non-empty and same length, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(kernel_eval_unchecked(spec, x, y))
}

/// `kernel_eval` without the shape check; used on hot paths where dimensions
/// are guaranteed by construction.
pub(crate) fn kernel_eval_unchecked(spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    match *spec {
        KernelSpec::Rbf { gamma } => {
            let mut dist2 = 0.0;
            for (a, b) in x.iter().zip(y) {
                let d = a - b;
                dist2 += d * d;
            }
            (-gamma * dist2).exp()
        }
        KernelSpec::Polynomial {
            gamma,
            degree,
            coef0,
        } => {
            let mut dot = 0.0;
            for (a, b) in x.iter().zip(y) {
                dot += a * b;
            }
            powi(gamma * dot + coef0, degree)
        }
    }
}

/// Dense Gram matrix `G[i][j] = K(x_i, x_j)` over the rows of `x`.
///
/// The upper triangle is computed and mirrored, so the result is exactly
/// symmetric.
pub fn gram_matrix(spec: &KernelSpec, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let m = x.n_rows();
    if m == 0 {
        return Err(Error::InputShape("Gram matrix of an empty matrix".into()));
    }
    if x.n_cols() == 0 {
        return Err(Error::InputShape("Gram matrix with 0 features".into()));
    }
    let mut g = vec![vec![0.0; m]; m];
    for (i, row) in g.iter_mut().enumerate() {
        let xi = x.row(i);
        for (j, cell) in row.iter_mut().enumerate().skip(i) {
            *cell = kernel_eval_unchecked(spec, xi, x.row(j));
        }
    }
    for i in 1..m {
        let (above, rest) = g.split_at_mut(i);
        let row = &mut rest[0];
        for (j, upper_row) in above.iter().enumerate() {
            row[j] = upper_row[i];
        }
    }
    Ok(g)
}
