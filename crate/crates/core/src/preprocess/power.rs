//! Yeo-Johnson power transform and maximum-likelihood lambda estimation.

use crate::error::{Error, Result};

/// Fewest observations accepted by [`yeo_johnson_fit`].
pub const MIN_FIT_SAMPLES: usize = 10;

/// Applies the Yeo-Johnson map for a fixed `lambda`.
///
/// The four branches (x >= 0 / x < 0 crossed with the lambda = 0 / lambda = 2
/// limits) are evaluated through `expm1`/`ln_1p`, which keeps the map smooth
/// as lambda approaches the special values.
pub fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        if lambda == 0.0 {
            x.ln_1p()
        } else {
            (lambda * x.ln_1p()).exp_m1() / lambda
        }
    } else if lambda == 2.0 {
        -(-x).ln_1p()
    } else {
        -((2.0 - lambda) * (-x).ln_1p()).exp_m1() / (2.0 - lambda)
    }
}

/// Inverse of [`yeo_johnson`].
pub fn yeo_johnson_inverse(y: f64, lambda: f64) -> f64 {
    if y >= 0.0 {
        if lambda == 0.0 {
            y.exp_m1()
        } else {
            ((lambda * y).ln_1p() / lambda).exp_m1()
        }
    } else if lambda == 2.0 {
        -(-y).exp_m1()
    } else {
        -(((lambda - 2.0) * y).ln_1p() / (2.0 - lambda)).exp_m1()
    }
}

/// Profile log-likelihood of the transformed sample under a normal model:
/// `-n/2 ln(sigma^2) + (lambda - 1) sum sign(x) ln(1 + |x|)`.
fn log_likelihood(values: &[f64], lambda: f64) -> f64 {
    let n = values.len() as f64;
    let mut mean = 0.0;
    let transformed: Vec<f64> = values.iter().map(|&x| yeo_johnson(x, lambda)).collect();
    for &t in &transformed {
        mean += t;
    }
    mean /= n;
    let mut var = 0.0;
    for &t in &transformed {
        let d = t - mean;
        var += d * d;
    }
    var /= n;
    if !var.is_finite() || var <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let jacobian: f64 = values
        .iter()
        .map(|&x| x.signum() * x.abs().ln_1p())
        .sum();
    -0.5 * n * var.ln() + (lambda - 1.0) * jacobian
}

/// Fits lambda by golden-section maximization of the profile log-likelihood
/// over `[-5, 5]`, to a bracket width of 1e-4.
pub fn yeo_johnson_fit(values: &[f64]) -> Result<f64> {
    if values.len() < MIN_FIT_SAMPLES {
        return Err(Error::Pipeline(format!(
            "power-transform fit needs at least {MIN_FIT_SAMPLES} values, got {}",
            values.len()
        )));
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("power-transform input".into()));
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Err(Error::Pipeline(
            "power-transform fit on a constant column".into(),
        ));
    }

    const INV_PHI: f64 = 0.618_033_988_749_894_9; // (sqrt(5) - 1) / 2
    let mut a = -5.0;
    let mut b = 5.0;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = log_likelihood(values, c);
    let mut fd = log_likelihood(values, d);
    while b - a > 1e-4 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = log_likelihood(values, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = log_likelihood(values, d);
        }
    }
    Ok(0.5 * (a + b))
}
