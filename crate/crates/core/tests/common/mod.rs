//! Shared test oracles, independent of the library's implementation paths:
//! a brute-force projected-gradient solver for the 2m-variable SVR dual and
//! a cyclic Jacobi eigensolver for symmetric matrices.

// Index-paired rotations read clearest in subscript form.
#![allow(dead_code, clippy::needless_range_loop)]

use aqcast_core::kernels::KernelSpec;

/// Kernel evaluation duplicated here so oracle predictions do not run through
/// the library's kernel path.
pub fn oracle_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    match *spec {
        KernelSpec::Rbf { gamma } => {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            (-gamma * d2).exp()
        }
        KernelSpec::Polynomial {
            gamma,
            degree,
            coef0,
        } => {
            let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            (gamma * dot + coef0).powi(degree as i32)
        }
    }
}

/// Result of the brute-force dual solve.
pub struct OracleSolution {
    pub beta: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
}

/// Solves the 2m-variable dual
///
/// ```text
///   min  1/2 (a+ - a-)' K (a+ - a-) + eps Σ(a+ + a-) - y'(a+ - a-)
///   s.t. Σ(a+ - a-) = 0,  a+, a- ∈ [0, C]^m
/// ```
///
/// by accelerated projected-gradient descent with monotone restarts, run to a
/// projected-gradient residual of 1e-10. Dense and slow by design; intended
/// for m ≤ ~10.
pub fn solve_dual_oracle(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    eps: f64,
    kernel: &KernelSpec,
) -> OracleSolution {
    let m = y.len();
    let mut k = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            k[i][j] = oracle_kernel(kernel, &x[i], &x[j]);
        }
    }
    // Lipschitz bound for the 2m Hessian [[K,-K],[-K,K]]: twice the
    // infinity-norm of K.
    let l = 2.0
        * k.iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0f64, f64::max)
        + 1e-12;

    let objective = |a: &[f64]| -> f64 {
        let beta: Vec<f64> = (0..m).map(|i| a[i] - a[m + i]).collect();
        let mut quad = 0.0;
        for i in 0..m {
            let mut ki = 0.0;
            for j in 0..m {
                ki += k[i][j] * beta[j];
            }
            quad += beta[i] * ki;
        }
        let linear: f64 = (0..m)
            .map(|i| eps * (a[i] + a[m + i]) - y[i] * beta[i])
            .sum();
        0.5 * quad + linear
    };
    let gradient = |a: &[f64], g: &mut [f64]| {
        let beta: Vec<f64> = (0..m).map(|i| a[i] - a[m + i]).collect();
        for i in 0..m {
            let mut ki = 0.0;
            for j in 0..m {
                ki += k[i][j] * beta[j];
            }
            g[i] = ki + eps - y[i];
            g[m + i] = -ki + eps + y[i];
        }
    };
    // Euclidean projection onto the box intersected with the hyperplane
    // Σa+ - Σa- = 0: clamp(v - lambda * sign) with lambda found by bisection.
    let project = |v: &[f64]| -> Vec<f64> {
        let bound = v.iter().fold(0.0f64, |acc, &t| acc.max(t.abs())) + c + 1.0;
        let gap = |lambda: f64| -> f64 {
            let mut s = 0.0;
            for i in 0..m {
                s += (v[i] - lambda).clamp(0.0, c);
                s -= (v[m + i] + lambda).clamp(0.0, c);
            }
            s
        };
        let mut lo = -bound;
        let mut hi = bound;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if gap(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = 0.5 * (lo + hi);
        let mut out = vec![0.0; 2 * m];
        for i in 0..m {
            out[i] = (v[i] - lambda).clamp(0.0, c);
            out[m + i] = (v[m + i] + lambda).clamp(0.0, c);
        }
        out
    };

    let n = 2 * m;
    let mut a = vec![0.0; n];
    let mut momentum = a.clone();
    let mut t_prev = 1.0f64;
    let mut g = vec![0.0; n];

    // Accelerated projected gradient with a monotone restart: whenever the
    // momentum step would raise the objective, take a plain PG step from the
    // current iterate instead and reset the momentum.
    for iter in 0..500_000 {
        gradient(&momentum, &mut g);
        let step: Vec<f64> = momentum
            .iter()
            .zip(&g)
            .map(|(&v, &gi)| v - gi / l)
            .collect();
        let mut next = project(&step);
        let mut restart = false;
        if objective(&next) > objective(&a) {
            gradient(&a, &mut g);
            let plain: Vec<f64> = a.iter().zip(&g).map(|(&v, &gi)| v - gi / l).collect();
            next = project(&plain);
            restart = true;
        }

        let t = if restart {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t_prev * t_prev).sqrt())
        };
        let coeff = if restart { 0.0 } else { (t_prev - 1.0) / t };
        momentum = next
            .iter()
            .zip(&a)
            .map(|(&xn, &xo)| xn + coeff * (xn - xo))
            .collect();
        a = next;
        t_prev = t;

        if iter % 64 == 0 {
            gradient(&a, &mut g);
            let probe: Vec<f64> = a.iter().zip(&g).map(|(&v, &gi)| v - gi / l).collect();
            let proj = project(&probe);
            let residual = proj
                .iter()
                .zip(&a)
                .map(|(p, v)| (p - v).abs())
                .fold(0.0f64, f64::max);
            if residual <= 1e-10 {
                break;
            }
        }
    }
    let beta: Vec<f64> = (0..m).map(|i| a[i] - a[m + i]).collect();
    let mut f = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            f[i] += k[i][j] * beta[j];
        }
    }
    let bias = oracle_bias(&beta, &f, y, c, eps);
    OracleSolution {
        objective: objective(&a),
        beta,
        bias,
    }
}

/// Bias from KKT: mean over free coefficients, else the midpoint of the
/// feasible multiplier interval.
///
/// Iterative-solver fuzz is snapped away first: a coefficient within the
/// margin of 0 or ±C is treated as exactly there, since the ±ε sign choice
/// is discontinuous at those points and a 1e-14 residue would otherwise flip
/// it and corrupt the interval.
fn oracle_bias(beta: &[f64], f: &[f64], y: &[f64], c: f64, eps: f64) -> f64 {
    let margin = 1e-7 * c.max(1.0);
    let snapped: Vec<f64> = beta
        .iter()
        .map(|&b| {
            if b.abs() <= margin {
                0.0
            } else if (b - c).abs() <= margin {
                c
            } else if (b + c).abs() <= margin {
                -c
            } else {
                b
            }
        })
        .collect();
    let mut sum = 0.0;
    let mut count = 0;
    for i in 0..snapped.len() {
        let a = snapped[i].abs();
        if a > 0.0 && a < c {
            sum += y[i] - f[i] - snapped[i].signum() * eps;
            count += 1;
        }
    }
    if count > 0 {
        return sum / count as f64;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..snapped.len() {
        let g = f[i] - y[i];
        if snapped[i] < c {
            let s = if snapped[i] >= 0.0 { eps } else { -eps };
            lo = lo.min(g + s);
        }
        if snapped[i] > -c {
            let s = if snapped[i] > 0.0 { eps } else { -eps };
            hi = hi.max(g + s);
        }
    }
    -(lo + hi) / 2.0
}

/// Oracle-side prediction from an oracle solution.
pub fn oracle_predict(
    sol: &OracleSolution,
    x_train: &[Vec<f64>],
    kernel: &KernelSpec,
    x: &[f64],
) -> f64 {
    let mut s = sol.bias;
    for (i, b) in sol.beta.iter().enumerate() {
        s += b * oracle_kernel(kernel, &x_train[i], x);
    }
    s
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues (unsorted) and eigenvectors as columns of `v`.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..200 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() < 1e-13 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cos = 1.0 / (1.0 + t * t).sqrt();
                let sin = t * cos;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = cos * akp - sin * akq;
                    a[k][q] = sin * akp + cos * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = cos * apk - sin * aqk;
                    a[q][k] = sin * apk + cos * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = cos * vkp - sin * vkq;
                    v[k][q] = sin * vkp + cos * vkq;
                }
            }
        }
    }
    let eigenvalues = (0..n).map(|i| a[i][i]).collect();
    (eigenvalues, v)
}

#[cfg(test)]
mod oracle_sanity {
    use super::*;

    #[test]
    fn jacobi_recovers_a_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let (mut vals, _) = jacobi_eigen(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((vals[0] - 1.0).abs() < 1e-10);
        assert!((vals[1] - 3.0).abs() < 1e-10);
    }
}
