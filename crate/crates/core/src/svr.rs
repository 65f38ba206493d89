//! ε-insensitive support vector regression: dual solver and prediction.
//!
//! The dual is minimized over the net coefficients `beta_i = alpha_i^+ -
//! alpha_i^-` directly:
//!
//! ```text
//!     minimize  1/2 β'Kβ + ε Σ|β_i| - y'β
//!     subject to Σβ_i = 0,  β_i ∈ [-C, C]
//! ```
//!
//! which is equivalent to the usual 2m-variable formulation because at any
//! optimum at most one of `alpha_i^+`, `alpha_i^-` is nonzero. Optimization
//! proceeds by pairwise updates `(β_i += t, β_j -= t)` on the maximal
//! KKT-violating pair; the one-dimensional subproblem is piecewise quadratic
//! with kinks where `β_i + t` or `β_j - t` changes sign, and is minimized
//! exactly on each linear piece of the sign partition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, kernel_eval_unchecked, KernelSpec};
use crate::matrix::FeatureMatrix;

/// Coefficients with `|β| ≤` this are dropped from the support set.
const SUPPORT_PRUNE: f64 = 1e-9;

/// Margin for classifying a coefficient as strictly between its bounds.
const FREE_MARGIN: f64 = 1e-12;

/// Recompute the cached gradient from scratch this often to cap drift from
/// incremental updates.
const REFRESH_INTERVAL: u64 = 65_536;

/// Training pairs `(x_i, y_i)`, already preprocessed and standardized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub x: FeatureMatrix,
    pub y: Vec<f64>,
}

impl TrainingSet {
    pub fn new(x: FeatureMatrix, y: Vec<f64>) -> Result<Self> {
        let set = Self { x, y };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.n_rows() != self.y.len() {
            return Err(Error::InputShape(format!(
                "{} feature rows vs {} targets",
                self.x.n_rows(),
                self.y.len()
            )));
        }
        if self.y.len() < 2 {
            return Err(Error::InputShape(format!(
                "training needs at least 2 points, got {}",
                self.y.len()
            )));
        }
        if self.x.n_cols() == 0 {
            return Err(Error::InputShape("training set has 0 features".into()));
        }
        if !self.x.all_finite() {
            return Err(Error::NonFinite("training features".into()));
        }
        if !self.y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("training targets".into()));
        }
        Ok(())
    }
}

/// Regularization weight, tube half-width, and kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub c: f64,
    pub epsilon: f64,
    pub kernel: KernelSpec,
}

impl HyperParams {
    pub fn new(c: f64, epsilon: f64, kernel: KernelSpec) -> Result<Self> {
        let h = Self { c, epsilon, kernel };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.c.is_finite() || self.c <= 0.0 {
            return Err(Error::InvalidParam(format!("C must be > 0, got {}", self.c)));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::InvalidParam(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        self.kernel.validate()
    }
}

/// Solver knobs. `max_iterations = None` selects the size-based default of
/// `min(10000 * m, 10^7)` pair updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kkt_tolerance: f64,
    pub max_iterations: Option<u64>,
    pub shrink: bool,
    /// Record the dual objective after every accepted update (diagnostics).
    pub log_objective: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kkt_tolerance: 1e-3,
            max_iterations: None,
            shrink: false,
            log_objective: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.kkt_tolerance.is_finite() || self.kkt_tolerance <= 0.0 {
            return Err(Error::InvalidParam("kkt_tolerance must be > 0".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidParam("max_iterations must be > 0".into()));
        }
        Ok(())
    }

    fn iteration_cap(&self, m: usize) -> u64 {
        self.max_iterations
            .unwrap_or_else(|| (10_000 * m as u64).min(10_000_000))
    }
}

/// Convergence diagnostics kept with the trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: u64,
    pub max_kkt_violation: f64,
    pub dual_objective: f64,
    /// Dual objective after each accepted update; empty unless
    /// [`SolverConfig::log_objective`] was set.
    #[serde(default)]
    pub objective_trajectory: Vec<f64>,
}

/// A trained ε-SVR model: support vectors, net dual coefficients, and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support_vectors: FeatureMatrix,
    pub beta: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub hyper: HyperParams,
    pub target_name: String,
    pub solver_report: SolverReport,
}

impl SvrModel {
    /// Assembles a model from explicit parts, checking shapes only. Intended
    /// for deserialization and tests; `solve_dual` is the normal constructor.
    pub fn from_parts(
        support_vectors: FeatureMatrix,
        beta: Vec<f64>,
        bias: f64,
        kernel: KernelSpec,
        hyper: HyperParams,
        target_name: String,
        solver_report: SolverReport,
    ) -> Result<Self> {
        if support_vectors.n_rows() != beta.len() {
            return Err(Error::InputShape(format!(
                "{} support vectors vs {} coefficients",
                support_vectors.n_rows(),
                beta.len()
            )));
        }
        kernel.validate()?;
        hyper.validate()?;
        if !beta.iter().all(|v| v.is_finite()) || !bias.is_finite() {
            return Err(Error::NonFinite("model coefficients".into()));
        }
        Ok(Self {
            support_vectors,
            beta,
            bias,
            kernel,
            hyper,
            target_name,
            solver_report,
        })
    }

    pub fn n_features(&self) -> usize {
        self.support_vectors.n_cols()
    }

    pub fn n_support(&self) -> usize {
        self.beta.len()
    }
}

/// Evaluates the dual expansion `f(x) = Σ β_i K(s_i, x) + b`.
pub fn predict(model: &SvrModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.n_features() {
        return Err(Error::InputShape(format!(
            "input has {} features, model expects {}",
            x.len(),
            model.n_features()
        )));
    }
    let mut sum = 0.0;
    for (i, &b) in model.beta.iter().enumerate() {
        sum += b * kernel_eval_unchecked(&model.kernel, model.support_vectors.row(i), x);
    }
    Ok(sum + model.bias)
}

/// Predictions for every row of a matrix.
pub fn predict_rows(model: &SvrModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    x.rows_iter().map(|row| predict(model, row)).collect()
}

/// Result of one KKT scan: extrema of the one-sided derivative bounds.
struct KktScan {
    /// `min_i G_i + ε·sign⁺(β_i)` over up-feasible points.
    m_up: f64,
    i_up: Option<usize>,
    /// `max_j G_j + ε·(β_j > 0 ? 1 : -1)` over down-feasible points, excluding `i_up`.
    m_down: f64,
    j_down: Option<usize>,
}

impl KktScan {
    fn violation(&self) -> f64 {
        if self.i_up.is_none() || self.j_down.is_none() {
            return 0.0;
        }
        self.m_down - self.m_up
    }
}

fn up_value(g: f64, beta: f64, eps: f64) -> f64 {
    if beta >= 0.0 {
        g + eps
    } else {
        g - eps
    }
}

fn down_value(g: f64, beta: f64, eps: f64) -> f64 {
    if beta > 0.0 {
        g + eps
    } else {
        g - eps
    }
}

/// Scans the active set for the maximal violating pair. Ties break toward the
/// lowest index, which keeps the update order deterministic.
fn scan_kkt(beta: &[f64], f: &[f64], y: &[f64], c: f64, eps: f64, active: &[bool]) -> KktScan {
    let mut m_up = f64::INFINITY;
    let mut i_up = None;
    // Track the two largest down values so the pair never degenerates to (i, i).
    let mut d1 = f64::NEG_INFINITY;
    let mut j1 = None;
    let mut d2 = f64::NEG_INFINITY;
    let mut j2 = None;
    for i in 0..beta.len() {
        if !active[i] {
            continue;
        }
        let g = f[i] - y[i];
        if beta[i] < c {
            let v = up_value(g, beta[i], eps);
            if v < m_up {
                m_up = v;
                i_up = Some(i);
            }
        }
        if beta[i] > -c {
            let v = down_value(g, beta[i], eps);
            if v > d1 {
                d2 = d1;
                j2 = j1;
                d1 = v;
                j1 = Some(i);
            } else if v > d2 {
                d2 = v;
                j2 = Some(i);
            }
        }
    }
    let (m_down, j_down) = if j1 == i_up { (d2, j2) } else { (d1, j1) };
    KktScan {
        m_up,
        i_up,
        m_down,
        j_down,
    }
}

/// Minimizes the piecewise-quadratic pair objective
/// `ΔW(t) = η t²/2 + (G_i - G_j) t + ε(|β_i+t| - |β_i|) + ε(|β_j-t| - |β_j|)`
/// over the box-feasible range. Returns `(t, ΔW(t))`.
///
/// Each linear piece of the sign partition is evaluated in the form
/// `η t²/2 + slope·t + offset` with exact per-piece constants; evaluating the
/// absolute-value differences directly would cancel catastrophically near
/// convergence. The slope is assembled with the same arithmetic as the KKT
/// scan, so a violating pair always produces a strictly negative candidate.
fn pair_step(eta: f64, gi: f64, gj: f64, bi: f64, bj: f64, c: f64, eps: f64) -> (f64, f64) {
    let t_lo = (-c - bi).max(bj - c);
    let t_hi = (c - bi).min(bj + c).max(t_lo);

    // Piece boundaries: feasible endpoints plus the sign kinks inside them.
    let mut bounds = [t_lo, t_hi, t_hi, t_hi];
    let mut n = 2;
    for kink in [-bi, bj] {
        if t_lo < kink && kink < t_hi {
            bounds[n] = kink;
            n += 1;
        }
    }
    bounds[..n].sort_by(|a, b| a.partial_cmp(b).unwrap());

    // t = 0 is always feasible and costs nothing; ties break toward smaller
    // total |β|.
    let mut best_t = 0.0;
    let mut best_w = 0.0;
    let mut best_mass = bi.abs() + bj.abs();
    let mut consider = |t: f64, w: f64| {
        let mass = (bi + t).abs() + (bj - t).abs();
        if w < best_w || (w == best_w && mass < best_mass) {
            best_t = t;
            best_w = w;
            best_mass = mass;
        }
    };

    for win in bounds[..n].windows(2) {
        let (a, b) = (win[0], win[1]);
        if a >= b {
            continue;
        }
        // Sign pattern is constant on the open piece; probe its midpoint.
        let mid = 0.5 * (a + b);
        let s = if bi + mid >= 0.0 { 1.0 } else { -1.0 };
        let r = if bj - mid >= 0.0 { 1.0 } else { -1.0 };
        // On this piece |β_i+t| = s(β_i+t) and |β_j-t| = r(β_j-t), so the
        // nonsmooth terms reduce to ε(s-r)t plus a constant.
        let slope = (gi + eps * s) - (gj + eps * r);
        let offset = eps * ((s * bi - bi.abs()) + (r * bj - bj.abs()));
        let piece = |t: f64| 0.5 * eta * t * t + slope * t + offset;
        consider(a, piece(a));
        consider(b, piece(b));
        if eta > 0.0 {
            let t_star = -slope / eta;
            if a < t_star && t_star < b {
                consider(t_star, piece(t_star));
            }
        }
    }
    (best_t, best_w)
}

/// Computes the bias from a converged coefficient vector and the cached
/// gradient `f = Kβ`: average of the KKT-implied values over free points, or
/// the midpoint of the feasible multiplier interval when no point is free.
///
/// Coefficients within `FREE_MARGIN` of 0 count as exactly 0 here: the ±ε
/// sign is discontinuous at the origin, and arithmetic residue on a point
/// that is mathematically inactive must not flip it.
fn bias_from_state(beta: &[f64], f: &[f64], y: &[f64], c: f64, eps: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..beta.len() {
        let a = beta[i].abs();
        if a > FREE_MARGIN && a < c - FREE_MARGIN {
            sum += y[i] - f[i] - beta[i].signum() * eps;
            count += 1;
        }
    }
    if count > 0 {
        return sum / count as f64;
    }
    let mut lo = f64::INFINITY; // min of up values
    let mut hi = f64::NEG_INFINITY; // max of down values
    for i in 0..beta.len() {
        let b = if beta[i].abs() <= FREE_MARGIN { 0.0 } else { beta[i] };
        let g = f[i] - y[i];
        if b < c {
            lo = lo.min(up_value(g, b, eps));
        }
        if b > -c {
            hi = hi.max(down_value(g, b, eps));
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return 0.0;
    }
    -(lo + hi) / 2.0
}

/// Recovers the bias term for a converged `beta` on a training set.
pub fn compute_bias(
    train: &TrainingSet,
    beta: &[f64],
    kernel: &KernelSpec,
    hyper: &HyperParams,
) -> Result<f64> {
    train.validate()?;
    kernel.validate()?;
    hyper.validate()?;
    if beta.len() != train.len() {
        return Err(Error::InputShape(format!(
            "{} coefficients for {} training points",
            beta.len(),
            train.len()
        )));
    }
    let m = train.len();
    let mut f = vec![0.0; m];
    for (l, &b) in beta.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        let xl = train.x.row(l);
        for (k, fk) in f.iter_mut().enumerate() {
            *fk += b * kernel_eval_unchecked(kernel, xl, train.x.row(k));
        }
    }
    Ok(bias_from_state(beta, &f, &train.y, hyper.c, hyper.epsilon))
}

fn dual_objective(beta: &[f64], f: &[f64], y: &[f64], eps: f64) -> f64 {
    let mut obj = 0.0;
    for i in 0..beta.len() {
        obj += 0.5 * beta[i] * f[i] + eps * beta[i].abs() - y[i] * beta[i];
    }
    obj
}

fn recompute_gradient(gram: &[Vec<f64>], beta: &[f64], f: &mut [f64]) {
    f.fill(0.0);
    for (l, &b) in beta.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        let row = &gram[l];
        for (k, fk) in f.iter_mut().enumerate() {
            *fk += b * row[k];
        }
    }
}

/// Trains an ε-SVR model by solving the dual problem to the configured KKT
/// tolerance. Deterministic: identical inputs produce identical models.
pub fn solve_dual(
    train: &TrainingSet,
    hyper: &HyperParams,
    config: &SolverConfig,
) -> Result<SvrModel> {
    train.validate()?;
    hyper.validate()?;
    let gram = gram_matrix(&hyper.kernel, &train.x)?;
    solve_dual_with_gram(train, &gram, hyper, config)
}

/// As [`solve_dual`] but with a caller-supplied Gram matrix, so tuning can
/// share one Gram across many `(C, ε)` candidates.
pub fn solve_dual_with_gram(
    train: &TrainingSet,
    gram: &[Vec<f64>],
    hyper: &HyperParams,
    config: &SolverConfig,
) -> Result<SvrModel> {
    train.validate()?;
    hyper.validate()?;
    config.validate()?;
    let m = train.len();
    if gram.len() != m || gram.iter().any(|r| r.len() != m) {
        return Err(Error::InputShape("Gram matrix does not match training set".into()));
    }
    let c = hyper.c;
    let eps = hyper.epsilon;
    let tol = config.kkt_tolerance;
    let cap = config.iteration_cap(m);
    let y = &train.y;

    let mut beta = vec![0.0; m];
    let mut f = vec![0.0; m];
    let mut active = vec![true; m];
    let mut n_active = m;
    let shrink_interval = (m as u64).max(1000);
    let mut iterations: u64 = 0;
    let mut last_refresh: u64 = u64::MAX;
    let mut trajectory = Vec::new();

    let final_violation;
    loop {
        let scan = scan_kkt(&beta, &f, y, c, eps, &active);
        let viol = scan.violation();

        if viol <= tol {
            if n_active < m {
                // Inner convergence on the shrunk set: bring everyone back and
                // re-check against the full problem.
                active.fill(true);
                n_active = m;
                recompute_gradient(gram, &beta, &mut f);
                last_refresh = iterations;
                continue;
            }
            if last_refresh != iterations {
                // Confirm on a freshly recomputed gradient before declaring
                // convergence; incremental updates accumulate rounding.
                recompute_gradient(gram, &beta, &mut f);
                last_refresh = iterations;
                continue;
            }
            final_violation = viol.max(0.0);
            break;
        }

        if iterations >= cap {
            recompute_gradient(gram, &beta, &mut f);
            let scan = scan_kkt(&beta, &f, y, c, eps, &vec![true; m]);
            return Err(Error::Convergence {
                iterations,
                violation: scan.violation(),
                tolerance: tol,
                objective: dual_objective(&beta, &f, y, eps),
            });
        }

        let i = scan.i_up.expect("violating scan has an up index");
        let j = scan.j_down.expect("violating scan has a down index");
        let eta = gram[i][i] + gram[j][j] - 2.0 * gram[i][j];
        let (t, dw) = pair_step(
            eta.max(0.0),
            f[i] - y[i],
            f[j] - y[j],
            beta[i],
            beta[j],
            c,
            eps,
        );
        let progressed =
            dw < 0.0 && ((beta[i] + t).clamp(-c, c) != beta[i] || (beta[j] - t).clamp(-c, c) != beta[j]);

        if !progressed {
            // Numerically stuck: retry on exact data, then give up honestly.
            if n_active < m {
                active.fill(true);
                n_active = m;
                recompute_gradient(gram, &beta, &mut f);
                last_refresh = iterations;
                continue;
            }
            if last_refresh != iterations {
                recompute_gradient(gram, &beta, &mut f);
                last_refresh = iterations;
                continue;
            }
            return Err(Error::Convergence {
                iterations,
                violation: viol,
                tolerance: tol,
                objective: dual_objective(&beta, &f, y, eps),
            });
        }

        let new_i = (beta[i] + t).clamp(-c, c);
        let new_j = (beta[j] - t).clamp(-c, c);
        let di = new_i - beta[i];
        let dj = new_j - beta[j];
        beta[i] = new_i;
        beta[j] = new_j;
        for k in 0..m {
            if active[k] {
                f[k] += di * gram[i][k] + dj * gram[j][k];
            }
        }
        iterations += 1;

        if config.log_objective {
            // Inactive entries of `f` may be stale, but shrinking only ever
            // freezes coefficients, so their contribution is recomputed here.
            if n_active < m {
                let mut full = vec![0.0; m];
                recompute_gradient(gram, &beta, &mut full);
                trajectory.push(dual_objective(&beta, &full, y, eps));
            } else {
                trajectory.push(dual_objective(&beta, &f, y, eps));
            }
        }

        if iterations.is_multiple_of(REFRESH_INTERVAL) {
            recompute_gradient(gram, &beta, &mut f);
            last_refresh = iterations;
        }

        if config.shrink && iterations.is_multiple_of(shrink_interval) && viol > 10.0 * tol {
            let margin = 10.0 * tol;
            for k in 0..m {
                if !active[k] {
                    continue;
                }
                let g = f[k] - y[k];
                let lock_high = beta[k] == c && down_value(g, beta[k], eps) < scan.m_up - margin;
                let lock_low = beta[k] == -c && up_value(g, beta[k], eps) > scan.m_down + margin;
                if lock_high || lock_low {
                    active[k] = false;
                    n_active -= 1;
                }
            }
            // Never shrink away the whole problem.
            if n_active < 2 {
                active.fill(true);
                n_active = m;
            }
        }
    }

    let bias = bias_from_state(&beta, &f, y, c, eps);
    let objective = dual_objective(&beta, &f, y, eps);

    // Extract support vectors. The pruned mass is folded into the retained
    // coefficient with the most box headroom so Σβ stays where the solver
    // left it.
    let mut keep = Vec::new();
    let mut pruned_mass = 0.0;
    for (i, &b) in beta.iter().enumerate() {
        if b.abs() > SUPPORT_PRUNE {
            keep.push(i);
        } else {
            pruned_mass += b;
        }
    }
    let mut sv_beta: Vec<f64> = keep.iter().map(|&i| beta[i]).collect();
    if pruned_mass != 0.0 && !sv_beta.is_empty() {
        let mut target = 0;
        let mut headroom = f64::NEG_INFINITY;
        for (k, &b) in sv_beta.iter().enumerate() {
            let room = c - b.abs();
            if room > headroom {
                headroom = room;
                target = k;
            }
        }
        if headroom >= pruned_mass.abs() {
            sv_beta[target] = (sv_beta[target] + pruned_mass).clamp(-c, c);
        }
    }
    let support_vectors = train.x.select_rows(&keep);

    Ok(SvrModel {
        support_vectors,
        beta: sv_beta,
        bias,
        kernel: hyper.kernel,
        hyper: hyper.clone(),
        target_name: String::new(),
        solver_report: SolverReport {
            iterations,
            max_kkt_violation: final_violation,
            dual_objective: objective,
            objective_trajectory: trajectory,
        },
    })
}
