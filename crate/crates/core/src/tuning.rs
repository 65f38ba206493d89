//! Hyperparameter selection: expanding-window time-series splits combined
//! with random grid search over `(C, ε)` and the kernel.
//!
//! Every fold fits its own preprocessing pipeline on the fold's training rows
//! only, so no validation statistic ever leaks into a fitted parameter. The
//! candidate sequence is generated up front from the seed, making trial
//! evaluation order-independent and reproducible under parallel execution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::TimeSeriesFrame;
use crate::kernels::{gram_matrix, KernelSpec};
use crate::matrix::FeatureMatrix;
use crate::preprocess::{pipeline_apply_full, pipeline_fit, PipelineConfig, PipelineState};
use crate::svr::{predict, solve_dual_with_gram, HyperParams, SolverConfig, TrainingSet};

/// One expanding-window fold: rows `0..train_end` train, rows
/// `train_end..validation_end` validate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train_end: usize,
    pub validation_end: usize,
}

impl Fold {
    pub fn train_indices(&self) -> Vec<usize> {
        (0..self.train_end).collect()
    }

    pub fn validation_indices(&self) -> Vec<usize> {
        (self.train_end..self.validation_end).collect()
    }
}

/// The full expanding-window plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: Vec<Fold>,
}

/// Splits `n` rows into `folds + 1` equal blocks (remainder to the first
/// block); fold k trains on blocks `1..=k` and validates on block `k + 1`.
pub fn time_series_split(n: usize, folds: usize) -> Result<SplitPlan> {
    if folds == 0 {
        return Err(Error::InvalidParam("need at least 1 fold".into()));
    }
    if n < 2 * (folds + 1) {
        return Err(Error::InputShape(format!(
            "time-series split of {n} rows into {folds} folds needs at least {} rows",
            2 * (folds + 1)
        )));
    }
    let blocks = folds + 1;
    let base = n / blocks;
    let first = base + n % blocks;
    let mut boundaries = Vec::with_capacity(blocks + 1);
    boundaries.push(0);
    boundaries.push(first);
    for k in 2..=blocks {
        boundaries.push(first + (k - 1) * base);
    }
    let folds = (1..blocks)
        .map(|k| Fold {
            train_end: boundaries[k],
            validation_end: boundaries[k + 1],
        })
        .collect();
    Ok(SplitPlan { folds })
}

/// The sampling domain of the random grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Continuous range for C.
    pub c_range: (f64, f64),
    /// Discrete grid for ε.
    pub epsilon_grid: Vec<f64>,
    pub kernel_candidates: Vec<KernelSpec>,
    pub iterations: usize,
    pub seed: u64,
}

impl SearchSpace {
    /// The default ε grid: 0.001 to 0.100 in steps of 0.001.
    pub fn default_epsilon_grid() -> Vec<f64> {
        (1..=100).map(|k| k as f64 / 1000.0).collect()
    }

    /// C on [1, 100], the default ε grid, and 60 iterations.
    pub fn new(kernel_candidates: Vec<KernelSpec>, seed: u64) -> Self {
        Self {
            c_range: (1.0, 100.0),
            epsilon_grid: Self::default_epsilon_grid(),
            kernel_candidates,
            iterations: 60,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_range.0 > 0.0 && self.c_range.0 <= self.c_range.1) {
            return Err(Error::InvalidParam(format!(
                "C range [{}, {}] is invalid",
                self.c_range.0, self.c_range.1
            )));
        }
        if self.epsilon_grid.is_empty() {
            return Err(Error::InvalidParam("epsilon grid is empty".into()));
        }
        if self.epsilon_grid.iter().any(|&e| !e.is_finite() || e < 0.0) {
            return Err(Error::InvalidParam("epsilon grid has invalid entries".into()));
        }
        if self.kernel_candidates.is_empty() {
            return Err(Error::InvalidParam("no kernel candidates".into()));
        }
        for k in &self.kernel_candidates {
            k.validate()?;
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParam("search needs at least 1 iteration".into()));
        }
        Ok(())
    }

    /// The deterministic candidate sequence for this space. Each trial draws,
    /// in order: C uniform on the range, an ε grid index, a kernel index.
    pub fn candidates(&self) -> Vec<HyperParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lo, hi) = self.c_range;
        (0..self.iterations)
            .map(|_| {
                let c = lo + (hi - lo) * rng.gen::<f64>();
                let epsilon = self.epsilon_grid[rng.gen_range(0..self.epsilon_grid.len())];
                let kernel = self.kernel_candidates[rng.gen_range(0..self.kernel_candidates.len())];
                HyperParams { c, epsilon, kernel }
            })
            .collect()
    }
}

/// Outcome of one sampled candidate. A fold that fails to converge scores
/// infinite RMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_index: usize,
    pub hyper: HyperParams,
    pub per_fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
}

/// Per-fold data shared by every trial: the fold's fitted pipeline, training
/// set, and transformed validation rows.
struct FoldData {
    state: PipelineState,
    train: TrainingSet,
    val_features: FeatureMatrix,
    val_target_raw: Vec<f64>,
}

fn prepare_folds(
    frame: &TimeSeriesFrame,
    pipeline: &PipelineConfig,
    plan: &SplitPlan,
) -> Result<Vec<FoldData>> {
    let n = frame.n_rows();
    let mut out = Vec::with_capacity(plan.folds.len());
    for (k, fold) in plan.folds.iter().enumerate() {
        if fold.train_end == 0 || fold.validation_end <= fold.train_end || fold.validation_end > n {
            return Err(Error::InvalidParam(format!(
                "fold {} ranges [0,{}) / [{},{}) do not fit {} rows",
                k + 1,
                fold.train_end,
                fold.train_end,
                fold.validation_end,
                n
            )));
        }
        let train_frame = frame.select_rows(&fold.train_indices());
        let (state, train) = pipeline_fit(&train_frame, pipeline)?;
        let val_frame = frame.select_rows(&fold.validation_indices());
        let applied = pipeline_apply_full(&val_frame, &state)?;
        if applied.features.n_rows() == 0 {
            return Err(Error::Pipeline(format!(
                "fold {} has no validation rows after preprocessing",
                k + 1
            )));
        }
        out.push(FoldData {
            state,
            train,
            val_features: applied.features,
            val_target_raw: applied.target_raw,
        });
    }
    Ok(out)
}

/// Validation RMSE in original target units for one candidate on one fold.
fn fold_rmse(fold: &FoldData, gram: &[Vec<f64>], hyper: &HyperParams, solver: &SolverConfig)
    -> std::result::Result<f64, String>
{
    let model = solve_dual_with_gram(&fold.train, gram, hyper, solver)
        .map_err(|e| e.to_string())?;
    let mut sq = 0.0;
    for (r, &raw) in fold.val_target_raw.iter().enumerate() {
        let z = predict(&model, fold.val_features.row(r)).map_err(|e| e.to_string())?;
        let e = fold.state.target_scaler.invert(z) - raw;
        sq += e * e;
    }
    Ok((sq / fold.val_target_raw.len() as f64).sqrt())
}

/// Scores one fixed candidate over the plan; used for baselines and the final
/// report. Returns per-fold RMSEs and their mean.
pub fn evaluate_hyper(
    frame: &TimeSeriesFrame,
    pipeline: &PipelineConfig,
    hyper: &HyperParams,
    plan: &SplitPlan,
    solver: &SolverConfig,
) -> Result<(Vec<f64>, f64)> {
    hyper.validate()?;
    let folds = prepare_folds(frame, pipeline, plan)?;
    let mut rmses = Vec::with_capacity(folds.len());
    for fold in &folds {
        let gram = gram_matrix(&hyper.kernel, &fold.train.x)?;
        let rmse = fold_rmse(fold, &gram, hyper, solver).map_err(Error::Search)?;
        rmses.push(rmse);
    }
    let mean = rmses.iter().sum::<f64>() / rmses.len() as f64;
    Ok((rmses, mean))
}

/// Random grid search: draws `space.iterations` candidates from the seeded
/// generator, scores each across the folds, and returns the candidate with
/// the lowest mean validation RMSE together with the full trial log.
///
/// Ties break toward smaller C, then smaller ε. A trial whose solver fails on
/// any fold scores infinite cost rather than aborting the search; the search
/// errors only if every trial fails.
pub fn random_search(
    frame: &TimeSeriesFrame,
    pipeline: &PipelineConfig,
    space: &SearchSpace,
    plan: &SplitPlan,
    solver: &SolverConfig,
) -> Result<(HyperParams, Vec<TrialResult>)> {
    space.validate()?;
    let candidates = space.candidates();
    let folds = prepare_folds(frame, pipeline, plan)?;

    let mut per_trial_fold: Vec<Vec<f64>> = vec![vec![f64::INFINITY; folds.len()]; candidates.len()];
    let mut first_failure: Option<String> = None;

    // Group trials by kernel so one Gram per (fold, kernel) serves them all.
    for (f, fold) in folds.iter().enumerate() {
        for (k_idx, kernel) in space.kernel_candidates.iter().enumerate() {
            let trial_ids: Vec<usize> = candidates
                .iter()
                .enumerate()
                .filter(|(_, h)| h.kernel == space.kernel_candidates[k_idx])
                .map(|(t, _)| t)
                .collect();
            if trial_ids.is_empty() {
                continue;
            }
            let gram = gram_matrix(kernel, &fold.train.x)?;
            let scored: Vec<(usize, std::result::Result<f64, String>)> = trial_ids
                .par_iter()
                .map(|&t| (t, fold_rmse(fold, &gram, &candidates[t], solver)))
                .collect();
            for (t, r) in scored {
                match r {
                    Ok(v) => per_trial_fold[t][f] = v,
                    Err(msg) => {
                        per_trial_fold[t][f] = f64::INFINITY;
                        if first_failure.is_none() {
                            first_failure = Some(msg);
                        }
                    }
                }
            }
        }
    }

    let trials: Vec<TrialResult> = candidates
        .iter()
        .enumerate()
        .map(|(t, hyper)| {
            let per_fold = per_trial_fold[t].clone();
            let mean = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
            TrialResult {
                trial_index: t,
                hyper: hyper.clone(),
                per_fold_rmse: per_fold,
                mean_rmse: mean,
            }
        })
        .collect();

    let mut best: Option<&TrialResult> = None;
    for trial in &trials {
        if !trial.mean_rmse.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                trial.mean_rmse < b.mean_rmse
                    || (trial.mean_rmse == b.mean_rmse
                        && (trial.hyper.c < b.hyper.c
                            || (trial.hyper.c == b.hyper.c
                                && trial.hyper.epsilon < b.hyper.epsilon)))
            }
        };
        if better {
            best = Some(trial);
        }
    }
    match best {
        Some(b) => Ok((b.hyper.clone(), trials)),
        None => Err(Error::Search(format!(
            "all {} trials failed; first failure: {}",
            trials.len(),
            first_failure.unwrap_or_else(|| "unknown".into())
        ))),
    }
}

/// Renders the trial log as CSV: trial index, C, ε, kernel, per-fold RMSEs,
/// and the mean.
pub fn trial_log_csv(trials: &[TrialResult]) -> String {
    let folds = trials.first().map_or(0, |t| t.per_fold_rmse.len());
    let mut out = String::from("trial_index,c,epsilon,kernel");
    for k in 1..=folds {
        out.push_str(&format!(",fold{k}_rmse"));
    }
    out.push_str(",mean_rmse\n");
    for t in trials {
        out.push_str(&format!(
            "{},{},{},{}",
            t.trial_index,
            t.hyper.c,
            t.hyper.epsilon,
            t.hyper.kernel.describe()
        ));
        for v in &t.per_fold_rmse {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{}\n", t.mean_rmse));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{Cadence, Column};
    use chrono::NaiveDate;

    #[test]
    fn split_matches_the_block_construction() {
        // n=12, folds=3: blocks of 3; fold1 [0,3)/[3,6), fold2 [0,6)/[6,9),
        // fold3 [0,9)/[9,12)
        let plan = time_series_split(12, 3).unwrap();
        assert_eq!(
            plan.folds,
            vec![
                Fold { train_end: 3, validation_end: 6 },
                Fold { train_end: 6, validation_end: 9 },
                Fold { train_end: 9, validation_end: 12 },
            ]
        );
    }

    #[test]
    fn remainder_goes_to_the_first_block() {
        let plan = time_series_split(14, 3).unwrap();
        assert_eq!(
            plan.folds,
            vec![
                Fold { train_end: 5, validation_end: 8 },
                Fold { train_end: 8, validation_end: 11 },
                Fold { train_end: 11, validation_end: 14 },
            ]
        );
    }

    #[test]
    fn every_validation_index_follows_every_training_index() {
        for (n, folds) in [(20, 4), (57, 5), (12, 3)] {
            let plan = time_series_split(n, folds).unwrap();
            for fold in &plan.folds {
                let max_train = fold.train_indices().into_iter().max().unwrap();
                let min_val = fold.validation_indices().into_iter().min().unwrap();
                assert!(min_val > max_train);
            }
            assert_eq!(plan.folds.last().unwrap().validation_end, n);
        }
    }

    #[test]
    fn undersized_input_is_rejected() {
        assert!(time_series_split(5, 5).is_err());
        assert!(time_series_split(11, 5).is_err());
        assert!(time_series_split(12, 5).is_ok());
    }

    #[test]
    fn candidate_sequence_is_deterministic_and_in_range() {
        let space = SearchSpace::new(
            vec![
                KernelSpec::rbf(0.5).unwrap(),
                KernelSpec::polynomial(0.2, 3, 1.0).unwrap(),
            ],
            123,
        );
        let a = space.candidates();
        let b = space.candidates();
        assert_eq!(a, b);
        assert_eq!(a.len(), 60);
        for h in &a {
            assert!((1.0..=100.0).contains(&h.c));
            assert!(space.epsilon_grid.contains(&h.epsilon));
            assert!(space.kernel_candidates.contains(&h.kernel));
        }
        let other = SearchSpace {
            seed: 124,
            ..space.clone()
        };
        assert_ne!(other.candidates(), a);
    }

    fn sine_frame(n: usize) -> TimeSeriesFrame {
        // x sampled pseudo-randomly over [0, 2pi] so later rows interpolate
        // rather than extrapolate; y = sin(x).
        let start = NaiveDate::from_ymd_opt(2021, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..n)
            .map(|_| rng.gen::<f64>() * 2.0 * std::f64::consts::PI)
            .collect();
        TimeSeriesFrame::new(
            Cadence::Hourly,
            (0..n)
                .map(|i| start + chrono::Duration::hours(i as i64))
                .collect(),
            vec![
                Column::new("x", xs.iter().map(|&v| Some(v)).collect()),
                Column::new("y", xs.iter().map(|&v| Some(v.sin())).collect()),
            ],
        )
        .unwrap()
    }

    fn sine_pipeline() -> PipelineConfig {
        let mut config = PipelineConfig::new("y");
        config.horizon = 0;
        config.engineer_calendar = false;
        config.power_transform = false;
        // y must not predict itself at horizon 0
        config.forced_drops = vec!["y".into()];
        config
    }

    #[test]
    fn search_is_reproducible_and_beats_a_weak_fixed_default() {
        let frame = sine_frame(120);
        let pipeline = sine_pipeline();
        let plan = time_series_split(120, 4).unwrap();
        let space = SearchSpace {
            iterations: 12,
            ..SearchSpace::new(vec![KernelSpec::rbf(1.0).unwrap()], 42)
        };
        let solver = SolverConfig::default();
        let (best_a, trials_a) =
            random_search(&frame, &pipeline, &space, &plan, &solver).unwrap();
        let (best_b, trials_b) =
            random_search(&frame, &pipeline, &space, &plan, &solver).unwrap();
        assert_eq!(best_a, best_b);
        assert_eq!(trials_a, trials_b);
        assert_eq!(trial_log_csv(&trials_a), trial_log_csv(&trials_b));

        let best_mean = trials_a
            .iter()
            .map(|t| t.mean_rmse)
            .fold(f64::INFINITY, f64::min);
        let default_hyper = HyperParams {
            c: 1.0,
            epsilon: 0.1,
            kernel: KernelSpec::rbf(1.0).unwrap(),
        };
        let (_, default_mean) =
            evaluate_hyper(&frame, &pipeline, &default_hyper, &plan, &solver).unwrap();
        assert!(
            best_mean <= default_mean,
            "search mean {best_mean} vs default {default_mean}"
        );
    }

    #[test]
    fn best_is_the_minimum_over_trials() {
        let frame = sine_frame(90);
        let pipeline = sine_pipeline();
        let plan = time_series_split(90, 3).unwrap();
        let space = SearchSpace {
            iterations: 8,
            ..SearchSpace::new(vec![KernelSpec::rbf(1.0).unwrap()], 5)
        };
        let (best, trials) =
            random_search(&frame, &pipeline, &space, &plan, &SolverConfig::default()).unwrap();
        let min = trials
            .iter()
            .map(|t| t.mean_rmse)
            .fold(f64::INFINITY, f64::min);
        let best_trial = trials.iter().find(|t| t.hyper == best).unwrap();
        assert_eq!(best_trial.mean_rmse, min);
        for t in &trials {
            assert_eq!(t.per_fold_rmse.len(), 3);
            let mean = t.per_fold_rmse.iter().sum::<f64>() / 3.0;
            assert_eq!(mean, t.mean_rmse);
        }
    }

    #[test]
    fn validation_rows_do_not_influence_fitted_fold_parameters() {
        let frame = sine_frame(80);
        let pipeline = sine_pipeline();
        let plan = time_series_split(80, 4).unwrap();
        let fold = plan.folds[1];
        let fit_on_train = |f: &TimeSeriesFrame| {
            let train = f.select_rows(&fold.train_indices());
            pipeline_fit(&train, &pipeline).unwrap().0
        };
        let state_a = fit_on_train(&frame);
        let mut perturbed = frame.clone();
        let v = fold.train_end + 1; // a validation row of this fold
        perturbed.columns[0].values[v] = Some(999.0);
        perturbed.columns[1].values[v] = Some(-999.0);
        let state_b = fit_on_train(&perturbed);
        assert_eq!(state_a, state_b);
    }

    #[test]
    fn failed_trials_score_infinite_cost() {
        let frame = sine_frame(60);
        let pipeline = sine_pipeline();
        let plan = time_series_split(60, 2).unwrap();
        // A 1-iteration solver cap cannot converge: every trial fails.
        let solver = SolverConfig {
            max_iterations: Some(1),
            ..SolverConfig::default()
        };
        let space = SearchSpace {
            iterations: 3,
            ..SearchSpace::new(vec![KernelSpec::rbf(1.0).unwrap()], 9)
        };
        match random_search(&frame, &pipeline, &space, &plan, &solver) {
            Err(Error::Search(msg)) => assert!(msg.contains("3 trials")),
            other => panic!("expected search error, got {other:?}"),
        }
    }
}
