//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured numbers (visible with `--nocapture`). Criterion 9, the
//! end-to-end CLI determinism check, lives in the CLI crate's acceptance
//! target.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aqcast_core::aqi::{aqi_overall, aqi_subindex, categorize, AqiBreakpointTable, AqiCategory};
use aqcast_core::artifact::{load_model, save_model, ArtifactMetadata, ModelArtifact};
use aqcast_core::frame::{Cadence, Column, TimeSeriesFrame};
use aqcast_core::kernels::KernelSpec;
use aqcast_core::matrix::FeatureMatrix;
use aqcast_core::metrics::compute_metrics;
use aqcast_core::preprocess::{
    impute_quadratic, pca_apply, pca_fit, pipeline_apply_full, pipeline_fit, yeo_johnson_fit,
    PipelineConfig,
};
use aqcast_core::svr::{predict, solve_dual, HyperParams, SolverConfig, TrainingSet};
use aqcast_core::tuning::{random_search, time_series_split, trial_log_csv, SearchSpace};

use common::{oracle_predict, solve_dual_oracle};

fn mat(rows: &[Vec<f64>]) -> FeatureMatrix {
    let names = (0..rows[0].len()).map(|i| format!("f{i}")).collect();
    FeatureMatrix::from_rows(names, rows).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-12);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Random small SVR instance for the oracle and KKT sweeps.
fn random_instance(
    rng: &mut ChaCha8Rng,
    max_m: usize,
    max_d: usize,
) -> (Vec<Vec<f64>>, Vec<f64>, HyperParams) {
    let m = rng.gen_range(2..=max_m);
    let d = rng.gen_range(1..=max_d);
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let y: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
    let c = 1.0 + 99.0 * rng.gen::<f64>();
    let epsilon = 0.001 + 0.099 * rng.gen::<f64>();
    let kernel = if rng.gen::<bool>() {
        KernelSpec::rbf(0.1 + 1.9 * rng.gen::<f64>()).unwrap()
    } else {
        KernelSpec::polynomial(
            0.1 + 0.9 * rng.gen::<f64>(),
            rng.gen_range(2..=3),
            rng.gen::<f64>(),
        )
        .unwrap()
    };
    (rows, y, HyperParams { c, epsilon, kernel })
}

#[test]
fn criterion_01_dual_solver_matches_the_qp_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..50 {
        let (rows, y, hyper) = random_instance(&mut rng, 8, 3);
        let train = TrainingSet::new(mat(&rows), y.clone()).unwrap();
        let config = SolverConfig {
            kkt_tolerance: 1e-8,
            ..SolverConfig::default()
        };
        let model = solve_dual(&train, &hyper, &config).unwrap();
        let oracle = solve_dual_oracle(&rows, &y, hyper.c, hyper.epsilon, &hyper.kernel);

        let gap = (model.solver_report.dual_objective - oracle.objective).abs();
        assert!(
            gap <= 1e-4 * oracle.objective.abs().max(1e-3),
            "case {case}: objective {} vs oracle {}",
            model.solver_report.dual_objective,
            oracle.objective
        );
        let d = rows[0].len();
        for probe in 0..5 {
            let x: Vec<f64> = (0..d)
                .map(|j| (((case * 5 + probe) * 3 + j) as f64 * 0.173).sin())
                .collect();
            let ours = predict(&model, &x).unwrap();
            let theirs = oracle_predict(&oracle, &rows, &hyper.kernel, &x);
            assert!(
                (ours - theirs).abs() <= 1e-3,
                "case {case}: prediction {ours} vs oracle {theirs}"
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!("ACCEPTANCE 1 PASS: 50 instances within 1e-4/1e-3 of the QP oracle in {elapsed:?}");
}

#[test]
fn criterion_02_kkt_conditions_hold_on_1000_random_models() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let config = SolverConfig::default(); // tolerance 1e-3 as specified
    let mut worst_sum: f64 = 0.0;
    let mut worst_violation: f64 = 0.0;
    for case in 0..1000 {
        let (rows, y, mut hyper) = random_instance(&mut rng, 25, 3);
        hyper.c = 0.5 + 49.5 * rng.gen::<f64>();
        let train = TrainingSet::new(mat(&rows), y.clone()).unwrap();
        let model = solve_dual(&train, &hyper, &config).unwrap();

        let sum: f64 = model.beta.iter().sum();
        assert!(sum.abs() <= 1e-8, "case {case}: sum(beta) = {sum}");
        worst_sum = worst_sum.max(sum.abs());
        for &b in &model.beta {
            assert!(
                (-hyper.c..=hyper.c).contains(&b),
                "case {case}: beta {b} outside [-{0}, {0}]",
                hyper.c
            );
        }
        assert!(
            model.solver_report.max_kkt_violation <= config.kkt_tolerance,
            "case {case}: violation {}",
            model.solver_report.max_kkt_violation
        );
        worst_violation = worst_violation.max(model.solver_report.max_kkt_violation);

        // Complementary slackness: strictly in-tube points carry no weight.
        let slack = 10.0 * config.kkt_tolerance;
        for (row, &yi) in rows.iter().zip(&y) {
            let fi = predict(&model, row).unwrap();
            if (fi - yi).abs() < hyper.epsilon - slack {
                let kept = (0..model.n_support())
                    .any(|s| model.support_vectors.row(s) == row.as_slice());
                assert!(!kept, "case {case}: in-tube point has nonzero beta");
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 2 PASS: 1000 models, worst |sum beta| {worst_sum:.2e}, \
         worst KKT violation {worst_violation:.2e}, in {elapsed:?}"
    );
}

#[test]
fn criterion_03_interpolation_limit_fits_inside_the_tube() {
    // Noiseless linear data with a linear kernel and C = 10^4: the
    // zero-slack limit must hold to within epsilon + 1e-6.
    let linear = KernelSpec::polynomial(1.0, 1, 0.0).unwrap();
    for (d, epsilon) in [(1usize, 0.05f64), (2, 0.02)] {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| (0..d).map(|j| i as f64 * 0.1 + j as f64 * 0.35).collect())
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 0.8 * r[0] - 2.0 + 0.3 * r[d - 1]).collect();
        let train = TrainingSet::new(mat(&rows), y.clone()).unwrap();
        let hyper = HyperParams::new(1e4, epsilon, linear).unwrap();
        let config = SolverConfig {
            kkt_tolerance: 1e-8,
            ..SolverConfig::default()
        };
        let model = solve_dual(&train, &hyper, &config).unwrap();
        let mut worst: f64 = 0.0;
        for (row, &yi) in rows.iter().zip(&y) {
            let r = (predict(&model, row).unwrap() - yi).abs();
            worst = worst.max(r);
            assert!(r <= epsilon + 1e-6, "d={d}: residual {r} > {epsilon} + 1e-6");
        }
        println!("ACCEPTANCE 3 PASS (d={d}): worst residual {worst:.2e} <= {epsilon} + 1e-6");
    }
}

/// Noiseless sine fixture: x scattered over [0, 2pi] so the chronological
/// tail interpolates, y = sin(x).
fn sine_frame(n: usize) -> TimeSeriesFrame {
    let start = NaiveDate::from_ymd_opt(2021, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
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
    config.forced_drops = vec!["y".into()];
    config
}

#[test]
fn criterion_04_tuned_sine_regression_reaches_low_holdout_rmse() {
    let started = Instant::now();
    let frame = sine_frame(200);
    let (train_frame, holdout) = frame.split_tail(0.3);
    let pipeline = sine_pipeline();
    let (state, train) = pipeline_fit(&train_frame, &pipeline).unwrap();
    let kernel = KernelSpec::rbf_scaled(&train.x).unwrap();
    // 60 search iterations, the protocol's fixed budget.
    let space = SearchSpace::new(vec![kernel], 4040);
    assert_eq!(space.iterations, 60);
    let plan = time_series_split(train_frame.n_rows(), 5).unwrap();
    let solver = SolverConfig::default();
    let (best, _) = random_search(&train_frame, &pipeline, &space, &plan, &solver).unwrap();
    let model = solve_dual(&train, &best, &solver).unwrap();

    let applied = pipeline_apply_full(&holdout, &state).unwrap();
    let mut sq = 0.0;
    for (i, &raw) in applied.target_raw.iter().enumerate() {
        let z = predict(&model, applied.features.row(i)).unwrap();
        let e = state.target_scaler.invert(z) - raw;
        sq += e * e;
    }
    let rmse = (sq / applied.target_raw.len() as f64).sqrt();
    let elapsed = started.elapsed();
    assert!(rmse <= 0.05, "holdout RMSE {rmse}");
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("ACCEPTANCE 4 PASS: sine holdout RMSE {rmse:.4} <= 0.05 in {elapsed:?}");
}

#[test]
fn criterion_05_search_space_conformance_and_seed_determinism() {
    let grid = SearchSpace::default_epsilon_grid();
    for (k, &e) in grid.iter().enumerate() {
        assert!((e - (k + 1) as f64 / 1000.0).abs() < 1e-15);
    }
    let space = SearchSpace::new(
        vec![
            KernelSpec::rbf(0.7).unwrap(),
            KernelSpec::polynomial(0.3, 3, 1.0).unwrap(),
        ],
        5050,
    );
    let candidates = space.candidates();
    assert_eq!(candidates.len(), 60);
    for h in &candidates {
        assert!((1.0..=100.0).contains(&h.c), "C {} out of range", h.c);
        assert!(
            space.epsilon_grid.contains(&h.epsilon),
            "epsilon {} not on the grid",
            h.epsilon
        );
    }

    // Identical seed => identical trial log, byte for byte.
    let frame = sine_frame(90);
    let pipeline = sine_pipeline();
    let plan = time_series_split(90, 3).unwrap();
    let small = SearchSpace {
        iterations: 8,
        ..SearchSpace::new(vec![KernelSpec::rbf(1.0).unwrap()], 5051)
    };
    let solver = SolverConfig::default();
    let (_, trials_a) = random_search(&frame, &pipeline, &small, &plan, &solver).unwrap();
    let (_, trials_b) = random_search(&frame, &pipeline, &small, &plan, &solver).unwrap();
    assert_eq!(trial_log_csv(&trials_a), trial_log_csv(&trials_b));
    println!("ACCEPTANCE 5 PASS: 60 candidates in range/grid; identical seed gives identical log");
}

#[test]
fn criterion_06_preprocessing_oracles() {
    // (a) quadratic imputation is exact on degree <= 2 series
    let start = NaiveDate::from_ymd_opt(2020, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let truth = |t: f64| 3.0 + 1.5 * t - 0.25 * t * t;
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut values: Vec<Option<f64>> = (0..40).map(|i| Some(truth(i as f64))).collect();
    let mut holes = Vec::new();
    while holes.len() < 8 {
        let i = rng.gen_range(1..39);
        if !holes.contains(&i) {
            holes.push(i);
            values[i] = None;
        }
    }
    let frame = TimeSeriesFrame::new(
        Cadence::Daily,
        (0..40)
            .map(|i| start + chrono::Duration::days(i as i64))
            .collect(),
        vec![Column::new("v", values)],
    )
    .unwrap();
    let filled = impute_quadratic(&frame).unwrap();
    for &i in &holes {
        let got = filled.column("v").unwrap().values[i].unwrap();
        let want = truth(i as f64);
        assert!(
            (got - want).abs() <= 1e-9 * want.abs().max(1.0),
            "fill at {i}: {got} vs {want}"
        );
    }

    // (b) Yeo-Johnson lambda recovery on exp-normal samples, n = 2000
    let mut rng = ChaCha8Rng::seed_from_u64(607);
    let sample: Vec<f64> = (0..2000).map(|_| gaussian(&mut rng).exp() - 1.0).collect();
    let lambda = yeo_johnson_fit(&sample).unwrap();
    assert!(
        (-0.3..=0.3).contains(&lambda),
        "lambda {lambda} outside [-0.3, 0.3]"
    );

    // (c) PCA: orthonormality, full-rank reconstruction, and k <= 3 on the
    // 2-factor fixture at threshold 0.95
    let mut rng = ChaCha8Rng::seed_from_u64(608);
    let loadings: Vec<Vec<f64>> = (0..10)
        .map(|_| vec![rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0])
        .collect();
    let rows: Vec<Vec<f64>> = (0..300)
        .map(|_| {
            let z = [gaussian(&mut rng), gaussian(&mut rng)];
            loadings
                .iter()
                .map(|l| l[0] * z[0] + l[1] * z[1] + 0.01 * gaussian(&mut rng))
                .collect()
        })
        .collect();
    let m = mat(&rows);
    let two_factor = pca_fit(&m, 0.95).unwrap();
    assert!(
        two_factor.n_components() <= 3,
        "kept {} components",
        two_factor.n_components()
    );

    let full = pca_fit(&m, 1.0).unwrap();
    for i in 0..full.n_components() {
        for j in 0..full.n_components() {
            let dot: f64 = full.components[i]
                .iter()
                .zip(&full.components[j])
                .map(|(a, b)| a * b)
                .sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((dot - want).abs() <= 1e-8, "orthonormality ({i},{j}): {dot}");
        }
    }
    let z = pca_apply(&m, &full).unwrap();
    let mut worst: f64 = 0.0;
    for r in 0..m.n_rows() {
        for c in 0..m.n_cols() {
            let mut back = full.component_means[c];
            for (k, comp) in full.components.iter().enumerate() {
                back += z.get(r, k) * comp[c];
            }
            worst = worst.max((back - m.get(r, c)).abs());
        }
    }
    assert!(worst <= 1e-8, "reconstruction error {worst}");
    println!(
        "ACCEPTANCE 6 PASS: imputation exact, lambda {lambda:.3} in [-0.3, 0.3], \
         PCA k={} <= 3, reconstruction {worst:.2e}",
        two_factor.n_components()
    );
}

#[test]
fn criterion_07_metrics_exactness_and_power_mean_inequality() {
    // The three listed examples to 1e-12.
    let a = compute_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
    assert!(a.mae.abs() <= 1e-12 && a.rmse.abs() <= 1e-12);
    assert!((a.r2 - 1.0).abs() <= 1e-12 && a.nrmse.abs() <= 1e-12);

    let b = compute_metrics(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
    assert!((b.mae - 1.0).abs() <= 1e-12);
    assert!((b.rmse - 1.0).abs() <= 1e-12);
    assert!(b.r2.abs() <= 1e-12);
    assert!((b.nrmse - 0.5).abs() <= 1e-12);

    let c = compute_metrics(&[0.0, 1.0, 2.0], &[0.0, 1.0, 4.0]).unwrap();
    assert!((c.mae - 2.0 / 3.0).abs() <= 1e-12);
    assert!((c.rmse - (4.0f64 / 3.0).sqrt()).abs() <= 1e-12);
    assert!((c.r2 + 1.0).abs() <= 1e-12);
    assert!((c.nrmse - (4.0f64 / 3.0).sqrt() / 2.0).abs() <= 1e-12);

    // MAE <= RMSE across 1e5 random vectors.
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for _ in 0..100_000 {
        let n = rng.gen_range(2..10);
        let y_true: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 20.0 - 10.0).collect();
        let y_pred: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 20.0 - 10.0).collect();
        if let Ok(m) = compute_metrics(&y_true, &y_pred) {
            assert!(m.mae <= m.rmse + 1e-12, "MAE {} > RMSE {}", m.mae, m.rmse);
        }
    }
    println!("ACCEPTANCE 7 PASS: hand examples exact to 1e-12; MAE <= RMSE over 1e5 vectors");
}

#[test]
fn criterion_08_aqi_conformance() {
    let table = AqiBreakpointTable::embedded_default();
    // Exact at every breakpoint endpoint of the shipped table.
    for (name, p) in &table.pollutants {
        for seg in &p.segments {
            let lo = aqi_subindex(&table, name, seg.conc_lo, &p.units).unwrap();
            let hi = aqi_subindex(&table, name, seg.conc_hi, &p.units).unwrap();
            assert_eq!(lo, seg.aqi_lo, "{name} at {}", seg.conc_lo);
            assert_eq!(hi, seg.aqi_hi, "{name} at {}", seg.conc_hi);
        }
    }
    // Category boundaries at all twelve stated values.
    let expected = [
        (0.0, AqiCategory::Good),
        (50.0, AqiCategory::Good),
        (51.0, AqiCategory::Moderate),
        (100.0, AqiCategory::Moderate),
        (101.0, AqiCategory::UnhealthySensitive),
        (150.0, AqiCategory::UnhealthySensitive),
        (151.0, AqiCategory::Unhealthy),
        (200.0, AqiCategory::Unhealthy),
        (201.0, AqiCategory::VeryUnhealthy),
        (300.0, AqiCategory::VeryUnhealthy),
        (301.0, AqiCategory::Hazardous),
        (500.0, AqiCategory::Hazardous),
    ];
    for (v, want) in expected {
        assert_eq!(categorize(v).unwrap(), want, "at {v}");
    }
    // Overall equals the max sub-index.
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for _ in 0..200 {
        let mut m = BTreeMap::new();
        for name in ["co", "no2", "pm10", "pm25", "so2"] {
            if rng.gen::<bool>() {
                m.insert(name.to_string(), rng.gen::<f64>() * 500.0);
            }
        }
        if m.is_empty() {
            continue;
        }
        let (overall, dominant) = aqi_overall(&m).unwrap();
        let max = m.values().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(overall, max);
        assert_eq!(m[&dominant], overall);
        for v in m.values() {
            assert!(overall >= *v);
        }
    }
    println!("ACCEPTANCE 8 PASS: breakpoint endpoints exact; category boundaries match; overall = max");
}

/// Pollutant-style hourly fixture used for the leakage and persistence
/// criteria.
fn pollutant_frame(n: usize) -> TimeSeriesFrame {
    let start = NaiveDate::from_ymd_opt(2020, 3, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut ar = 0.0;
    let mut pm25 = Vec::with_capacity(n);
    let mut pm10 = Vec::with_capacity(n);
    for i in 0..n {
        ar = 0.7 * ar + gaussian(&mut rng);
        let base = 30.0 + 10.0 * (i as f64 * 0.26).sin() + 2.0 * ar;
        pm25.push(if i % 23 == 7 { None } else { Some(base.max(2.0)) });
        pm10.push(Some((1.6 * base + 12.0 + gaussian(&mut rng)).max(4.0)));
    }
    TimeSeriesFrame::new(
        Cadence::Hourly,
        (0..n)
            .map(|i| start + chrono::Duration::hours(i as i64))
            .collect(),
        vec![Column::new("pm25", pm25), Column::new("pm10", pm10)],
    )
    .unwrap()
}

#[test]
fn criterion_10_no_validation_leakage_into_fitted_parameters() {
    let frame = pollutant_frame(240);
    let config = PipelineConfig::new("pm25");
    let plan = time_series_split(frame.n_rows(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    for trial in 0..20 {
        let fold = plan.folds[rng.gen_range(0..plan.folds.len())];
        let row = rng.gen_range(fold.train_end..fold.validation_end);
        let col = rng.gen_range(0..frame.columns.len());

        let fit = |f: &TimeSeriesFrame| {
            let train = f.select_rows(&fold.train_indices());
            pipeline_fit(&train, &config).unwrap().0
        };
        let before = fit(&frame);
        let mut perturbed = frame.clone();
        let old = perturbed.columns[col].values[row];
        perturbed.columns[col].values[row] = Some(old.unwrap_or(50.0) + 321.0);
        let after = fit(&perturbed);
        assert_eq!(before, after, "trial {trial}: fold parameters changed");
    }
    println!("ACCEPTANCE 10 PASS: 20 validation-row perturbations left fold pipelines unchanged");
}

#[test]
fn criterion_11_persistence_round_trip_is_bitwise() {
    let frame = pollutant_frame(200);
    let (state, train) = pipeline_fit(&frame, &PipelineConfig::new("pm25")).unwrap();
    let hyper = HyperParams::new(10.0, 0.02, KernelSpec::rbf_scaled(&train.x).unwrap()).unwrap();
    let mut model = solve_dual(&train, &hyper, &SolverConfig::default()).unwrap();
    model.target_name = "pm25".into();
    let artifact = ModelArtifact::new(
        state,
        model,
        ArtifactMetadata {
            target: "pm25".into(),
            created_at: "2021-06-01T00:00:00Z".into(),
            seed: 11,
            search_summary: "acceptance fixture".into(),
        },
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&artifact, &path).unwrap();
    let loaded = load_model(&path).unwrap();

    let d = artifact.model.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    for _ in 0..100 {
        let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 6.0 - 3.0).collect();
        let a = predict(&artifact.model, &x).unwrap();
        let b = predict(&loaded.model, &x).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
    println!("ACCEPTANCE 11 PASS: reloaded model reproduces 100 predictions bitwise");
}
