use super::*;
use crate::dataset::{generate_synthetic, LinkPrediction, MeasurementRecord, SyntheticConfig};
use crate::regression::linalg::Matrix;
use proptest::prelude::*;

fn planted(seed: u64, noise: f64) -> Dataset {
    generate_synthetic(&SyntheticConfig { seed, noise_sd_db: noise, ..Default::default() }).unwrap()
}

fn row(p_rx: f64, p_lr: f64) -> LinkPrediction {
    LinkPrediction { record: MeasurementRecord { p_rx, d: 1000.0, p_tx: 30.0, h: 10.0, f: 30.0 }, p_lr }
}

/// Dense Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let m = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= m * a[c][k];
            }
            b[r] -= m * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Least squares with one coefficient pinned, via the KKT system of the
/// Lagrangian.
fn constrained_ls(x: &Matrix, y: &[f64], pinned: usize, value: f64) -> Vec<f64> {
    let p = x.ncols();
    let mut a = vec![vec![0.0; p + 1]; p + 1];
    let mut b = vec![0.0; p + 1];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = x.column(i).iter().zip(x.column(j)).map(|(u, v)| u * v).sum();
        }
        b[i] = x.column(i).iter().zip(y).map(|(u, v)| u * v).sum();
    }
    a[pinned][p] = 1.0;
    a[p][pinned] = 1.0;
    b[p] = value;
    solve_dense(a, b)[..p].to_vec()
}

#[test]
fn presets_are_three_and_ordered() {
    let names: Vec<String> = model_presets().into_iter().map(|p| p.name).collect();
    assert_eq!(names, PRESET_NAMES);
    assert_eq!(model_presets(), model_presets());
    for p in model_presets() {
        p.validate().unwrap();
    }
    assert!(matches!(preset("cost-231"), Err(Error::Lookup { .. })));
}

#[test]
fn full_correction_design_has_four_predictors_and_intercept() {
    let data = planted(1, 1.0);
    let p = build_problem(&data, &preset("full-correction").unwrap()).unwrap();
    assert_eq!((p.x.nrows(), p.x.ncols(), p.k()), (500, 5, 4));
}

#[test]
fn offset_response_is_the_lmr_discrepancy() {
    let data = planted(2, 1.5);
    let p = build_problem(&data, &preset("offset-correction").unwrap()).unwrap();
    let e = lmr_residuals(&data);
    assert_eq!(e.basis, "dB/10");
    for (a, b) in p.y.iter().zip(&e.e_lr) {
        assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn lmr_residual_examples() {
    let data = Dataset::from_rows(vec![row(-80.0, -80.0), row(-70.0, -80.0), row(-95.5, -95.5)], "t");
    let e = lmr_residuals(&data);
    assert_eq!(e.e_lr, vec![0.0, 1.0, 0.0]);

    let bias_db = 7.0;
    let data = generate_synthetic(&SyntheticConfig {
        coefficients: [1.0, 0.0, 0.0, 0.0, bias_db / 10.0],
        noise_sd_db: 1.0,
        seed: 5,
        ..Default::default()
    })
    .unwrap();
    let e = lmr_residuals(&data);
    assert_eq!(e.e_lr.len(), data.len());
    let mean = e.e_lr.iter().sum::<f64>() / e.e_lr.len() as f64;
    // noise sd of the mean is 0.1/sqrt(500) ≈ 0.0045
    assert!((mean - 0.7).abs() < 0.02, "{mean}");
}

fn fit_on(data: &Dataset, name: &str) -> (ModelSpec, FitResult) {
    let spec = preset(name).unwrap();
    let fit = fit_ols(&build_problem(data, &spec).unwrap()).unwrap();
    (spec, fit)
}

#[test]
fn validation_perfect_model_improves() {
    let data = planted(3, 0.0);
    let split = split_holdout(&data, 25, 3).unwrap();
    let (spec, fit) = fit_on(&split.train, "full-correction");
    let v = validate_holdout(&fit, &spec, &split.holdout).unwrap();
    assert_eq!(v.model_error_ratio, 0.0);
    assert!(v.lmr_error_ratio > 0.0);
    assert!(v.improved && !v.sd_fallback);
    assert!(v.model_errors.sd < 1e-9);
}

#[test]
fn validation_passthrough_is_not_an_improvement() {
    let data = planted(4, 2.0);
    let (spec, mut fit) = fit_on(&data, "offset-correction");
    fit.beta.iter_mut().for_each(|b| *b = 0.0);
    let v = validate_holdout(&fit, &spec, &data).unwrap();
    assert_eq!(v.model_error_ratio, v.lmr_error_ratio);
    assert!(!v.improved);
}

#[test]
fn validation_zero_mean_falls_back_to_sd() {
    let holdout = Dataset::from_rows(vec![row(-81.0, -80.0), row(-79.0, -80.0)], "t");
    let spec = preset("offset-correction").unwrap();
    let mut fit = fit_on(&planted(4, 2.0), "offset-correction").1;
    fit.beta.iter_mut().for_each(|b| *b = 0.0);
    let v = validate_holdout(&fit, &spec, &holdout).unwrap();
    assert!(v.lmr_error_ratio.is_infinite() && v.sd_fallback);
    assert!(!v.improved);

    assert!(matches!(validate_holdout(&fit, &spec, &Dataset::default()), Err(Error::EmptyDataset)));
    let other = preset("hata-form").unwrap();
    assert!(validate_holdout(&fit, &other, &holdout).is_err());
}

/// Planted data whose h column is an exact affine image of log d.
fn h_duplicates_d() -> Dataset {
    let mut data = planted(6, 1.0);
    for r in &mut data.rows {
        r.record.h = 100.0 * r.record.d.log10() - 250.0;
    }
    data
}

#[test]
fn drop_collinear_examples() {
    let clean = planted(8, 1.0);
    let spec = preset("full-correction").unwrap();
    let report = collinearity(&build_problem(&clean, &spec).unwrap(), 0.1).unwrap();
    assert!(!report.any_flagged());
    assert_eq!(drop_collinear_terms(&spec, &report).unwrap(), spec);

    let dup = h_duplicates_d();
    let report = collinearity(&build_problem(&dup, &spec).unwrap(), 0.1).unwrap();
    let reduced = drop_collinear_terms(&spec, &report).unwrap();
    assert_eq!(reduced.terms.len(), spec.terms.len() - 1);
    assert!(reduced.terms.iter().all(|t| t.label != "D"));

    let mut all = report.clone();
    all.entries.iter_mut().for_each(|e| e.flagged = true);
    assert!(drop_collinear_terms(&spec, &all).is_err());
}

#[test]
fn pipeline_records_dropped_term() {
    let data = h_duplicates_d();
    let out = run_pipeline(&data, &PipelineConfig::default()).unwrap();
    let a = out.analysis.expect("gate should not stop structured data");
    for c in a.candidates.iter().filter(|c| c.preset == "full-correction" || c.preset == "hata-form") {
        assert_eq!(c.dropped_terms.len(), 1, "{}", c.name);
        let v = &c.diagnostics.checklist.multicollinearity;
        assert!(!v.passed() && v.note.contains("dropped"), "{v:?}");
        // the reduced design itself is clean
        assert!(!c.diagnostics.collinearity.as_ref().is_some_and(|r| r.any_flagged()));
    }
    let names = ["hata-form/ols", "full-correction/ols"];
    for s in a.comparison.candidates.iter().filter(|s| names.contains(&s.name.as_str())) {
        assert_eq!(s.dropped_terms.len(), 1);
    }
}

#[test]
fn gaussian_discrepancy_stops_at_gate() {
    let data = generate_synthetic(&SyntheticConfig {
        coefficients: [1.0, 0.0, 0.0, 0.0, 0.0],
        noise_sd_db: 2.0,
        seed: 11,
        ..Default::default()
    })
    .unwrap();
    let out = run_pipeline(&data, &PipelineConfig::default()).unwrap();
    assert!(out.stopped_at_gate(), "p = {}", out.gate.test.p_value);
    assert!(out.gate.test.p_value >= 0.05);
    assert!(out.analysis.is_none());
}

#[test]
fn planted_coefficients_are_recovered() {
    let data = planted(42, 0.0);
    let out = run_pipeline(&data, &PipelineConfig::default()).unwrap();
    assert_eq!(out.gate.outcome, GateOutcome::Proceed);
    let a = out.analysis.unwrap();
    assert_eq!(a.candidates.len(), 6);
    let best = a.selected().expect("a candidate must beat the raw prediction");
    assert_eq!(best.name, "offset-correction/ols");
    assert!(best.validation.improved);
    let truth = [("A", 1.0), ("B", -2.0), ("C", 3.0), ("E", 0.5)];
    let coefs = best.coefficients();
    for (label, want) in truth {
        let got = coefs.iter().find(|(l, _)| l == label).unwrap().1;
        assert!((got - want).abs() < 1e-6, "{label}: {got} vs {want}");
    }
}

#[test]
fn noise_free_generating_presets_fit_exactly() {
    let data = generate_synthetic(&SyntheticConfig {
        coefficients: [0.9, -2.0, 3.0, 0.002, 0.5],
        seed: 12,
        ..Default::default()
    })
    .unwrap();
    let out = run_pipeline(&data, &PipelineConfig::default()).unwrap();
    let a = out.analysis.unwrap();
    for c in a.candidates.iter().filter(|c| c.preset == "full-correction") {
        assert!(c.fit.r_squared >= 1.0 - 1e-10, "{}: {}", c.name, c.fit.r_squared);
    }
    let best = a.selected().unwrap();
    assert_eq!(best.preset, "full-correction");
    for (label, want) in [("A", 0.9), ("B", -2.0), ("C", 3.0), ("D", 0.002), ("E", 0.5)] {
        let got = best.fit.coefficient(label).unwrap();
        assert!((got - want).abs() < 1e-6, "{label}: {got} vs {want}");
    }
}

#[test]
fn offset_fit_equals_constrained_full_fit() {
    for seed in [1u64, 2, 3] {
        let data = generate_synthetic(&SyntheticConfig {
            coefficients: [0.8, -1.0, 2.5, 0.001, 1.0],
            noise_sd_db: 3.0,
            seed,
            ..Default::default()
        })
        .unwrap();
        let offset = fit_on(&data, "offset-correction").1;
        let full = build_problem(&data, &preset("full-correction").unwrap()).unwrap();
        // constrain A = 1 and drop D (absent from the offset form) by pinning it to 0
        let cols: Vec<Vec<f64>> = (0..4).map(|j| full.x.column(j).to_vec()).collect();
        let x = Matrix::from_columns(full.n(), &cols);
        let beta = constrained_ls(&x, &full.y, 1, 1.0);
        // design order E, A, B, C vs offset E, B, C
        let pairs = [(offset.beta[0], beta[0]), (offset.beta[1], beta[2]), (offset.beta[2], beta[3])];
        for (a, b) in pairs {
            assert!((a - b).abs() < 1e-10, "seed {seed}: {a} vs {b}");
        }
        assert!((beta[1] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn empty_after_filter_names_the_step() {
    let data = Dataset::from_rows(vec![row(-110.0, -100.0), row(-105.0, -100.0)], "t");
    let err = run_pipeline(&data, &PipelineConfig::default()).unwrap_err();
    assert_eq!(err.step(), Some("filter"));
    assert!(err.to_string().starts_with("filter: empty dataset"), "{err}");
}

#[test]
fn fully_collinear_preset_is_fatal_at_fit() {
    let mut data = planted(13, 1.0);
    let mut cfg = PipelineConfig { presets: vec!["offset-correction".into()], ..Default::default() };
    for r in &mut data.rows {
        r.record.f = r.record.d / 1000.0 + 5.0;
    }
    cfg.thresholds.tolerance_cutoff = 0.5;
    let err = run_pipeline(&data, &cfg).unwrap_err();
    assert_eq!(err.step(), Some("fit"));
    assert!(err.to_string().contains("offset-correction"), "{err}");
}

#[test]
fn pipeline_is_deterministic() {
    let data = planted(14, 1.0);
    let cfg = PipelineConfig::default();
    let a = format!("{:?}", run_pipeline(&data, &cfg).unwrap());
    let b = format!("{:?}", run_pipeline(&data, &cfg).unwrap());
    assert_eq!(a, b);
}

#[test]
fn unknown_preset_is_a_config_error() {
    let cfg = PipelineConfig { presets: vec!["walfisch".into()], ..Default::default() };
    let err = run_pipeline(&planted(1, 0.0), &cfg).unwrap_err();
    assert_eq!(err.step(), Some("config"));
}

fn summary(r2: f64, terms: usize, improved: bool) -> CandidateSummary {
    CandidateSummary {
        name: String::new(),
        r_squared: r2,
        terms,
        dropped_terms: vec![],
        checklist_pass: true,
        holdout_error_ratio: 0.0,
        improved,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selection_maximizes_r2_among_passing(
        cands in prop::collection::vec((0.0f64..1.0, 1usize..5, any::<bool>()), 1..8)
    ) {
        let summaries: Vec<_> = cands.iter().map(|&(r, t, i)| summary(r, t, i)).collect();
        let sel = select(&summaries);
        match sel {
            None => prop_assert!(summaries.iter().all(|s| !s.improved)),
            Some(i) => {
                prop_assert!(summaries[i].improved);
                for s in summaries.iter().filter(|s| s.improved) {
                    prop_assert!(summaries[i].r_squared >= s.r_squared - 1e-12);
                }
            }
        }
    }
}

#[test]
fn ties_go_to_fewer_terms() {
    let s = vec![summary(1.0, 4, true), summary(1.0 - 1e-14, 2, true), summary(1.0, 2, false)];
    assert_eq!(select(&s), Some(1));
    assert_eq!(select(&[summary(0.9, 1, false)]), None);
}

#[test]
fn candidate_fit_matches_its_reduced_spec() {
    let out = run_pipeline(&planted(15, 0.5), &PipelineConfig::default()).unwrap();
    for c in &out.analysis.unwrap().candidates {
        assert_eq!(c.fit.labels, c.spec.column_labels());
        assert_eq!(c.response.len(), c.fit.residuals.len());
    }
}
