//! Regression assumption checks: correlation and tolerance/VIF
//! multicollinearity, Durbin-Watson independence, Levene homoscedasticity,
//! the regression ANOVA F test and Kolmogorov-Smirnov residual normality.

pub mod distributions;
mod checklist;

pub use checklist::{
    diagnose, group_labels, multicollinearity_verdict, run_checklist, AssumptionChecklist, DiagnosticThresholds, DiagnosticsReport, Grouping,
    Status, Verdict,
};

use crate::error::{Error, Result};
use crate::regression::{fit_ols, FitResult, RegressionProblem};
use distributions::{f_upper_tail, kolmogorov_upper_tail, normal_cdf};
use serde::Serialize;
use std::collections::BTreeMap;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub r: Vec<Vec<f64>>,
}

/// Pearson correlation of every pair of columns.
pub fn correlation_matrix(columns: &[(String, Vec<f64>)]) -> Result<CorrelationMatrix> {
    let n = columns.first().map_or(0, |c| c.1.len());
    if n < 2 {
        return Err(Error::InvalidValue("correlation needs at least two observations".into()));
    }
    let mut centered = Vec::with_capacity(columns.len());
    for (label, col) in columns {
        if col.len() != n {
            return Err(Error::InvalidValue(format!("column `{label}` has length {} != {n}", col.len())));
        }
        let m = mean(col);
        let c: Vec<f64> = col.iter().map(|v| v - m).collect();
        let ss: f64 = c.iter().map(|v| v * v).sum();
        if ss == 0.0 || col.iter().all(|v| *v == col[0]) {
            return Err(Error::ZeroVariance(format!("column `{label}` is constant")));
        }
        centered.push((c, ss.sqrt()));
    }
    let p = columns.len();
    let mut r = vec![vec![0.0; p]; p];
    for i in 0..p {
        r[i][i] = 1.0;
        for j in 0..i {
            let sxy: f64 = centered[i].0.iter().zip(&centered[j].0).map(|(a, b)| a * b).sum();
            let v = (sxy / (centered[i].1 * centered[j].1)).clamp(-1.0, 1.0);
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    Ok(CorrelationMatrix { labels: columns.iter().map(|c| c.0.clone()).collect(), r })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollinearityEntry {
    pub label: String,
    /// R² of this predictor regressed on the others.
    pub r_i_squared: f64,
    pub tolerance: f64,
    /// `inf` when the auxiliary fit is singular or exact.
    pub vif: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollinearityReport {
    pub threshold: f64,
    pub entries: Vec<CollinearityEntry>,
}

impl CollinearityReport {
    pub fn flagged(&self) -> impl Iterator<Item = &CollinearityEntry> {
        self.entries.iter().filter(|e| e.flagged)
    }

    pub fn any_flagged(&self) -> bool {
        self.entries.iter().any(|e| e.flagged)
    }
}

pub const DEFAULT_TOLERANCE_CUTOFF: f64 = 0.1;

/// Tolerance `1 − R_i²` and VIF for each non-intercept predictor. A predictor
/// is flagged when its tolerance is below `threshold` (VIF above 1/threshold).
pub fn collinearity(problem: &RegressionProblem, threshold: f64) -> Result<CollinearityReport> {
    let preds = problem.predictors();
    if preds.len() < 2 {
        return Err(Error::InvalidValue("collinearity needs at least two predictors".into()));
    }
    let entries = (0..preds.len())
        .map(|i| {
            let others: Vec<(String, Vec<f64>)> =
                preds.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, c)| c.clone()).collect();
            let r2 = auxiliary_r_squared(&preds[i].1, others).unwrap_or(1.0).clamp(0.0, 1.0);
            let tolerance = 1.0 - r2;
            let vif = if tolerance > 0.0 { 1.0 / tolerance } else { f64::INFINITY };
            CollinearityEntry { label: preds[i].0.clone(), r_i_squared: r2, tolerance, vif, flagged: tolerance < threshold }
        })
        .collect();
    Ok(CollinearityReport { threshold, entries })
}

/// R² of `target` on `others`. Regressors that depend exactly on earlier ones
/// are dropped first; the column span, and hence R², is unchanged.
fn auxiliary_r_squared(target: &[f64], mut others: Vec<(String, Vec<f64>)>) -> Option<f64> {
    loop {
        let problem = RegressionProblem::new(target.to_vec(), &others, true).ok()?;
        match fit_ols(&problem) {
            Ok(fit) => return Some(fit.r_squared),
            Err(Error::SingularDesign(cols)) => {
                let last = cols.last()?;
                let j = others.iter().rposition(|(l, _)| l == last)?;
                others.remove(j);
            }
            Err(_) => return None,
        }
    }
}

pub const DW_WINDOW: (f64, f64) = (1.5, 2.5);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DurbinWatson {
    pub statistic: f64,
    pub window: (f64, f64),
    pub pass: bool,
}

pub fn durbin_watson(residuals: &[f64]) -> Result<DurbinWatson> {
    durbin_watson_with(residuals, DW_WINDOW)
}

pub fn durbin_watson_with(residuals: &[f64], window: (f64, f64)) -> Result<DurbinWatson> {
    if residuals.len() < 2 {
        return Err(Error::InvalidValue("Durbin-Watson needs at least two residuals".into()));
    }
    let ss: f64 = residuals.iter().map(|r| r * r).sum();
    if ss == 0.0 {
        return Err(Error::ZeroVariance("all residuals are zero".into()));
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let statistic = num / ss;
    Ok(DurbinWatson { statistic, window, pass: (window.0..=window.1).contains(&statistic) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnovaF {
    /// `inf` when SSE is zero.
    pub f: f64,
    pub significance: f64,
    pub df_regression: usize,
    pub df_residual: usize,
}

/// Regression-significance F test `(SSR/k) / (SSE/(n − k − 1))`.
pub fn anova_f(result: &FitResult) -> Result<AnovaF> {
    let n = result.fitted.len();
    let k = result.k;
    if k < 1 {
        return Err(Error::InvalidValue("ANOVA F needs at least one predictor".into()));
    }
    if n <= k + 1 {
        return Err(Error::DegreesOfFreedom { n, k });
    }
    let y: Vec<f64> = result.fitted.iter().zip(&result.residuals).map(|(f, r)| f + r).collect();
    let ybar = mean(&y);
    let ssr: f64 = result.fitted.iter().map(|f| (f - ybar).powi(2)).sum();
    let sse: f64 = result.residuals.iter().map(|r| r * r).sum();
    let df2 = n - k - 1;
    if sse == 0.0 {
        return Ok(AnovaF { f: f64::INFINITY, significance: 0.0, df_regression: k, df_residual: df2 });
    }
    let f = (ssr / k as f64) / (sse / df2 as f64);
    Ok(AnovaF { f, significance: f_upper_tail(f, k as f64, df2 as f64), df_regression: k, df_residual: df2 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeveneResult {
    pub w: f64,
    pub significance: f64,
    pub groups: usize,
    /// `false` when significance < α ("variances are not equal").
    pub equal_variance: bool,
}

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Classic Levene test on absolute deviations from group means.
pub fn levene_test<G: Ord + Clone + std::fmt::Debug>(values: &[f64], groups: &[G]) -> Result<LeveneResult> {
    levene_test_at(values, groups, DEFAULT_ALPHA)
}

pub fn levene_test_at<G: Ord + Clone + std::fmt::Debug>(values: &[f64], groups: &[G], alpha: f64) -> Result<LeveneResult> {
    if values.len() != groups.len() {
        return Err(Error::InvalidValue("one group label per observation required".into()));
    }
    let mut by_group: BTreeMap<G, Vec<f64>> = BTreeMap::new();
    for (v, g) in values.iter().zip(groups) {
        by_group.entry(g.clone()).or_default().push(*v);
    }
    if by_group.len() < 2 {
        return Err(Error::InvalidValue("Levene test needs at least two groups".into()));
    }
    if let Some((g, _)) = by_group.iter().find(|(_, v)| v.len() < 2) {
        return Err(Error::InvalidValue(format!("Levene group {g:?} has fewer than two observations")));
    }
    let deviations: Vec<Vec<f64>> = by_group
        .values()
        .map(|v| {
            let m = mean(v);
            v.iter().map(|x| (x - m).abs()).collect()
        })
        .collect();
    let n: usize = deviations.iter().map(Vec::len).sum();
    let g = deviations.len();
    let z_means: Vec<f64> = deviations.iter().map(|z| mean(z)).collect();
    let grand = deviations.iter().flatten().sum::<f64>() / n as f64;
    let between: f64 = deviations.iter().zip(&z_means).map(|(z, m)| z.len() as f64 * (m - grand).powi(2)).sum();
    let within: f64 = deviations
        .iter()
        .zip(&z_means)
        .map(|(z, m)| z.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    let scale = (n - g) as f64 / (g - 1) as f64;
    let same_means = z_means.iter().all(|m| *m == z_means[0]);
    let w = if same_means || between == 0.0 {
        0.0
    } else if within == 0.0 {
        f64::INFINITY
    } else {
        scale * between / within
    };
    let significance = f_upper_tail(w, (g - 1) as f64, (n - g) as f64);
    Ok(LeveneResult { w, significance, groups: g, equal_variance: significance >= alpha })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityTestResult {
    /// Two-sided sup distance D.
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub alpha: f64,
    pub reject: bool,
    pub fitted_mean: f64,
    pub fitted_sd: f64,
    /// Mean and sd were estimated from the same sample, so the plain
    /// Kolmogorov p-value is conservative (the Lilliefors situation).
    pub estimated_parameters: bool,
}

/// Sample mean and standard deviation (n − 1 divisor).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0);
    (m, var.sqrt())
}

/// One-sample KS distance of `values` from N(mean, sd).
pub fn ks_statistic(values: &[f64], mean: f64, sd: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (i, x)| {
        let f = normal_cdf((x - mean) / sd);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    })
}

pub const KS_MIN_SAMPLE: usize = 5;

pub fn ks_normality(residuals: &[f64]) -> Result<NormalityTestResult> {
    ks_normality_at(residuals, DEFAULT_ALPHA)
}

/// Kolmogorov-Smirnov test against a normal with sample-estimated mean and
/// sd; p-value from the limiting distribution at `√n · D`.
pub fn ks_normality_at(residuals: &[f64], alpha: f64) -> Result<NormalityTestResult> {
    let n = residuals.len();
    if n < KS_MIN_SAMPLE {
        return Err(Error::InvalidValue(format!("KS test needs at least {KS_MIN_SAMPLE} values, got {n}")));
    }
    let (m, sd) = mean_sd(residuals);
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance("sample standard deviation is zero".into()));
    }
    let d = ks_statistic(residuals, m, sd);
    let p = kolmogorov_upper_tail((n as f64).sqrt() * d);
    Ok(NormalityTestResult {
        statistic: d,
        p_value: p,
        n,
        alpha,
        reject: p < alpha,
        fitted_mean: m,
        fitted_sd: sd,
        estimated_parameters: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfPoint {
    pub value: f64,
    pub fraction: f64,
}

/// Right-continuous empirical CDF with ties merged.
pub fn empirical_cdf(values: &[f64]) -> Vec<CdfPoint> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.value == *v => last.fraction = fraction,
            _ => out.push(CdfPoint { value: *v, fraction }),
        }
    }
    out
}

/// Two-column `value,fraction` table.
pub fn write_cdf_table<W: std::io::Write>(sink: W, table: &[CdfPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["value", "fraction"])?;
    for p in table {
        w.write_record([p.value.to_string(), p.fraction.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
