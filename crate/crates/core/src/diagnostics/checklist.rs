use super::*;
use crate::dataset::{Dataset, Field};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub threshold: String,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Verdict {
    fn new(status: Status, statistic: f64, threshold: impl Into<String>) -> Self {
        Verdict { status, statistic, p_value: None, threshold: threshold.into(), note: String::new() }
    }

    fn with_p(mut self, p: f64) -> Self {
        self.p_value = Some(p);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// One verdict per regression assumption.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionChecklist {
    pub continuity: Verdict,
    pub linearity: Verdict,
    pub multicollinearity: Verdict,
    pub outliers: Verdict,
    /// Durbin-Watson window.
    pub parsimony: Verdict,
    pub homoscedasticity: Verdict,
    pub residual_normality: Verdict,
}

impl AssumptionChecklist {
    pub fn entries(&self) -> [(&'static str, &Verdict); 7] {
        [
            ("continuity", &self.continuity),
            ("linearity", &self.linearity),
            ("multicollinearity", &self.multicollinearity),
            ("outliers", &self.outliers),
            ("parsimony", &self.parsimony),
            ("homoscedasticity", &self.homoscedasticity),
            ("residual_normality", &self.residual_normality),
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.entries().iter().all(|(_, v)| v.passed())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticThresholds {
    pub tolerance_cutoff: f64,
    pub dw_window: (f64, f64),
    pub alpha: f64,
    /// |standardized residual| above this counts as an outlier.
    pub outlier_z: f64,
}

impl Default for DiagnosticThresholds {
    fn default() -> Self {
        DiagnosticThresholds {
            tolerance_cutoff: DEFAULT_TOLERANCE_CUTOFF,
            dw_window: DW_WINDOW,
            alpha: DEFAULT_ALPHA,
            outlier_z: 3.0,
        }
    }
}

/// Strata for the homoscedasticity test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    /// One group per distinct transmit power.
    #[default]
    TransmitPower,
    /// Equal-count bins over the fitted values.
    FittedQuantiles(usize),
}

impl std::str::FromStr for Grouping {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "p_tx" || s == "transmit-power" {
            return Ok(Grouping::TransmitPower);
        }
        if let Some(q) = s.strip_prefix("fitted-quantiles:") {
            if let Ok(q) = q.parse::<usize>() {
                if q >= 2 {
                    return Ok(Grouping::FittedQuantiles(q));
                }
            }
        }
        Err(Error::Config(format!("grouping `{s}` is not `p_tx` or `fitted-quantiles:N` with N >= 2")))
    }
}

impl std::fmt::Display for Grouping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Grouping::TransmitPower => f.write_str("p_tx"),
            Grouping::FittedQuantiles(q) => write!(f, "fitted-quantiles:{q}"),
        }
    }
}

/// Group label per observation for the fit over `data`.
pub fn group_labels(data: &Dataset, fit: &FitResult, grouping: Grouping) -> Vec<String> {
    match grouping {
        Grouping::TransmitPower => data.column(Field::PTx).iter().map(|v| v.to_string()).collect(),
        Grouping::FittedQuantiles(q) => {
            let n = fit.fitted.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| fit.fitted[a].total_cmp(&fit.fitted[b]));
            let mut labels = vec![String::new(); n];
            for (rank, &i) in order.iter().enumerate() {
                labels[i] = format!("q{}", rank * q / n);
            }
            labels
        }
    }
}

/// Fails when any predictor's tolerance is below the report's threshold; the
/// statistic is the smallest tolerance.
pub fn multicollinearity_verdict(report: &CollinearityReport) -> Verdict {
    let min_tol = report.entries.iter().fold(1.0f64, |m, e| m.min(e.tolerance));
    let threshold = format!("tolerance >= {}", report.threshold);
    let flagged: Vec<&str> = report.flagged().map(|e| e.label.as_str()).collect();
    if flagged.is_empty() {
        Verdict::new(Status::Pass, min_tol, threshold)
    } else {
        Verdict::new(Status::Fail, min_tol, threshold).with_note(format!("flagged: {}", flagged.join(", ")))
    }
}

/// Every statistic behind the checklist, kept for the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub checklist: AssumptionChecklist,
    pub correlation: CorrelationMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collinearity: Option<CollinearityReport>,
    pub anova: AnovaF,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub durbin_watson: Option<DurbinWatson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levene: Option<LeveneResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normality: Option<NormalityTestResult>,
    pub outlier_count: usize,
}

/// Residuals this small relative to the response are rounding noise.
const PERFECT_FIT_RATIO: f64 = 1e-10;

fn is_perfect_fit(problem: &RegressionProblem, fit: &FitResult) -> bool {
    let y_norm = problem.y.iter().map(|v| v * v).sum::<f64>().sqrt();
    fit.sse().sqrt() <= PERFECT_FIT_RATIO * y_norm.max(1.0)
}

pub fn run_checklist(
    problem: &RegressionProblem,
    fit: &FitResult,
    groups: &[String],
    thresholds: &DiagnosticThresholds,
) -> Result<AssumptionChecklist> {
    diagnose(problem, fit, groups, thresholds).map(|r| r.checklist)
}

/// Run the full assumption battery on one fit.
///
/// When the residuals are numerically zero the residual-based tests are
/// undefined; their verdicts are reported as warnings instead of failing.
pub fn diagnose(
    problem: &RegressionProblem,
    fit: &FitResult,
    groups: &[String],
    t: &DiagnosticThresholds,
) -> Result<DiagnosticsReport> {
    // continuity: finite values and at least two distinct values per column
    let mut columns = vec![("y".to_string(), problem.y.clone())];
    columns.extend(problem.predictors());
    let finite = columns.iter().all(|(_, c)| c.iter().all(|v| v.is_finite()));
    let min_distinct = columns
        .iter()
        .map(|(_, c)| {
            let mut s = c.clone();
            s.sort_by(f64::total_cmp);
            s.dedup();
            s.len()
        })
        .min()
        .unwrap_or(0);
    let continuity = Verdict::new(
        if finite && min_distinct >= 2 { Status::Pass } else { Status::Fail },
        min_distinct as f64,
        "finite, >= 2 distinct values per column",
    );

    let correlation = correlation_matrix(&columns)?;

    let anova = anova_f(fit)?;
    let linearity = Verdict::new(
        if anova.significance < t.alpha { Status::Pass } else { Status::Fail },
        anova.f,
        format!("F significance < {}", t.alpha),
    )
    .with_p(anova.significance);

    let (collinearity, multicollinearity) = if problem.k() >= 2 {
        let report = collinearity(problem, t.tolerance_cutoff)?;
        let v = multicollinearity_verdict(&report);
        (Some(report), v)
    } else {
        (None, Verdict::new(Status::Pass, 1.0, "n/a").with_note("fewer than two predictors"))
    };

    let perfect = is_perfect_fit(problem, fit);
    let perfect_note = "residuals are numerically zero; test undefined";
    let dw_threshold = format!("[{}, {}]", t.dw_window.0, t.dw_window.1);
    let outlier_threshold = format!("|z| <= {}", t.outlier_z);
    let alpha_threshold = format!("significance >= {}", t.alpha);

    let (outlier_count, outliers) = if perfect {
        (0, Verdict::new(Status::Warn, 0.0, outlier_threshold).with_note(perfect_note))
    } else {
        let count = fit.residuals.iter().filter(|r| (*r / fit.s_e).abs() > t.outlier_z).count();
        let status = if count == 0 { Status::Pass } else { Status::Warn };
        (count, Verdict::new(status, count as f64, outlier_threshold))
    };

    let (durbin_watson, parsimony) = if perfect {
        (None, Verdict::new(Status::Warn, f64::NAN, dw_threshold).with_note(perfect_note))
    } else {
        let dw = durbin_watson_with(&fit.residuals, t.dw_window)?;
        let status = if dw.pass { Status::Pass } else { Status::Fail };
        (Some(dw), Verdict::new(status, dw.statistic, dw_threshold))
    };

    let (levene, homoscedasticity) = if perfect {
        (None, Verdict::new(Status::Warn, f64::NAN, alpha_threshold.clone()).with_note(perfect_note))
    } else {
        let lv = levene_test_at(&fit.residuals, groups, t.alpha)?;
        let status = if lv.equal_variance { Status::Pass } else { Status::Fail };
        let v = Verdict::new(status, lv.w, alpha_threshold.clone()).with_p(lv.significance);
        (Some(lv), v)
    };

    let (normality, residual_normality) = if perfect {
        (None, Verdict::new(Status::Warn, f64::NAN, alpha_threshold).with_note(perfect_note))
    } else {
        let ks = ks_normality_at(&fit.residuals, t.alpha)?;
        let status = if ks.reject { Status::Fail } else { Status::Pass };
        let v = Verdict::new(status, ks.statistic, alpha_threshold).with_p(ks.p_value);
        (Some(ks), v)
    };

    Ok(DiagnosticsReport {
        checklist: AssumptionChecklist {
            continuity,
            linearity,
            multicollinearity,
            outliers,
            parsimony,
            homoscedasticity,
            residual_normality,
        },
        correlation,
        collinearity,
        anova,
        durbin_watson,
        levene,
        normality,
        outlier_count,
    })
}
