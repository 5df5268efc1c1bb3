//! TOML report sections. Each stage writes one top-level table, so the full
//! run report is the plain concatenation of the staged documents.

use lrfit_core::dataset::{format_noise_band, Dataset, NoiseBand};
use lrfit_core::diagnostics::DiagnosticsReport;
use lrfit_core::pipeline::{Candidate, CandidateSummary, GateOutcome, PipelineConfig, PipelineOutcome, ValidationResult};
use lrfit_core::regression::{ModelSpec, Transform};
use lrfit_core::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;

fn render<T: Serialize>(doc: &T) -> Result<String> {
    let mut text = toml::to_string(doc).map_err(|e| Error::InvalidValue(format!("report serialization: {e}")))?;
    // blank line between sections once concatenated
    text.push('\n');
    Ok(text)
}

#[derive(Serialize)]
struct FilterDoc {
    filter: FilterSection,
}

#[derive(Serialize)]
struct FilterSection {
    noise_band: String,
    input_rows: usize,
    kept: usize,
    removed: usize,
    removed_by_reason: BTreeMap<String, usize>,
}

/// `loaded` is the dataset as read (load-time rejections in its log).
pub fn filter_section(loaded: &Dataset, filtered: &Dataset, band: Option<NoiseBand>) -> Result<String> {
    let mut by_reason = BTreeMap::new();
    for e in &filtered.filter_log {
        let key = e.reason.split(':').next().unwrap_or(&e.reason).to_string();
        *by_reason.entry(key).or_insert(0) += 1;
    }
    let input_rows = loaded.len() + loaded.filter_log.len();
    render(&FilterDoc {
        filter: FilterSection {
            noise_band: format_noise_band(band),
            input_rows,
            kept: filtered.len(),
            removed: input_rows - filtered.len(),
            removed_by_reason: by_reason,
        },
    })
}

/// Human-readable functional, e.g. `log(p_rx) - log(p_lr) = B*log(f) + C*log(d) + E`.
pub fn describe_model(spec: &ModelSpec) -> String {
    let r = &spec.response;
    let field = |f: lrfit_core::dataset::Field| match r.transform {
        Transform::Identity => f.name().to_string(),
        Transform::Log10 => format!("log({f})"),
    };
    let mut lhs = field(r.field);
    if let Some(off) = r.offset {
        lhs = format!("{lhs} - {}", field(off));
    }
    let mut rhs: Vec<String> = spec.terms.iter().map(|t| format!("{}*{}", t.label, t.describe())).collect();
    rhs.extend(spec.intercept.clone());
    if rhs.is_empty() {
        rhs.push("0".into());
    }
    format!("{lhs} = {}", rhs.join(" + "))
}

#[derive(Serialize)]
struct FitDoc {
    fit: FitSection,
}

#[derive(Serialize)]
struct FitSection {
    seed: u64,
    holdout: usize,
    presets: Vec<String>,
    outcome: GateOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    train_rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    holdout_rows: Option<usize>,
    gate: GateSection,
    candidates: Vec<CandidateFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<ComparisonSection>,
}

#[derive(Serialize)]
struct GateSection {
    /// KS test of e_LR = (p_rx − p_lr)/10 against a fitted normal.
    basis: String,
    statistic: f64,
    p_value: f64,
    n: usize,
    alpha: f64,
    reject_normality: bool,
    estimated_parameters: bool,
}

#[derive(Serialize)]
struct CandidateFit {
    name: String,
    preset: String,
    method: String,
    model: String,
    dropped_terms: Vec<String>,
    s_e: f64,
    r_squared: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cv: Option<f64>,
    iterations: usize,
    converged: bool,
    coefficients: BTreeMap<String, f64>,
    fixed_coefficients: BTreeMap<String, f64>,
    validation: ValidationResult,
}

#[derive(Serialize)]
struct ComparisonSection {
    selection_rule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    selected: Option<String>,
    candidates: Vec<CandidateSummary>,
}

pub fn coefficient_map(c: &Candidate) -> BTreeMap<String, f64> {
    c.fit.labels.iter().cloned().zip(c.fit.beta.iter().copied()).collect()
}

pub fn fit_section(out: &PipelineOutcome, cfg: &PipelineConfig) -> Result<String> {
    let t = &out.gate.test;
    let gate = GateSection {
        basis: out.e_lr.basis.clone(),
        statistic: t.statistic,
        p_value: t.p_value,
        n: t.n,
        alpha: t.alpha,
        reject_normality: t.reject,
        estimated_parameters: t.estimated_parameters,
    };
    let a = out.analysis.as_ref();
    let candidates = a
        .map(|a| {
            a.candidates
                .iter()
                .map(|c| CandidateFit {
                    name: c.name.clone(),
                    preset: c.preset.clone(),
                    method: c.method.name().into(),
                    model: describe_model(&c.spec),
                    dropped_terms: c.dropped_terms.clone(),
                    s_e: c.fit.s_e,
                    r_squared: c.fit.r_squared,
                    cv: c.cv,
                    iterations: c.fit.iterations,
                    converged: c.fit.converged,
                    coefficients: coefficient_map(c),
                    fixed_coefficients: c.spec.response.offset_label.iter().map(|l| (l.clone(), 1.0)).collect(),
                    validation: c.validation.clone(),
                })
                .collect()
        })
        .unwrap_or_default();
    let comparison = a.map(|a| ComparisonSection {
        selection_rule: a.comparison.selection_rule.clone(),
        selected: a.selected().map(|c| c.name.clone()),
        candidates: a.comparison.candidates.clone(),
    });
    render(&FitDoc {
        fit: FitSection {
            seed: cfg.seed,
            holdout: cfg.holdout,
            presets: cfg.presets.clone(),
            outcome: out.gate.outcome,
            train_rows: a.map(|a| a.train_rows),
            holdout_rows: a.map(|a| a.holdout_rows),
            gate,
            candidates,
            comparison,
        },
    })
}

/// File name of a candidate's residual CDF table.
pub fn residual_cdf_file(c: &Candidate) -> String {
    format!("cdf_residuals_{}.csv", c.name.replace('/', "-"))
}

pub const E_LR_CDF_FILE: &str = "cdf_e_lr.csv";

#[derive(Serialize)]
struct DiagnoseDoc {
    diagnose: DiagnoseSection,
}

#[derive(Serialize)]
struct DiagnoseSection {
    e_lr_cdf: String,
    candidates: Vec<CandidateDiagnostics>,
}

#[derive(Serialize)]
struct CandidateDiagnostics {
    name: String,
    all_pass: bool,
    residual_cdf: String,
    report: DiagnosticsReport,
}

pub fn diagnose_section(out: &PipelineOutcome) -> Result<String> {
    let candidates = out
        .analysis
        .iter()
        .flat_map(|a| &a.candidates)
        .map(|c| CandidateDiagnostics {
            name: c.name.clone(),
            all_pass: c.diagnostics.checklist.all_pass(),
            residual_cdf: residual_cdf_file(c),
            report: c.diagnostics.clone(),
        })
        .collect();
    render(&DiagnoseDoc { diagnose: DiagnoseSection { e_lr_cdf: E_LR_CDF_FILE.into(), candidates } })
}
