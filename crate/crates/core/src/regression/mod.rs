//! Design-matrix construction from declared functional forms, OLS via
//! Householder QR, least-absolute-residual fits via IRLS, and the standard
//! error / R² / CV goodness-of-fit measures.

pub mod linalg;

use crate::dataset::{Dataset, Field, LinkPrediction, QueryRow};
use crate::error::{Error, Result};
use linalg::{Matrix, Qr};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// log10 of the field. For dB fields this is the dB value over ten,
    /// i.e. log10 of the linear power.
    Log10,
}

impl Transform {
    pub fn apply(self, field: Field, value: f64) -> std::result::Result<f64, String> {
        match self {
            Transform::Identity => Ok(value),
            Transform::Log10 if field.is_db() => Ok(value / 10.0),
            Transform::Log10 if value > 0.0 => Ok(value.log10()),
            Transform::Log10 => Err(format!("log10 of non-positive {field} = {value}")),
        }
    }

    pub fn invert(self, field: Field, value: f64) -> f64 {
        match self {
            Transform::Identity => value,
            Transform::Log10 if field.is_db() => value * 10.0,
            Transform::Log10 => 10f64.powf(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub field: Field,
    pub transform: Transform,
}

impl Term {
    pub fn new(label: &str, field: Field, transform: Transform) -> Self {
        Term { label: label.into(), field, transform }
    }

    pub fn describe(&self) -> String {
        match self.transform {
            Transform::Identity => self.field.name().to_string(),
            Transform::Log10 => format!("log({})", self.field),
        }
    }
}

/// Dependent variable `T(field) − T(offset)`; the offset carries a fixed unit
/// coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub field: Field,
    pub transform: Transform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Field>,
    /// Label of the fixed unit coefficient carried by the offset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub response: Response,
    pub terms: Vec<Term>,
    /// Label of the intercept coefficient, `None` for a model through the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercept: Option<String>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let mut labels: Vec<&str> = self.terms.iter().map(|t| t.label.as_str()).collect();
        labels.extend(self.intercept.as_deref());
        labels.extend(self.response.offset_label.as_deref());
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(Error::Config(format!("model `{}` has duplicate coefficient labels", self.name)));
        }
        Ok(())
    }

    /// Column labels in design order: intercept first when present.
    pub fn column_labels(&self) -> Vec<String> {
        self.intercept.iter().cloned().chain(self.terms.iter().map(|t| t.label.clone())).collect()
    }

    pub fn required_fields(&self) -> Vec<Field> {
        let mut f: Vec<Field> = self.terms.iter().map(|t| t.field).collect();
        f.extend(self.response.offset);
        f.sort_unstable();
        f.dedup();
        f
    }

    fn response_value(&self, row: &LinkPrediction) -> std::result::Result<f64, String> {
        let r = &self.response;
        let mut y = r.transform.apply(r.field, row.get(r.field))?;
        if let Some(off) = r.offset {
            y -= r.transform.apply(off, row.get(off))?;
        }
        Ok(y)
    }

    fn design_row(&self, get: impl Fn(Field) -> Option<f64>) -> std::result::Result<Vec<f64>, String> {
        let mut out = Vec::with_capacity(self.terms.len() + 1);
        if self.intercept.is_some() {
            out.push(1.0);
        }
        for t in &self.terms {
            let v = get(t.field).ok_or_else(|| format!("missing field {}", t.field))?;
            out.push(t.transform.apply(t.field, v)?);
        }
        Ok(out)
    }

    /// Predict the response field in its recorded units (dB for powers).
    pub fn predict(&self, beta: &[f64], get: impl Fn(Field) -> Option<f64>) -> std::result::Result<f64, String> {
        let x = self.design_row(&get)?;
        let linear: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
        let r = &self.response;
        let Some(off) = r.offset else {
            return Ok(r.transform.invert(r.field, linear));
        };
        let v = get(off).ok_or_else(|| format!("missing field {off}"))?;
        let affine = r.transform == Transform::Identity || (r.field.is_db() && off.is_db());
        if affine {
            // the offset passes through untouched, so zero coefficients reproduce it exactly
            Ok(r.transform.invert(r.field, linear) + v)
        } else {
            Ok(r.transform.invert(r.field, linear + r.transform.apply(off, v)?))
        }
    }

    pub fn predict_row(&self, beta: &[f64], row: &LinkPrediction) -> std::result::Result<f64, String> {
        self.predict(beta, |f| Some(row.get(f)))
    }

    pub fn predict_query(&self, beta: &[f64], row: &QueryRow) -> std::result::Result<f64, String> {
        self.predict(beta, |f| row.get(f))
    }

    pub fn without_term(&self, label: &str) -> ModelSpec {
        ModelSpec {
            terms: self.terms.iter().filter(|t| t.label != label).cloned().collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub y: Vec<f64>,
    pub x: Matrix,
    pub term_labels: Vec<String>,
    pub intercept: bool,
}

impl RegressionProblem {
    /// Build directly from columns; the intercept column is prepended when
    /// `intercept` is set.
    pub fn new(y: Vec<f64>, predictors: &[(String, Vec<f64>)], intercept: bool) -> Result<Self> {
        let n = y.len();
        let mut columns = Vec::with_capacity(predictors.len() + 1);
        let mut labels = Vec::with_capacity(predictors.len() + 1);
        if intercept {
            columns.push(vec![1.0; n]);
            labels.push("intercept".to_string());
        }
        for (label, col) in predictors {
            if col.len() != n {
                return Err(Error::InvalidValue(format!("column `{label}` has length {} != {n}", col.len())));
            }
            columns.push(col.clone());
            labels.push(label.clone());
        }
        let p = RegressionProblem { x: Matrix::from_columns(n, &columns), y, term_labels: labels, intercept };
        p.check()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of non-intercept predictors.
    pub fn k(&self) -> usize {
        self.x.ncols() - usize::from(self.intercept)
    }

    /// Non-intercept predictor columns with their labels.
    pub fn predictors(&self) -> Vec<(String, Vec<f64>)> {
        let start = usize::from(self.intercept);
        (start..self.x.ncols()).map(|j| (self.term_labels[j].clone(), self.x.column(j).to_vec())).collect()
    }

    fn check(&self) -> Result<()> {
        let (n, k) = (self.n(), self.k());
        if n <= k + 1 {
            return Err(Error::DegreesOfFreedom { n, k });
        }
        for j in usize::from(self.intercept)..self.x.ncols() {
            let col = self.x.column(j);
            if col.iter().all(|v| *v == col[0]) {
                return Err(Error::ConstantColumn(self.term_labels[j].clone()));
            }
        }
        Ok(())
    }
}

/// Evaluate the spec over the dataset. Column order is the intercept (if any)
/// followed by the terms in declaration order.
pub fn build_problem(data: &Dataset, spec: &ModelSpec) -> Result<RegressionProblem> {
    spec.validate()?;
    let n = data.len();
    let p = spec.terms.len() + usize::from(spec.intercept.is_some());
    let mut x = Matrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    for (i, row) in data.rows.iter().enumerate() {
        let at = |e: String| Error::Domain(format!("row {}: {e}", data.ids.get(i).copied().unwrap_or(i)));
        y.push(spec.response_value(row).map_err(at)?);
        let xr = spec.design_row(|f| Some(row.get(f))).map_err(at)?;
        for (j, v) in xr.into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    let problem = RegressionProblem { y, x, term_labels: spec.column_labels(), intercept: spec.intercept.is_some() };
    problem.check()?;
    Ok(problem)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ols,
    Lar,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Lar => "lar",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub labels: Vec<String>,
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub s_e: f64,
    pub r_squared: f64,
    pub method: Method,
    /// Number of non-intercept predictors.
    pub k: usize,
    pub intercept: bool,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.beta[i])
    }

    pub fn sse(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

fn singular(problem: &RegressionProblem, qr: &Qr) -> Option<Error> {
    let deficient = qr.deficient_columns();
    let first = *deficient.first()?;
    let cols = qr.dependency_of(first).into_iter().map(|j| problem.term_labels[j].clone()).collect();
    Some(Error::SingularDesign(cols))
}

fn finish(problem: &RegressionProblem, beta: Vec<f64>, method: Method) -> Result<FitResult> {
    let fitted = problem.x.mul_vec(&beta);
    let residuals: Vec<f64> = problem.y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let mut fit = FitResult {
        labels: problem.term_labels.clone(),
        beta,
        residuals,
        fitted,
        s_e: 0.0,
        r_squared: 0.0,
        method,
        k: problem.k(),
        intercept: problem.intercept,
        iterations: 0,
        converged: true,
    };
    let (s_e, r2) = goodness_of_fit(&fit, &problem.y)?;
    fit.s_e = s_e;
    fit.r_squared = r2;
    Ok(fit)
}

/// Ordinary least squares through a Householder QR of the design.
pub fn fit_ols(problem: &RegressionProblem) -> Result<FitResult> {
    let qr = Qr::new(&problem.x);
    if let Some(e) = singular(problem, &qr) {
        return Err(e);
    }
    finish(problem, qr.solve(&problem.y), Method::Ols)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LarSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Residual floor in the IRLS weights.
    pub delta: f64,
}

impl Default for LarSettings {
    fn default() -> Self {
        LarSettings { tol: 1e-8, max_iter: 50, delta: 1e-6 }
    }
}

/// Least absolute residuals by IRLS with weights `1 / max(|r|, delta)`,
/// started from the OLS solution. Non-convergence is reported, not fatal.
pub fn fit_lar(problem: &RegressionProblem, settings: LarSettings) -> Result<FitResult> {
    let qr = Qr::new(&problem.x);
    if let Some(e) = singular(problem, &qr) {
        return Err(e);
    }
    let mut beta = qr.solve(&problem.y);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.max_iter {
        iterations += 1;
        let fitted = problem.x.mul_vec(&beta);
        let sw: Vec<f64> = problem
            .y
            .iter()
            .zip(&fitted)
            .map(|(y, f)| (1.0 / (y - f).abs().max(settings.delta)).sqrt())
            .collect();
        let xw = problem.x.scale_rows(&sw);
        let yw: Vec<f64> = problem.y.iter().zip(&sw).map(|(y, s)| y * s).collect();
        let wqr = Qr::new(&xw);
        if let Some(e) = singular(problem, &wqr) {
            return Err(e);
        }
        let next = wqr.solve(&yw);
        let change = next.iter().zip(&beta).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        beta = next;
        if change < settings.tol {
            converged = true;
            break;
        }
    }
    let mut fit = finish(problem, beta, Method::Lar)?;
    fit.iterations = iterations;
    fit.converged = converged;
    Ok(fit)
}

/// Standard error of estimate with n − k − 1 degrees of freedom, and R².
pub fn goodness_of_fit(result: &FitResult, y: &[f64]) -> Result<(f64, f64)> {
    let n = y.len();
    let k = result.k;
    if n <= k + 1 {
        return Err(Error::DegreesOfFreedom { n, k });
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::ZeroVariance("response has zero total variance".into()));
    }
    let sse: f64 = y.iter().zip(&result.fitted).map(|(a, f)| (a - f).powi(2)).sum();
    Ok(((sse / (n - k - 1) as f64).sqrt(), 1.0 - sse / sst))
}

/// `s_e / |mean(y)|`.
pub fn coefficient_of_variation(result: &FitResult, y: &[f64]) -> Result<f64> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if mean == 0.0 || !mean.is_finite() {
        return Err(Error::ZeroVariance("response mean is zero".into()));
    }
    Ok(result.s_e / mean.abs())
}
