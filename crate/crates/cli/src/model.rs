//! Self-contained fitted-model files for `predict`.

use lrfit_core::dataset::QueryRow;
use lrfit_core::pipeline::Candidate;
use lrfit_core::regression::{Method, ModelSpec};
use lrfit_core::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub candidate: String,
    pub method: Method,
    pub model: ModelSpec,
    pub coefficients: BTreeMap<String, f64>,
}

impl ModelFile {
    pub fn from_candidate(c: &Candidate) -> ModelFile {
        ModelFile {
            candidate: c.name.clone(),
            method: c.method,
            model: c.spec.clone(),
            coefficients: c.fit.labels.iter().cloned().zip(c.fit.beta.iter().copied()).collect(),
        }
    }

    pub fn file_name(c: &Candidate) -> String {
        format!("model_{}.toml", c.name.replace('/', "-"))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidValue(format!("model serialization: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<ModelFile> {
        let m: ModelFile = toml::from_str(text).map_err(|e| Error::Config(format!("model file: {}", e.message())))?;
        m.model.validate()?;
        m.beta()?;
        Ok(m)
    }

    /// Coefficients in design-column order.
    pub fn beta(&self) -> Result<Vec<f64>> {
        self.model
            .column_labels()
            .iter()
            .map(|l| {
                self.coefficients
                    .get(l)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("model file has no coefficient `{l}`")))
            })
            .collect()
    }

    /// Predicted p_rx (dB) for each query row.
    pub fn predict(&self, rows: &[QueryRow]) -> Result<Vec<f64>> {
        let beta = self.beta()?;
        rows.iter()
            .enumerate()
            .map(|(i, r)| self.model.predict_query(&beta, r).map_err(|e| Error::Domain(format!("query row {i}: {e}"))))
            .collect()
    }
}
