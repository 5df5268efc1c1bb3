use lrfit_core::dataset::{parse_noise_band, Schema, DEFAULT_HOLDOUT};
use lrfit_core::diagnostics::{DiagnosticThresholds, Grouping};
use lrfit_core::pipeline::{PipelineConfig, PRESET_NAMES};
use lrfit_core::regression::LarSettings;
use lrfit_core::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Every setting of a run. All keys are optional; an empty file yields the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// `LOW:HIGH` in dB, or `off`.
    pub noise_band: String,
    pub holdout: usize,
    pub seed: u64,
    pub presets: Vec<String>,
    pub lar_tol: f64,
    pub lar_max_iter: usize,
    pub lar_delta: f64,
    pub tolerance_cutoff: f64,
    pub dw_low: f64,
    pub dw_high: f64,
    pub alpha: f64,
    pub outlier_z: f64,
    /// `p_tx` or `fitted-quantiles:N`.
    pub grouping: String,
    pub columns: Schema,
}

impl Default for RunConfig {
    fn default() -> Self {
        let lar = LarSettings::default();
        let t = DiagnosticThresholds::default();
        RunConfig {
            input: None,
            output_dir: PathBuf::from("lrfit-out"),
            noise_band: "-120:-100".into(),
            holdout: DEFAULT_HOLDOUT,
            seed: 42,
            presets: PRESET_NAMES.iter().map(|s| s.to_string()).collect(),
            lar_tol: lar.tol,
            lar_max_iter: lar.max_iter,
            lar_delta: lar.delta,
            tolerance_cutoff: t.tolerance_cutoff,
            dw_low: t.dw_window.0,
            dw_high: t.dw_window.1,
            alpha: t.alpha,
            outlier_z: t.outlier_z,
            grouping: Grouping::default().to_string(),
            columns: Schema::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub noise_band: Option<String>,
    pub holdout: Option<usize>,
    pub presets: Option<Vec<String>>,
    pub alpha: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                RunConfig::parse(&text)
            }
        }
    }

    pub fn apply(mut self, o: Overrides) -> RunConfig {
        if o.input.is_some() {
            self.input = o.input;
        }
        if let Some(v) = o.output_dir {
            self.output_dir = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.noise_band {
            self.noise_band = v;
        }
        if let Some(v) = o.holdout {
            self.holdout = v;
        }
        if let Some(v) = o.presets {
            self.presets = v;
        }
        if let Some(v) = o.alpha {
            self.alpha = v;
        }
        self
    }

    /// Validate and convert to pipeline settings.
    pub fn pipeline(&self) -> Result<PipelineConfig> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.tolerance_cutoff > 0.0 && self.tolerance_cutoff < 1.0) {
            return Err(Error::Config(format!("tolerance_cutoff {} must lie in (0, 1)", self.tolerance_cutoff)));
        }
        if !(self.dw_low <= self.dw_high) {
            return Err(Error::Config(format!("dw window [{}, {}] is empty", self.dw_low, self.dw_high)));
        }
        if !(self.lar_tol > 0.0 && self.lar_delta > 0.0 && self.lar_max_iter > 0) {
            return Err(Error::Config("lar_tol, lar_delta and lar_max_iter must be positive".into()));
        }
        if !(self.outlier_z > 0.0) {
            return Err(Error::Config(format!("outlier_z {} must be positive", self.outlier_z)));
        }
        Ok(PipelineConfig {
            noise_band: parse_noise_band(&self.noise_band)?,
            holdout: self.holdout,
            seed: self.seed,
            presets: self.presets.clone(),
            lar: LarSettings { tol: self.lar_tol, max_iter: self.lar_max_iter, delta: self.lar_delta },
            thresholds: DiagnosticThresholds {
                tolerance_cutoff: self.tolerance_cutoff,
                dw_window: (self.dw_low, self.dw_high),
                alpha: self.alpha,
                outlier_z: self.outlier_z,
            },
            grouping: self.grouping.parse()?,
        })
    }

    pub fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::Config("no input file; pass --input or set `input`".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        let p = RunConfig::default().pipeline().unwrap();
        assert_eq!(p, PipelineConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("holdout = 10\nhold_out = 3\n").unwrap_err().to_string();
        assert!(err.contains("hold_out"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let cfg = RunConfig::parse("seed = 1\nholdout = 10\n").unwrap();
        let cfg = cfg.apply(Overrides { seed: Some(9), ..Default::default() });
        assert_eq!((cfg.seed, cfg.holdout), (9, 10));
    }

    #[test]
    fn noise_band_off_disables_filter() {
        let cfg = RunConfig { noise_band: "off".into(), ..Default::default() };
        assert_eq!(cfg.pipeline().unwrap().noise_band, None);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in ["alpha = 1.5", "grouping = \"weekday\"", "noise_band = \"-100:-120\"", "dw_low = 3.0"] {
            let cfg = RunConfig::parse(text).unwrap();
            assert!(cfg.pipeline().is_err(), "{text}");
        }
    }

    #[test]
    fn column_mapping_is_read() {
        let cfg = RunConfig::parse("[columns]\np_rx = \"rx_dbm\"\n").unwrap();
        assert_eq!(cfg.columns.p_rx, "rx_dbm");
        assert_eq!(cfg.columns.d, "d");
    }
}
