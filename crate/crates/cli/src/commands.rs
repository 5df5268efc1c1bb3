use crate::config::RunConfig;
use crate::model::ModelFile;
use crate::report::{diagnose_section, filter_section, fit_section, residual_cdf_file, E_LR_CDF_FILE};
use lrfit_core::dataset::{
    filter_noise_band, generate_synthetic, load_dataset, load_query_rows, write_dataset, write_filter_log, Dataset,
    SyntheticConfig,
};
use lrfit_core::diagnostics::{empirical_cdf, write_cdf_table};
use lrfit_core::pipeline::{run_pipeline, PipelineConfig, PipelineOutcome};
use lrfit_core::{Error, Result};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const FILTERED_FILE: &str = "filtered.csv";
pub const FILTER_LOG_FILE: &str = "filter_log.csv";
pub const FILTER_REPORT: &str = "filter.toml";
pub const FIT_REPORT: &str = "fit.toml";
pub const DIAGNOSE_REPORT: &str = "diagnose.toml";
pub const RUN_REPORT: &str = "report.toml";
pub const SELECTED_MODEL: &str = "model.toml";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const METADATA_FILE: &str = "metadata.toml";

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| io_err(&cfg.output_dir, e))?;
    Ok(cfg.output_dir.clone())
}

/// Run facts that vary between identical invocations live here, apart from
/// the reports.
fn write_metadata(dir: &Path, command: &str, cfg: &RunConfig) -> Result<()> {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut table = toml::Table::new();
    table.insert("command".into(), command.into());
    table.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    table.insert("unix_time".into(), toml::Value::Integer(secs as i64));
    if let Some(input) = &cfg.input {
        table.insert("input".into(), input.display().to_string().into());
    }
    write_text(&dir.join(METADATA_FILE), &table.to_string())
}

fn load_input(cfg: &RunConfig) -> Result<Dataset> {
    let path = cfg.input()?;
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut data = load_dataset(file, &cfg.columns)?;
    data.provenance = path.display().to_string();
    Ok(data)
}

fn prepare(cfg: &RunConfig) -> Result<(PipelineConfig, Dataset, PipelineOutcome)> {
    let pipeline = cfg.pipeline().map_err(|e| e.at("config"))?;
    let data = load_input(cfg).map_err(|e| e.at("load"))?;
    let outcome = run_pipeline(&data, &pipeline)?;
    Ok((pipeline, data, outcome))
}

fn write_filter_outputs(dir: &Path, filtered: &Dataset) -> Result<()> {
    write_dataset(create(&dir.join(FILTERED_FILE))?, filtered)?;
    write_filter_log(create(&dir.join(FILTER_LOG_FILE))?, &filtered.filter_log)
}

fn write_models(dir: &Path, out: &PipelineOutcome) -> Result<()> {
    let Some(a) = &out.analysis else { return Ok(()) };
    for c in &a.candidates {
        write_text(&dir.join(ModelFile::file_name(c)), &ModelFile::from_candidate(c).to_toml()?)?;
    }
    if let Some(c) = a.selected() {
        write_text(&dir.join(SELECTED_MODEL), &ModelFile::from_candidate(c).to_toml()?)?;
    }
    Ok(())
}

fn write_cdf_tables(dir: &Path, out: &PipelineOutcome) -> Result<()> {
    write_cdf_table(create(&dir.join(E_LR_CDF_FILE))?, &empirical_cdf(&out.e_lr.e_lr))?;
    for c in out.analysis.iter().flat_map(|a| &a.candidates) {
        write_cdf_table(create(&dir.join(residual_cdf_file(c)))?, &empirical_cdf(&c.fit.residuals))?;
    }
    Ok(())
}

fn fit_summary(out: &PipelineOutcome) -> String {
    match &out.analysis {
        None => format!("discrepancy is random (KS p = {}); no correction fitted", out.gate.test.p_value),
        Some(a) => {
            let mut s = format!("{} candidates fitted", a.candidates.len());
            match a.selected() {
                Some(c) => s.push_str(&format!("; selected {} (r_squared {})", c.name, c.fit.r_squared)),
                None => s.push_str("; no candidate improved on the raw prediction"),
            }
            s
        }
    }
}

/// Apply the noise-band filter and write the kept rows, the rejection log and
/// the filter report.
pub fn cmd_filter(cfg: &RunConfig) -> Result<String> {
    let pipeline = cfg.pipeline().map_err(|e| e.at("config"))?;
    let data = load_input(cfg).map_err(|e| e.at("load"))?;
    let filtered = filter_noise_band(&data, pipeline.noise_band);
    let dir = output_dir(cfg).map_err(|e| e.at("write"))?;
    (|| {
        write_filter_outputs(&dir, &filtered)?;
        write_text(&dir.join(FILTER_REPORT), &filter_section(&data, &filtered, pipeline.noise_band)?)?;
        write_metadata(&dir, "filter", cfg)
    })()
    .map_err(|e| e.at("write"))?;
    Ok(format!("kept {}, removed {}", filtered.len(), data.len() + data.filter_log.len() - filtered.len()))
}

/// Fit every selected preset by OLS and LAR; write the fit report and one
/// model file per candidate.
pub fn cmd_fit(cfg: &RunConfig) -> Result<String> {
    let (pipeline, _, out) = prepare(cfg)?;
    let dir = output_dir(cfg).map_err(|e| e.at("write"))?;
    (|| {
        write_text(&dir.join(FIT_REPORT), &fit_section(&out, &pipeline)?)?;
        write_models(&dir, &out)?;
        write_metadata(&dir, "fit", cfg)
    })()
    .map_err(|e| e.at("write"))?;
    Ok(fit_summary(&out))
}

/// Write the assumption checklists and the e_LR / residual CDF tables.
pub fn cmd_diagnose(cfg: &RunConfig) -> Result<String> {
    let (_, _, out) = prepare(cfg)?;
    let dir = output_dir(cfg).map_err(|e| e.at("write"))?;
    (|| {
        write_text(&dir.join(DIAGNOSE_REPORT), &diagnose_section(&out)?)?;
        write_cdf_tables(&dir, &out)?;
        write_metadata(&dir, "diagnose", cfg)
    })()
    .map_err(|e| e.at("write"))?;
    let passing = out.analysis.iter().flat_map(|a| &a.candidates).filter(|c| c.diagnostics.checklist.all_pass()).count();
    let total = out.analysis.as_ref().map_or(0, |a| a.candidates.len());
    Ok(format!("{passing} of {total} candidates pass every assumption check"))
}

/// The whole pipeline in one report: the filter, fit and diagnose sections in
/// that order, plus every table and model file the stages write.
pub fn cmd_run(cfg: &RunConfig) -> Result<String> {
    let (pipeline, data, out) = prepare(cfg)?;
    let dir = output_dir(cfg).map_err(|e| e.at("write"))?;
    (|| {
        let mut report = filter_section(&data, &out.filtered, pipeline.noise_band)?;
        report.push_str(&fit_section(&out, &pipeline)?);
        report.push_str(&diagnose_section(&out)?);
        write_text(&dir.join(RUN_REPORT), &report)?;
        write_filter_outputs(&dir, &out.filtered)?;
        write_models(&dir, &out)?;
        write_cdf_tables(&dir, &out)?;
        write_metadata(&dir, "run", cfg)
    })()
    .map_err(|e| e.at("write"))?;
    Ok(fit_summary(&out))
}

/// Predict p_rx (dB) for each row of the input table with a saved model.
pub fn cmd_predict(cfg: &RunConfig, model_path: &Path) -> Result<String> {
    let model = fs::read_to_string(model_path)
        .map_err(|e| io_err(model_path, e))
        .and_then(|t| ModelFile::from_toml(&t))
        .map_err(|e| e.at("model"))?;
    let input = cfg.input().map_err(|e| e.at("load"))?;
    let rows = File::open(input)
        .map_err(|e| io_err(input, e))
        .and_then(|f| load_query_rows(f, &cfg.columns))
        .map_err(|e| e.at("load"))?;
    let predicted = model.predict(&rows).map_err(|e| e.at("predict"))?;
    let dir = output_dir(cfg).map_err(|e| e.at("write"))?;
    let mut text = String::from("row,p_rx\n");
    for (i, p) in predicted.iter().enumerate() {
        text.push_str(&format!("{i},{p}\n"));
    }
    write_text(&dir.join(PREDICTIONS_FILE), &text).map_err(|e| e.at("write"))?;
    Ok(format!("{} predictions with {}", predicted.len(), model.candidate))
}

/// Write a synthetic dataset as CSV.
pub fn cmd_synth(synth: &SyntheticConfig, path: &Path) -> Result<String> {
    let data = generate_synthetic(synth).map_err(|e| e.at("synth"))?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e).at("write"))?;
    }
    create(path).and_then(|w| write_dataset(w, &data)).map_err(|e| e.at("write"))?;
    Ok(format!("{} rows written to {}", data.len(), path.display()))
}
