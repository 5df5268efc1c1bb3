//! Measurement ingestion, thermal-noise filtering, holdout splitting and the
//! synthetic generator used for desk-scale testing.

use crate::error::{Error, Result};
use crate::propagation::{free_space_loss_db, knife_edge_loss, knife_edge_parameter, ObstaclePath};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

/// Fields carried by every record, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    PRx,
    D,
    PTx,
    H,
    F,
    PLr,
}

impl Field {
    pub const ALL: [Field; 6] = [Field::PRx, Field::D, Field::PTx, Field::H, Field::F, Field::PLr];

    pub fn name(self) -> &'static str {
        match self {
            Field::PRx => "p_rx",
            Field::D => "d",
            Field::PTx => "p_tx",
            Field::H => "h",
            Field::F => "f",
            Field::PLr => "p_lr",
        }
    }

    /// Powers are recorded in dB; a log10 transform on them maps dB/10.
    pub fn is_db(self) -> bool {
        matches!(self, Field::PRx | Field::PTx | Field::PLr)
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Field {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Field::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidValue(format!("unknown field `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    /// Received power, dB.
    pub p_rx: f64,
    /// Transmitter-receiver distance, meters.
    pub d: f64,
    /// Transmit power, dB.
    pub p_tx: f64,
    /// Height above sea level, meters.
    pub h: f64,
    /// Frequency, MHz.
    pub f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkPrediction {
    pub record: MeasurementRecord,
    /// Longley-Rice predicted received power, dB.
    pub p_lr: f64,
}

impl LinkPrediction {
    pub fn get(&self, field: Field) -> f64 {
        let r = &self.record;
        match field {
            Field::PRx => r.p_rx,
            Field::D => r.d,
            Field::PTx => r.p_tx,
            Field::H => r.h,
            Field::F => r.f,
            Field::PLr => self.p_lr,
        }
    }

    fn from_values(v: [f64; 6]) -> Self {
        LinkPrediction {
            record: MeasurementRecord { p_rx: v[0], d: v[1], p_tx: v[2], h: v[3], f: v[4] },
            p_lr: v[5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterEntry {
    /// Index in the originally loaded row order.
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub rows: Vec<LinkPrediction>,
    /// Original row index of each entry of `rows`.
    pub ids: Vec<usize>,
    pub provenance: String,
    pub filter_log: Vec<FilterEntry>,
}

impl Dataset {
    pub fn from_rows(rows: Vec<LinkPrediction>, provenance: impl Into<String>) -> Self {
        let ids = (0..rows.len()).collect();
        Dataset { rows, ids, provenance: provenance.into(), filter_log: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, field: Field) -> Vec<f64> {
        self.rows.iter().map(|r| r.get(field)).collect()
    }

    fn subset(&self, keep: impl Fn(usize) -> bool) -> Dataset {
        let mut out = Dataset { provenance: self.provenance.clone(), ..Default::default() };
        for (i, (row, id)) in self.rows.iter().zip(&self.ids).enumerate() {
            if keep(i) {
                out.rows.push(*row);
                out.ids.push(*id);
            }
        }
        out
    }
}

/// Column-name mapping and record validation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    pub p_rx: String,
    pub d: String,
    pub p_tx: String,
    pub h: String,
    pub f: String,
    pub p_lr: String,
    /// Admissible frequency band, MHz. Records outside it are logged as "domain".
    pub f_band_mhz: Option<(f64, f64)>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            p_rx: "p_rx".into(),
            d: "d".into(),
            p_tx: "p_tx".into(),
            h: "h".into(),
            f: "f".into(),
            p_lr: "p_lr".into(),
            f_band_mhz: Some((20.0, 40.0)),
        }
    }
}

impl Schema {
    pub fn column_name(&self, field: Field) -> &str {
        match field {
            Field::PRx => &self.p_rx,
            Field::D => &self.d,
            Field::PTx => &self.p_tx,
            Field::H => &self.h,
            Field::F => &self.f,
            Field::PLr => &self.p_lr,
        }
    }

    fn check(&self, v: &[f64; 6]) -> std::result::Result<(), String> {
        if let Some(bad) = Field::ALL.iter().find(|f| !v[f.slot()].is_finite()) {
            return Err(format!("{bad} not finite"));
        }
        if v[Field::D.slot()] <= 0.0 {
            return Err("d not positive".into());
        }
        if let Some((lo, hi)) = self.f_band_mhz {
            let f = v[Field::F.slot()];
            if !(lo..=hi).contains(&f) {
                return Err(format!("f {f} outside [{lo}, {hi}] MHz"));
            }
        }
        Ok(())
    }
}

/// One row of a partially specified table, as used for prediction queries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QueryRow {
    pub values: [Option<f64>; 6],
}

impl QueryRow {
    pub fn get(&self, field: Field) -> Option<f64> {
        self.values[field.slot()]
    }
}

struct RawTable {
    has_header: bool,
    columns: [Option<usize>; 6],
    records: Vec<csv::StringRecord>,
}

fn read_table<R: Read>(source: R, schema: &Schema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(source);
    let headers = rdr.headers()?.clone();
    let mut columns = [None; 6];
    for field in Field::ALL {
        let name = schema.column_name(field);
        columns[field.slot()] = headers.iter().position(|h| h == name);
    }
    let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(RawTable { has_header: !headers.is_empty(), columns, records })
}

fn parse_cell(record: &csv::StringRecord, col: usize) -> Option<f64> {
    record.get(col).and_then(|s| s.parse::<f64>().ok())
}

/// Load a measurement table joined with its Longley-Rice predictions.
///
/// Malformed rows are kept out of `rows` and recorded in `filter_log` with
/// reason `parse`; rows violating the record invariants get reason `domain`.
pub fn load_dataset<R: Read>(source: R, schema: &Schema) -> Result<Dataset> {
    let table = read_table(source, schema)?;
    if !table.has_header && table.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let missing: Vec<String> = Field::ALL
        .iter()
        .filter(|f| table.columns[f.slot()].is_none())
        .map(|f| schema.column_name(*f).to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing));
    }
    if table.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut ds = Dataset { provenance: "file".into(), ..Default::default() };
    for (index, record) in table.records.iter().enumerate() {
        let mut v = [0.0; 6];
        let mut parse_error = None;
        for field in Field::ALL {
            match parse_cell(record, table.columns[field.slot()].unwrap()) {
                Some(x) => v[field.slot()] = x,
                None => {
                    parse_error = Some(field);
                    break;
                }
            }
        }
        if let Some(field) = parse_error {
            ds.filter_log.push(FilterEntry { index, reason: format!("parse: {field}") });
            continue;
        }
        match schema.check(&v) {
            Ok(()) => {
                ds.rows.push(LinkPrediction::from_values(v));
                ds.ids.push(index);
            }
            Err(why) => ds.filter_log.push(FilterEntry { index, reason: format!("domain: {why}") }),
        }
    }
    Ok(ds)
}

/// Load query rows for prediction; columns and cells may be missing.
pub fn load_query_rows<R: Read>(source: R, schema: &Schema) -> Result<Vec<QueryRow>> {
    let table = read_table(source, schema)?;
    Ok(table
        .records
        .iter()
        .map(|rec| {
            let mut row = QueryRow::default();
            for field in Field::ALL {
                row.values[field.slot()] = table.columns[field.slot()].and_then(|c| parse_cell(rec, c));
            }
            row
        })
        .collect())
}

/// Write rows with the canonical header at full round-trip precision.
pub fn write_dataset<W: Write>(sink: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(Field::ALL.iter().map(|f| f.name()))?;
    for row in &data.rows {
        w.write_record(Field::ALL.iter().map(|f| row.get(*f).to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_filter_log<W: Write>(sink: W, log: &[FilterEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["original_index", "reason"])?;
    for e in log {
        w.write_record([e.index.to_string(), e.reason.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Closed received-power interval treated as receiver noise, dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBand {
    pub low: f64,
    pub high: f64,
}

impl Default for NoiseBand {
    fn default() -> Self {
        NoiseBand { low: -120.0, high: -100.0 }
    }
}

impl NoiseBand {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low <= high) {
            return Err(Error::InvalidValue(format!("noise band low {low} exceeds high {high}")));
        }
        Ok(NoiseBand { low, high })
    }

    pub fn contains(&self, p_rx: f64) -> bool {
        (self.low..=self.high).contains(&p_rx)
    }
}

/// `LOW:HIGH`, or `off`/`none` to disable filtering.
pub fn parse_noise_band(s: &str) -> Result<Option<NoiseBand>> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("off") || s.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let bad = || Error::InvalidValue(format!("noise band `{s}` is not LOW:HIGH or off"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    NoiseBand::new(lo, hi).map(Some)
}

pub fn format_noise_band(band: Option<NoiseBand>) -> String {
    match band {
        Some(b) => format!("{}:{}", b.low, b.high),
        None => "off".into(),
    }
}

pub const NOISE_BAND_REASON: &str = "thermal-noise band";

/// Remove rows whose received power falls inside the closed band.
pub fn filter_noise_band(data: &Dataset, band: Option<NoiseBand>) -> Dataset {
    let Some(band) = band else { return data.clone() };
    let mut out = data.subset(|i| !band.contains(data.rows[i].record.p_rx));
    out.filter_log = data.filter_log.clone();
    out.filter_log.extend(
        data.rows
            .iter()
            .zip(&data.ids)
            .filter(|(r, _)| band.contains(r.record.p_rx))
            .map(|(_, id)| FilterEntry { index: *id, reason: NOISE_BAND_REASON.into() }),
    );
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Dataset,
    pub holdout: Dataset,
    pub seed: u64,
}

pub const DEFAULT_HOLDOUT: usize = 25;

/// Seeded uniform sampling of `holdout_size` rows without replacement.
pub fn split_holdout(data: &Dataset, holdout_size: usize, seed: u64) -> Result<SplitDataset> {
    if holdout_size >= data.len() && holdout_size > 0 {
        return Err(Error::InvalidValue(format!(
            "holdout size {holdout_size} must be smaller than the row count {}",
            data.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; data.len()];
    for i in sample(&mut rng, data.len(), holdout_size) {
        chosen[i] = true;
    }
    Ok(SplitDataset {
        train: data.subset(|i| !chosen[i]),
        holdout: data.subset(|i| chosen[i]),
        seed,
    })
}

/// Settings for [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    /// Planted (A, B, C, D, E) of
    /// `log P_RX = A log P_LR + B log f + C log d + D h + E`.
    pub coefficients: [f64; 5],
    pub rows: usize,
    pub seed: u64,
    /// Gaussian noise on p_rx, dB.
    pub noise_sd_db: f64,
    pub d_range_m: (f64, f64),
    pub f_range_mhz: (f64, f64),
    pub h_range_m: (f64, f64),
    /// Transmit power levels drawn uniformly, watts.
    pub p_tx_levels_w: Vec<f64>,
    /// Obstacle height range above the direct ray for the knife-edge term;
    /// `None` leaves the baseline at free space.
    pub obstacle_range_m: Option<(f64, f64)>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            coefficients: [1.0, -2.0, 3.0, 0.0, 0.5],
            rows: 500,
            seed: 42,
            noise_sd_db: 0.0,
            d_range_m: (1_000.0, 30_000.0),
            f_range_mhz: (20.0, 40.0),
            h_range_m: (0.0, 500.0),
            p_tx_levels_w: vec![1.0, 5.0, 20.0],
            obstacle_range_m: Some((-20.0, 60.0)),
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), positive: bool) -> Result<()> {
    let ok = lo.is_finite() && hi.is_finite() && lo <= hi && (!positive || lo > 0.0);
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("synthetic {name} range ({lo}, {hi}) is invalid")))
    }
}

/// Watts to dBm.
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1e3).log10()
}

/// Deterministic synthetic dataset. The Longley-Rice stand-in is free-space
/// loss plus an optional single knife edge at mid-path; p_rx then follows the
/// planted log-domain correction plus Gaussian noise.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    if cfg.rows == 0 {
        return Err(Error::Config("synthetic row count must be positive".into()));
    }
    check_range("d", cfg.d_range_m, true)?;
    check_range("f", cfg.f_range_mhz, true)?;
    check_range("h", cfg.h_range_m, false)?;
    if let Some(r) = cfg.obstacle_range_m {
        check_range("obstacle", r, false)?;
    }
    if cfg.p_tx_levels_w.is_empty() || cfg.p_tx_levels_w.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Config("synthetic p_tx levels must be positive".into()));
    }
    if !(cfg.noise_sd_db >= 0.0) {
        return Err(Error::Config("synthetic noise sd must be non-negative".into()));
    }

    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if lo == hi { lo } else { rng.random_range(lo..hi) };
    let [a, b, c, dd, e] = cfg.coefficients;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.rows);
    for _ in 0..cfg.rows {
        let d = draw(&mut rng, cfg.d_range_m);
        let f = draw(&mut rng, cfg.f_range_mhz);
        let h = draw(&mut rng, cfg.h_range_m);
        let p_tx = watts_to_dbm(cfg.p_tx_levels_w[rng.random_range(0..cfg.p_tx_levels_w.len())]);
        let mut loss = free_space_loss_db(f, d)?;
        if let Some(range) = cfg.obstacle_range_m {
            let h_obs = draw(&mut rng, range);
            let nu = knife_edge_parameter(&ObstaclePath { h_obs, d1_m: d / 2.0, d2_m: d / 2.0, f_mhz: f })?;
            loss += knife_edge_loss(nu);
        }
        let p_lr = p_tx - loss;
        let z: f64 = StandardNormal.sample(&mut rng);
        // A·p_lr keeps the A = 1, zero-correction case bit-exact
        let p_rx = a * p_lr + 10.0 * (b * f.log10() + c * d.log10() + dd * h + e) + cfg.noise_sd_db * z;
        rows.push(LinkPrediction { record: MeasurementRecord { p_rx, d, p_tx, h, f }, p_lr });
    }
    Ok(Dataset::from_rows(rows, format!("synthetic seed={}", cfg.seed)))
}
