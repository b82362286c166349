//! Data and report I/O: numeric CSV ingestion with column subsetting, log
//! returns for price data, and report emission/parsing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ReportRow, SimMode, SimulationConfig, SimulationReport};
use crate::error::{Error, Result};
use crate::DataMatrix;

/// Column subsetting for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelection {
    All,
    /// Explicit 0-based column indices, in the order given.
    Indices(Vec<usize>),
    /// The first `count` columns.
    Prefix(usize),
    /// A seeded random subset of `count` distinct columns, reported in
    /// ascending order.
    RandomSubset { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    /// Skip one header row.
    pub header: bool,
    pub delimiter: u8,
    pub columns: ColumnSelection,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { header: false, delimiter: b',', columns: ColumnSelection::All }
    }
}

/// Read a rectangular numeric CSV file into an n×p matrix.
pub fn read_csv_matrix(path: impl AsRef<Path>, options: &CsvOptions) -> Result<DataMatrix> {
    read_csv_matrix_from(BufReader::new(File::open(path)?), options)
}

/// As [`read_csv_matrix`], from any reader. Parse failures carry the 1-based
/// data row and column of the offending cell.
pub fn read_csv_matrix_from<R: Read>(reader: R, options: &CsvOptions) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(options.header)
        .delimiter(options.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = i + 1;
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::CsvParse {
                row: row_no,
                column: record.len().min(w) + 1,
                message: format!("ragged row: expected {w} fields, found {}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(w);
        for (j, field) in record.iter().enumerate() {
            row.push(field.parse::<f64>().map_err(|_| Error::CsvParse {
                row: row_no,
                column: j + 1,
                message: format!("not a number: {field:?}"),
            })?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::TooFewObservations { need: 1, got: 0 });
    }
    let p = rows[0].len();
    let chosen = select_columns(p, &options.columns)?;
    let mut out = Array2::zeros((rows.len(), chosen.len()));
    for (i, row) in rows.iter().enumerate() {
        for (k, &j) in chosen.iter().enumerate() {
            out[[i, k]] = row[j];
        }
    }
    Ok(out)
}

fn select_columns(p: usize, selection: &ColumnSelection) -> Result<Vec<usize>> {
    match selection {
        ColumnSelection::All => Ok((0..p).collect()),
        ColumnSelection::Indices(idx) => {
            if let Some(&bad) = idx.iter().find(|&&j| j >= p) {
                return Err(Error::InvalidParameter(format!(
                    "column index {bad} out of range for {p} columns"
                )));
            }
            if idx.is_empty() {
                return Err(Error::InvalidParameter("empty column selection".into()));
            }
            Ok(idx.clone())
        }
        ColumnSelection::Prefix(count) => {
            if *count == 0 || *count > p {
                return Err(Error::InvalidParameter(format!(
                    "prefix count {count} out of range for {p} columns"
                )));
            }
            Ok((0..*count).collect())
        }
        ColumnSelection::RandomSubset { count, seed } => {
            if *count == 0 || *count > p {
                return Err(Error::InvalidParameter(format!(
                    "subset size {count} out of range for {p} columns"
                )));
            }
            let mut idx: Vec<usize> = (0..p).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for i in 0..*count {
                let j = rng.random_range(i..p);
                idx.swap(i, j);
            }
            let mut chosen = idx[..*count].to_vec();
            chosen.sort_unstable();
            Ok(chosen)
        }
    }
}

/// Row-wise log returns of a strictly positive price matrix:
/// output row t is log(P_{t+1}/P_t), so n rows become n−1.
pub fn log_returns(prices: &DataMatrix) -> Result<DataMatrix> {
    let (n, p) = prices.dim();
    if n < 2 {
        return Err(Error::TooFewObservations { need: 2, got: n });
    }
    if let Some(((i, j), &v)) = prices.indexed_iter().find(|(_, v)| **v <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "log returns need positive prices; found {v} at row {}, column {}",
            i + 1,
            j + 1
        )));
    }
    let mut out = Array2::zeros((n - 1, p));
    for t in 0..n - 1 {
        for j in 0..p {
            out[[t, j]] = (prices[[t + 1, j]] / prices[[t, j]]).ln();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Write a report. The CSV layout has one data row per cell with a stable
/// column order; power mode adds an `h` column:
///
/// ```text
/// mode,setting,model,n,p,alpha,trials,rejections,rate,se,seed        (level)
/// mode,shock,model,n,p,alpha,h,trials,rejections,rate,se,seed        (power)
/// ```
///
/// Floats are printed in shortest round-trip form, so re-parsing reproduces
/// the report exactly.
pub fn emit_report(report: &SimulationReport, w: impl Write, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(w, report)
                .map_err(|e| Error::ReportParse(e.to_string()))?;
        }
        ReportFormat::Csv => {
            let cfg = &report.config;
            let mut wtr = csv::Writer::from_writer(w);
            let power = cfg.mode == SimMode::Power;
            let mut header = vec!["mode"];
            header.push(if power { "shock" } else { "setting" });
            header.extend(["model", "n", "p", "alpha"]);
            if power {
                header.push("h");
            }
            header.extend(["trials", "rejections", "rate", "se", "seed"]);
            wtr.write_record(&header)?;
            for row in &report.rows {
                let mut rec = vec![cfg.mode.to_string()];
                rec.push(if power {
                    cfg.shock.map(|s| s.to_string()).unwrap_or_default()
                } else {
                    cfg.setting.map(|s| s.to_string()).unwrap_or_default()
                });
                rec.push(cfg.model.to_string());
                rec.push(cfg.n.to_string());
                rec.push(cfg.p.to_string());
                rec.push(cfg.alpha.to_string());
                if power {
                    rec.push(row.h.unwrap_or(0.0).to_string());
                }
                rec.push(row.trials.to_string());
                rec.push(row.rejections.to_string());
                rec.push(row.rate.to_string());
                rec.push(row.se.to_string());
                rec.push(cfg.seed.to_string());
                wtr.write_record(&rec)?;
            }
            wtr.flush()?;
        }
    }
    Ok(())
}

pub fn emit_report_to_path(
    report: &SimulationReport,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    emit_report(report, BufWriter::new(File::create(path)?), format)
}

/// Parse a CSV report back into memory. `threads` is not part of a report and
/// comes back as 0 (auto); wall time comes back as 0.
pub fn parse_report_csv(r: impl Read) -> Result<SimulationReport> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let power = col("h").is_some();
    let missing = |name: &str| Error::ReportParse(format!("missing column {name:?}"));

    let idx_mode = col("mode").ok_or_else(|| missing("mode"))?;
    let idx_id = if power {
        col("shock").ok_or_else(|| missing("shock"))?
    } else {
        col("setting").ok_or_else(|| missing("setting"))?
    };
    let idx_model = col("model").ok_or_else(|| missing("model"))?;
    let idx_n = col("n").ok_or_else(|| missing("n"))?;
    let idx_p = col("p").ok_or_else(|| missing("p"))?;
    let idx_alpha = col("alpha").ok_or_else(|| missing("alpha"))?;
    let idx_h = col("h");
    let idx_trials = col("trials").ok_or_else(|| missing("trials"))?;
    let idx_rej = col("rejections").ok_or_else(|| missing("rejections"))?;
    let idx_rate = col("rate").ok_or_else(|| missing("rate"))?;
    let idx_se = col("se").ok_or_else(|| missing("se"))?;
    let idx_seed = col("seed").ok_or_else(|| missing("seed"))?;

    let mut config: Option<SimulationConfig> = None;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let field = |i: usize| -> Result<&str> {
            record
                .get(i)
                .ok_or_else(|| Error::ReportParse("short record".into()))
        };
        let parse_num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::ReportParse(format!("bad number {s:?}")))
        };
        let mode = match field(idx_mode)? {
            "level" => SimMode::Level,
            "power" => SimMode::Power,
            other => return Err(Error::ReportParse(format!("bad mode {other:?}"))),
        };
        let trials = parse_num(field(idx_trials)?)? as usize;
        let row = ReportRow {
            h: match idx_h {
                Some(i) => Some(parse_num(field(i)?)?),
                None => None,
            },
            trials,
            rejections: parse_num(field(idx_rej)?)? as usize,
            rate: parse_num(field(idx_rate)?)?,
            se: parse_num(field(idx_se)?)?,
        };
        let cfg = SimulationConfig {
            mode,
            setting: if power { None } else { Some(field(idx_id)?.parse()?) },
            shock: if power { Some(field(idx_id)?.parse()?) } else { None },
            model: field(idx_model)?.parse()?,
            n: parse_num(field(idx_n)?)? as usize,
            p: parse_num(field(idx_p)?)? as usize,
            trials,
            alpha: parse_num(field(idx_alpha)?)?,
            h_grid: Vec::new(),
            seed: field(idx_seed)?
                .parse::<u64>()
                .map_err(|_| Error::ReportParse("bad seed".into()))?,
            threads: 0,
        };
        match &config {
            None => config = Some(cfg),
            Some(existing) => {
                let mut probe = cfg;
                probe.trials = existing.trials;
                if probe != *existing {
                    return Err(Error::ReportParse(
                        "rows describe inconsistent configs".into(),
                    ));
                }
            }
        }
        rows.push(row);
    }
    let mut config = config.ok_or_else(|| Error::ReportParse("no data rows".into()))?;
    config.h_grid = rows.iter().filter_map(|r| r.h).collect();
    Ok(SimulationReport { config, rows, wall_secs: 0.0 })
}
