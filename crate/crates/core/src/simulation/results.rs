use std::fs::{self, OpenOptions};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RESULT_COLUMNS: [&str; 12] = [
    "model-hash",
    "procedure",
    "n",
    "alpha",
    "rho-or-sigma-id",
    "replications",
    "seed",
    "p_hat",
    "std_err",
    "ci_low",
    "ci_high",
    "estimand",
];

/// One line of a simulation results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    #[serde(rename = "model-hash")]
    pub model_hash: String,
    pub procedure: String,
    pub n: usize,
    pub alpha: f64,
    #[serde(rename = "rho-or-sigma-id")]
    pub rho_or_sigma_id: String,
    pub replications: u64,
    pub seed: u64,
    pub p_hat: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub estimand: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultsFormat {
    Csv,
    /// A single JSON array of row objects.
    Json,
}

/// Appends rows to `path`, creating it (with a CSV header) if needed.
///
/// A CSV file whose header differs from [`RESULT_COLUMNS`] is left untouched
/// and reported as an error.
pub fn append_results(path: &Path, format: ResultsFormat, rows: &[ResultRow]) -> Result<()> {
    match format {
        ResultsFormat::Csv => append_csv(path, rows),
        ResultsFormat::Json => append_json(path, rows),
    }
}

fn append_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let existing = path.exists() && fs::metadata(path)?.len() > 0;
    if existing {
        let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
        let header = reader.headers().map_err(csv_error)?;
        if !header.iter().eq(RESULT_COLUMNS.iter().copied()) {
            return Err(Error::Domain(format!(
                "{} has columns {:?}, expected {:?}",
                path.display(),
                header.iter().collect::<Vec<_>>(),
                RESULT_COLUMNS
            )));
        }
    }
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(!existing).from_writer(file);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn append_json(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut all: Vec<ResultRow> = if path.exists() && fs::metadata(path)?.len() > 0 {
        serde_json::from_str(&fs::read_to_string(path)?)?
    } else {
        Vec::new()
    };
    all.extend_from_slice(rows);
    fs::write(path, serde_json::to_string_pretty(&all)? + "\n")?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Domain(format!("{other:?}")),
        }
    } else {
        Error::Domain(format!("malformed results file: {e}"))
    }
}
