//! CSV input and output and the CLI error type with its exit codes.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use shapetest_core::mc::StudyResult;
use shapetest_core::sieve::Dataset;

#[derive(Debug)]
pub enum CliError {
    /// Malformed input or configuration: exit code 2.
    Input(String),
    /// Numerical failure in the solver: exit code 3.
    Numerical(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CliError::Numerical(msg.into())
    }

    pub fn from_display(err: impl fmt::Display) -> Self {
        CliError::Input(err.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) | CliError::Numerical(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Read a dataset CSV with header `y,z1,...,zd`.
pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::input(format!("opening {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(format!("reading header: {e}")))?
        .clone();
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    if names.first().map(String::as_str) != Some("y") {
        return Err(CliError::input("first column must be `y`"));
    }
    let dims = names.len() - 1;
    if dims == 0 {
        return Err(CliError::input("need at least one covariate column `z1`"));
    }
    for (j, name) in names[1..].iter().enumerate() {
        let expected = format!("z{}", j + 1);
        if name != &expected {
            return Err(CliError::input(format!(
                "column {} must be `{expected}`, found `{name}`",
                j + 2
            )));
        }
    }
    let mut y = Vec::new();
    let mut z_rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("row {}: {e}", line + 2)))?;
        if record.len() != names.len() {
            return Err(CliError::input(format!(
                "row {} has {} fields, expected {}",
                line + 2,
                record.len(),
                names.len()
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64, CliError> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::input(format!("row {}: bad {what} `{s}`", line + 2)))
        };
        y.push(parse(&record[0], "response")?);
        for field in record.iter().skip(1) {
            z_rows.push(parse(field, "covariate")?);
        }
    }
    if y.is_empty() {
        return Err(CliError::input("no data rows"));
    }
    let n = y.len();
    let z = DMatrix::from_row_slice(n, dims, &z_rows);
    Dataset::new(y, z).map_err(CliError::from_display)
}

/// Min/max per covariate column.
pub fn column_ranges(z: &DMatrix<f64>) -> Vec<(f64, f64)> {
    (0..z.ncols())
        .map(|c| {
            let col = z.column(c);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect()
}

/// Read a single-column CSV with header `value`.
pub fn read_values(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::input(format!("opening {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(format!("reading header: {e}")))?;
    if headers.len() != 1 || headers.get(0).map(str::trim) != Some("value") {
        return Err(CliError::input("expected a single `value` column"));
    }
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("row {}: {e}", line + 2)))?;
        let v = record[0]
            .trim()
            .parse::<f64>()
            .map_err(|_| CliError::input(format!("row {}: bad value `{}`", line + 2, &record[0])))?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::input("no values"));
    }
    Ok(values)
}

/// Write projected values as a single-column CSV.
pub fn write_values(values: &[f64], output: Option<&Path>) -> Result<(), CliError> {
    let mut out = String::from("value\n");
    for v in values {
        out.push_str(&format!("{v}\n"));
    }
    match output {
        Some(path) => std::fs::write(path, out)
            .map_err(|e| CliError::input(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

/// The CSV row schema for simulation studies.
#[derive(Debug, Serialize)]
pub struct StudyRow {
    pub design: String,
    pub n: usize,
    pub k_n: usize,
    pub gamma: f64,
    pub rejection_rate: f64,
    pub reps: usize,
    pub seed: u64,
}

impl From<&StudyResult> for StudyRow {
    fn from(result: &StudyResult) -> Self {
        StudyRow {
            design: result.design.clone(),
            n: result.n,
            k_n: result.k_n,
            gamma: result.gamma,
            rejection_rate: result.rejection_rate,
            reps: result.replications,
            seed: result.seed,
        }
    }
}

pub fn write_study_rows(rows: &[StudyRow], output: Option<&Path>) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| CliError::input(format!("serializing row: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::input(format!("flushing csv: {e}")))?;
    match output {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::input(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}
