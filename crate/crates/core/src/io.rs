//! Delimited-text input/output for datasets and responses.
//!
//! Datasets are CSV or TSV (by extension, `.csv` means comma, anything else
//! tab): first row holds variable names, each following row is one sample,
//! UTF-8 with `.` as decimal separator. Responses are a single column of
//! numbers with no header.

use crate::error::{Error, Result};
use crate::model::{Dataset, Response};
use ndarray::{Array1, Array2};
use std::io::Write;
use std::path::Path;

fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => b',',
        _ => b'\t',
    }
}

/// Loads a dataset: header row of variable names, one sample per row.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_for(path))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, e.to_string()))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let d = names.len();
    let mut rows: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        if record.len() != d {
            return Err(parse_err(
                path,
                format!("row {} has {} fields, expected {}", i + 2, record.len(), d),
            ));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, format!("row {}: bad number '{}'", i + 2, field)))?;
            rows.push(v);
        }
        n += 1;
    }
    let values = Array2::from_shape_vec((n, d), rows)
        .map_err(|e| parse_err(path, e.to_string()))?;
    Dataset::new(values, names)
}

/// Loads a response: one number per line, no header.
pub fn load_response(path: &Path) -> Result<Response> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| parse_err(path, format!("line {}: bad number '{}'", i + 1, line)))?;
        values.push(v);
    }
    Response::new(Array1::from_vec(values))
}

/// Writes a dataset with its header row, using the delimiter implied by the
/// file extension. Floats use the shortest round-trip representation so a
/// rerun with the same inputs is byte-identical.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let sep = delimiter_for(path) as char;
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "{}", dataset.variable_names().join(&sep.to_string()))?;
    for row in dataset.values().rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(&sep.to_string()))?;
    }
    Ok(())
}

pub fn write_response(path: &Path, response: &Response) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    for v in response.values() {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

fn parse_err(path: &Path, detail: String) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        detail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dataset_round_trip_tsv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.tsv");
        let ds = Dataset::new(
            array![[1.0, 2.5], [3.0, -4.25]],
            vec!["snp1".into(), "snp2".into()],
        )
        .unwrap();
        write_dataset(&path, &ds).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back.variable_names(), ds.variable_names());
        assert_eq!(back.values(), ds.values());
    }

    #[test]
    fn response_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("y.tsv");
        let y = Response::new(array![0.5, -1.0, 2.0]).unwrap();
        write_response(&path, &y).unwrap();
        let back = load_response(&path).unwrap();
        assert_eq!(back.values(), y.values());
    }

    #[test]
    fn bad_number_reports_path_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.tsv");
        std::fs::write(&path, "a\tb\n1.0\toops\n").unwrap();
        let err = load_dataset(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("x.tsv") && msg.contains("oops"), "{msg}");
    }

    #[test]
    fn csv_extension_switches_delimiter() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "a,b\n1.0,2.0\n").unwrap();
        let ds = load_dataset(&path).unwrap();
        assert_eq!(ds.n_variables(), 2);
        assert_eq!(ds.values()[(0, 1)], 2.0);
    }
}
