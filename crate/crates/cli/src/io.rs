//! CSV input/output. Matrices are headerless, one observation per row.
//! Floats are written with 17 significant digits so a written matrix reads
//! back bit-exactly.

use std::fs::File;
use std::path::Path;

use irmean::simulate::{BenchCell, BenchRecord};
use irmean::types::Dataset;

/// 17 significant digits: enough to reconstruct any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>, String> {
    let file =
        File::open(path).map_err(|e| format!("cannot open {}: {e}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format!("row {}: {e}", i + 1))?;
        if record.is_empty() || (record.len() == 1 && record[0].is_empty()) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|e| format!("row {}, column {}: {e}", i + 1, j + 1))?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(format!("{}: no data rows", path.display()));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(format!("{}: ragged rows", path.display()));
    }
    Ok(rows)
}

pub fn write_matrix_csv(path: &Path, data: &Dataset) -> Result<(), String> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    for row in data.points().rows() {
        let fields: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writer
            .write_record(&fields)
            .map_err(|e| e.to_string())?;
    }
    writer.flush().map_err(|e| e.to_string())
}

pub fn write_records_csv(path: &Path, records: &[BenchRecord]) -> Result<(), String> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    writer
        .write_record([
            "experiment",
            "scheme",
            "n",
            "p",
            "epsilon",
            "estimator",
            "seed",
            "iteration",
            "error",
        ])
        .map_err(|e| e.to_string())?;
    for rec in records {
        writer
            .write_record([
                rec.experiment.to_string(),
                rec.scheme.to_string(),
                rec.n.to_string(),
                rec.p.to_string(),
                fmt_f64(rec.epsilon),
                rec.estimator.to_string(),
                rec.seed.to_string(),
                rec.iteration.map(|k| k.to_string()).unwrap_or_default(),
                fmt_f64(rec.error),
            ])
            .map_err(|e| e.to_string())?;
    }
    writer.flush().map_err(|e| e.to_string())
}

pub fn write_summary_csv(path: &Path, cells: &[BenchCell]) -> Result<(), String> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    writer
        .write_record([
            "experiment",
            "scheme",
            "n",
            "p",
            "epsilon",
            "estimator",
            "iteration",
            "mean_error",
            "q25",
            "q50",
            "q75",
        ])
        .map_err(|e| e.to_string())?;
    for cell in cells {
        writer
            .write_record([
                cell.experiment.to_string(),
                cell.scheme.to_string(),
                cell.n.to_string(),
                cell.p.to_string(),
                fmt_f64(cell.epsilon),
                cell.estimator.to_string(),
                cell.iteration.map(|k| k.to_string()).unwrap_or_default(),
                fmt_f64(cell.summary.mean_error),
                fmt_f64(cell.summary.q25),
                fmt_f64(cell.summary.q50),
                fmt_f64(cell.summary.q75),
            ])
            .map_err(|e| e.to_string())?;
    }
    writer.flush().map_err(|e| e.to_string())
}

/// Sibling path with an extra extension segment: out.csv -> out.summary.csv.
pub fn summary_path(path: &Path) -> std::path::PathBuf {
    match path.extension().and_then(|s| s.to_str()) {
        Some(ext) => path.with_extension(format!("summary.{ext}")),
        None => path.with_extension("summary"),
    }
}
