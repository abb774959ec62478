use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::data::Quarter;

/// Cell type of a CSV column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColType {
    Str,
    Float,
    /// Float or empty.
    OptFloat,
    Int,
    Bool,
    Quarter,
}

impl ColType {
    fn accepts(self, cell: &str) -> bool {
        match self {
            ColType::Str => !cell.is_empty(),
            ColType::Float => cell.parse::<f64>().is_ok(),
            ColType::OptFloat => cell.is_empty() || cell.parse::<f64>().is_ok(),
            ColType::Int => cell.parse::<i64>().is_ok(),
            ColType::Bool => cell == "true" || cell == "false",
            ColType::Quarter => cell.parse::<Quarter>().is_ok(),
        }
    }
}

/// Column names and types of a CSV artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<(String, ColType)>,
}

impl Schema {
    pub fn new(columns: &[(&str, ColType)]) -> Self {
        Self { columns: columns.iter().map(|(n, t)| (n.to_string(), *t)).collect() }
    }

    /// A key column followed by float columns.
    pub fn keyed(key: &str, key_type: ColType, values: &[String]) -> Self {
        let mut columns = vec![(key.to_string(), key_type)];
        columns.extend(values.iter().map(|v| (v.clone(), ColType::Float)));
        Self { columns }
    }

    pub fn header(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.0.as_str()).collect()
    }
}

/// Shortest round-trip decimal representation; non-finite values are written
/// as `NaN`, `inf` or `-inf`.
pub fn fmt_f(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

pub fn write_csv(path: &Path, schema: &Schema, rows: &[Vec<String>]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(schema.header())?;
    for r in rows {
        if r.len() != schema.columns.len() {
            return Err(ReportError::Schema(format!(
                "{}: row with {} cells for {} columns",
                path.display(),
                r.len(),
                schema.columns.len()
            )));
        }
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Check header names and every cell's type; returns the row count.
pub fn validate_csv(path: &Path, schema: &Schema) -> Result<usize, ReportError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header != schema.header() {
        return Err(ReportError::Schema(format!(
            "{}: header {:?} does not match {:?}",
            path.display(),
            header,
            schema.header()
        )));
    }
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec?;
        for (cell, (name, ty)) in rec.iter().zip(&schema.columns) {
            if !ty.accepts(cell) {
                return Err(ReportError::Schema(format!(
                    "{} row {}: column {name} value {cell:?} is not {ty:?}",
                    path.display(),
                    n + 1
                )));
            }
        }
        n += 1;
    }
    Ok(n)
}

/// Matrix with a leading key column and one column per label.
pub fn write_matrix(path: &Path, key: &str, key_type: ColType, keys: &[String], labels: &[String], m: &DMatrix<f64>) -> Result<Schema, ReportError> {
    let schema = Schema::keyed(key, key_type, labels);
    let rows: Vec<Vec<String>> = (0..m.nrows())
        .map(|i| {
            let mut r = vec![keys[i].clone()];
            r.extend(m.row(i).iter().map(|&v| fmt_f(v)));
            r
        })
        .collect();
    write_csv(path, &schema, &rows)?;
    Ok(schema)
}

/// Inverse of [`write_matrix`]: keys, labels and values.
pub fn read_matrix(path: &Path) -> Result<(Vec<String>, Vec<String>, DMatrix<f64>), ReportError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let labels: Vec<String> = rdr.headers()?.iter().skip(1).map(String::from).collect();
    let (mut keys, mut vals) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        keys.push(rec.get(0).unwrap_or_default().to_string());
        for cell in rec.iter().skip(1) {
            vals.push(cell.parse::<f64>().map_err(|e| ReportError::Schema(format!("{}: {cell:?}: {e}", path.display())))?);
        }
    }
    if vals.len() != keys.len() * labels.len() {
        return Err(ReportError::Schema(format!("{}: ragged matrix", path.display())));
    }
    Ok((keys.clone(), labels.clone(), DMatrix::from_row_slice(keys.len(), labels.len(), &vals)))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ReportError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Expected content of one output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FileSchema {
    Csv { schema: Schema },
    Json,
    Svg,
}

pub fn validate_file(path: &Path, schema: &FileSchema) -> Result<(), ReportError> {
    match schema {
        FileSchema::Csv { schema } => validate_csv(path, schema).map(|_| ()),
        FileSchema::Json => {
            serde_json::from_str::<serde_json::Value>(&std::fs::read_to_string(path)?)
                .map_err(|e| ReportError::Schema(format!("{}: {e}", path.display())))?;
            Ok(())
        }
        FileSchema::Svg => {
            let s = std::fs::read_to_string(path)?;
            if s.starts_with("<svg") && s.trim_end().ends_with("</svg>") {
                Ok(())
            } else {
                Err(ReportError::Schema(format!("{}: not an SVG document", path.display())))
            }
        }
    }
}
