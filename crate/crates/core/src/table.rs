//! Labeled feature tables and their CSV form
//! (`patient_id,label,<features…>`, empty cell = missing).

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major table of numeric features with a binary label per row.
/// Missing values are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    columns: Vec<String>,
    patient_ids: Vec<String>,
    labels: Vec<u8>,
    values: Vec<f64>,
}

impl FeatureTable {
    pub fn new(columns: Vec<String>, patient_ids: Vec<String>, labels: Vec<u8>, values: Vec<f64>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::InvalidTable(format!("duplicate column {c:?}")));
            }
        }
        let mut seen = HashSet::new();
        for p in &patient_ids {
            if !seen.insert(p.as_str()) {
                return Err(Error::InvalidTable(format!("duplicate patient_id {p:?}")));
            }
        }
        if labels.len() != patient_ids.len() {
            return Err(Error::LengthMismatch(format!(
                "{} labels for {} patients",
                labels.len(),
                patient_ids.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidTable(format!("label {l} is not 0 or 1")));
        }
        if values.len() != patient_ids.len() * columns.len() {
            return Err(Error::ArityMismatch {
                expected: patient_ids.len() * columns.len(),
                found: values.len(),
            });
        }
        Ok(FeatureTable {
            columns,
            patient_ids,
            labels,
            values,
        })
    }

    /// Builds a table from `(patient_id, label, values)` rows.
    pub fn from_rows(columns: Vec<String>, rows: Vec<(String, u8, Vec<f64>)>) -> Result<Self> {
        let mut ids = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len() * columns.len());
        for (id, label, v) in rows {
            if v.len() != columns.len() {
                return Err(Error::ArityMismatch {
                    expected: columns.len(),
                    found: v.len(),
                });
            }
            ids.push(id);
            labels.push(label);
            values.extend(v);
        }
        Self::new(columns, ids, labels, values)
    }

    pub fn n_rows(&self) -> usize {
        self.patient_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patient_ids.is_empty()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn patient_ids(&self) -> &[String] {
        &self.patient_ids
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, row: usize) -> u8 {
        self.labels[row]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.columns.len();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.columns.len() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.value(r, col)).collect()
    }

    /// (negatives, positives).
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - pos, pos)
    }

    /// Rows in the given order.
    pub fn subset_rows(&self, rows: &[usize]) -> FeatureTable {
        let n = self.columns.len();
        let mut values = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureTable {
            columns: self.columns.clone(),
            patient_ids: rows.iter().map(|&r| self.patient_ids[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            values,
        }
    }

    /// Columns in the given order; unknown names are an error.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<FeatureTable> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n.as_ref())
                    .ok_or_else(|| Error::InvalidTable(format!("unknown column {:?}", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(self.n_rows() * idx.len());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            values.extend(idx.iter().map(|&c| row[c]));
        }
        Ok(FeatureTable {
            columns: idx.iter().map(|&c| self.columns[c].clone()).collect(),
            patient_ids: self.patient_ids.clone(),
            labels: self.labels.clone(),
            values,
        })
    }

    /// Columns whose name satisfies `keep`, in table order.
    pub fn filter_columns(&self, keep: impl Fn(&str) -> bool) -> FeatureTable {
        let names: Vec<String> = self.columns.iter().filter(|c| keep(c)).cloned().collect();
        self.select_columns(&names).expect("names come from the table")
    }

    pub fn with_labels(&self, labels: Vec<u8>) -> Result<FeatureTable> {
        FeatureTable::new(self.columns.clone(), self.patient_ids.clone(), labels, self.values.clone())
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header = ["patient_id", "label"]
            .into_iter()
            .map(str::to_string)
            .chain(self.columns.iter().cloned());
        w.write_record(header).map_err(|e| Error::csv("<table>", e))?;
        for r in 0..self.n_rows() {
            let mut rec = vec![self.patient_ids[r].clone(), self.labels[r].to_string()];
            rec.extend(self.row(r).iter().map(|&v| format_value(v)));
            w.write_record(&rec).map_err(|e| Error::csv("<table>", e))?;
        }
        w.flush().map_err(|e| Error::io("<table>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::volume::write_atomic(path.as_ref(), self.to_csv_string().as_bytes())
    }

    pub fn read_csv_from<R: Read>(reader: R, origin: &Path) -> Result<FeatureTable> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::csv(origin, e))?.clone();
        if header.len() < 2 || &header[0] != "patient_id" || &header[1] != "label" {
            return Err(Error::InvalidTable(format!(
                "{}: header must start with patient_id,label",
                origin.display()
            )));
        }
        let columns: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(origin, e))?;
            if rec.len() != header.len() {
                return Err(Error::ArityMismatch {
                    expected: header.len(),
                    found: rec.len(),
                });
            }
            let label = match &rec[1] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::InvalidTable(format!(
                        "{} row {}: label {other:?} is not 0 or 1",
                        origin.display(),
                        line + 1
                    )))
                }
            };
            let values = rec
                .iter()
                .skip(2)
                .map(|cell| parse_value(cell))
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|cell| {
                    Error::InvalidTable(format!("{} row {}: bad number {cell:?}", origin.display(), line + 1))
                })?;
            rows.push((rec[0].to_string(), label, values));
        }
        FeatureTable::from_rows(columns, rows)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<FeatureTable> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv_from(std::io::BufReader::new(file), path)
    }
}

/// Shortest round-trip decimal; missing is the empty string.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn parse_value(cell: &str) -> std::result::Result<f64, String> {
    let t = cell.trim();
    if t.is_empty() {
        return Ok(f64::NAN);
    }
    match t.parse::<f64>() {
        Ok(v) if !v.is_nan() => Ok(v),
        _ => Err(cell.to_string()),
    }
}
