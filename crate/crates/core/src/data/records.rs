use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::DataError;

/// Columns that must be present in an input file.
pub const REQUIRED_COLUMNS: [&str; 18] = [
    "race",
    "gender",
    "age",
    "admission_type_id",
    "discharge_disposition_id",
    "admission_source_id",
    "time_in_hospital",
    "num_lab_procedures",
    "num_procedures",
    "num_medications",
    "number_outpatient",
    "number_emergency",
    "number_inpatient",
    "diag_1",
    "diag_2",
    "diag_3",
    "number_diagnoses",
    "readmitted",
];

/// Columns parsed as numbers; everything else is kept as text.
pub(crate) const NUMERIC_COLUMNS: [&str; 10] = [
    "encounter_id",
    "patient_nbr",
    "time_in_hospital",
    "num_lab_procedures",
    "num_procedures",
    "num_medications",
    "number_outpatient",
    "number_emergency",
    "number_inpatient",
    "number_diagnoses",
];

/// Remaining feature columns of the reference file; used when present.
pub(crate) const OPTIONAL_FEATURES: [&str; 27] = [
    "max_glu_serum",
    "A1Cresult",
    "metformin",
    "repaglinide",
    "nateglinide",
    "chlorpropamide",
    "glimepiride",
    "acetohexamide",
    "glipizide",
    "glyburide",
    "tolbutamide",
    "pioglitazone",
    "rosiglitazone",
    "acarbose",
    "miglitol",
    "troglitazone",
    "tolazamide",
    "examide",
    "citoglipton",
    "insulin",
    "glyburide-metformin",
    "glipizide-metformin",
    "glimepiride-pioglitazone",
    "metformin-rosiglitazone",
    "metformin-pioglitazone",
    "change",
    "diabetesMed",
];

const MISSING_MARKER: &str = "?";

/// One typed column. Text is dictionary-encoded.
#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Text { levels: Vec<String>, codes: Vec<Option<u32>> },
}

impl Column {
    fn select(&self, idx: &[usize]) -> Self {
        match self {
            Column::Numeric(v) => Column::Numeric(idx.iter().map(|&i| v[i]).collect()),
            Column::Text { levels, codes } => Column::Text {
                levels: levels.clone(),
                codes: idx.iter().map(|&i| codes[i]).collect(),
            },
        }
    }
}

enum ColumnBuilder {
    Numeric(Vec<Option<f64>>),
    Text { index: HashMap<String, u32>, levels: Vec<String>, codes: Vec<Option<u32>> },
}

impl ColumnBuilder {
    fn new(name: &str) -> Self {
        if NUMERIC_COLUMNS.contains(&name) {
            ColumnBuilder::Numeric(Vec::new())
        } else {
            ColumnBuilder::Text { index: HashMap::new(), levels: Vec::new(), codes: Vec::new() }
        }
    }

    fn push(&mut self, raw: &str, name: &str, line: usize) -> Result<(), DataError> {
        let raw = raw.trim();
        let missing = raw.is_empty() || raw == MISSING_MARKER;
        match self {
            ColumnBuilder::Numeric(v) => {
                if missing {
                    v.push(None);
                } else {
                    let x: f64 = raw.parse().map_err(|_| {
                        DataError::Format(format!("line {line}: column {name}: {raw:?} is not a number"))
                    })?;
                    v.push(Some(x));
                }
            }
            ColumnBuilder::Text { index, levels, codes } => {
                if missing {
                    codes.push(None);
                } else {
                    let next = levels.len() as u32;
                    let code = *index.entry(raw.to_string()).or_insert_with(|| {
                        levels.push(raw.to_string());
                        next
                    });
                    codes.push(Some(code));
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> Column {
        match self {
            ColumnBuilder::Numeric(v) => Column::Numeric(v),
            ColumnBuilder::Text { levels, codes, .. } => Column::Text { levels, codes },
        }
    }
}

/// Raw records with typed columns. Unknown columns are kept.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub names: Vec<String>,
    pub columns: Vec<Column>,
    rows: usize,
}

impl RawTable {
    /// Builds a table from string rows, applying the same typing as the CSV loader.
    pub fn from_rows<S: AsRef<str>>(names: &[S], rows: &[Vec<String>]) -> Result<Self, DataError> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        check_schema(&names)?;
        let mut builders: Vec<ColumnBuilder> = names.iter().map(|n| ColumnBuilder::new(n)).collect();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != names.len() {
                return Err(DataError::Format(format!(
                    "line {}: {} fields, expected {}",
                    r + 2,
                    row.len(),
                    names.len()
                )));
            }
            for ((b, v), name) in builders.iter_mut().zip(row).zip(&names) {
                b.push(v, name, r + 2)?;
            }
        }
        Ok(Self { names, columns: builders.into_iter().map(ColumnBuilder::finish).collect(), rows: rows.len() })
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.column_index(name).map(|i| &self.columns[i])
    }

    /// Text value at (row, column); `None` when missing or the column is numeric.
    pub fn text(&self, row: usize, col: usize) -> Option<&str> {
        match &self.columns[col] {
            Column::Text { levels, codes } => codes[row].map(|c| levels[c as usize].as_str()),
            Column::Numeric(_) => None,
        }
    }

    pub fn number(&self, row: usize, col: usize) -> Option<f64> {
        match &self.columns[col] {
            Column::Numeric(v) => v[row],
            Column::Text { .. } => None,
        }
    }

    /// Cell rendered back to its file form.
    pub fn cell(&self, row: usize, col: usize) -> String {
        match &self.columns[col] {
            Column::Numeric(v) => v[row].map_or_else(|| MISSING_MARKER.to_string(), |x| x.to_string()),
            Column::Text { levels, codes } => {
                codes[row].map_or_else(|| MISSING_MARKER.to_string(), |c| levels[c as usize].clone())
            }
        }
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.select(idx)).collect(),
            rows: idx.len(),
        }
    }

    /// Seeded split of the raw rows; see [`super::split_indices`].
    pub fn split(&self, ratio: f64, seed: u64) -> (Self, Self) {
        let (a, b) = super::split_indices(self.len(), ratio, seed);
        (self.select(&a), self.select(&b))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DataError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.names)?;
        for r in 0..self.rows {
            out.write_record((0..self.names.len()).map(|c| self.cell(r, c)))?;
        }
        out.flush()?;
        Ok(())
    }
}

fn check_schema(names: &[String]) -> Result<(), DataError> {
    let missing: Vec<String> = REQUIRED_COLUMNS
        .iter()
        .filter(|req| !names.iter().any(|n| n == *req))
        .map(|s| s.to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(DataError::Schema(missing))
    }
}

/// Reads CSV records from any reader. `?` and empty fields are missing values.
pub fn read_records<R: Read>(r: R) -> Result<RawTable, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let names: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    check_schema(&names)?;
    let mut builders: Vec<ColumnBuilder> = names.iter().map(|n| ColumnBuilder::new(n)).collect();
    let mut record = csv::StringRecord::new();
    let mut rows = 0;
    while reader.read_record(&mut record)? {
        let line = record.position().map_or(rows + 2, |p| p.line() as usize);
        for ((b, v), name) in builders.iter_mut().zip(record.iter()).zip(&names) {
            b.push(v, name, line)?;
        }
        rows += 1;
    }
    Ok(RawTable { names, columns: builders.into_iter().map(ColumnBuilder::finish).collect(), rows })
}

pub fn load_records<P: AsRef<Path>>(path: P) -> Result<RawTable, DataError> {
    read_records(std::io::BufReader::new(File::open(path)?))
}
