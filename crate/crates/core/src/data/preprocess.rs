use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

use super::records::{Column, RawTable, NUMERIC_COLUMNS, OPTIONAL_FEATURES, REQUIRED_COLUMNS};
use super::{DataError, Dataset};

/// Group names for ICD9 diagnosis codes; the index is the group id.
pub const ICD9_GROUPS: [&str; 10] = [
    "circulatory",
    "respiratory",
    "digestive",
    "diabetes",
    "injury",
    "musculoskeletal",
    "genitourinary",
    "neoplasms",
    "other",
    "missing",
];

const DROPPED: [&str; 5] = ["weight", "payer_code", "medical_specialty", "encounter_id", "patient_nbr"];
const LABEL_COLUMN: &str = "readmitted";
const LABEL_POSITIVE: &str = "<30";
const MISSING_LEVEL: &str = "<missing>";
const HEADER: &str = "privml-preprocess-spec\t1";

/// Maps an ICD9 code to its group id (index into [`ICD9_GROUPS`]).
pub fn icd9_group(code: Option<&str>) -> usize {
    let Some(code) = code.map(str::trim).filter(|c| !c.is_empty() && *c != "?") else {
        return 9;
    };
    if code.starts_with(['V', 'v', 'E', 'e']) {
        return 8;
    }
    let Ok(value) = code.parse::<f64>() else {
        return 9;
    };
    let major = value.floor() as i64;
    match major {
        250 => 3,
        390..=459 | 785 => 0,
        460..=519 | 786 => 1,
        520..=579 | 787 => 2,
        800..=999 => 4,
        710..=739 => 5,
        580..=629 | 788 => 6,
        140..=239 => 7,
        _ => 8,
    }
}

fn age_lower_bound(bracket: &str) -> Option<f64> {
    bracket.trim_start_matches('[').split('-').next()?.trim().parse().ok()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PreprocessOptions {
    /// Age brackets become one numeric feature (bracket lower bound) instead of one-hot.
    pub ordinal_age: bool,
    /// Group diag_2 and diag_3 like diag_1 and keep them as features.
    pub group_secondary: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NumericSource {
    Value,
    AgeBracket,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumericSpec {
    pub name: String,
    pub source: NumericSource,
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CategoricalKind {
    Raw,
    Icd9,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalSpec {
    pub name: String,
    pub kind: CategoricalKind,
    pub levels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureSpec {
    Numeric(NumericSpec),
    Categorical(CategoricalSpec),
}

/// Fitted preprocessing pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessSpec {
    pub options: PreprocessOptions,
    pub dropped: Vec<String>,
    pub label_column: String,
    pub label_positive: String,
    pub features: Vec<FeatureSpec>,
}

fn column_role(name: &str, opts: &PreprocessOptions) -> Option<ColumnRole> {
    if DROPPED.contains(&name) || name == LABEL_COLUMN {
        return None;
    }
    if !REQUIRED_COLUMNS.contains(&name) && !OPTIONAL_FEATURES.contains(&name) {
        return None;
    }
    Some(match name {
        "age" if opts.ordinal_age => ColumnRole::Numeric(NumericSource::AgeBracket),
        "diag_1" => ColumnRole::Categorical(CategoricalKind::Icd9),
        "diag_2" | "diag_3" if opts.group_secondary => ColumnRole::Categorical(CategoricalKind::Icd9),
        "diag_2" | "diag_3" => return None,
        n if NUMERIC_COLUMNS.contains(&n) => ColumnRole::Numeric(NumericSource::Value),
        _ => ColumnRole::Categorical(CategoricalKind::Raw),
    })
}

enum ColumnRole {
    Numeric(NumericSource),
    Categorical(CategoricalKind),
}

fn numeric_value(table: &RawTable, col: usize, row: usize, source: NumericSource) -> Option<f64> {
    match source {
        NumericSource::Value => table.number(row, col),
        NumericSource::AgeBracket => table.text(row, col).and_then(age_lower_bound),
    }
}

fn category(table: &RawTable, col: usize, row: usize, kind: CategoricalKind) -> String {
    match kind {
        CategoricalKind::Raw => table.text(row, col).unwrap_or(MISSING_LEVEL).to_string(),
        CategoricalKind::Icd9 => ICD9_GROUPS[icd9_group(table.text(row, col))].to_string(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Fits the pipeline on the training records only.
pub fn preprocess_fit(train: &RawTable, options: PreprocessOptions) -> Result<PreprocessSpec, DataError> {
    if train.is_empty() {
        return Err(DataError::Format("cannot fit preprocessing on an empty table".into()));
    }
    let mut features = Vec::new();
    for (col, name) in train.names.iter().enumerate() {
        let Some(role) = column_role(name, &options) else { continue };
        match role {
            ColumnRole::Numeric(source) => {
                if source == NumericSource::Value && !matches!(train.columns[col], Column::Numeric(_)) {
                    continue;
                }
                let present: Vec<f64> =
                    (0..train.len()).filter_map(|r| numeric_value(train, col, r, source)).collect();
                let min = present.iter().copied().fold(f64::INFINITY, f64::min);
                let max = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let med = median(present);
                let (min, max) = if min.is_finite() { (min, max) } else { (med, med) };
                features.push(FeatureSpec::Numeric(NumericSpec { name: name.clone(), source, min, max, median: med }));
            }
            ColumnRole::Categorical(kind) => {
                let levels: BTreeSet<String> = (0..train.len()).map(|r| category(train, col, r, kind)).collect();
                features.push(FeatureSpec::Categorical(CategoricalSpec {
                    name: name.clone(),
                    kind,
                    levels: levels.into_iter().collect(),
                }));
            }
        }
    }
    Ok(PreprocessSpec {
        options,
        dropped: DROPPED.iter().map(|s| s.to_string()).collect(),
        label_column: LABEL_COLUMN.into(),
        label_positive: LABEL_POSITIVE.into(),
        features,
    })
}

/// Applies a fitted pipeline. Numerics are imputed, min-max scaled and clamped;
/// unseen categories map to an all-zero block.
pub fn preprocess_apply(spec: &PreprocessSpec, records: &RawTable) -> Result<Dataset, DataError> {
    let n = records.len();
    let mut cols = Vec::with_capacity(spec.features.len());
    for f in &spec.features {
        let name = match f {
            FeatureSpec::Numeric(s) => &s.name,
            FeatureSpec::Categorical(s) => &s.name,
        };
        let idx = records.column_index(name).ok_or_else(|| DataError::Schema(vec![name.clone()]))?;
        cols.push(idx);
    }
    let label_col = records
        .column_index(&spec.label_column)
        .ok_or_else(|| DataError::Schema(vec![spec.label_column.clone()]))?;
    let names = spec.feature_names();
    let d = names.len();
    let mut x = vec![0.0; n * d];
    let mut offset = 0;
    for (f, &col) in spec.features.iter().zip(&cols) {
        match f {
            FeatureSpec::Numeric(s) => {
                let span = s.max - s.min;
                for r in 0..n {
                    let v = numeric_value(records, col, r, s.source).unwrap_or(s.median);
                    x[r * d + offset] = if span > 0.0 { ((v - s.min) / span).clamp(0.0, 1.0) } else { 0.0 };
                }
                offset += 1;
            }
            FeatureSpec::Categorical(s) => {
                for r in 0..n {
                    let c = category(records, col, r, s.kind);
                    if let Ok(k) = s.levels.binary_search(&c) {
                        x[r * d + offset + k] = 1.0;
                    }
                }
                offset += s.levels.len();
            }
        }
    }
    let y = (0..n)
        .map(|r| f64::from(u8::from(records.text(r, label_col) == Some(spec.label_positive.as_str()))))
        .collect();
    Dataset::new(x, y, names)
}

impl PreprocessSpec {
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for f in &self.features {
            match f {
                FeatureSpec::Numeric(s) => names.push(s.name.clone()),
                FeatureSpec::Categorical(s) => names.extend(s.levels.iter().map(|l| format!("{}={l}", s.name))),
            }
        }
        names
    }

    pub fn dim(&self) -> usize {
        self.features
            .iter()
            .map(|f| match f {
                FeatureSpec::Numeric(_) => 1,
                FeatureSpec::Categorical(s) => s.levels.len(),
            })
            .sum()
    }

    /// Tab-separated text form, one directive per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(HEADER);
        out.push('\n');
        out.push_str(&format!("option\tordinal_age\t{}\n", self.options.ordinal_age));
        out.push_str(&format!("option\tgroup_secondary\t{}\n", self.options.group_secondary));
        for d in &self.dropped {
            out.push_str(&format!("drop\t{d}\n"));
        }
        out.push_str(&format!("label\t{}\t{}\n", self.label_column, self.label_positive));
        for (g, name) in ICD9_GROUPS.iter().enumerate() {
            out.push_str(&format!("icd9\t{g}\t{name}\n"));
        }
        for f in &self.features {
            match f {
                FeatureSpec::Numeric(s) => {
                    let src = match s.source {
                        NumericSource::Value => "value",
                        NumericSource::AgeBracket => "age-bracket",
                    };
                    out.push_str(&format!("numeric\t{}\t{src}\t{:?}\t{:?}\t{:?}\n", s.name, s.min, s.max, s.median));
                }
                FeatureSpec::Categorical(s) => {
                    let kind = match s.kind {
                        CategoricalKind::Raw => "raw",
                        CategoricalKind::Icd9 => "icd9",
                    };
                    out.push_str(&format!("categorical\t{}\t{kind}", s.name));
                    for l in &s.levels {
                        out.push('\t');
                        out.push_str(l);
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, DataError> {
        let bad = |line: usize, what: &str| DataError::Format(format!("spec line {}: {what}", line + 1));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == HEADER => {}
            _ => return Err(DataError::Format("missing preprocess spec header".into())),
        }
        let mut spec = PreprocessSpec {
            options: PreprocessOptions::default(),
            dropped: Vec::new(),
            label_column: String::new(),
            label_positive: String::new(),
            features: Vec::new(),
        };
        let float = |i: usize, s: &str| s.parse::<f64>().map_err(|_| bad(i, "bad number"));
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            match (f[0], f.len()) {
                ("option", 3) => {
                    let v = f[2].parse::<bool>().map_err(|_| bad(i, "bad flag"))?;
                    match f[1] {
                        "ordinal_age" => spec.options.ordinal_age = v,
                        "group_secondary" => spec.options.group_secondary = v,
                        _ => return Err(bad(i, "unknown option")),
                    }
                }
                ("drop", 2) => spec.dropped.push(f[1].into()),
                ("label", 3) => {
                    spec.label_column = f[1].into();
                    spec.label_positive = f[2].into();
                }
                ("icd9", 3) => {
                    let g: usize = f[1].parse().map_err(|_| bad(i, "bad group id"))?;
                    if ICD9_GROUPS.get(g) != Some(&f[2]) {
                        return Err(bad(i, "ICD9 group table differs from this build"));
                    }
                }
                ("numeric", 6) => {
                    let source = match f[2] {
                        "value" => NumericSource::Value,
                        "age-bracket" => NumericSource::AgeBracket,
                        _ => return Err(bad(i, "unknown numeric source")),
                    };
                    let (min, max, median) = (float(i, f[3])?, float(i, f[4])?, float(i, f[5])?);
                    if !(min <= max) {
                        return Err(bad(i, "min exceeds max"));
                    }
                    spec.features.push(FeatureSpec::Numeric(NumericSpec { name: f[1].into(), source, min, max, median }));
                }
                ("categorical", n) if n >= 3 => {
                    let kind = match f[2] {
                        "raw" => CategoricalKind::Raw,
                        "icd9" => CategoricalKind::Icd9,
                        _ => return Err(bad(i, "unknown categorical kind")),
                    };
                    let levels: Vec<String> = f[3..].iter().map(|s| s.to_string()).collect();
                    if levels.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(bad(i, "levels not sorted"));
                    }
                    spec.features.push(FeatureSpec::Categorical(CategoricalSpec { name: f[1].into(), kind, levels }));
                }
                _ => return Err(bad(i, "unrecognised directive")),
            }
        }
        if spec.label_column.is_empty() {
            return Err(DataError::Format("spec has no label directive".into()));
        }
        Ok(spec)
    }

    /// SHA-256 of the text form.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_text().as_bytes()).into()
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest())
    }
}
