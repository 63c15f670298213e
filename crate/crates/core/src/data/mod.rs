//! Tabular data: CSV ingestion, preprocessing, splitting, synthetic data and
//! a binary dataset cache.

mod preprocess;
mod records;
mod synth;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use preprocess::{
    icd9_group, preprocess_apply, preprocess_fit, CategoricalKind, CategoricalSpec, FeatureSpec, NumericSource,
    NumericSpec, PreprocessOptions, PreprocessSpec, ICD9_GROUPS,
};
pub use records::{load_records, read_records, Column, RawTable, REQUIRED_COLUMNS};
pub use synth::{mimic_raw_scales, synthesize, synthesize_records, MinMaxScaler};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing required columns: {}", .0.join(", "))]
    Schema(Vec<String>),
    #[error("malformed data: {0}")]
    Format(String),
    #[error("cache digest mismatch")]
    Digest,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense feature matrix (row-major) with binary labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub d: usize,
    pub names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>, names: Vec<String>) -> Result<Self, DataError> {
        let d = names.len();
        if x.len() != y.len() * d {
            return Err(DataError::Format(format!(
                "{} feature values for {} rows of width {d}",
                x.len(),
                y.len()
            )));
        }
        Ok(Self { x, y, d, names })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut x = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        Self {
            x,
            y: idx.iter().map(|&i| self.y[i]).collect(),
            d: self.d,
            names: self.names.clone(),
        }
    }

    pub fn positive_rate(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.len().max(1) as f64
    }

    /// Seeded 75:25 style split, see [`split_indices`].
    pub fn split(&self, ratio: f64, seed: u64) -> (Self, Self) {
        let (a, b) = split_indices(self.len(), ratio, seed);
        (self.subset(&a), self.subset(&b))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), DataError> {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"PMDS");
        buf.extend_from_slice(&1u16.to_le_bytes());
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.d as u32).to_le_bytes());
        for name in &self.names {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
        }
        for v in self.x.iter().chain(&self.y) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let digest = Sha256::digest(&buf);
        w.write_all(&buf)?;
        w.write_all(&digest)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, DataError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 50 || &bytes[..4] != b"PMDS" {
            return Err(DataError::Format("not a dataset cache".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(DataError::Digest);
        }
        let mut cur = &body[4..];
        let mut take = |k: usize| -> Result<&[u8], DataError> {
            if cur.len() < k {
                return Err(DataError::Format("truncated dataset cache".into()));
            }
            let (h, t) = cur.split_at(k);
            cur = t;
            Ok(h)
        };
        let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
        if version != 1 {
            return Err(DataError::Format(format!("unsupported cache version {version}")));
        }
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut names = Vec::with_capacity(d);
        for _ in 0..d {
            let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let s = std::str::from_utf8(take(len)?).map_err(|e| DataError::Format(e.to_string()))?;
            names.push(s.to_string());
        }
        let mut f = |count: usize| -> Result<Vec<f64>, DataError> {
            let raw = take(count * 8)?;
            Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let x = f(n * d)?;
        let y = f(n)?;
        Self::new(x, y, names)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), DataError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, DataError> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    /// SHA-256 of the cache encoding.
    pub fn digest(&self) -> [u8; 32] {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        Sha256::digest(&buf).into()
    }
}

/// Seeded shuffle, then the first `floor(ratio * n)` indices versus the rest.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let cut = (ratio * n as f64).floor() as usize;
    let test = idx.split_off(cut.min(n));
    (idx, test)
}

#[cfg(test)]
mod tests;
