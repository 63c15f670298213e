use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::{DataError, Dataset, RawTable};

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Bias b such that the mean of sigmoid(s_i + b) equals `rate`.
fn calibrate_bias(scores: &[f64], rate: f64) -> f64 {
    let mean = |b: f64| scores.iter().map(|s| sigmoid(s + b)).sum::<f64>() / scores.len().max(1) as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Features uniform on [0,1]; labels drawn from a planted logistic rule
/// whose linear score has standard deviation `signal`, with the bias set so
/// that the expected positive rate is `pos_rate`.
pub fn synthesize(n: usize, d: usize, pos_rate: f64, signal: f64, seed: u64) -> Result<Dataset, DataError> {
    if !(pos_rate > 0.0 && pos_rate < 1.0) {
        return Err(DataError::Format(format!("positive rate {pos_rate} outside (0,1)")));
    }
    if d == 0 || !(signal >= 0.0) {
        return Err(DataError::Format("synthesize needs d ≥ 1 and signal ≥ 0".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    // Uniform[0,1] has variance 1/12, so this gives Var(w·(x − 1/2)) = signal².
    let k = signal * 12f64.sqrt() / norm;
    w.iter_mut().for_each(|v| *v *= k);

    let x: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
    let scores: Vec<f64> =
        x.chunks_exact(d).map(|row| row.iter().zip(&w).map(|(a, b)| (a - 0.5) * b).sum()).collect();
    let bias = calibrate_bias(&scores, pos_rate);
    let y = scores.iter().map(|s| f64::from(u8::from(rng.random::<f64>() < sigmoid(s + bias)))).collect();
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Dataset::new(x, y, names)
}

/// Rescales every column to raw-looking ranges: column j becomes
/// `offset_j + scale_j · x` with scales log-uniform on [1, 100].
pub fn mimic_raw_scales(data: &Dataset, seed: u64) -> Dataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let params: Vec<(f64, f64)> = (0..data.d)
        .map(|_| {
            let scale = 10f64.powf(rng.random_range(0.0..2.0));
            (rng.random_range(0.0..scale), scale)
        })
        .collect();
    let mut out = data.clone();
    for row in out.x.chunks_exact_mut(data.d) {
        for (v, (off, s)) in row.iter_mut().zip(&params) {
            *v = off + s * *v;
        }
    }
    out
}

/// Per-column min-max scaler fitted on one dataset and applied to others.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(data: &Dataset) -> Self {
        let mut min = vec![f64::INFINITY; data.d];
        let mut max = vec![f64::NEG_INFINITY; data.d];
        for row in data.x.chunks_exact(data.d) {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Self { min, max }
    }

    /// (x − min)/(max − min) clamped to [0,1]; constant columns become 0.
    pub fn transform(&self, data: &Dataset) -> Dataset {
        let mut out = data.clone();
        for row in out.x.chunks_exact_mut(data.d) {
            for (j, v) in row.iter_mut().enumerate() {
                let span = self.max[j] - self.min[j];
                *v = if span > 0.0 { ((*v - self.min[j]) / span).clamp(0.0, 1.0) } else { 0.0 };
            }
        }
        out
    }
}

const RACES: [&str; 5] = ["Caucasian", "AfricanAmerican", "Hispanic", "Asian", "Other"];
const AGES: [&str; 10] =
    ["[0-10)", "[10-20)", "[20-30)", "[30-40)", "[40-50)", "[50-60)", "[60-70)", "[70-80)", "[80-90)", "[90-100)"];
const DIAG: [&str; 12] =
    ["428", "414", "786", "491.21", "250.83", "250.02", "996", "715", "599", "174", "V57", "E888"];
const DRUG: [&str; 4] = ["No", "Steady", "Up", "Down"];
const TESTS: [&str; 4] = ["None", "Norm", ">7", ">8"];

/// Diabetes-shaped raw records with a planted readmission signal, for tests
/// and dataset-free runs of the preprocessing pipeline.
pub fn synthesize_records(n: usize, seed: u64) -> Result<RawTable, DataError> {
    let names = [
        "encounter_id",
        "patient_nbr",
        "race",
        "gender",
        "age",
        "weight",
        "admission_type_id",
        "discharge_disposition_id",
        "admission_source_id",
        "time_in_hospital",
        "payer_code",
        "medical_specialty",
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
        "A1Cresult",
        "metformin",
        "insulin",
        "change",
        "diabetesMed",
        "readmitted",
    ];
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let pick = |rng: &mut ChaCha20Rng, xs: &[&str]| xs[rng.random_range(0..xs.len())].to_string();
        let maybe = |rng: &mut ChaCha20Rng, p: f64, v: String| if rng.random::<f64>() < p { "?".into() } else { v };
        let inpatient = rng.random_range(0..6u32).saturating_sub(rng.random_range(0..4u32));
        let emergency = rng.random_range(0..3u32);
        let time = rng.random_range(1..=14u32);
        let meds = rng.random_range(1..=60u32);
        let diag1 = pick(&mut rng, &DIAG);
        let logit = -2.6 + 0.55 * f64::from(inpatient) + 0.25 * f64::from(emergency) + 0.04 * f64::from(time)
            + if diag1 == "428" { 0.5 } else { 0.0 };
        let label = if rng.random::<f64>() < sigmoid(logit) {
            "<30"
        } else if rng.random::<f64>() < 0.4 {
            ">30"
        } else {
            "NO"
        };
        let race = pick(&mut rng, &RACES);
        let (diag2, diag3) = (pick(&mut rng, &DIAG), pick(&mut rng, &DIAG));
        rows.push(vec![
            (1000 + i).to_string(),
            (500_000 + rng.random_range(0..n.max(1))).to_string(),
            maybe(&mut rng, 0.02, race),
            pick(&mut rng, &["Female", "Male"]),
            pick(&mut rng, &AGES),
            "?".into(),
            rng.random_range(1..=8u32).to_string(),
            rng.random_range(1..=28u32).to_string(),
            rng.random_range(1..=25u32).to_string(),
            time.to_string(),
            maybe(&mut rng, 0.4, "MC".into()),
            maybe(&mut rng, 0.5, "InternalMedicine".into()),
            rng.random_range(1..=100u32).to_string(),
            rng.random_range(0..=6u32).to_string(),
            meds.to_string(),
            rng.random_range(0..=5u32).to_string(),
            emergency.to_string(),
            inpatient.to_string(),
            diag1,
            maybe(&mut rng, 0.01, diag2),
            maybe(&mut rng, 0.02, diag3),
            rng.random_range(1..=16u32).to_string(),
            pick(&mut rng, &TESTS),
            pick(&mut rng, &DRUG),
            pick(&mut rng, &DRUG),
            pick(&mut rng, &["No", "Ch"]),
            pick(&mut rng, &["Yes", "No"]),
            label.to_string(),
        ]);
    }
    RawTable::from_rows(&names, &rows)
}
