//! Python bindings: keys and ciphertexts, the d-32-1 model, its quantized
//! encrypted form, and the privacy and approximation helpers.

use std::io;

use num_bigint::BigInt;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use privml::data::{synthesize, Dataset};
use privml::dpsgd::DpConfig;
use privml::encoding::{decode_plain_int, encode_int_plain};
use privml::fvrns::{self, EncryptionParams, FvContext, MulPlainPath};
use privml::model::{self as mdl, ActivationPreset, QuantConfig, TrainConfig};
use privml::polyapprox::{ApproxConfig, ApproxReport};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn model_err(e: mdl::ModelError) -> PyErr {
    match e {
        mdl::ModelError::Io(e) => io_err(e),
        e => value_err(e),
    }
}

fn io_err(e: io::Error) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// FV-RNS parameter set with its secret, public and evaluation keys.
#[pyclass(module = "privml", frozen)]
pub struct Keys {
    ctx: FvContext,
    sk: fvrns::SecretKey,
    pk: fvrns::PublicKey,
    evk: fvrns::EvaluationKeys,
}

#[pymethods]
impl Keys {
    #[new]
    #[pyo3(signature = (n = 8192, seed = 0))]
    fn new(n: usize, seed: u64) -> PyResult<Self> {
        let ctx = FvContext::new(EncryptionParams::with_degree(n)).map_err(value_err)?;
        let (sk, pk, evk) = ctx.keygen(seed);
        Ok(Self { ctx, sk, pk, evk })
    }

    #[getter]
    fn degree(&self) -> usize {
        self.ctx.degree()
    }

    #[getter]
    fn plain_moduli(&self) -> Vec<u64> {
        self.ctx.plain_moduli().to_vec()
    }

    #[pyo3(signature = (value, seed = 0))]
    fn encrypt_int(&self, value: BigInt, seed: u64) -> PyResult<Ciphertext> {
        let pt = encode_int_plain(&self.ctx, &value, 0).map_err(value_err)?;
        let ct = self.ctx.encrypt(&pt, &self.pk, &mut rng(seed)).map_err(value_err)?;
        Ok(Ciphertext(ct))
    }

    fn decrypt_int(&self, ct: &Ciphertext) -> PyResult<BigInt> {
        let pt = self.ctx.decrypt(&ct.0, &self.sk).map_err(value_err)?;
        decode_plain_int(&pt, self.ctx.plain_moduli()).map_err(value_err)
    }

    fn add(&self, a: &Ciphertext, b: &Ciphertext) -> PyResult<Ciphertext> {
        self.ctx.add_ct(&a.0, &b.0).map(Ciphertext).map_err(value_err)
    }

    fn mul(&self, a: &Ciphertext, b: &Ciphertext) -> PyResult<Ciphertext> {
        self.ctx.mul_ct(&a.0, &b.0, &self.evk).map(Ciphertext).map_err(value_err)
    }

    /// Remaining noise budget in bits.
    fn noise_budget(&self, ct: &Ciphertext) -> PyResult<f64> {
        self.ctx.noise_budget(&ct.0, &self.sk).map_err(value_err)
    }
}

#[pyclass(module = "privml", frozen)]
pub struct Ciphertext(fvrns::Ciphertext);

#[pymethods]
impl Ciphertext {
    #[getter]
    fn scale(&self) -> u32 {
        self.0.scale
    }

    /// `(ct_mults, plain_mults, additions)` performed to produce this ciphertext.
    #[getter]
    fn counters(&self) -> (u64, u64, u64) {
        let c = self.0.counters;
        (c.ct_mults, c.plain_mults, c.additions)
    }
}

/// Feature matrix with binary labels.
#[pyclass(module = "privml", frozen)]
pub struct Data(Dataset);

#[pymethods]
impl Data {
    #[new]
    fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> PyResult<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err("rows have different lengths"));
        }
        let names = (0..d).map(|j| format!("x{j}")).collect();
        Dataset::new(rows.concat(), labels, names).map(Data).map_err(value_err)
    }

    /// Planted-signal synthetic data with features in [0, 1].
    #[staticmethod]
    #[pyo3(signature = (n, d, pos_rate = 0.11, signal = 4.0, seed = 0))]
    fn synthetic(n: usize, d: usize, pos_rate: f64, signal: f64, seed: u64) -> PyResult<Self> {
        synthesize(n, d, pos_rate, signal, seed).map(Data).map_err(value_err)
    }

    /// `(train, test)` split.
    #[pyo3(signature = (ratio = 0.8, seed = 0))]
    fn split(&self, ratio: f64, seed: u64) -> (Data, Data) {
        let (a, b) = self.0.split(ratio, seed);
        (Data(a), Data(b))
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.0.len() {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(self.0.row(i).to_vec())
    }

    #[getter]
    fn labels(&self) -> Vec<f64> {
        self.0.y.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.d
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// The d-32-1 network.
#[pyclass(module = "privml", frozen)]
pub struct Model(mdl::MlpModel);

#[pymethods]
impl Model {
    /// Trains on `data`. `sigma` switches on DP-SGD with clipping bound `clip`.
    #[staticmethod]
    #[pyo3(signature = (data, epochs = 20, batch = 256, activation = "swish-quant", lr = 1e-3, w_pos = 8.0,
                        sigma = None, clip = 1.0, delta = 1e-5, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        data: &Data,
        epochs: usize,
        batch: usize,
        activation: &str,
        lr: f64,
        w_pos: f64,
        sigma: Option<f64>,
        clip: f64,
        delta: f64,
        seed: u64,
    ) -> PyResult<(Model, Option<f64>)> {
        let activation: ActivationPreset = activation.parse().map_err(value_err)?;
        let dp = sigma.map(|sigma| DpConfig {
            clip,
            sigma,
            lot_size: 0,
            dataset_size: 0,
            delta,
            eps_budget: f64::INFINITY,
            poisson: false,
        });
        let cfg = TrainConfig { epochs, batch_size: batch, activation, lr, w_pos, dp, seed, ..TrainConfig::default() };
        let (m, hist) = mdl::train(&data.0, &cfg).map_err(model_err)?;
        Ok((Model(m), hist.privacy.map(|p| p.0)))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Model> {
        mdl::MlpModel::load(path).map(Model).map_err(model_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(model_err)
    }

    fn score(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.score(&x).map_err(model_err)
    }

    fn predict(&self, data: &Data) -> PyResult<Vec<f64>> {
        self.0.predict_scores(&data.0).map_err(model_err)
    }

    /// Fixed-point version evaluated by the encrypted circuit.
    #[pyo3(signature = (input_bits = 15, weight_bits = 15))]
    fn quantize(&self, input_bits: u32, weight_bits: u32) -> PyResult<EncryptedModel> {
        mdl::quantize_model(&self.0, QuantConfig { input_bits, weight_bits }).map(EncryptedModel).map_err(model_err)
    }
}

#[pyclass(module = "privml", frozen)]
pub struct EncryptedModel(mdl::EncryptedModel);

#[pymethods]
impl EncryptedModel {
    #[getter]
    fn final_exponent(&self) -> u32 {
        self.0.final_exponent()
    }

    /// Exact fixed-point output as an integer at `final_exponent`.
    fn forward_int(&self, x: Vec<f64>) -> PyResult<BigInt> {
        let q = self.0.quantize_input(&x).map_err(model_err)?;
        self.0.forward_int(&q).map_err(model_err)
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.forward(&x).map_err(model_err)
    }

    #[pyo3(signature = (keys, x, seed = 0))]
    fn encrypt_input(&self, keys: &Keys, x: Vec<f64>, seed: u64) -> PyResult<Vec<Ciphertext>> {
        let cts = mdl::encrypt_input(&self.0, &keys.ctx, &keys.pk, &x, &mut rng(seed)).map_err(model_err)?;
        Ok(cts.into_iter().map(Ciphertext).collect())
    }

    /// Runs the encrypted forward pass; `shift` selects the power-of-two path.
    #[pyo3(signature = (keys, inputs, shift = true))]
    fn infer(&self, py: Python<'_>, keys: &Keys, inputs: Vec<PyRef<'_, Ciphertext>>, shift: bool) -> PyResult<Ciphertext> {
        let cts: Vec<fvrns::Ciphertext> = inputs.iter().map(|c| c.0.clone()).collect();
        let path = if shift { MulPlainPath::Shift } else { MulPlainPath::Generic };
        py.detach(|| mdl::encrypted_forward(&self.0, &keys.ctx, &keys.evk, &cts, path))
            .map(Ciphertext)
            .map_err(model_err)
    }

    /// `(integer, exponent, value)` of a decrypted score.
    fn decrypt(&self, keys: &Keys, ct: &Ciphertext) -> PyResult<(BigInt, u32, f64)> {
        let s = mdl::decrypt_score(&keys.ctx, &keys.sk, &ct.0).map_err(model_err)?;
        Ok((s.integer, s.exponent, s.value))
    }
}

/// Minimax fit and base-2 scan report for Swish on `[-a, a]`, as text.
#[pyfunction]
#[pyo3(signature = (interval_a = None, degree = 2))]
fn approx_report(interval_a: Option<f64>, degree: usize) -> PyResult<String> {
    let mut cfg = ApproxConfig { degree, ..ApproxConfig::default() };
    if let Some(a) = interval_a {
        cfg.half_width = a;
    }
    ApproxReport::run(&cfg).map(|r| r.to_string()).map_err(value_err)
}

/// Epsilon after `steps` subsampled Gaussian steps.
#[pyfunction]
#[pyo3(signature = (q, sigma, steps, delta = 1e-5))]
fn epsilon(q: f64, sigma: f64, steps: u64, delta: f64) -> f64 {
    privml::dpsgd::epsilon_for(q, sigma, steps, delta)
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<f64>) -> PyResult<f64> {
    privml::metrics::auc(&scores, &labels).map_err(value_err)
}

#[pymodule]
#[pyo3(name = "privml")]
fn privml_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Keys>()?;
    m.add_class::<Ciphertext>()?;
    m.add_class::<Data>()?;
    m.add_class::<Model>()?;
    m.add_class::<EncryptedModel>()?;
    m.add_function(wrap_pyfunction!(approx_report, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    Ok(())
}
