//! The d→32→1 network: float training (plain or differentially private),
//! fixed-point quantization and the encrypted inference circuit.

mod bench;
mod encrypted;
mod quantized;
mod train;

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::data::Dataset;
use crate::dpsgd::{DpError, GradientModel};
use crate::encoding::EncodingError;
use crate::fvrns::FvError;
use crate::polyapprox::{Base2Poly, RealPoly, PUBLISHED_P, PUBLISHED_P_STAR};

pub use bench::{bench_variants, BenchResult, BenchVariant};
pub use encrypted::{decrypt_score, encrypt_input, encrypted_forward, expected_counters, DecryptedScore};
pub use quantized::{quantize_model, EncryptedModel, QuantActivation, QuantConfig};
pub use train::{gradient_norms, train, EpochRecord, TrainConfig, TrainHistory};

pub const HIDDEN: usize = 32;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input has {found} features, model expects {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}, step {step}: loss {loss}")]
    Divergence { epoch: usize, step: u64, loss: f64 },
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Fv(#[from] FvError),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Elementwise nonlinearity.
#[derive(Clone, Debug, PartialEq)]
pub enum Activation {
    Square,
    /// Real-coefficient polynomial such as the minimax swish fit.
    Poly(RealPoly),
    /// Power-of-two polynomial such as the quantized swish.
    Base2(Base2Poly),
    Relu,
    Sigmoid,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Activation {
    pub fn swish_poly() -> Self {
        Activation::Poly(RealPoly::new(PUBLISHED_P.iter().rev().copied().collect()))
    }

    pub fn swish_quant() -> Self {
        Activation::Base2(Base2Poly::from_exponents_desc(&PUBLISHED_P_STAR))
    }

    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Activation::Square => z * z,
            Activation::Poly(p) => p.eval(z),
            Activation::Base2(p) => p.eval(z),
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Square => 2.0 * z,
            Activation::Poly(p) => p.derivative().eval(z),
            Activation::Base2(p) => p.to_real().derivative().eval(z),
            Activation::Relu => f64::from(u8::from(z > 0.0)),
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }

    /// One-line text form, parsed back by [`Activation::parse`].
    pub fn to_text(&self) -> String {
        match self {
            Activation::Square => "square".into(),
            Activation::Relu => "relu".into(),
            Activation::Sigmoid => "sigmoid".into(),
            Activation::Poly(p) => {
                let cs: Vec<String> = p.coeffs.iter().map(|c| format!("{c:?}")).collect();
                format!("poly {}", cs.join(" "))
            }
            Activation::Base2(p) => {
                let ts: Vec<String> = p.exponents.iter().zip(&p.signs).map(|(e, s)| format!("{s}:{e}")).collect();
                format!("base2 {}", ts.join(" "))
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let bad = || ModelError::Format(format!("bad activation {text:?}"));
        let mut it = text.split_whitespace();
        let kind = it.next().ok_or_else(bad)?;
        let rest: Vec<&str> = it.collect();
        Ok(match kind {
            "square" => Activation::Square,
            "relu" => Activation::Relu,
            "sigmoid" => Activation::Sigmoid,
            "poly" => Activation::Poly(RealPoly::new(
                rest.iter().map(|s| s.parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?,
            )),
            "base2" => {
                let mut exps = Vec::new();
                let mut signs = Vec::new();
                for term in rest {
                    let (s, e) = term.split_once(':').ok_or_else(bad)?;
                    let s: i8 = s.parse().map_err(|_| bad())?;
                    if !(-1..=1).contains(&s) {
                        return Err(bad());
                    }
                    signs.push(s);
                    exps.push(e.parse::<i32>().map_err(|_| bad())?);
                }
                Activation::Base2(Base2Poly::new(exps, signs))
            }
            _ => return Err(bad()),
        })
    }
}

/// Named activation pairs (hidden, output) offered on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActivationPreset {
    Square,
    SwishPoly,
    SwishQuant,
    ReluSigmoid,
}

impl ActivationPreset {
    pub fn activations(self) -> (Activation, Activation) {
        match self {
            ActivationPreset::Square => (Activation::Square, Activation::Square),
            ActivationPreset::SwishPoly => (Activation::swish_poly(), Activation::swish_poly()),
            ActivationPreset::SwishQuant => (Activation::swish_quant(), Activation::swish_quant()),
            ActivationPreset::ReluSigmoid => (Activation::Relu, Activation::Sigmoid),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationPreset::Square => "square",
            ActivationPreset::SwishPoly => "swish-poly",
            ActivationPreset::SwishQuant => "swish-quant",
            ActivationPreset::ReluSigmoid => "relu-sigmoid",
        }
    }
}

impl std::str::FromStr for ActivationPreset {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        Ok(match s {
            "square" => ActivationPreset::Square,
            "swish-poly" => ActivationPreset::SwishPoly,
            "swish-quant" => ActivationPreset::SwishQuant,
            "relu-sigmoid" => ActivationPreset::ReluSigmoid,
            _ => return Err(ModelError::Config(format!("unknown activation {s:?}"))),
        })
    }
}

impl fmt::Display for ActivationPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `w(y) (s - y)^2` with `w(1) = w_pos`, `w(0) = 1`.
pub fn weighted_mse(score: f64, label: f64, w_pos: f64) -> f64 {
    let w = if label == 1.0 { w_pos } else { 1.0 };
    w * (score - label) * (score - label)
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardCache {
    pub z1: Vec<f64>,
    pub a1: Vec<f64>,
    pub z2: f64,
}

/// One hidden layer network. `w1` is row-major `d × hidden`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub d: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub hidden_act: Activation,
    pub output_act: Activation,
    /// When false the biases stay zero and receive no gradient.
    pub use_bias: bool,
    pub seed: u64,
    /// Digest of the preprocessing that produced the training data.
    pub preprocess_digest: Option<String>,
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn new(d: usize, hidden: usize, hidden_act: Activation, output_act: Activation, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let l1 = (6.0 / (d + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + 1) as f64).sqrt();
        let w1 = (0..d * hidden).map(|_| rng.random_range(-l1..=l1)).collect();
        let w2 = (0..hidden).map(|_| rng.random_range(-l2..=l2)).collect();
        Self {
            d,
            hidden,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: 0.0,
            hidden_act,
            output_act,
            use_bias: true,
            seed,
            preprocess_digest: None,
        }
    }

    pub fn with_preset(d: usize, preset: ActivationPreset, seed: u64) -> Self {
        let (h, o) = preset.activations();
        Self::new(d, HIDDEN, h, o, seed)
    }

    pub fn param_count(&self) -> usize {
        self.d * self.hidden + 2 * self.hidden + 1
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.d {
            return Err(ModelError::Dimension { expected: self.d, found: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<(f64, ForwardCache), ModelError> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    fn forward_unchecked(&self, x: &[f64]) -> (f64, ForwardCache) {
        let h = self.hidden;
        let mut z1 = self.b1.clone();
        for (j, &xj) in x.iter().enumerate() {
            let row = &self.w1[j * h..(j + 1) * h];
            for (z, w) in z1.iter_mut().zip(row) {
                *z += xj * w;
            }
        }
        let a1: Vec<f64> = z1.iter().map(|&z| self.hidden_act.eval(z)).collect();
        let z2 = self.b2 + a1.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>();
        (self.output_act.eval(z2), ForwardCache { z1, a1, z2 })
    }

    pub fn score(&self, x: &[f64]) -> Result<f64, ModelError> {
        Ok(self.forward(x)?.0)
    }

    /// Weighted squared loss and its exact gradient for one example, laid
    /// out like [`MlpModel::params`].
    pub fn example_gradient(&self, x: &[f64], y: f64, w_pos: f64) -> Result<(f64, Vec<f64>), ModelError> {
        self.check_input(x)?;
        Ok(self.gradient_unchecked(x, y, w_pos))
    }

    fn gradient_unchecked(&self, x: &[f64], y: f64, w_pos: f64) -> (f64, Vec<f64>) {
        let (s, cache) = self.forward_unchecked(x);
        let h = self.hidden;
        let w = if y == 1.0 { w_pos } else { 1.0 };
        let loss = w * (s - y) * (s - y);
        let dz2 = 2.0 * w * (s - y) * self.output_act.derivative(cache.z2);
        let mut g = vec![0.0; self.param_count()];
        let (gw1, rest) = g.split_at_mut(self.d * h);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, gb2) = rest.split_at_mut(h);
        let mut dz1 = vec![0.0; h];
        for k in 0..h {
            gw2[k] = dz2 * cache.a1[k];
            dz1[k] = dz2 * self.w2[k] * self.hidden_act.derivative(cache.z1[k]);
        }
        for (j, &xj) in x.iter().enumerate() {
            for (gk, dk) in gw1[j * h..(j + 1) * h].iter_mut().zip(&dz1) {
                *gk = xj * dk;
            }
        }
        if self.use_bias {
            gb1.copy_from_slice(&dz1);
            gb2[0] = dz2;
        }
        (loss, g)
    }

    pub fn per_example_gradients(&self, data: &Dataset, w_pos: f64) -> Result<Vec<Vec<f64>>, ModelError> {
        self.check_input(&vec![0.0; data.d])?;
        Ok((0..data.len()).map(|i| self.gradient_unchecked(data.row(i), data.y[i], w_pos).1).collect())
    }

    /// `w1 ‖ b1 ‖ w2 ‖ b2`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (dh, h) = (self.d * self.hidden, self.hidden);
        self.w1.copy_from_slice(&p[..dh]);
        self.w2.copy_from_slice(&p[dh + h..dh + 2 * h]);
        if self.use_bias {
            self.b1.copy_from_slice(&p[dh..dh + h]);
            self.b2 = p[dh + 2 * h];
        }
    }

    pub fn predict_scores(&self, data: &Dataset) -> Result<Vec<f64>, ModelError> {
        self.check_input(&vec![0.0; data.d])?;
        Ok((0..data.len()).map(|i| self.forward_unchecked(data.row(i)).0).collect())
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let mut out = String::from("privml-model 1\n");
        out.push_str(&format!("input_dim {}\n", self.d));
        out.push_str(&format!("hidden {}\n", self.hidden));
        out.push_str(&format!("hidden_activation {}\n", self.hidden_act.to_text()));
        out.push_str(&format!("output_activation {}\n", self.output_act.to_text()));
        out.push_str(&format!("use_bias {}\n", self.use_bias));
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("preprocess_digest {}\n", self.preprocess_digest.as_deref().unwrap_or("-")));
        out.push_str(&format!("w1 {}\n", join(&self.w1)));
        out.push_str(&format!("b1 {}\n", join(&self.b1)));
        out.push_str(&format!("w2 {}\n", join(&self.w2)));
        out.push_str(&format!("b2 {:?}\n", self.b2));
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let mut lines = text.lines();
        if lines.next() != Some("privml-model 1") {
            return Err(ModelError::Format("missing model header".into()));
        }
        let mut fields = std::collections::HashMap::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once(' ').unwrap_or((line, ""));
            if fields.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ModelError::Format(format!("duplicate key {k}")));
            }
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| ModelError::Format(format!("missing key {k}")));
        let int = |k: &str| get(k)?.parse::<usize>().map_err(|_| ModelError::Format(format!("bad {k}")));
        let floats = |k: &str| -> Result<Vec<f64>, ModelError> {
            get(k)?
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| ModelError::Format(format!("bad number in {k}"))))
                .collect()
        };
        let (d, hidden) = (int("input_dim")?, int("hidden")?);
        let (w1, b1, w2, b2) = (floats("w1")?, floats("b1")?, floats("w2")?, floats("b2")?);
        if w1.len() != d * hidden || b1.len() != hidden || w2.len() != hidden || b2.len() != 1 {
            return Err(ModelError::Format("weight arrays do not match the dimensions".into()));
        }
        let digest = get("preprocess_digest")?.trim().to_string();
        Ok(Self {
            d,
            hidden,
            w1,
            b1,
            w2,
            b2: b2[0],
            hidden_act: Activation::parse(get("hidden_activation")?)?,
            output_act: Activation::parse(get("output_activation")?)?,
            use_bias: get("use_bias")?.parse().map_err(|_| ModelError::Format("bad use_bias".into()))?,
            seed: get("seed")?.parse().map_err(|_| ModelError::Format("bad seed".into()))?,
            preprocess_digest: (digest != "-").then_some(digest),
        })
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), ModelError> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, ModelError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// A model paired with its loss weighting, as seen by the DP optimizer.
pub(crate) struct Objective {
    pub model: MlpModel,
    pub w_pos: f64,
}

impl GradientModel for Objective {
    fn params(&self) -> Vec<f64> {
        self.model.params()
    }

    fn set_params(&mut self, p: &[f64]) {
        self.model.set_params(p);
    }

    fn example_gradient(&self, x: &[f64], y: f64) -> (f64, Vec<f64>) {
        self.model.gradient_unchecked(x, y, self.w_pos)
    }
}

#[cfg(test)]
mod tests;
