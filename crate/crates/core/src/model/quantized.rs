use std::io::{Read, Write};
use std::path::Path;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use sha2::{Digest, Sha256};

use super::{Activation, MlpModel, ModelError};
use crate::data::Dataset;
use crate::encoding::{quantize, scale_down, CoeffBound, EncodingError, ScaleMeta};
use crate::fvrns::FvContext;
use crate::polyapprox::Base2Poly;

/// Activations that have an integer circuit.
#[derive(Clone, Debug, PartialEq)]
pub enum QuantActivation {
    Square,
    Base2(Base2Poly),
}

/// One monomial of a quantized activation at a given input exponent:
/// `sign · 2^shift · z^degree`, landing at exponent `label + degree·E`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Term {
    pub degree: usize,
    pub sign: i8,
    pub shift: u32,
    pub label: u32,
}

impl QuantActivation {
    pub fn from_activation(a: &Activation) -> Result<Self, ModelError> {
        match a {
            Activation::Square => Ok(QuantActivation::Square),
            Activation::Base2(p) => {
                if p.exponents.len() > 3 || p.signs.iter().all(|&s| s == 0) {
                    return Err(ModelError::Config(format!("activation {p} needs degree 1 or 2")));
                }
                if p.signs.iter().skip(1).all(|&s| s == 0) {
                    return Err(ModelError::Config("constant activation has no circuit".into()));
                }
                Ok(QuantActivation::Base2(p.clone()))
            }
            other => Err(ModelError::Config(format!(
                "activation {} has no encrypted form; use square or a base-2 polynomial",
                other.to_text()
            ))),
        }
    }

    pub fn to_activation(&self) -> Activation {
        match self {
            QuantActivation::Square => Activation::Square,
            QuantActivation::Base2(p) => Activation::Base2(p.clone()),
        }
    }

    /// Exponent of the activation output for an input at exponent `e`.
    pub fn output_exponent(&self, e: u32) -> u32 {
        match self {
            QuantActivation::Square => 2 * e,
            QuantActivation::Base2(p) => {
                let e = e as i64;
                (0..p.exponents.len())
                    .filter(|&i| p.signs[i] != 0)
                    .map(|i| (i as i64 * e - p.exponents[i] as i64).max(i as i64 * e))
                    .max()
                    .unwrap_or(0)
                    .max(0) as u32
            }
        }
    }

    /// Base-2 terms aligned at the output exponent, highest degree first.
    pub(crate) fn terms(&self, e: u32) -> Vec<Term> {
        let QuantActivation::Base2(p) = self else {
            return Vec::new();
        };
        let f = self.output_exponent(e) as i64;
        (0..p.exponents.len())
            .rev()
            .filter(|&i| p.signs[i] != 0)
            .map(|i| {
                let label = f - i as i64 * e as i64;
                Term { degree: i, sign: p.signs[i], shift: (label + p.exponents[i] as i64) as u32, label: label as u32 }
            })
            .collect()
    }

    fn eval_int(&self, z: &BigInt, e: u32) -> BigInt {
        match self {
            QuantActivation::Square => z * z,
            QuantActivation::Base2(_) => self.terms(e).iter().fold(BigInt::zero(), |acc, t| {
                let pow = match t.degree {
                    0 => BigInt::one(),
                    1 => z.clone(),
                    _ => z * z,
                };
                acc + (pow << t.shift) * i32::from(t.sign)
            }),
        }
    }

    fn bound(&self, z: &CoeffBound, e: u32) -> CoeffBound {
        match self {
            QuantActivation::Square => z.mul(z),
            QuantActivation::Base2(_) => self.terms(e).iter().fold(CoeffBound::zero(), |acc, t| {
                let pow = match t.degree {
                    0 => CoeffBound::of_int(&BigInt::one()),
                    1 => z.clone(),
                    _ => z.mul(z),
                };
                acc.add(&pow.shift(t.shift as usize))
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantConfig {
    /// Fractional bits of the inputs; inputs must satisfy `|x| ≤ 1`.
    pub input_bits: u32,
    pub weight_bits: u32,
}

impl Default for QuantConfig {
    fn default() -> Self {
        Self { input_bits: 15, weight_bits: 15 }
    }
}

/// Fixed-point model evaluated by the encrypted circuit. Weights are
/// `round(w · 2^weight_bits)`; biases are added at the aligned exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct EncryptedModel {
    pub d: usize,
    pub hidden: usize,
    pub w1: Vec<i64>,
    pub b1: Vec<i64>,
    pub w2: Vec<i64>,
    pub b2: i64,
    pub hidden_act: QuantActivation,
    pub output_act: QuantActivation,
    pub use_bias: bool,
    pub meta: ScaleMeta,
    /// Digest of the encryption parameters the model was checked against.
    pub params_digest: Option<[u8; 32]>,
}

fn q64(w: f64, bits: u32) -> Result<i64, ModelError> {
    quantize(w, bits)?
        .to_i64()
        .ok_or_else(|| ModelError::Encoding(EncodingError::Range(format!("weight {w} overflows"))))
}

/// Rounds every weight to `weight_bits` fractional bits and derives the
/// exponent schedule of the circuit.
pub fn quantize_model(model: &MlpModel, cfg: QuantConfig) -> Result<EncryptedModel, ModelError> {
    let hidden_act = QuantActivation::from_activation(&model.hidden_act)?;
    let output_act = QuantActivation::from_activation(&model.output_act)?;
    let wb = cfg.weight_bits;
    let q = |v: &[f64]| v.iter().map(|&w| q64(w, wb)).collect::<Result<Vec<_>, _>>();
    let mut em = EncryptedModel {
        d: model.d,
        hidden: model.hidden,
        w1: q(&model.w1)?,
        b1: if model.use_bias { q(&model.b1)? } else { vec![0; model.hidden] },
        w2: q(&model.w2)?,
        b2: if model.use_bias { q64(model.b2, wb)? } else { 0 },
        hidden_act,
        output_act,
        use_bias: model.use_bias,
        meta: ScaleMeta::new(cfg.input_bits, wb),
        params_digest: None,
    };
    em.rebuild_schedule();
    Ok(em)
}

pub(crate) const STAGES: [&str; 5] = ["input", "layer1", "hidden_activation", "layer2", "output_activation"];

impl EncryptedModel {
    fn rebuild_schedule(&mut self) {
        let (ib, wb) = (self.meta.input_bits, self.meta.weight_bits);
        let l1 = ib + wb;
        let a1 = self.hidden_act.output_exponent(l1);
        let l2 = a1 + wb;
        let out = self.output_act.output_exponent(l2);
        self.meta.schedule = STAGES.iter().map(|s| s.to_string()).zip([ib, l1, a1, l2, out]).collect();
    }

    pub(crate) fn stage(&self, name: &str) -> u32 {
        self.meta.exponent(name).expect("schedule covers every stage")
    }

    /// The same weights under different activations.
    pub fn with_activations(&self, hidden: QuantActivation, output: QuantActivation) -> Self {
        let mut em = Self { hidden_act: hidden, output_act: output, params_digest: None, ..self.clone() };
        em.rebuild_schedule();
        em
    }

    pub fn final_exponent(&self) -> u32 {
        self.meta.final_exponent()
    }

    /// Fixed-point inputs; fails unless `|x| ≤ 1` for every feature.
    pub fn quantize_input(&self, x: &[f64]) -> Result<Vec<BigInt>, ModelError> {
        if x.len() != self.d {
            return Err(ModelError::Dimension { expected: self.d, found: x.len() });
        }
        let limit = BigInt::one() << self.meta.input_bits;
        x.iter()
            .map(|&v| {
                let q = quantize(v, self.meta.input_bits)?;
                if q > limit || q < -limit.clone() {
                    return Err(ModelError::Encoding(EncodingError::Range(format!("input {v} outside [-1, 1]"))));
                }
                Ok(q)
            })
            .collect()
    }

    pub(crate) fn layer1_bias(&self, k: usize) -> BigInt {
        BigInt::from(self.b1[k]) << self.stage("input")
    }

    pub(crate) fn layer2_bias(&self) -> BigInt {
        BigInt::from(self.b2) << self.stage("hidden_activation")
    }

    /// Exact integer forward pass; the result is at [`Self::final_exponent`].
    pub fn forward_int(&self, xq: &[BigInt]) -> Result<BigInt, ModelError> {
        if xq.len() != self.d {
            return Err(ModelError::Dimension { expected: self.d, found: xq.len() });
        }
        let h = self.hidden;
        let (l1, l2) = (self.stage("layer1"), self.stage("layer2"));
        let mut s = self.layer2_bias();
        for k in 0..h {
            let mut z = self.layer1_bias(k);
            for (j, x) in xq.iter().enumerate() {
                z += x * self.w1[j * h + k];
            }
            s += self.hidden_act.eval_int(&z, l1) * self.w2[k];
        }
        Ok(self.output_act.eval_int(&s, l2))
    }

    /// Quantized plaintext score.
    pub fn forward(&self, x: &[f64]) -> Result<f64, ModelError> {
        Ok(scale_down(&self.forward_int(&self.quantize_input(x)?)?, self.final_exponent()))
    }

    pub fn predict_scores(&self, data: &Dataset) -> Result<Vec<f64>, ModelError> {
        (0..data.len()).map(|i| self.forward(data.row(i))).collect()
    }

    /// Static check that every intermediate plaintext of the circuit decodes
    /// exactly, for every input with `|x| ≤ 1`.
    pub fn check_capacity(&self, n: usize, plain_moduli: &[u64]) -> Result<(), ModelError> {
        let h = self.hidden;
        let (l1, l2) = (self.stage("layer1"), self.stage("layer2"));
        let x = CoeffBound::any_up_to_bits(self.meta.input_bits);
        x.check("input", n, plain_moduli)?;
        let mut s = CoeffBound::of_int(&self.layer2_bias());
        for k in 0..h {
            let mut z = CoeffBound::of_int(&self.layer1_bias(k));
            for j in 0..self.d {
                z = z.add(&x.mul(&CoeffBound::of_int(&BigInt::from(self.w1[j * h + k]))));
            }
            z.check(&format!("layer1[{k}]"), n, plain_moduli)?;
            let a = self.hidden_act.bound(&z, l1);
            a.check(&format!("hidden_activation[{k}]"), n, plain_moduli)?;
            s = s.add(&a.mul(&CoeffBound::of_int(&BigInt::from(self.w2[k]))));
        }
        s.check("layer2", n, plain_moduli)?;
        self.output_act.bound(&s, l2).check("output_activation", n, plain_moduli)?;
        Ok(())
    }

    /// Capacity check against `ctx`, then records its parameter digest.
    pub fn bind(&mut self, ctx: &FvContext) -> Result<(), ModelError> {
        self.check_capacity(ctx.degree(), ctx.plain_moduli())?;
        self.params_digest = Some(ctx.digest());
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), ModelError> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        for v in [self.d as u32, self.hidden as u32, self.meta.input_bits, self.meta.weight_bits] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.push(u8::from(self.use_bias));
        write_act(&mut b, &self.hidden_act);
        write_act(&mut b, &self.output_act);
        match &self.params_digest {
            Some(dg) => {
                b.push(1);
                b.extend_from_slice(dg);
            }
            None => b.push(0),
        }
        for v in self.w1.iter().chain(&self.b1).chain(&self.w2).chain(std::iter::once(&self.b2)) {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&(self.meta.schedule.len() as u32).to_le_bytes());
        for (name, e) in &self.meta.schedule {
            b.extend_from_slice(&(name.len() as u32).to_le_bytes());
            b.extend_from_slice(name.as_bytes());
            b.extend_from_slice(&e.to_le_bytes());
        }
        let digest = Sha256::digest(&b);
        w.write_all(&b)?;
        w.write_all(&digest)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, ModelError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 38 || &bytes[..4] != MAGIC {
            return Err(ModelError::Format("not an encrypted-model file".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(ModelError::Format("encrypted-model digest mismatch".into()));
        }
        let mut c = Cursor { buf: &body[4..] };
        if c.u16()? != VERSION {
            return Err(ModelError::Format("unsupported encrypted-model version".into()));
        }
        let (d, hidden) = (c.u32()? as usize, c.u32()? as usize);
        let mut meta = ScaleMeta::new(c.u32()?, c.u32()?);
        let use_bias = c.u8()? != 0;
        let hidden_act = read_act(&mut c)?;
        let output_act = read_act(&mut c)?;
        let params_digest = match c.u8()? {
            0 => None,
            _ => Some(c.take(32)?.try_into().unwrap()),
        };
        let mut ints = |k: usize| (0..k).map(|_| c.i64()).collect::<Result<Vec<_>, _>>();
        let w1 = ints(d * hidden)?;
        let b1 = ints(hidden)?;
        let w2 = ints(hidden)?;
        let b2 = ints(1)?[0];
        for _ in 0..c.u32()? {
            let len = c.u32()? as usize;
            let name = String::from_utf8(c.take(len)?.to_vec()).map_err(|e| ModelError::Format(e.to_string()))?;
            meta.push(name, c.u32()?);
        }
        let em = Self { d, hidden, w1, b1, w2, b2, hidden_act, output_act, use_bias, meta, params_digest };
        let mut expect = em.clone();
        expect.rebuild_schedule();
        if expect.meta != em.meta {
            return Err(ModelError::Format("stored scale schedule disagrees with the activations".into()));
        }
        Ok(em)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), ModelError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(std::fs::write(path, buf)?)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, ModelError> {
        Self::read_from(&mut std::fs::File::open(path)?)
    }
}

const MAGIC: &[u8; 4] = b"PMEM";
const VERSION: u16 = 1;

fn write_act(b: &mut Vec<u8>, a: &QuantActivation) {
    match a {
        QuantActivation::Square => b.push(0),
        QuantActivation::Base2(p) => {
            b.push(1);
            b.push(p.exponents.len() as u8);
            for (e, s) in p.exponents.iter().zip(&p.signs) {
                b.push(*s as u8);
                b.extend_from_slice(&e.to_le_bytes());
            }
        }
    }
}

fn read_act(c: &mut Cursor) -> Result<QuantActivation, ModelError> {
    match c.u8()? {
        0 => Ok(QuantActivation::Square),
        1 => {
            let len = c.u8()? as usize;
            let (mut exps, mut signs) = (Vec::new(), Vec::new());
            for _ in 0..len {
                signs.push(c.u8()? as i8);
                exps.push(c.u32()? as i32);
            }
            QuantActivation::from_activation(&Activation::Base2(Base2Poly::new(exps, signs)))
        }
        k => Err(ModelError::Format(format!("unknown activation tag {k}"))),
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8], ModelError> {
        if self.buf.len() < k {
            return Err(ModelError::Format("truncated encrypted-model file".into()));
        }
        let (h, t) = self.buf.split_at(k);
        self.buf = t;
        Ok(h)
    }
    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn i64(&mut self) -> Result<i64, ModelError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
