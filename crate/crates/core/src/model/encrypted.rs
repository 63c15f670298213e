use num_bigint::BigInt;
use rand::Rng;

use super::quantized::{EncryptedModel, QuantActivation};
use super::ModelError;
use crate::encoding::{decode_plain_int, encode_int_plain, scale_down};
use crate::fvrns::{
    Ciphertext, EvaluationKeys, FvContext, FvError, MulPlainPath, OpCounters, Plaintext, PreparedCiphertext,
    PublicKey, SecretKey,
};

/// Encrypts one fixed-point feature vector, one ciphertext per feature.
pub fn encrypt_input(
    em: &EncryptedModel,
    ctx: &FvContext,
    pk: &PublicKey,
    x: &[f64],
    rng: &mut impl Rng,
) -> Result<Vec<Ciphertext>, ModelError> {
    em.quantize_input(x)?
        .iter()
        .map(|q| Ok(ctx.encrypt(&encode_int_plain(ctx, q, em.meta.input_bits)?, pk, rng)?))
        .collect()
}

/// Evaluator wrapper keeping an exact tally of the operations performed.
struct Circuit<'a> {
    ctx: &'a FvContext,
    evk: &'a EvaluationKeys,
    path: MulPlainPath,
    tally: OpCounters,
}

impl Circuit<'_> {
    fn plain(&self, z: &BigInt, scale: u32) -> Result<Plaintext, ModelError> {
        Ok(encode_int_plain(self.ctx, z, scale)?)
    }

    fn dot(&mut self, cts: &[PreparedCiphertext], pts: &[Plaintext]) -> Result<Ciphertext, ModelError> {
        self.tally.plain_mults += cts.len() as u64;
        self.tally.additions += cts.len() as u64 - 1;
        Ok(self.ctx.dot_plain(cts, pts)?)
    }

    fn add_plain(&mut self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext, ModelError> {
        self.tally.additions += 1;
        Ok(self.ctx.add_plain(ct, pt)?)
    }

    fn add(&mut self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, ModelError> {
        self.tally.additions += 1;
        Ok(self.ctx.add_ct(a, b)?)
    }

    /// Scale-alignment multiplication by `±2^k`, encoded as `±x^k`.
    fn align(&mut self, ct: &Ciphertext, sign: i8, shift: u32, label: u32) -> Result<Ciphertext, ModelError> {
        self.tally.plain_mults += 1;
        let pt = self.plain(&(BigInt::from(sign) << shift), label)?;
        Ok(self.ctx.mul_plain(ct, &pt, self.path)?)
    }

    fn square(&mut self, z: &Ciphertext) -> Result<Ciphertext, ModelError> {
        self.tally.ct_mults += 1;
        Ok(self.ctx.mul_ct(z, z, self.evk)?)
    }

    fn activation(&mut self, act: &QuantActivation, z: &Ciphertext) -> Result<Ciphertext, ModelError> {
        if let QuantActivation::Square = act {
            return self.square(z);
        }
        let e = z.scale;
        let mut acc: Option<Ciphertext> = None;
        let mut constant = None;
        for t in act.terms(e) {
            let term = match t.degree {
                0 => {
                    constant = Some(self.plain(&(BigInt::from(t.sign) << t.shift), t.label)?);
                    continue;
                }
                1 => self.align(z, t.sign, t.shift, t.label)?,
                _ => {
                    let sq = self.square(z)?;
                    self.align(&sq, t.sign, t.shift, t.label)?
                }
            };
            acc = Some(match acc {
                None => term,
                Some(a) => self.add(&a, &term)?,
            });
        }
        let acc = acc.ok_or_else(|| ModelError::Config("activation has no nonconstant term".into()))?;
        match constant {
            Some(c) => self.add_plain(&acc, &c),
            None => Ok(acc),
        }
    }
}

/// Operation counts of one encrypted forward pass, by construction.
pub fn expected_counters(em: &EncryptedModel) -> OpCounters {
    let act = |a: &QuantActivation| match a {
        QuantActivation::Square => OpCounters { ct_mults: 1, plain_mults: 0, additions: 0 },
        QuantActivation::Base2(_) => {
            let terms = a.terms(0);
            let nonconst = terms.iter().filter(|t| t.degree > 0).count() as u64;
            OpCounters {
                ct_mults: u64::from(terms.iter().any(|t| t.degree == 2)),
                plain_mults: nonconst,
                additions: nonconst - 1 + u64::from(terms.iter().any(|t| t.degree == 0)),
            }
        }
    };
    let (d, h) = (em.d as u64, em.hidden as u64);
    let bias = u64::from(em.use_bias);
    let mut c = OpCounters { ct_mults: 0, plain_mults: h * d + h, additions: h * (d - 1) + (h - 1) + bias * (h + 1) };
    let a = act(&em.hidden_act);
    for _ in 0..h {
        c += a;
    }
    c + act(&em.output_act)
}

/// Runs the circuit on encrypted features. The output ciphertext is at the
/// model's final exponent and carries the exact operation tally.
pub fn encrypted_forward(
    em: &EncryptedModel,
    ctx: &FvContext,
    evk: &EvaluationKeys,
    inputs: &[Ciphertext],
    path: MulPlainPath,
) -> Result<Ciphertext, ModelError> {
    if inputs.len() != em.d {
        return Err(ModelError::Dimension { expected: em.d, found: inputs.len() });
    }
    if let Some(dg) = em.params_digest {
        if dg != ctx.digest() {
            return Err(ModelError::Fv(FvError::ParamsMismatch));
        }
    }
    let input_exp = em.stage("input");
    if let Some(ct) = inputs.iter().find(|c| c.scale != input_exp) {
        return Err(ModelError::Fv(FvError::ScaleMismatch(input_exp, ct.scale)));
    }
    let (h, wb) = (em.hidden, em.meta.weight_bits);
    let mut circ = Circuit { ctx, evk, path, tally: OpCounters::default() };
    let prepared = inputs.iter().map(|c| ctx.prepare(c)).collect::<Result<Vec<_>, _>>()?;

    let mut hidden = Vec::with_capacity(h);
    for k in 0..h {
        let pts = (0..em.d)
            .map(|j| circ.plain(&BigInt::from(em.w1[j * h + k]), wb))
            .collect::<Result<Vec<_>, _>>()?;
        let mut z = circ.dot(&prepared, &pts)?;
        if em.use_bias {
            let b = circ.plain(&em.layer1_bias(k), z.scale)?;
            z = circ.add_plain(&z, &b)?;
        }
        debug_assert_eq!(z.scale, em.stage("layer1"));
        let a = circ.activation(&em.hidden_act, &z)?;
        assert_eq!(a.scale, em.stage("hidden_activation"), "hidden exponent off schedule");
        hidden.push(ctx.prepare(&a)?);
    }
    let pts = em.w2.iter().map(|&v| circ.plain(&BigInt::from(v), wb)).collect::<Result<Vec<_>, _>>()?;
    let mut s = circ.dot(&hidden, &pts)?;
    if em.use_bias {
        let b = circ.plain(&em.layer2_bias(), s.scale)?;
        s = circ.add_plain(&s, &b)?;
    }
    let mut out = circ.activation(&em.output_act, &s)?;
    assert_eq!(out.scale, em.final_exponent(), "output exponent off schedule");
    out.counters = circ.tally;
    Ok(out)
}

/// Decrypted circuit output.
#[derive(Clone, Debug, PartialEq)]
pub struct DecryptedScore {
    pub integer: BigInt,
    pub exponent: u32,
    pub value: f64,
}

pub fn decrypt_score(ctx: &FvContext, sk: &SecretKey, ct: &Ciphertext) -> Result<DecryptedScore, ModelError> {
    let pt = ctx.decrypt(ct, sk)?;
    let integer = decode_plain_int(&pt, ctx.plain_moduli())?;
    let value = scale_down(&integer, ct.scale);
    Ok(DecryptedScore { integer, exponent: ct.scale, value })
}
