//! Base-2 integer encoder, fixed-point scaling and plaintext-CRT decoding.
//!
//! An integer `z` becomes the polynomial whose coefficients are the bits of
//! `|z|`, negated for negative `z`. Ring arithmetic on such polynomials is
//! integer arithmetic after evaluation at `x = 2`, as long as no coefficient
//! leaves the centered range of the plaintext modulus and the degree stays
//! below `n`. [`CoeffBound`] tracks both conditions statically.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::fvrns::{FvContext, FvError, Plaintext};
use crate::polyring::CrtBasis;

/// Plaintext polynomials per instance together with their scale exponent.
pub type EncodedPlain = Plaintext;

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("value out of encodable range: {0}")]
    Range(String),
    #[error("residues are inconsistent: {0}")]
    Integrity(String),
    #[error("capacity exceeded at {stage}: {detail}")]
    Capacity { stage: String, detail: String },
    #[error(transparent)]
    Fv(#[from] FvError),
}

/// Signed bit expansion of `z`: coefficient `i` is `sign(z)` where bit `i` of
/// `|z|` is set. Fails when `|z|` needs more than `max_bits` bits.
pub fn signed_bits(z: &BigInt, max_bits: usize) -> Result<Vec<i64>, EncodingError> {
    let bits = z.bits() as usize;
    if bits > max_bits {
        return Err(EncodingError::Range(format!("{bits}-bit integer exceeds {max_bits} bits")));
    }
    let sign = if z.is_negative() { -1 } else { 1 };
    let mag = z.magnitude();
    Ok((0..bits as u64).map(|i| if mag.bit(i) { sign } else { 0 }).collect())
}

/// Encode `z` as a length-`n` polynomial modulo `t`; negative bits map to `t - 1`.
pub fn encode_int(z: &BigInt, t: u64, n: usize) -> Result<Vec<u64>, EncodingError> {
    let mut out = vec![0u64; n];
    for (o, b) in out.iter_mut().zip(signed_bits(z, n / 2)?) {
        *o = match b {
            1 => 1,
            -1 => t - 1,
            _ => 0,
        };
    }
    Ok(out)
}

fn center(c: u64, t: u64) -> i64 {
    if c > t / 2 {
        c as i64 - t as i64
    } else {
        c as i64
    }
}

/// Centered lift of each coefficient, then evaluation at `x = 2`.
pub fn decode_int(p: &[u64], t: u64) -> BigInt {
    p.iter().rev().fold(BigInt::zero(), |acc, &c| (acc << 1u32) + center(c, t))
}

/// Encode `z` under every plaintext modulus of the context.
pub fn encode_int_plain(ctx: &FvContext, z: &BigInt, scale: u32) -> Result<EncodedPlain, EncodingError> {
    let bits = signed_bits(z, ctx.degree() / 2)?;
    Ok(Plaintext::from_signed(ctx, &bits, scale)?)
}

/// `round(r * 2^s)` with overflow detection.
pub fn quantize(r: f64, s: u32) -> Result<BigInt, EncodingError> {
    if !r.is_finite() {
        return Err(EncodingError::Range(format!("{r} is not finite")));
    }
    let v = (r * 2f64.powi(s as i32)).round();
    if v.abs() >= 2f64.powi(62) {
        return Err(EncodingError::Range(format!("{r} * 2^{s} overflows")));
    }
    Ok(BigInt::from(v as i64))
}

/// Fixed-point encoding: `encode_int(round(r 2^s))` with scale exponent `s`.
pub fn encode_fixed(ctx: &FvContext, r: f64, s: u32) -> Result<EncodedPlain, EncodingError> {
    encode_int_plain(ctx, &quantize(r, s)?, s)
}

/// `z / 2^e` as the nearest binary64 value.
pub fn scale_down(z: &BigInt, e: u32) -> f64 {
    let bits = z.bits();
    if bits <= 1000 {
        let f = z.to_f64().unwrap_or(f64::NAN);
        return f * 2f64.powi(-(e as i32));
    }
    let shift = bits - 64;
    (z >> shift).to_f64().unwrap() * 2f64.powi(shift as i32 - e as i32)
}

/// Combine residues modulo coprime `moduli` into the centered integer.
pub fn crt_centered(residues: &[u64], moduli: &[u64]) -> Result<BigInt, EncodingError> {
    if residues.len() != moduli.len() {
        return Err(EncodingError::Integrity(format!(
            "{} residues for {} moduli",
            residues.len(),
            moduli.len()
        )));
    }
    let basis = CrtBasis::new(moduli).map_err(|e| EncodingError::Integrity(e.to_string()))?;
    basis
        .reconstruct_centered(residues)
        .map_err(|e| EncodingError::Integrity(e.to_string()))
}

/// Scalar plaintext-CRT decode: centered integer modulo `prod(moduli)`
/// divided by `2^e`.
pub fn decode_fixed(residues: &[u64], moduli: &[u64], e: u32) -> Result<f64, EncodingError> {
    Ok(scale_down(&crt_centered(residues, moduli)?, e))
}

/// Decode a decrypted plaintext to its integer value: per-coefficient CRT
/// across instances, centered, then evaluated at `x = 2`.
pub fn decode_plain_int(pt: &Plaintext, moduli: &[u64]) -> Result<BigInt, EncodingError> {
    if pt.polys.len() != moduli.len() {
        return Err(EncodingError::Integrity("instance count differs from modulus count".into()));
    }
    if pt.polys.is_empty() {
        return Ok(BigInt::zero());
    }
    let basis = CrtBasis::new(moduli).map_err(|e| EncodingError::Integrity(e.to_string()))?;
    let n = pt.polys[0].len();
    let mut acc = BigInt::zero();
    let mut residues = vec![0u64; moduli.len()];
    for j in (0..n).rev() {
        for (r, p) in residues.iter_mut().zip(&pt.polys) {
            *r = p[j];
        }
        let c = basis
            .reconstruct_centered(&residues)
            .map_err(|e| EncodingError::Integrity(e.to_string()))?;
        acc = (acc << 1u32) + c;
    }
    Ok(acc)
}

/// Decode a decrypted plaintext to a real using its scale exponent.
pub fn decode_plain(pt: &Plaintext, moduli: &[u64]) -> Result<f64, EncodingError> {
    Ok(scale_down(&decode_plain_int(pt, moduli)?, pt.scale))
}

/// Fixed-point exponents of the encrypted circuit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaleMeta {
    pub input_bits: u32,
    pub weight_bits: u32,
    /// Accumulated exponent after each circuit stage, in evaluation order.
    pub schedule: Vec<(String, u32)>,
}

impl Default for ScaleMeta {
    fn default() -> Self {
        Self {
            input_bits: 15,
            weight_bits: 15,
            schedule: Vec::new(),
        }
    }
}

impl ScaleMeta {
    pub fn new(input_bits: u32, weight_bits: u32) -> Self {
        Self {
            input_bits,
            weight_bits,
            schedule: Vec::new(),
        }
    }

    pub fn push(&mut self, stage: impl Into<String>, exponent: u32) {
        self.schedule.push((stage.into(), exponent));
    }

    pub fn exponent(&self, stage: &str) -> Option<u32> {
        self.schedule.iter().find(|(s, _)| s == stage).map(|&(_, e)| e)
    }

    pub fn final_exponent(&self) -> u32 {
        self.schedule.last().map_or(self.input_bits, |&(_, e)| e)
    }
}

/// Upper bounds on the absolute value of every coefficient of an encoded
/// plaintext, propagated symbolically through ring operations over `Z[x]`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CoeffBound {
    coeffs: Vec<u128>,
}

impl CoeffBound {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Exact magnitudes of the encoding of `z`.
    pub fn of_int(z: &BigInt) -> Self {
        let mag = z.magnitude();
        Self::from_coeffs((0..mag.bits()).map(|i| mag.bit(i) as u128).collect())
    }

    /// Any integer with `|z| <= 2^bits`: ones in positions `0..=bits`.
    pub fn any_up_to_bits(bits: u32) -> Self {
        Self::from_coeffs(vec![1; bits as usize + 1])
    }

    pub fn from_coeffs(mut coeffs: Vec<u128>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[u128] {
        &self.coeffs
    }

    /// Number of coefficients (degree plus one); zero for the zero bound.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_coeff(&self) -> u128 {
        self.coeffs.iter().copied().max().unwrap_or(0)
    }

    pub fn add(&self, o: &Self) -> Self {
        let len = self.len().max(o.len());
        let get = |v: &[u128], i: usize| v.get(i).copied().unwrap_or(0);
        Self::from_coeffs((0..len).map(|i| get(&self.coeffs, i).saturating_add(get(&o.coeffs, i))).collect())
    }

    /// Product over `Z[x]`; degree wrap-around is reported by [`Self::check`].
    pub fn mul(&self, o: &Self) -> Self {
        if self.is_empty() || o.is_empty() {
            return Self::zero();
        }
        let mut out = vec![0u128; self.len() + o.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in o.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].saturating_add(a.saturating_mul(b));
            }
        }
        Self::from_coeffs(out)
    }

    /// Multiplication by `x^k`.
    pub fn shift(&self, k: usize) -> Self {
        if self.is_empty() {
            return Self::zero();
        }
        let mut v = vec![0u128; k];
        v.extend_from_slice(&self.coeffs);
        Self::from_coeffs(v)
    }

    /// Coefficient-wise scaling by a nonnegative factor.
    pub fn scale(&self, c: u128) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|&x| x.saturating_mul(c)).collect())
    }

    /// Decoding is exact iff the degree stays below `n` and every centered
    /// coefficient fits below half the combined plaintext modulus.
    pub fn check(&self, stage: &str, n: usize, plain_moduli: &[u64]) -> Result<(), EncodingError> {
        if self.len() > n {
            return Err(EncodingError::Capacity {
                stage: stage.into(),
                detail: format!("polynomial degree {} reaches ring degree {n}", self.len() - 1),
            });
        }
        let half: BigUint = plain_moduli.iter().map(|&t| BigUint::from(t)).product::<BigUint>() >> 1u32;
        let worst = self.max_coeff();
        if worst == u128::MAX || BigUint::from(worst) >= half {
            return Err(EncodingError::Capacity {
                stage: stage.into(),
                detail: format!(
                    "coefficient bound 2^{:.1} not below 2^{:.1}",
                    (worst as f64).log2(),
                    half.bits() as f64
                ),
            });
        }
        Ok(())
    }

    /// Bits of headroom left before the check fails on magnitude.
    pub fn headroom_bits(&self, plain_moduli: &[u64]) -> f64 {
        let total: f64 = plain_moduli.iter().map(|&t| (t as f64).log2()).sum();
        total - 1.0 - (self.max_coeff().max(1) as f64).log2()
    }
}

/// `2^k` as a big integer.
pub fn pow2(k: u32) -> BigInt {
    BigInt::one() << k
}
