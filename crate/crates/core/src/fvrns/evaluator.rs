use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;

use super::context::Instance;
use super::sampling::{gaussian_coeffs, ternary_coeffs};
use super::{
    Ciphertext, DegreeTwoCiphertext, EvaluationKeys, FvContext, FvError, OpCounters, Plaintext,
    PreparedCiphertext, PublicKey, ScalingPath, SecretKey,
};
use crate::polyring::{Domain, RnsPoly};

/// Realization of a plaintext multiplication.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MulPlainPath {
    /// Full NTT-based ring multiplication.
    #[default]
    Generic,
    /// Monomial rotation followed by a modular doubling chain; only valid for
    /// plaintexts of the form `±2^a x^j`.
    Shift,
}

/// Explicit encryption randomness, applied identically to every instance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EncryptionNoise {
    pub u: Vec<i64>,
    pub e1: Vec<i64>,
    pub e2: Vec<i64>,
}

impl EncryptionNoise {
    pub fn zero(n: usize) -> Self {
        Self {
            u: vec![0; n],
            e1: vec![0; n],
            e2: vec![0; n],
        }
    }
}

const ADD: OpCounters = OpCounters {
    ct_mults: 0,
    plain_mults: 0,
    additions: 1,
};
const PLAIN_MUL: OpCounters = OpCounters {
    ct_mults: 0,
    plain_mults: 1,
    additions: 0,
};
const CT_MUL: OpCounters = OpCounters {
    ct_mults: 1,
    plain_mults: 0,
    additions: 0,
};

fn center_plain(m: &[u64], t: u64) -> Vec<i64> {
    m.iter().map(|&c| if c > t / 2 { c as i64 - t as i64 } else { c as i64 }).collect()
}

impl FvContext {
    fn check_instances(&self, found: usize) -> Result<(), FvError> {
        let expected = self.instance_count();
        if found != expected {
            return Err(FvError::InstanceMismatch { expected, found });
        }
        Ok(())
    }

    fn check_plain(&self, pt: &Plaintext) -> Result<(), FvError> {
        self.check_instances(pt.polys.len())?;
        let n = self.degree();
        for (poly, &t) in pt.polys.iter().zip(self.plain_moduli()) {
            if poly.len() != n {
                return Err(crate::polyring::RingError::LengthMismatch { expected: n, found: poly.len() }.into());
            }
            if let Some(&value) = poly.iter().find(|&&c| c >= t) {
                return Err(FvError::PlainOutOfRange { value, modulus: t });
            }
        }
        Ok(())
    }

    /// `Delta * m` over the coefficient base of an instance, with `m` centered
    /// so that residues near `t` cost `(q mod t)` noise only once.
    fn scaled_message(&self, idx: usize, m: &[u64]) -> RnsPoly {
        let inst = &self.instances[idx];
        let (n, t) = (self.degree(), inst.t);
        let mut data = Vec::with_capacity(n * inst.q.len());
        for (modulus, &d) in inst.q.moduli().iter().zip(&inst.delta) {
            let ds = modulus.shoup(d);
            data.extend(m.iter().map(|&c| {
                if c > t / 2 {
                    modulus.neg(modulus.mul_shoup(modulus.reduce(t - c), d, ds))
                } else {
                    modulus.mul_shoup(modulus.reduce(c), d, ds)
                }
            }));
        }
        RnsPoly::from_raw(&inst.q, data, Domain::Coefficient)
    }

    pub fn encrypt(&self, pt: &Plaintext, pk: &PublicKey, rng: &mut impl Rng) -> Result<Ciphertext, FvError> {
        self.check_plain(pt)?;
        let n = self.degree();
        let std = self.params.noise_std;
        let mut parts = Vec::with_capacity(self.instance_count());
        for (idx, m) in pt.polys.iter().enumerate() {
            let u = ternary_coeffs(n, rng);
            let e1 = gaussian_coeffs(n, std, rng);
            let e2 = gaussian_coeffs(n, std, rng);
            parts.push(self.encrypt_instance(idx, m, pk, &u, &e1, &e2)?);
        }
        Ok(Ciphertext {
            parts,
            scale: pt.scale,
            counters: OpCounters::default(),
        })
    }

    /// Encryption with caller-supplied randomness; a test hook.
    pub fn encrypt_with_noise(
        &self,
        pt: &Plaintext,
        pk: &PublicKey,
        noise: &EncryptionNoise,
    ) -> Result<Ciphertext, FvError> {
        self.check_plain(pt)?;
        let parts = pt
            .polys
            .iter()
            .enumerate()
            .map(|(idx, m)| self.encrypt_instance(idx, m, pk, &noise.u, &noise.e1, &noise.e2))
            .collect::<Result<_, _>>()?;
        Ok(Ciphertext {
            parts,
            scale: pt.scale,
            counters: OpCounters::default(),
        })
    }

    // c0 = Delta m + p1 u + e1, c1 = p0 u + e2
    fn encrypt_instance(
        &self,
        idx: usize,
        m: &[u64],
        pk: &PublicKey,
        u: &[i64],
        e1: &[i64],
        e2: &[i64],
    ) -> Result<[RnsPoly; 2], FvError> {
        let q = &self.instances[idx].q;
        let (p0, p1) = pk
            .keys
            .get(idx)
            .ok_or(FvError::InstanceMismatch { expected: self.instance_count(), found: pk.keys.len() })?;
        let mut u = RnsPoly::from_signed(q, u)?;
        u.to_evaluation();
        let mut c0 = p1.mul_pointwise(&u)?;
        let mut c1 = p0.mul_pointwise(&u)?;
        c0.to_coefficient();
        c1.to_coefficient();
        c0.add_assign(&RnsPoly::from_signed(q, e1)?)?;
        c0.add_assign(&self.scaled_message(idx, m))?;
        c1.add_assign(&RnsPoly::from_signed(q, e2)?)?;
        Ok([c0, c1])
    }

    /// `[c0 + c1 s + c2 s^2 + ...]_q` in the coefficient domain.
    fn phase(&self, idx: usize, comps: &[RnsPoly], sk: &SecretKey) -> Result<RnsPoly, FvError> {
        let s = &sk.s_eval[idx];
        let mut acc = RnsPoly::zero(&self.instances[idx].q, Domain::Evaluation);
        let mut s_pow = s.clone();
        for (i, c) in comps.iter().enumerate().skip(1) {
            if i > 1 {
                s_pow = s_pow.mul_pointwise(s)?;
            }
            let mut ce = c.clone();
            ce.to_evaluation();
            acc.fma_pointwise(&ce, &s_pow)?;
        }
        acc.to_coefficient();
        acc.add_assign(&comps[0])?;
        Ok(acc)
    }

    fn round_to_plain(&self, idx: usize, x: &RnsPoly, path: ScalingPath) -> Vec<u64> {
        let inst = &self.instances[idx];
        let k = inst.q.len();
        let res: Vec<&[u64]> = (0..k).map(|i| x.residue(i)).collect();
        let mut xs = [0u64; 16];
        (0..self.degree())
            .map(|j| {
                for i in 0..k {
                    xs[i] = res[i][j];
                }
                let fast = match path {
                    ScalingPath::Fast => inst.tables.decrypt_fast(&inst.q, &xs[..k]),
                    ScalingPath::Reference => None,
                };
                fast.unwrap_or_else(|| inst.tables.decrypt_reference(&inst.q, &xs[..k]))
            })
            .collect()
    }

    pub fn decrypt(&self, ct: &Ciphertext, sk: &SecretKey) -> Result<Plaintext, FvError> {
        self.decrypt_with(ct, sk, self.scaling)
    }

    pub fn decrypt_with(&self, ct: &Ciphertext, sk: &SecretKey, path: ScalingPath) -> Result<Plaintext, FvError> {
        self.check_instances(ct.parts.len())?;
        let polys = ct
            .parts
            .iter()
            .enumerate()
            .map(|(idx, comps)| Ok(self.round_to_plain(idx, &self.phase(idx, comps, sk)?, path)))
            .collect::<Result<_, FvError>>()?;
        Ok(Plaintext { polys, scale: ct.scale })
    }

    /// Debug decryption of an unrelinearized product under `(1, s, s^2)`.
    pub fn decrypt_degree_two(&self, ct: &DegreeTwoCiphertext, sk: &SecretKey) -> Result<Plaintext, FvError> {
        self.check_instances(ct.parts.len())?;
        let polys = ct
            .parts
            .iter()
            .enumerate()
            .map(|(idx, comps)| Ok(self.round_to_plain(idx, &self.phase(idx, comps, sk)?, self.scaling)))
            .collect::<Result<_, FvError>>()?;
        Ok(Plaintext { polys, scale: ct.scale })
    }

    /// Remaining noise headroom in bits, minimized over instances:
    /// `log2 q - log2 |[t (c0 + c1 s)]_q|_inf - 2`. The centered residue can
    /// never exceed `q/2`, so one guard bit is reserved: a wrapped (garbage)
    /// ciphertext reads as about -1, and any nonnegative value guarantees
    /// correct decryption.
    pub fn noise_budget(&self, ct: &Ciphertext, sk: &SecretKey) -> Result<f64, FvError> {
        self.check_instances(ct.parts.len())?;
        let mut budget = f64::INFINITY;
        for (idx, comps) in ct.parts.iter().enumerate() {
            let inst = &self.instances[idx];
            let t_mod: Vec<u64> = inst.q.values().iter().map(|&qi| inst.t % qi).collect();
            let v = self.phase(idx, comps, sk)?.mul_scalar(&t_mod);
            let mut worst = BigInt::zero();
            for j in 0..self.degree() {
                let c = v.centered_coefficient(j)?.abs();
                if c > worst {
                    worst = c;
                }
            }
            let q_bits = log2_big(&BigInt::from(inst.q.product().clone()));
            let b = if worst.is_zero() { q_bits - 2.0 } else { q_bits - log2_big(&worst) - 2.0 };
            budget = budget.min(b);
        }
        Ok(budget)
    }

    pub fn add_ct(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, FvError> {
        self.check_instances(a.parts.len())?;
        self.check_instances(b.parts.len())?;
        if a.scale != b.scale {
            return Err(FvError::ScaleMismatch(a.scale, b.scale));
        }
        let parts = a
            .parts
            .iter()
            .zip(&b.parts)
            .map(|([a0, a1], [b0, b1])| Ok([a0.add(b0)?, a1.add(b1)?]))
            .collect::<Result<_, FvError>>()?;
        Ok(Ciphertext {
            parts,
            scale: a.scale,
            counters: a.counters + b.counters + ADD,
        })
    }

    pub fn add_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext, FvError> {
        self.check_instances(ct.parts.len())?;
        self.check_plain(pt)?;
        if ct.scale != pt.scale {
            return Err(FvError::ScaleMismatch(ct.scale, pt.scale));
        }
        let parts = ct
            .parts
            .iter()
            .enumerate()
            .map(|(idx, [c0, c1])| Ok([c0.add(&self.scaled_message(idx, &pt.polys[idx]))?, c1.clone()]))
            .collect::<Result<_, FvError>>()?;
        Ok(Ciphertext {
            parts,
            scale: ct.scale,
            counters: ct.counters + ADD,
        })
    }

    pub fn mul_plain(&self, ct: &Ciphertext, pt: &Plaintext, path: MulPlainPath) -> Result<Ciphertext, FvError> {
        self.check_instances(ct.parts.len())?;
        self.check_plain(pt)?;
        let parts = match path {
            MulPlainPath::Generic => ct
                .parts
                .iter()
                .enumerate()
                .map(|(idx, comps)| self.mul_plain_generic(idx, comps, &pt.polys[idx]))
                .collect::<Result<_, FvError>>()?,
            MulPlainPath::Shift => {
                let (j, a, negative) = self.power_of_two_monomial(pt)?;
                ct.parts
                    .iter()
                    .map(|comps| {
                        let mut out = [comps[0].mul_monomial(j)?, comps[1].mul_monomial(j)?];
                        for p in &mut out {
                            double_chain(p, a);
                            if negative {
                                *p = p.neg();
                            }
                        }
                        Ok(out)
                    })
                    .collect::<Result<_, FvError>>()?
            }
        };
        Ok(Ciphertext {
            parts,
            scale: ct.scale + pt.scale,
            counters: ct.counters + PLAIN_MUL,
        })
    }

    /// Moves a ciphertext to the evaluation domain once, so that
    /// [`FvContext::dot_plain`] can reuse it against many plaintexts.
    pub fn prepare(&self, ct: &Ciphertext) -> Result<PreparedCiphertext, FvError> {
        self.check_instances(ct.parts.len())?;
        let parts = ct
            .parts
            .iter()
            .map(|[c0, c1]| {
                let (mut e0, mut e1) = (c0.clone(), c1.clone());
                e0.to_evaluation();
                e1.to_evaluation();
                [e0, e1]
            })
            .collect();
        Ok(PreparedCiphertext { parts, scale: ct.scale, counters: ct.counters })
    }

    /// `sum_i ct_i * pt_i` with one inverse transform per component.
    /// Counts one plaintext multiplication per term and one addition per
    /// term after the first; all-zero plaintexts are counted but skipped.
    pub fn dot_plain(&self, cts: &[PreparedCiphertext], pts: &[Plaintext]) -> Result<Ciphertext, FvError> {
        if cts.is_empty() || cts.len() != pts.len() {
            return Err(FvError::InvalidParams(format!("dot product of {} ciphertexts and {} plaintexts", cts.len(), pts.len())));
        }
        let (ct_scale, pt_scale) = (cts[0].scale, pts[0].scale);
        let mut counters = OpCounters::default();
        for (ct, pt) in cts.iter().zip(pts) {
            self.check_instances(ct.parts.len())?;
            self.check_plain(pt)?;
            if ct.scale != ct_scale {
                return Err(FvError::ScaleMismatch(ct_scale, ct.scale));
            }
            if pt.scale != pt_scale {
                return Err(FvError::ScaleMismatch(pt_scale, pt.scale));
            }
            counters += ct.counters + PLAIN_MUL;
        }
        counters.additions += cts.len() as u64 - 1;
        let mut parts = Vec::with_capacity(self.instances.len());
        for (idx, inst) in self.instances.iter().enumerate() {
            let mut acc0 = RnsPoly::zero(&inst.q, Domain::Evaluation);
            let mut acc1 = RnsPoly::zero(&inst.q, Domain::Evaluation);
            for (ct, pt) in cts.iter().zip(pts) {
                let m = &pt.polys[idx];
                if m.iter().all(|&c| c == 0) {
                    continue;
                }
                let mut me = RnsPoly::from_signed(&inst.q, &center_plain(m, inst.t))?;
                me.to_evaluation();
                acc0.fma_pointwise(&ct.parts[idx][0], &me)?;
                acc1.fma_pointwise(&ct.parts[idx][1], &me)?;
            }
            acc0.to_coefficient();
            acc1.to_coefficient();
            parts.push([acc0, acc1]);
        }
        Ok(Ciphertext { parts, scale: ct_scale + pt_scale, counters })
    }

    fn mul_plain_generic(&self, idx: usize, comps: &[RnsPoly; 2], m: &[u64]) -> Result<[RnsPoly; 2], FvError> {
        let inst = &self.instances[idx];
        let t = inst.t;
        let mut me = RnsPoly::from_signed(&inst.q, &center_plain(m, t))?;
        me.to_evaluation();
        let mul = |c: &RnsPoly| -> Result<RnsPoly, FvError> {
            let mut ce = c.clone();
            ce.to_evaluation();
            let mut r = ce.mul_pointwise(&me)?;
            r.to_coefficient();
            Ok(r)
        };
        Ok([mul(&comps[0])?, mul(&comps[1])?])
    }

    /// Decompose a plaintext as `±2^a x^j`, identically in every instance.
    fn power_of_two_monomial(&self, pt: &Plaintext) -> Result<(usize, u32, bool), FvError> {
        let mut found: Option<(usize, i64)> = None;
        for (poly, &t) in pt.polys.iter().zip(self.plain_moduli()) {
            let mut nz = poly.iter().enumerate().filter(|(_, &c)| c != 0);
            let (j, &c) = nz.next().ok_or(FvError::NotPowerOfTwo)?;
            if nz.next().is_some() {
                return Err(FvError::NotPowerOfTwo);
            }
            let v = if c > t / 2 { c as i64 - t as i64 } else { c as i64 };
            match found {
                None => found = Some((j, v)),
                Some(prev) if prev == (j, v) => {}
                Some(_) => return Err(FvError::NotPowerOfTwo),
            }
        }
        let (j, v) = found.ok_or(FvError::NotPowerOfTwo)?;
        let mag = v.unsigned_abs();
        if !mag.is_power_of_two() {
            return Err(FvError::NotPowerOfTwo);
        }
        Ok((j, mag.trailing_zeros(), v < 0))
    }

    pub fn mul_ct(&self, a: &Ciphertext, b: &Ciphertext, evk: &EvaluationKeys) -> Result<Ciphertext, FvError> {
        self.mul_ct_with(a, b, evk, self.scaling)
    }

    pub fn mul_ct_with(
        &self,
        a: &Ciphertext,
        b: &Ciphertext,
        evk: &EvaluationKeys,
        path: ScalingPath,
    ) -> Result<Ciphertext, FvError> {
        let prod = self.tensor_with(a, b, path)?;
        self.relinearize(&prod, evk)
    }

    /// Scaled tensor product `round(t/q * (a0, a1) x (b0, b1))` without
    /// relinearization.
    pub fn tensor(&self, a: &Ciphertext, b: &Ciphertext) -> Result<DegreeTwoCiphertext, FvError> {
        self.tensor_with(a, b, self.scaling)
    }

    pub fn tensor_with(
        &self,
        a: &Ciphertext,
        b: &Ciphertext,
        path: ScalingPath,
    ) -> Result<DegreeTwoCiphertext, FvError> {
        self.check_instances(a.parts.len())?;
        self.check_instances(b.parts.len())?;
        let square = std::ptr::eq(a, b);
        let mut parts = Vec::with_capacity(a.parts.len());
        for (idx, inst) in self.instances.iter().enumerate() {
            let lift = |p: &RnsPoly| {
                let mut e = lift_to_ext(inst, p, path);
                e.to_evaluation();
                e
            };
            let a0 = lift(&a.parts[idx][0]);
            let a1 = lift(&a.parts[idx][1]);
            let (d0, d1, d2) = if square {
                let d1 = a0.mul_pointwise(&a1)?;
                (a0.mul_pointwise(&a0)?, d1.add(&d1)?, a1.mul_pointwise(&a1)?)
            } else {
                let b0 = lift(&b.parts[idx][0]);
                let b1 = lift(&b.parts[idx][1]);
                let mut d1 = a0.mul_pointwise(&b1)?;
                d1.fma_pointwise(&a1, &b0)?;
                (a0.mul_pointwise(&b0)?, d1, a1.mul_pointwise(&b1)?)
            };
            let scale = |mut d: RnsPoly| {
                d.to_coefficient();
                scale_to_q(inst, &d, path)
            };
            parts.push([scale(d0), scale(d1), scale(d2)]);
        }
        Ok(DegreeTwoCiphertext {
            parts,
            scale: a.scale + b.scale,
            // a squaring reuses one operand, so its history counts once
            counters: if square { a.counters + CT_MUL } else { a.counters + b.counters + CT_MUL },
        })
    }

    /// Fold `c2` back into two components with base-beta digits:
    /// `r0 = c0 + sum g_i D_i`, `r1 = c1 + sum a_i D_i`.
    pub fn relinearize(&self, ct: &DegreeTwoCiphertext, evk: &EvaluationKeys) -> Result<Ciphertext, FvError> {
        self.check_instances(ct.parts.len())?;
        self.check_instances(evk.keys.len())?;
        let n = self.degree();
        let beta_bits = self.params.relin_base_bits;
        let mut parts = Vec::with_capacity(ct.parts.len());
        for (idx, inst) in self.instances.iter().enumerate() {
            let [c0, c1, c2] = &ct.parts[idx];
            let keys = &evk.keys[idx];
            if keys.len() != inst.digits {
                return Err(FvError::ParamsMismatch);
            }
            let k = inst.q.len();
            let crt = inst.q.crt();
            let mut limbs = vec![0u64; crt.limb_count()];
            let mut xs = [0u64; 16];
            let res: Vec<&[u64]> = (0..k).map(|i| c2.residue(i)).collect();
            let mut digits = vec![0u64; inst.digits * n];
            for j in 0..n {
                for i in 0..k {
                    xs[i] = res[i][j];
                }
                crt.reconstruct_into_limbs(&xs[..k], &mut limbs);
                for d in 0..inst.digits {
                    digits[d * n + j] = extract_bits(&limbs, d as u32 * beta_bits, beta_bits);
                }
            }
            let mut r0 = RnsPoly::zero(&inst.q, Domain::Evaluation);
            let mut r1 = RnsPoly::zero(&inst.q, Domain::Evaluation);
            for (d, (a_d, g_d)) in keys.iter().enumerate() {
                let digit = &digits[d * n..(d + 1) * n];
                if digit.iter().all(|&x| x == 0) {
                    continue;
                }
                let mut data = Vec::with_capacity(k * n);
                for _ in 0..k {
                    data.extend_from_slice(digit);
                }
                let mut dp = RnsPoly::from_raw(&inst.q, data, Domain::Coefficient);
                dp.to_evaluation();
                r0.fma_pointwise(g_d, &dp)?;
                r1.fma_pointwise(a_d, &dp)?;
            }
            r0.to_coefficient();
            r1.to_coefficient();
            r0.add_assign(c0)?;
            r1.add_assign(c1)?;
            parts.push([r0, r1]);
        }
        Ok(Ciphertext {
            parts,
            scale: ct.scale,
            counters: ct.counters,
        })
    }
}

fn lift_to_ext(inst: &Instance, p: &RnsPoly, path: ScalingPath) -> RnsPoly {
    let n = p.degree();
    let k = inst.q.len();
    let m = inst.ext.len() - k;
    let raw = p.raw();
    let mut data = vec![0u64; n * (k + m)];
    data[..n * k].copy_from_slice(raw);
    let mut xs = [0u64; 16];
    let mut out = [0u64; 16];
    for j in 0..n {
        for i in 0..k {
            xs[i] = raw[i * n + j];
        }
        let ok = path == ScalingPath::Fast && inst.tables.lift_fast(&inst.q, &inst.ext, &xs[..k], &mut out[..m]);
        if !ok {
            inst.tables.lift_reference(&inst.q, &xs[..k], &mut out[..m]);
        }
        for l in 0..m {
            data[(k + l) * n + j] = out[l];
        }
    }
    RnsPoly::from_raw(&inst.ext, data, Domain::Coefficient)
}

fn scale_to_q(inst: &Instance, d: &RnsPoly, path: ScalingPath) -> RnsPoly {
    let n = d.degree();
    let k = inst.q.len();
    let total = inst.ext.len();
    let raw = d.raw();
    let mut data = vec![0u64; n * k];
    let mut xs = [0u64; 32];
    let mut out = [0u64; 16];
    for j in 0..n {
        for i in 0..total {
            xs[i] = raw[i * n + j];
        }
        let ok = path == ScalingPath::Fast
            && inst.tables.scale_fast(&inst.q, &inst.ext, &xs[..total], &mut out[..k]);
        if !ok {
            inst.tables.scale_reference(&inst.q, &inst.ext, &xs[..total], &mut out[..k]);
        }
        for i in 0..k {
            data[i * n + j] = out[i];
        }
    }
    RnsPoly::from_raw(&inst.q, data, Domain::Coefficient)
}

fn double_chain(p: &mut RnsPoly, times: u32) {
    let base = p.base().clone();
    for (i, m) in base.moduli().iter().enumerate() {
        let q = m.value();
        for x in p.residue_mut(i) {
            let mut v = *x;
            for _ in 0..times {
                v <<= 1;
                if v >= q {
                    v -= q;
                }
            }
            *x = v;
        }
    }
}

fn extract_bits(limbs: &[u64], start: u32, width: u32) -> u64 {
    let word = (start / 64) as usize;
    let off = start % 64;
    if word >= limbs.len() {
        return 0;
    }
    let mut v = limbs[word] >> off;
    if off + width > 64 && word + 1 < limbs.len() {
        v |= limbs[word + 1] << (64 - off);
    }
    v & ((1u64 << width) - 1)
}

fn log2_big(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 53 {
        return x.to_f64().unwrap().log2();
    }
    let shift = bits - 53;
    (x >> shift).to_f64().unwrap().log2() + shift as f64
}

#[cfg(test)]
impl FvContext {
    pub(crate) fn scaled_message_for_test(&self, idx: usize, m: &[u64]) -> RnsPoly {
        self.scaled_message(idx, m)
    }
}
