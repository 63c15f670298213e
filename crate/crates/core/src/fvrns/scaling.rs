//! Exact division-and-rounding `round(t/q * x)` on residue representations.
//!
//! Two routes compute the same integers. The reference route reconstructs
//! every coefficient as a multiprecision integer. The fast route stays in
//! residue form and only tracks the fractional part of the quotient with a
//! 128-bit fixed-point accumulator; whenever that fraction lands within the
//! accumulated truncation error of one half, the coefficient is recomputed
//! on the reference route, so both routes agree bit for bit.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::ToPrimitive;

use crate::polyring::arith::mul_frac;
use crate::polyring::{CrtBasis, RnsBase};

/// How the scheme performs its rounding divisions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ScalingPath {
    /// Full CRT reconstruction to multiprecision integers.
    Reference,
    /// Residue-domain fixed-point evaluation with exact fallback.
    #[default]
    Fast,
}

const HALF: u128 = 1 << 127;
// truncation error of the fixed-point sums is below 2^-60 in these units
const MARGIN: u128 = 1 << 72;

#[inline]
fn near_half(frac: u128) -> bool {
    frac.abs_diff(HALF) < MARGIN
}

/// 2^128 * num / den for num < den, truncated.
fn frac_of(num: &BigUint, den: &BigUint) -> u128 {
    let scaled: BigUint = (num << 128u32) / den;
    scaled.to_u128().expect("fraction below one")
}

#[derive(Debug)]
pub(crate) struct ScalingTables {
    k: usize,
    m: usize,
    t: u64,
    // lift Q -> P
    q_punct_inv: Vec<u64>,
    q_inv_frac: Vec<u128>,
    q_punct_mod_p: Vec<Vec<u64>>,
    q_mod_p: Vec<u64>,
    // tensor scaling over Q u P
    ext_punct_inv: Vec<u64>,
    omega: Vec<Vec<u64>>,
    theta: Vec<u128>,
    tp_over_p: Vec<u64>,
    // exact conversion P -> Q
    p_punct_inv: Vec<u64>,
    p_inv_frac: Vec<u128>,
    p_punct_mod_q: Vec<Vec<u64>>,
    p_mod_q: Vec<u64>,
    // decryption
    t_over_q_frac: Vec<u128>,
    aux: CrtBasis,
}

impl ScalingTables {
    /// `ext` must list the moduli of `q` first, followed by the auxiliary primes.
    pub(crate) fn new(t: u64, q: &RnsBase, ext: &RnsBase) -> Self {
        let k = q.len();
        let m = ext.len() - k;
        let qv = q.values();
        let pv = &ext.values()[k..];
        let q_crt = q.crt();
        let aux = CrtBasis::new(pv).expect("auxiliary primes are coprime");
        let ext_crt = ext.crt();
        let qprod = q_crt.product();
        let pprod = aux.product();
        let one = BigUint::from(1u32);
        let modu = |x: &BigUint, p: u64| (x % p).to_u64().unwrap();

        let q_punct_inv = (0..k).map(|i| q_crt.punctured_inv(i)).collect();
        let q_inv_frac = qv.iter().map(|&qi| frac_of(&one, &BigUint::from(qi))).collect();
        let q_punct_mod_p = (0..k)
            .map(|i| pv.iter().map(|&p| modu(q_crt.punctured(i), p)).collect())
            .collect();
        let q_mod_p = pv.iter().map(|&p| modu(qprod, p)).collect();

        let ext_punct_inv = (0..k + m).map(|i| ext_crt.punctured_inv(i)).collect();
        let tp = pprod * t;
        let mut omega = Vec::with_capacity(k);
        let mut theta = Vec::with_capacity(k);
        for &qi in qv {
            let (quot, rem) = tp.div_rem(&BigUint::from(qi));
            omega.push(pv.iter().map(|&p| modu(&quot, p)).collect());
            theta.push(frac_of(&rem, &BigUint::from(qi)));
        }
        let tp_over_p = pv
            .iter()
            .map(|&p| modu(&(&tp / p), p))
            .collect();

        let p_punct_inv = (0..m).map(|j| aux.punctured_inv(j)).collect();
        let p_inv_frac = pv.iter().map(|&p| frac_of(&one, &BigUint::from(p))).collect();
        let p_punct_mod_q = (0..m)
            .map(|j| qv.iter().map(|&qi| modu(aux.punctured(j), qi)).collect())
            .collect();
        let p_mod_q = qv.iter().map(|&qi| modu(pprod, qi)).collect();
        let t_over_q_frac = qv
            .iter()
            .map(|&qi| frac_of(&BigUint::from(t), &BigUint::from(qi)))
            .collect();
        Self {
            k,
            m,
            t,
            q_punct_inv,
            q_inv_frac,
            q_punct_mod_p,
            q_mod_p,
            ext_punct_inv,
            omega,
            theta,
            tp_over_p,
            p_punct_inv,
            p_inv_frac,
            p_punct_mod_q,
            p_mod_q,
            t_over_q_frac,
            aux,
        }
    }

    /// Centered lift of one coefficient from `Q` into the auxiliary primes.
    /// Returns false when the fixed-point estimate cannot decide the lift.
    pub(crate) fn lift_fast(&self, q: &RnsBase, ext: &RnsBase, xs: &[u64], out: &mut [u64]) -> bool {
        let mut ys = [0u64; 16];
        let mut carries = 0u64;
        let mut frac = 0u128;
        for i in 0..self.k {
            let qi = q.modulus(i);
            let y = qi.mul(xs[i], self.q_punct_inv[i]);
            ys[i] = y;
            let (_, f) = mul_frac(y, self.q_inv_frac[i]);
            let (s, c) = frac.overflowing_add(f);
            frac = s;
            carries += c as u64;
        }
        if near_half(frac) {
            return false;
        }
        let v = carries + (frac >= HALF) as u64;
        for j in 0..self.m {
            let pj = ext.modulus(self.k + j);
            let mut acc = 0u128;
            for i in 0..self.k {
                acc += ys[i] as u128 * self.q_punct_mod_p[i][j] as u128;
            }
            let pos = pj.reduce_u128(acc);
            let neg = pj.reduce_u128(v as u128 * self.q_mod_p[j] as u128);
            out[j] = pj.sub(pos, neg);
        }
        true
    }

    pub(crate) fn lift_reference(&self, q: &RnsBase, xs: &[u64], out: &mut [u64]) {
        let x = q.crt().center(q.crt().reconstruct_unchecked(xs));
        for (o, r) in out.iter_mut().zip(self.aux.decompose_signed(&x)) {
            *o = r;
        }
    }

    /// `round(t X / q)` reduced into `Q`, for `X` given over `Q u P`.
    pub(crate) fn scale_fast(&self, q: &RnsBase, ext: &RnsBase, xs: &[u64], out: &mut [u64]) -> bool {
        let (k, m) = (self.k, self.m);
        let mut zs = [0u64; 32];
        for idx in 0..k + m {
            zs[idx] = ext.modulus(idx).mul(xs[idx], self.ext_punct_inv[idx]);
        }
        let mut int = 0u128;
        let mut frac = 0u128;
        for i in 0..k {
            let (a, f) = mul_frac(zs[i], self.theta[i]);
            int += a as u128;
            let (s, c) = frac.overflowing_add(f);
            frac = s;
            int += c as u128;
        }
        if near_half(frac) {
            return false;
        }
        let r = int + (frac >= HALF) as u128;
        let mut rp = [0u64; 16];
        for j in 0..m {
            let pj = ext.modulus(k + j);
            let mut acc = pj.reduce_u128(r);
            let mut dot = 0u128;
            for i in 0..k {
                dot += zs[i] as u128 * self.omega[i][j] as u128;
            }
            dot += zs[k + j] as u128 * self.tp_over_p[j] as u128;
            acc = pj.add(acc, pj.reduce_u128(dot));
            rp[j] = pj.mul(acc, self.p_punct_inv[j]);
        }
        // exact centered conversion P -> Q
        let mut carries = 0u64;
        let mut frac = 0u128;
        for j in 0..m {
            let (_, f) = mul_frac(rp[j], self.p_inv_frac[j]);
            let (s, c) = frac.overflowing_add(f);
            frac = s;
            carries += c as u64;
        }
        if near_half(frac) {
            return false;
        }
        let v = carries + (frac >= HALF) as u64;
        for i in 0..k {
            let qi = q.modulus(i);
            let mut acc = 0u128;
            for j in 0..m {
                acc += rp[j] as u128 * self.p_punct_mod_q[j][i] as u128;
            }
            let pos = qi.reduce_u128(acc);
            let neg = qi.reduce_u128(v as u128 * self.p_mod_q[i] as u128);
            out[i] = qi.sub(pos, neg);
        }
        true
    }

    pub(crate) fn scale_reference(&self, q: &RnsBase, ext: &RnsBase, xs: &[u64], out: &mut [u64]) {
        let x = ext.crt().center(ext.crt().reconstruct_unchecked(xs));
        let qprod = BigInt::from(q.product().clone());
        let r = round_div(&(x * self.t), &qprod);
        for (o, v) in out.iter_mut().zip(q.crt().decompose_signed(&r)) {
            *o = v;
        }
    }

    /// `round(t x / q) mod t` for `x` given over `Q`.
    pub(crate) fn decrypt_fast(&self, q: &RnsBase, xs: &[u64]) -> Option<u64> {
        let mut int = 0u128;
        let mut frac = 0u128;
        for i in 0..self.k {
            let y = q.modulus(i).mul(xs[i], self.q_punct_inv[i]);
            let (a, f) = mul_frac(y, self.t_over_q_frac[i]);
            int += a as u128;
            let (s, c) = frac.overflowing_add(f);
            frac = s;
            int += c as u128;
        }
        if near_half(frac) {
            return None;
        }
        Some(((int + (frac >= HALF) as u128) % self.t as u128) as u64)
    }

    pub(crate) fn decrypt_reference(&self, q: &RnsBase, xs: &[u64]) -> u64 {
        let x = BigInt::from(q.crt().reconstruct_unchecked(xs));
        let qprod = BigInt::from(q.product().clone());
        let r = round_div(&(x * self.t), &qprod);
        r.mod_floor(&BigInt::from(self.t)).to_u64().unwrap()
    }
}

/// `floor(a / b + 1/2)` for positive `b`.
pub(crate) fn round_div(a: &BigInt, b: &BigInt) -> BigInt {
    let two = BigInt::from(2);
    (a * &two + b).div_floor(&(b * two))
}

/// Number of auxiliary bits needed so that both the tensor product and its
/// scaled result are represented exactly.
pub(crate) fn aux_bits_needed(t: u64, n: usize, q: &BigUint) -> u64 {
    let t_bits = 64 - t.leading_zeros() as u64;
    let n_bits = n.trailing_zeros() as u64;
    // |X| < n q^2 / 2 must fit in Q P / 2, and |round(tX/q)| < t n q / 2 in P / 2
    t_bits + n_bits + q.bits() + 2
}
