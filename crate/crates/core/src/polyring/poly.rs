use std::io::{Read, Write};
use std::sync::Arc;

use num_bigint::BigInt;

use super::{RingError, RnsBase};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Coefficient,
    Evaluation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MulMethod {
    Ntt,
    /// Schoolbook O(n^2) product, kept as the reference oracle.
    Naive,
}

/// A ring element stored as one residue vector per modulus of its base.
#[derive(Clone, Debug)]
pub struct RnsPoly {
    base: Arc<RnsBase>,
    // modulus-major: residue i occupies data[i*n .. (i+1)*n]
    data: Vec<u64>,
    domain: Domain,
}

impl PartialEq for RnsPoly {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && *self.base == *other.base && self.data == other.data
    }
}

impl Eq for RnsPoly {}

impl RnsPoly {
    pub fn zero(base: &Arc<RnsBase>, domain: Domain) -> Self {
        Self {
            base: base.clone(),
            data: vec![0; base.len() * base.degree()],
            domain,
        }
    }

    pub fn from_residues(
        base: &Arc<RnsBase>,
        residues: Vec<Vec<u64>>,
        domain: Domain,
    ) -> Result<Self, RingError> {
        if residues.len() != base.len() {
            return Err(RingError::LengthMismatch {
                expected: base.len(),
                found: residues.len(),
            });
        }
        let n = base.degree();
        let mut data = Vec::with_capacity(n * base.len());
        for (m, r) in base.moduli().iter().zip(residues) {
            if r.len() != n {
                return Err(RingError::LengthMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
            if let Some((index, &value)) = r.iter().enumerate().find(|(_, &v)| v >= m.value()) {
                return Err(RingError::ResidueOutOfRange {
                    index,
                    value,
                    modulus: m.value(),
                });
            }
            data.extend(r);
        }
        Ok(Self {
            base: base.clone(),
            data,
            domain,
        })
    }

    /// Coefficient-domain polynomial from signed integer coefficients
    /// (shorter inputs are zero-padded).
    pub fn from_signed(base: &Arc<RnsBase>, coeffs: &[i64]) -> Result<Self, RingError> {
        let n = base.degree();
        if coeffs.len() > n {
            return Err(RingError::LengthMismatch {
                expected: n,
                found: coeffs.len(),
            });
        }
        let mut p = Self::zero(base, Domain::Coefficient);
        for (i, m) in base.moduli().iter().enumerate() {
            let row = &mut p.data[i * n..(i + 1) * n];
            for (dst, &c) in row.iter_mut().zip(coeffs) {
                *dst = m.reduce_i64(c);
            }
        }
        Ok(p)
    }

    pub fn from_bigints(base: &Arc<RnsBase>, coeffs: &[BigInt]) -> Result<Self, RingError> {
        let n = base.degree();
        if coeffs.len() > n {
            return Err(RingError::LengthMismatch {
                expected: n,
                found: coeffs.len(),
            });
        }
        let mut p = Self::zero(base, Domain::Coefficient);
        for (j, c) in coeffs.iter().enumerate() {
            for (i, r) in base.crt().decompose_signed(c).into_iter().enumerate() {
                p.data[i * n + j] = r;
            }
        }
        Ok(p)
    }

    pub fn base(&self) -> &Arc<RnsBase> {
        &self.base
    }

    pub fn degree(&self) -> usize {
        self.base.degree()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn residue(&self, i: usize) -> &[u64] {
        let n = self.degree();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn residue_mut(&mut self, i: usize) -> &mut [u64] {
        let n = self.degree();
        &mut self.data[i * n..(i + 1) * n]
    }

    pub(crate) fn raw(&self) -> &[u64] {
        &self.data
    }

    /// Residues of coefficient `j` across all moduli.
    pub fn coefficient_residues(&self, j: usize) -> Vec<u64> {
        let n = self.degree();
        (0..self.base.len()).map(|i| self.data[i * n + j]).collect()
    }

    /// Centered integer lift of coefficient `j` (coefficient domain only).
    pub fn centered_coefficient(&self, j: usize) -> Result<BigInt, RingError> {
        self.expect_domain(Domain::Coefficient)?;
        self.base.crt().reconstruct_centered(&self.coefficient_residues(j))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    fn expect_domain(&self, expected: Domain) -> Result<(), RingError> {
        if self.domain != expected {
            return Err(RingError::DomainMismatch {
                expected,
                found: self.domain,
            });
        }
        Ok(())
    }

    fn compatible(&self, other: &Self) -> Result<(), RingError> {
        if !Arc::ptr_eq(&self.base, &other.base) && *self.base != *other.base {
            return Err(RingError::BaseMismatch);
        }
        other.expect_domain(self.domain)
    }

    pub fn ntt_transform(&self, direction: Direction) -> Result<Self, RingError> {
        let mut out = self.clone();
        match direction {
            Direction::Forward => {
                self.expect_domain(Domain::Coefficient)?;
                out.forward_in_place();
            }
            Direction::Inverse => {
                self.expect_domain(Domain::Evaluation)?;
                out.inverse_in_place();
            }
        }
        Ok(out)
    }

    fn forward_in_place(&mut self) {
        let n = self.degree();
        for (i, m) in self.base.clone().moduli().iter().enumerate() {
            m.forward_ntt(&mut self.data[i * n..(i + 1) * n]);
        }
        self.domain = Domain::Evaluation;
    }

    fn inverse_in_place(&mut self) {
        let n = self.degree();
        for (i, m) in self.base.clone().moduli().iter().enumerate() {
            m.inverse_ntt(&mut self.data[i * n..(i + 1) * n]);
        }
        self.domain = Domain::Coefficient;
    }

    /// Move into the evaluation domain (no-op if already there).
    pub fn to_evaluation(&mut self) {
        if self.domain == Domain::Coefficient {
            self.forward_in_place();
        }
    }

    /// Move into the coefficient domain (no-op if already there).
    pub fn to_coefficient(&mut self) {
        if self.domain == Domain::Evaluation {
            self.inverse_in_place();
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&super::Modulus, u64, u64) -> u64) -> Result<Self, RingError> {
        self.compatible(other)?;
        let mut out = self.clone();
        out.zip_assign(other, f);
        Ok(out)
    }

    fn zip_assign(&mut self, other: &Self, f: impl Fn(&super::Modulus, u64, u64) -> u64) {
        let n = self.degree();
        let base = self.base.clone();
        for (i, m) in base.moduli().iter().enumerate() {
            let dst = &mut self.data[i * n..(i + 1) * n];
            let src = &other.data[i * n..(i + 1) * n];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = f(m, *d, s);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, RingError> {
        self.zip_with(other, |m, a, b| m.add(a, b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, RingError> {
        self.zip_with(other, |m, a, b| m.sub(a, b))
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<(), RingError> {
        self.compatible(other)?;
        self.zip_assign(other, |m, a, b| m.add(a, b));
        Ok(())
    }

    pub fn sub_assign(&mut self, other: &Self) -> Result<(), RingError> {
        self.compatible(other)?;
        self.zip_assign(other, |m, a, b| m.sub(a, b));
        Ok(())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        let n = self.degree();
        for (i, m) in self.base.moduli().iter().enumerate() {
            for x in &mut out.data[i * n..(i + 1) * n] {
                *x = m.neg(*x);
            }
        }
        out
    }

    /// Pointwise product of two evaluation-domain polynomials.
    pub fn mul_pointwise(&self, other: &Self) -> Result<Self, RingError> {
        self.expect_domain(Domain::Evaluation)?;
        self.zip_with(other, |m, a, b| m.mul(a, b))
    }

    /// `self += a * b` pointwise; all three in the evaluation domain.
    pub fn fma_pointwise(&mut self, a: &Self, b: &Self) -> Result<(), RingError> {
        self.expect_domain(Domain::Evaluation)?;
        self.compatible(a)?;
        a.compatible(b)?;
        let n = self.degree();
        let base = self.base.clone();
        for (i, m) in base.moduli().iter().enumerate() {
            let range = i * n..(i + 1) * n;
            let dst = &mut self.data[range.clone()];
            for ((d, &x), &y) in dst.iter_mut().zip(&a.data[range.clone()]).zip(&b.data[range.clone()]) {
                *d = m.add(*d, m.mul(x, y));
            }
        }
        Ok(())
    }

    /// Ring product, returned in the coefficient domain.
    pub fn mul(&self, other: &Self, method: MulMethod) -> Result<Self, RingError> {
        self.compatible(other)?;
        match method {
            MulMethod::Ntt => {
                let mut a = self.clone();
                let mut b = other.clone();
                a.to_evaluation();
                b.to_evaluation();
                let mut c = a.mul_pointwise(&b)?;
                c.to_coefficient();
                Ok(c)
            }
            MulMethod::Naive => {
                self.expect_domain(Domain::Coefficient)?;
                Ok(self.mul_naive(other))
            }
        }
    }

    fn mul_naive(&self, other: &Self) -> Self {
        let n = self.degree();
        let mut out = Self::zero(&self.base, Domain::Coefficient);
        for (i, m) in self.base.moduli().iter().enumerate() {
            let q = m.value() as u128;
            let a = &self.data[i * n..(i + 1) * n];
            let b = &other.data[i * n..(i + 1) * n];
            let mut pos = vec![0u128; n];
            let mut neg = vec![0u128; n];
            for (j, &x) in a.iter().enumerate() {
                if x == 0 {
                    continue;
                }
                for (k, &y) in b.iter().enumerate() {
                    let prod = (x as u128 * y as u128) % q;
                    if j + k < n {
                        pos[j + k] += prod;
                    } else {
                        neg[j + k - n] += prod;
                    }
                }
            }
            for (j, dst) in out.data[i * n..(i + 1) * n].iter_mut().enumerate() {
                let p = pos[j] % q;
                let s = neg[j] % q;
                *dst = ((p + q - s) % q) as u64;
            }
        }
        out
    }

    /// Multiply every residue vector by a per-modulus scalar.
    pub fn mul_scalar(&self, scalars: &[u64]) -> Self {
        let mut out = self.clone();
        let n = self.degree();
        for (i, m) in self.base.moduli().iter().enumerate() {
            let w = m.reduce(scalars[i]);
            let ws = m.shoup(w);
            for x in &mut out.data[i * n..(i + 1) * n] {
                *x = m.mul_shoup(*x, w, ws);
            }
        }
        out
    }

    /// Multiply by the monomial `x^k` (negacyclic rotation with sign flips).
    pub fn mul_monomial(&self, k: usize) -> Result<Self, RingError> {
        self.expect_domain(Domain::Coefficient)?;
        let n = self.degree();
        let k = k % (2 * n);
        let mut out = Self::zero(&self.base, Domain::Coefficient);
        for (i, m) in self.base.moduli().iter().enumerate() {
            let src = &self.data[i * n..(i + 1) * n];
            let dst = &mut out.data[i * n..(i + 1) * n];
            for (j, &c) in src.iter().enumerate() {
                let pos = j + k;
                let (idx, flip) = match pos / n {
                    0 => (pos, false),
                    1 => (pos - n, true),
                    2 => (pos - 2 * n, false),
                    _ => (pos - 3 * n, true),
                };
                dst[idx] = if flip { m.neg(c) } else { c };
            }
        }
        Ok(out)
    }

    pub(crate) fn from_raw(base: &Arc<RnsBase>, data: Vec<u64>, domain: Domain) -> Self {
        debug_assert_eq!(data.len(), base.len() * base.degree());
        Self {
            base: base.clone(),
            data,
            domain,
        }
    }

    /// Serialize: u32 n, u32 modulus count, u64 moduli, u8 domain flag, then
    /// every residue vector as little-endian u64 words.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), RingError> {
        w.write_all(&(self.degree() as u32).to_le_bytes())?;
        w.write_all(&(self.base.len() as u32).to_le_bytes())?;
        for &q in self.base.values() {
            w.write_all(&q.to_le_bytes())?;
        }
        w.write_all(&[match self.domain {
            Domain::Coefficient => 0,
            Domain::Evaluation => 1,
        }])?;
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for &x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Inverse of [`RnsPoly::write_to`]; the header must describe `base`.
    pub fn read_from<R: Read>(r: &mut R, base: &Arc<RnsBase>) -> Result<Self, RingError> {
        let n = read_u32(r)? as usize;
        let k = read_u32(r)? as usize;
        if n != base.degree() || k != base.len() {
            return Err(RingError::Format(format!(
                "header (n={n}, k={k}) does not match base (n={}, k={})",
                base.degree(),
                base.len()
            )));
        }
        for &q in base.values() {
            if read_u64(r)? != q {
                return Err(RingError::Format("modulus mismatch".into()));
            }
        }
        let mut flag = [0u8];
        r.read_exact(&mut flag)?;
        let domain = match flag[0] {
            0 => Domain::Coefficient,
            1 => Domain::Evaluation,
            f => return Err(RingError::Format(format!("bad domain flag {f}"))),
        };
        let mut bytes = vec![0u8; n * k * 8];
        r.read_exact(&mut bytes)?;
        let data: Vec<u64> = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let residues = data.chunks(n).map(|c| c.to_vec()).collect();
        Self::from_residues(base, residues, domain)
    }
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
