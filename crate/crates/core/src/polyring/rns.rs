use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use super::arith::{inv_mod, mul_mod};
use super::{Modulus, RingError};

/// Chinese-remainder basis over pairwise coprime word-size moduli.
///
/// Unlike [`RnsBase`] this carries no transform tables, so any coprime
/// moduli are accepted (plaintext moduli, toy examples).
#[derive(Clone, Debug)]
pub struct CrtBasis {
    moduli: Vec<u64>,
    product: BigUint,
    punctured: Vec<BigUint>,
    punctured_inv: Vec<u64>,
    // little-endian limb forms used by the allocation-free reconstruction
    limbs: usize,
    product_limbs: Vec<u64>,
    punctured_limbs: Vec<Vec<u64>>,
}

impl PartialEq for CrtBasis {
    fn eq(&self, other: &Self) -> bool {
        self.moduli == other.moduli
    }
}

impl CrtBasis {
    pub fn new(moduli: &[u64]) -> Result<Self, RingError> {
        if moduli.is_empty() {
            return Err(RingError::EmptyBase);
        }
        for (i, &a) in moduli.iter().enumerate() {
            if a < 2 {
                return Err(RingError::NotCoprime(a, a));
            }
            for &b in &moduli[i + 1..] {
                if a.gcd(&b) != 1 {
                    return Err(RingError::NotCoprime(a, b));
                }
            }
        }
        let product: BigUint = moduli.iter().map(|&m| BigUint::from(m)).product();
        let punctured: Vec<BigUint> = moduli.iter().map(|&m| &product / m).collect();
        let punctured_inv = moduli
            .iter()
            .zip(&punctured)
            .map(|(&m, p)| {
                let r = (p % m).to_u64().unwrap();
                inv_mod(r, m).expect("coprime moduli")
            })
            .collect();
        let limbs = (product.bits() as usize).div_ceil(64) + 1;
        let to_limbs = |x: &BigUint| {
            let mut v = x.to_u64_digits();
            v.resize(limbs, 0);
            v
        };
        let product_limbs = to_limbs(&product);
        let punctured_limbs = punctured.iter().map(to_limbs).collect();
        Ok(Self {
            moduli: moduli.to_vec(),
            product,
            punctured,
            punctured_inv,
            limbs,
            product_limbs,
            punctured_limbs,
        })
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    pub fn product(&self) -> &BigUint {
        &self.product
    }

    /// Product of all moduli divided by modulus `i`.
    pub fn punctured(&self, i: usize) -> &BigUint {
        &self.punctured[i]
    }

    /// Inverse of the punctured product modulo modulus `i`.
    pub fn punctured_inv(&self, i: usize) -> u64 {
        self.punctured_inv[i]
    }

    pub fn product_bits(&self) -> u64 {
        self.product.bits()
    }

    fn check(&self, residues: &[u64]) -> Result<(), RingError> {
        if residues.len() != self.moduli.len() {
            return Err(RingError::LengthMismatch {
                expected: self.moduli.len(),
                found: residues.len(),
            });
        }
        for (index, (&value, &modulus)) in residues.iter().zip(&self.moduli).enumerate() {
            if value >= modulus {
                return Err(RingError::ResidueOutOfRange {
                    index,
                    value,
                    modulus,
                });
            }
        }
        Ok(())
    }

    /// The unique integer in `[0, product)` with the given residues.
    pub fn reconstruct(&self, residues: &[u64]) -> Result<BigUint, RingError> {
        self.check(residues)?;
        Ok(self.reconstruct_unchecked(residues))
    }

    pub(crate) fn reconstruct_unchecked(&self, residues: &[u64]) -> BigUint {
        let mut acc = BigUint::zero();
        for (i, &r) in residues.iter().enumerate() {
            let y = mul_mod(r, self.punctured_inv[i], self.moduli[i]);
            acc += &self.punctured[i] * y;
        }
        acc % &self.product
    }

    /// Centered representative in `(-product/2, product/2]`.
    pub fn reconstruct_centered(&self, residues: &[u64]) -> Result<BigInt, RingError> {
        self.check(residues)?;
        Ok(self.center(self.reconstruct_unchecked(residues)))
    }

    pub(crate) fn center(&self, x: BigUint) -> BigInt {
        let half = &self.product >> 1;
        if x > half {
            BigInt::from_biguint(Sign::Minus, &self.product - x)
        } else {
            BigInt::from(x)
        }
    }

    pub fn decompose(&self, z: &BigUint) -> Vec<u64> {
        self.moduli
            .iter()
            .map(|&m| (z % m).to_u64().unwrap())
            .collect()
    }

    pub fn decompose_signed(&self, z: &BigInt) -> Vec<u64> {
        self.moduli
            .iter()
            .map(|&m| z.mod_floor(&BigInt::from(m)).to_u64().unwrap())
            .collect()
    }

    /// Number of 64-bit limbs used by [`CrtBasis::reconstruct_into_limbs`].
    pub fn limb_count(&self) -> usize {
        self.limbs
    }

    /// Allocation-free reconstruction into little-endian limbs; `out` must hold
    /// [`CrtBasis::limb_count`] words. Residues must already be reduced.
    pub fn reconstruct_into_limbs(&self, residues: &[u64], out: &mut [u64]) {
        debug_assert_eq!(out.len(), self.limbs);
        out.fill(0);
        for (i, &r) in residues.iter().enumerate() {
            let y = mul_mod(r, self.punctured_inv[i], self.moduli[i]);
            let mut carry = 0u128;
            for (o, &p) in out.iter_mut().zip(&self.punctured_limbs[i]) {
                let t = *o as u128 + p as u128 * y as u128 + carry;
                *o = t as u64;
                carry = t >> 64;
            }
        }
        // the sum is below len * product, so a few subtractions finish the job
        while !less_than(out, &self.product_limbs) {
            sub_in_place(out, &self.product_limbs);
        }
    }
}

fn less_than(a: &[u64], b: &[u64]) -> bool {
    for (x, y) in a.iter().rev().zip(b.iter().rev()) {
        if x != y {
            return x < y;
        }
    }
    false
}

fn sub_in_place(a: &mut [u64], b: &[u64]) {
    let mut borrow = false;
    for (x, &y) in a.iter_mut().zip(b) {
        let (d1, b1) = x.overflowing_sub(y);
        let (d2, b2) = d1.overflowing_sub(borrow as u64);
        *x = d2;
        borrow = b1 || b2;
    }
}

/// An ordered set of NTT-friendly moduli sharing one ring degree.
#[derive(Clone, Debug)]
pub struct RnsBase {
    moduli: Vec<Modulus>,
    crt: CrtBasis,
    n: usize,
}

impl PartialEq for RnsBase {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.moduli == other.moduli
    }
}

impl Eq for RnsBase {}

impl RnsBase {
    pub fn new(moduli: Vec<Modulus>) -> Result<Self, RingError> {
        let first = moduli.first().ok_or(RingError::EmptyBase)?;
        let n = first.degree();
        for (i, m) in moduli.iter().enumerate() {
            if m.degree() != n {
                return Err(RingError::BaseMismatch);
            }
            if moduli[..i].iter().any(|o| o.value() == m.value()) {
                return Err(RingError::DuplicateModulus(m.value()));
            }
        }
        let values: Vec<u64> = moduli.iter().map(Modulus::value).collect();
        let crt = CrtBasis::new(&values)?;
        Ok(Self { moduli, crt, n })
    }

    pub fn from_primes(primes: &[u64], n: usize) -> Result<Self, RingError> {
        let moduli = primes
            .iter()
            .map(|&p| Modulus::new(p, n))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(moduli)
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    pub fn modulus(&self, i: usize) -> &Modulus {
        &self.moduli[i]
    }

    pub fn values(&self) -> &[u64] {
        self.crt.moduli()
    }

    pub fn crt(&self) -> &CrtBasis {
        &self.crt
    }

    pub fn product(&self) -> &BigUint {
        self.crt.product()
    }

    pub fn product_bits(&self) -> u64 {
        self.crt.product_bits()
    }

    /// CRT preimage in `[0, q)` of one residue per modulus.
    pub fn reconstruct(&self, residues: &[u64]) -> Result<BigUint, RingError> {
        self.crt.reconstruct(residues)
    }

    pub fn decompose(&self, z: &BigUint) -> Vec<u64> {
        self.crt.decompose(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_crt() {
        let b = CrtBasis::new(&[3, 5]).unwrap();
        assert_eq!(b.reconstruct(&[1, 0]).unwrap(), BigUint::from(10u32));
        assert_eq!(b.reconstruct(&[0, 0]).unwrap(), BigUint::zero());
        assert!(matches!(
            b.reconstruct(&[3, 0]),
            Err(RingError::ResidueOutOfRange { index: 0, .. })
        ));
        assert!(matches!(CrtBasis::new(&[6, 9]), Err(RingError::NotCoprime(6, 9))));
    }

    #[test]
    fn centered() {
        let b = CrtBasis::new(&[3, 5]).unwrap();
        // 14 = -1 mod 15
        assert_eq!(b.reconstruct_centered(&[2, 4]).unwrap(), BigInt::from(-1));
        assert_eq!(b.decompose_signed(&BigInt::from(-1)), vec![2, 4]);
    }

    #[test]
    fn limb_reconstruction_matches_bigint() {
        let primes = super::super::arith::ntt_primes_below(62, 16, 4, &[]);
        let b = CrtBasis::new(&primes).unwrap();
        let mut out = vec![0u64; b.limb_count()];
        let mut x = 0x9e37_79b9_7f4a_7c15u64;
        for _ in 0..200 {
            let res: Vec<u64> = primes
                .iter()
                .map(|&p| {
                    x = x.wrapping_mul(0x5851_f42d_4c95_7f2d).wrapping_add(1);
                    x % p
                })
                .collect();
            b.reconstruct_into_limbs(&res, &mut out);
            assert_eq!(BigUint::from_slice(&to_u32(&out)), b.reconstruct(&res).unwrap());
        }
    }

    fn to_u32(limbs: &[u64]) -> Vec<u32> {
        limbs
            .iter()
            .flat_map(|&l| [l as u32, (l >> 32) as u32])
            .collect()
    }
}
