use super::arith::{bit_reverse, inv_mod, is_prime, mul_mod, pow_mod};
use super::RingError;

/// An NTT-friendly word-size prime together with the tables needed for
/// negacyclic transforms of length `n`.
#[derive(Clone, Debug)]
pub struct Modulus {
    value: u64,
    n: usize,
    root: u64,
    // floor(2^128 / value), low word first
    ratio: [u64; 2],
    roots: Vec<u64>,
    roots_shoup: Vec<u64>,
    inv_roots: Vec<u64>,
    inv_roots_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

impl PartialEq for Modulus {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value && self.n == other.n
    }
}

impl Eq for Modulus {}

/// Largest modulus accepted; keeps sums of two residues inside a word.
pub const MAX_MODULUS_BITS: u32 = 62;

impl Modulus {
    pub fn new(value: u64, n: usize) -> Result<Self, RingError> {
        if !n.is_power_of_two() || n < 2 {
            return Err(RingError::InvalidDegree(n));
        }
        if value >= 1u64 << MAX_MODULUS_BITS {
            return Err(RingError::ModulusTooLarge(value));
        }
        if !is_prime(value) {
            return Err(RingError::NotPrime(value));
        }
        let two_n = 2 * n as u64;
        if !(value - 1).is_multiple_of(two_n) {
            return Err(RingError::NotNttFriendly { modulus: value, n });
        }
        let root = minimal_primitive_root(value, two_n);
        let ratio_full = u128::MAX / value as u128;
        // u128::MAX / v equals floor(2^128 / v) unless v divides 2^128, impossible for odd v
        let ratio = [ratio_full as u64, (ratio_full >> 64) as u64];

        let log_n = n.trailing_zeros();
        let root_inv = inv_mod(root, value).expect("prime modulus");
        let mut roots = vec![0u64; n];
        let mut inv_roots = vec![0u64; n];
        let (mut power, mut inv_power) = (1u64, 1u64);
        for i in 0..n {
            let idx = bit_reverse(i, log_n);
            roots[idx] = power;
            inv_roots[idx] = inv_power;
            power = mul_mod(power, root, value);
            inv_power = mul_mod(inv_power, root_inv, value);
        }
        let shoup = |w: &u64| (((*w as u128) << 64) / value as u128) as u64;
        let roots_shoup = roots.iter().map(shoup).collect();
        let inv_roots_shoup = inv_roots.iter().map(shoup).collect();
        let n_inv = inv_mod(n as u64, value).expect("n invertible");
        Ok(Self {
            value,
            n,
            root,
            ratio,
            roots,
            roots_shoup,
            inv_roots,
            inv_roots_shoup,
            n_inv,
            n_inv_shoup: shoup(&n_inv),
        })
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    /// The primitive `2n`-th root of unity used by the transform.
    pub fn root(&self) -> u64 {
        self.root
    }

    /// Barrett reduction of a 128-bit value.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let lo = x as u64;
        let hi = (x >> 64) as u64;
        let [r0, r1] = self.ratio;
        // high 128 bits of x * ratio, truncated to the low word
        let carry = ((lo as u128 * r0 as u128) >> 64) as u64;
        let t = lo as u128 * r1 as u128;
        let (mid, c1) = (t as u64).overflowing_add(carry);
        let top = (t >> 64) as u64 + c1 as u64;
        let t2 = hi as u128 * r0 as u128;
        let (_, c2) = mid.overflowing_add(t2 as u64);
        let carry2 = (t2 >> 64) as u64 + c2 as u64;
        let quotient = hi
            .wrapping_mul(r1)
            .wrapping_add(top)
            .wrapping_add(carry2);
        let r = lo.wrapping_sub(quotient.wrapping_mul(self.value));
        if r >= self.value {
            r - self.value
        } else {
            r
        }
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        if x >= self.value {
            x % self.value
        } else {
            x
        }
    }

    /// Reduce a signed integer into `[0, value)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        (x as i128).rem_euclid(self.value as i128) as u64
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.value {
            s - self.value
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.value - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    /// Precomputed quotient for repeated multiplication by `w`.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.value as u128) as u64
    }

    #[inline]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let q = ((a as u128 * w_shoup as u128) >> 64) as u64;
        let r = a.wrapping_mul(w).wrapping_sub(q.wrapping_mul(self.value));
        if r >= self.value {
            r - self.value
        } else {
            r
        }
    }

    pub fn pow(&self, base: u64, exp: u64) -> u64 {
        pow_mod(base, exp, self.value)
    }

    pub fn inv(&self, a: u64) -> Option<u64> {
        inv_mod(a, self.value)
    }

    /// `a * w mod q` up to one extra `q`, i.e. in `[0, 2q)`, for any word `a`.
    #[inline(always)]
    fn mul_shoup_lazy(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let q = ((a as u128 * w_shoup as u128) >> 64) as u64;
        a.wrapping_mul(w).wrapping_sub(q.wrapping_mul(self.value))
    }

    /// In-place negacyclic forward transform; output is in bit-reversed order.
    ///
    /// Butterflies keep values in `[0, 4q)` and reduce once at the end, which
    /// needs `4q < 2^64`.
    pub fn forward_ntt(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = self.value;
        let two_q = 2 * q;
        let n = self.n;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            for i in 0..m {
                let j1 = 2 * i * t;
                let w = self.roots[m + i];
                let ws = self.roots_shoup[m + i];
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let mut u = *x;
                    if u >= two_q {
                        u -= two_q;
                    }
                    let v = self.mul_shoup_lazy(*y, w, ws);
                    *x = u + v;
                    *y = u + two_q - v;
                }
            }
            m <<= 1;
        }
        for x in a.iter_mut() {
            let mut v = *x;
            if v >= two_q {
                v -= two_q;
            }
            if v >= q {
                v -= q;
            }
            *x = v;
        }
    }

    /// In-place inverse of [`Modulus::forward_ntt`], including the `1/n` factor.
    /// Intermediate values stay in `[0, 2q)`.
    pub fn inverse_ntt(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let two_q = 2 * self.value;
        let n = self.n;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let w = self.inv_roots[h + i];
                let ws = self.inv_roots_shoup[h + i];
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    let s = u + v;
                    *x = if s >= two_q { s - two_q } else { s };
                    *y = self.mul_shoup_lazy(u + two_q - v, w, ws);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = self.mul_shoup(*x, self.n_inv, self.n_inv_shoup);
        }
    }
}

/// Smallest element of order exactly `two_n` obtained as `g^((p-1)/2n)`.
fn minimal_primitive_root(p: u64, two_n: u64) -> u64 {
    let exp = (p - 1) / two_n;
    let half = two_n / 2;
    let mut best = None;
    for g in 2..p {
        let cand = pow_mod(g, exp, p);
        if pow_mod(cand, half, p) == p - 1 {
            best = Some(cand);
            break;
        }
    }
    let root = best.expect("prime with p = 1 mod 2n has a primitive 2n-th root");
    // pick the smallest among the primitive roots (odd powers of one of them)
    let sq = mul_mod(root, root, p);
    let mut cur = root;
    let mut min = root;
    for _ in 0..half {
        if cur < min {
            min = cur;
        }
        cur = mul_mod(cur, sq, p);
    }
    min
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_moduli() {
        assert!(matches!(Modulus::new(15, 4), Err(RingError::NotPrime(15))));
        assert!(matches!(
            Modulus::new(13, 8),
            Err(RingError::NotNttFriendly { modulus: 13, n: 8 })
        ));
        assert!(matches!(Modulus::new(17, 6), Err(RingError::InvalidDegree(6))));
    }

    #[test]
    fn root_has_order_2n() {
        let m = Modulus::new(17, 8).unwrap();
        let r = m.root();
        assert_eq!(m.pow(r, 16), 1);
        assert_eq!(m.pow(r, 8), 16);
    }

    #[test]
    fn barrett_matches_u128_remainder() {
        let p = super::super::arith::ntt_primes_below(62, 4, 1, &[])[0];
        let m = Modulus::new(p, 4).unwrap();
        let q = m.value() as u128;
        let mut x: u128 = 0x1234_5678_9abc_def0_1122_3344_5566_7788;
        for _ in 0..10_000 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let v = x % (q * q);
            assert_eq!(m.reduce_u128(v) as u128, v % q);
            let a = (x >> 64) as u64 % m.value();
            let b = x as u64 % m.value();
            let w = m.shoup(b);
            assert_eq!(m.mul_shoup(a, b, w) as u128, (a as u128 * b as u128) % q);
        }
    }
}
