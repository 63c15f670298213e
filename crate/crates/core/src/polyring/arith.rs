//! Word-size modular arithmetic helpers shared by the ring and scheme code.

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

#[inline]
pub fn add_mod(a: u64, b: u64, m: u64) -> u64 {
    let s = a + b;
    if s >= m {
        s - m
    } else {
        s
    }
}

#[inline]
pub fn sub_mod(a: u64, b: u64, m: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + m - b
    }
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Modular inverse via the extended Euclidean algorithm.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// Deterministic Miller-Rabin for the full `u64` range.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// The `count` largest primes below `2^bits` that are congruent to 1 mod `2n`,
/// in descending order, skipping any listed in `exclude`.
pub fn ntt_primes_below(bits: u32, n: usize, count: usize, exclude: &[u64]) -> Vec<u64> {
    let step = 2 * n as u64;
    let mut candidate = ((1u64 << bits) - 1) / step * step + 1;
    if candidate >= 1u64 << bits {
        candidate -= step;
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count && candidate > step {
        if is_prime(candidate) && !exclude.contains(&candidate) {
            out.push(candidate);
        }
        candidate -= step;
    }
    out
}

/// The `count` largest primes strictly below `bound`, descending.
pub fn primes_below(bound: u64, count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut c = bound - 1;
    while out.len() < count && c >= 2 {
        if is_prime(c) {
            out.push(c);
        }
        c -= 1;
    }
    out
}

/// Reverse the lowest `bits` bits of `x`.
#[inline]
pub fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

/// Multiply a word by a 128-bit binary fraction `theta / 2^128`, returning the
/// integer part and the 128-bit fractional part of the exact product.
#[inline]
pub fn mul_frac(y: u64, theta: u128) -> (u64, u128) {
    let lo = y as u128 * (theta as u64) as u128;
    let hi = y as u128 * (theta >> 64);
    let (frac, carry) = lo.overflowing_add(hi << 64);
    let int = (hi >> 64) as u64 + carry as u64;
    (int, frac)
}
