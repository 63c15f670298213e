//! Leveled FV encryption over RNS coefficient moduli, with one scheme
//! instance per plaintext modulus.

mod context;
mod evaluator;
pub mod io;
mod keys;
pub mod params;
mod sampling;
mod scaling;

use std::ops::{Add, AddAssign};

use thiserror::Error;

use crate::polyring::{RingError, RnsPoly};

pub use context::FvContext;
pub use evaluator::{EncryptionNoise, MulPlainPath};
pub use keys::{EvaluationKeys, PublicKey, SecretKey};
pub use params::EncryptionParams;
pub use scaling::ScalingPath;

#[derive(Debug, Error)]
pub enum FvError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("scale exponents differ: {0} vs {1}")]
    ScaleMismatch(u32, u32),
    #[error("object was produced under different encryption parameters")]
    ParamsMismatch,
    #[error("shift multiplication needs a monomial with a power-of-two coefficient")]
    NotPowerOfTwo,
    #[error("expected {expected} scheme instances, found {found}")]
    InstanceMismatch { expected: usize, found: usize },
    #[error("plaintext coefficient {value} not reduced modulo {modulus}")]
    PlainOutOfRange { value: u64, modulus: u64 },
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Homomorphic operation tally carried by every ciphertext.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OpCounters {
    pub ct_mults: u64,
    pub plain_mults: u64,
    pub additions: u64,
}

impl OpCounters {
    /// Ciphertext-ciphertext plus plaintext multiplications.
    pub fn multiplicative(&self) -> u64 {
        self.ct_mults + self.plain_mults
    }
}

impl Add for OpCounters {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            ct_mults: self.ct_mults + o.ct_mults,
            plain_mults: self.plain_mults + o.plain_mults,
            additions: self.additions + o.additions,
        }
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// Plaintext polynomial reduced modulo each instance's `t`, with the
/// fixed-point exponent of the value it encodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plaintext {
    /// One length-`n` coefficient vector per instance.
    pub polys: Vec<Vec<u64>>,
    pub scale: u32,
}

impl Plaintext {
    pub fn zero(ctx: &FvContext) -> Self {
        Self {
            polys: vec![vec![0; ctx.degree()]; ctx.instance_count()],
            scale: 0,
        }
    }

    /// Same signed integer coefficients in every instance, reduced mod `t`.
    pub fn from_signed(ctx: &FvContext, coeffs: &[i64], scale: u32) -> Result<Self, FvError> {
        let n = ctx.degree();
        if coeffs.len() > n {
            return Err(RingError::LengthMismatch { expected: n, found: coeffs.len() }.into());
        }
        let polys = ctx
            .plain_moduli()
            .iter()
            .map(|&t| {
                let mut p = vec![0u64; n];
                for (d, &c) in p.iter_mut().zip(coeffs) {
                    *d = c.rem_euclid(t as i64) as u64;
                }
                p
            })
            .collect();
        Ok(Self { polys, scale })
    }

    pub fn is_zero(&self) -> bool {
        self.polys.iter().all(|p| p.iter().all(|&c| c == 0))
    }
}

/// Two-component ciphertext per instance, in the coefficient domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    pub(crate) parts: Vec<[RnsPoly; 2]>,
    pub scale: u32,
    pub counters: OpCounters,
}

impl Ciphertext {
    pub fn instance_count(&self) -> usize {
        self.parts.len()
    }

    pub fn c0(&self, instance: usize) -> &RnsPoly {
        &self.parts[instance][0]
    }

    pub fn c1(&self, instance: usize) -> &RnsPoly {
        &self.parts[instance][1]
    }

    pub fn is_zero(&self) -> bool {
        self.parts.iter().all(|[a, b]| a.is_zero() && b.is_zero())
    }
}

/// Unrelinearized product `(c0, c1, c2)` decrypting under `(1, s, s^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeTwoCiphertext {
    pub(crate) parts: Vec<[RnsPoly; 3]>,
    pub scale: u32,
    pub counters: OpCounters,
}

/// Ciphertext held in the evaluation domain, for repeated plaintext products.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedCiphertext {
    pub(crate) parts: Vec<[RnsPoly; 2]>,
    pub scale: u32,
    pub counters: OpCounters,
}
