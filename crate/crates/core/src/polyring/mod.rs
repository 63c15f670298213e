//! Arithmetic in the negacyclic ring `Z_q[x]/(x^n + 1)` with `q` split into
//! word-size NTT-friendly primes.

pub mod arith;
mod modulus;
mod poly;
mod rns;

use thiserror::Error;

pub use modulus::{Modulus, MAX_MODULUS_BITS};
pub use poly::{Direction, Domain, MulMethod, RnsPoly};
pub use rns::{CrtBasis, RnsBase};

#[derive(Debug, Error)]
pub enum RingError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus {modulus} is not congruent to 1 mod 2n for n = {n}")]
    NotNttFriendly { modulus: u64, n: usize },
    #[error("modulus {0} exceeds {MAX_MODULUS_BITS} bits")]
    ModulusTooLarge(u64),
    #[error("ring degree {0} is not a power of two")]
    InvalidDegree(usize),
    #[error("duplicate modulus {0} in base")]
    DuplicateModulus(u64),
    #[error("moduli {0} and {1} are not coprime")]
    NotCoprime(u64, u64),
    #[error("empty modulus base")]
    EmptyBase,
    #[error("operands use different modulus bases or degrees")]
    BaseMismatch,
    #[error("expected {expected:?} domain, found {found:?}")]
    DomainMismatch { expected: Domain, found: Domain },
    #[error("residue {value} at position {index} is not reduced modulo {modulus}")]
    ResidueOutOfRange { index: usize, value: u64, modulus: u64 },
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("malformed polynomial encoding: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
