use sha2::{Digest, Sha256};

use super::FvError;
use crate::polyring::arith::{is_prime, ntt_primes_below, primes_below};

pub const DEFAULT_DEGREE: usize = 8192;
pub const DEFAULT_PLAIN_BITS: u32 = 59;
pub const DEFAULT_COEFF_BITS: u32 = 62;
pub const DEFAULT_COEFF_COUNT: usize = 4;
pub const DEFAULT_RELIN_BITS: u32 = 16;
pub const DEFAULT_NOISE_STD: f64 = 3.2;

/// Scheme parameters shared by every plaintext-modulus instance.
#[derive(Clone, Debug, PartialEq)]
pub struct EncryptionParams {
    pub n: usize,
    /// One plaintext modulus `t` per parallel scheme instance.
    pub plain_moduli: Vec<u64>,
    /// Coefficient modulus primes, one list per instance.
    pub coeff_moduli: Vec<Vec<u64>>,
    /// Relinearization base is `2^relin_base_bits`.
    pub relin_base_bits: u32,
    /// Standard deviation of the error distribution; truncated at six sigma.
    pub noise_std: f64,
}

impl EncryptionParams {
    /// Two ~59-bit plaintext primes and four ~62-bit NTT primes per instance.
    pub fn with_degree(n: usize) -> Self {
        let plain = primes_below(1u64 << DEFAULT_PLAIN_BITS, 2);
        let coeff = ntt_primes_below(DEFAULT_COEFF_BITS, n, DEFAULT_COEFF_COUNT, &[]);
        Self {
            n,
            coeff_moduli: vec![coeff; plain.len()],
            plain_moduli: plain,
            relin_base_bits: DEFAULT_RELIN_BITS,
            noise_std: DEFAULT_NOISE_STD,
        }
    }

    /// Single-instance parameters, handy for scheme-level experiments.
    pub fn single(n: usize, t: u64) -> Self {
        Self {
            n,
            plain_moduli: vec![t],
            coeff_moduli: vec![ntt_primes_below(DEFAULT_COEFF_BITS, n, DEFAULT_COEFF_COUNT, &[])],
            relin_base_bits: DEFAULT_RELIN_BITS,
            noise_std: DEFAULT_NOISE_STD,
        }
    }

    pub fn instances(&self) -> usize {
        self.plain_moduli.len()
    }

    /// Truncation bound of the error distribution.
    pub fn noise_bound(&self) -> f64 {
        6.0 * self.noise_std
    }

    pub fn validate(&self) -> Result<(), FvError> {
        let bad = |m: String| Err(FvError::InvalidParams(m));
        if !self.n.is_power_of_two() || self.n < 2 {
            return bad(format!("ring degree {} is not a power of two", self.n));
        }
        if self.plain_moduli.is_empty() {
            return bad("no plaintext moduli".into());
        }
        if self.coeff_moduli.len() != self.plain_moduli.len() {
            return bad("one coefficient base is required per plaintext modulus".into());
        }
        for (i, &t) in self.plain_moduli.iter().enumerate() {
            if t < 2 || !is_prime(t) {
                return bad(format!("plaintext modulus {t} is not prime"));
            }
            if self.plain_moduli[..i].contains(&t) {
                return bad(format!("plaintext modulus {t} repeated"));
            }
            if let Some(&q) = self.coeff_moduli[i].iter().find(|&&q| q <= t) {
                return bad(format!("plaintext modulus {t} is not below coefficient prime {q}"));
            }
        }
        if self.relin_base_bits < 1 || self.relin_base_bits > 32 {
            return bad(format!("relinearization base 2^{} out of range", self.relin_base_bits));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return bad(format!("noise standard deviation {} invalid", self.noise_std));
        }
        Ok(())
    }

    /// Canonical text form; also the parameter file format.
    pub fn to_text(&self) -> String {
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::from("# privml encryption parameters v1\n");
        s += &format!("n = {}\n", self.n);
        s += &format!("plain_moduli = {}\n", join(&self.plain_moduli));
        for (i, q) in self.coeff_moduli.iter().enumerate() {
            s += &format!("coeff_moduli.{i} = {}\n", join(q));
        }
        s += &format!("relin_base_bits = {}\n", self.relin_base_bits);
        s += &format!("noise_std = {:?}\n", self.noise_std);
        s
    }

    pub fn from_text(text: &str) -> Result<Self, FvError> {
        let mut n = None;
        let mut plain = None;
        let mut coeff: Vec<(usize, Vec<u64>)> = Vec::new();
        let mut relin = None;
        let mut noise = None;
        let parse_list = |v: &str| -> Result<Vec<u64>, FvError> {
            v.split(',')
                .map(|x| x.trim().parse::<u64>().map_err(|e| FvError::Format(format!("{x}: {e}"))))
                .collect()
        };
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| FvError::Format(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let num_err = |e: std::num::ParseIntError| FvError::Format(format!("{key}: {e}"));
            match key {
                "n" => n = Some(value.parse::<usize>().map_err(num_err)?),
                "plain_moduli" => plain = Some(parse_list(value)?),
                "relin_base_bits" => relin = Some(value.parse::<u32>().map_err(num_err)?),
                "noise_std" => {
                    noise = Some(value.parse::<f64>().map_err(|e| FvError::Format(format!("{key}: {e}")))?)
                }
                k if k.starts_with("coeff_moduli.") => {
                    let idx = k["coeff_moduli.".len()..].parse::<usize>().map_err(num_err)?;
                    coeff.push((idx, parse_list(value)?));
                }
                other => return Err(FvError::Format(format!("unknown parameter {other:?}"))),
            }
        }
        coeff.sort_by_key(|(i, _)| *i);
        let missing = |k: &str| FvError::Format(format!("missing parameter {k}"));
        let params = Self {
            n: n.ok_or_else(|| missing("n"))?,
            plain_moduli: plain.ok_or_else(|| missing("plain_moduli"))?,
            coeff_moduli: coeff.into_iter().map(|(_, v)| v).collect(),
            relin_base_bits: relin.ok_or_else(|| missing("relin_base_bits"))?,
            noise_std: noise.ok_or_else(|| missing("noise_std"))?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_text().as_bytes()).into()
    }
}
