use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::params::{EncryptionParams, DEFAULT_COEFF_BITS};
use super::scaling::{aux_bits_needed, ScalingPath, ScalingTables};
use super::FvError;
use crate::polyring::arith::ntt_primes_below;
use crate::polyring::RnsBase;

/// Precomputed state of one plaintext-modulus instance.
#[derive(Debug)]
pub(crate) struct Instance {
    pub t: u64,
    pub q: Arc<RnsBase>,
    /// `q`'s primes followed by auxiliary primes for exact tensoring.
    pub ext: Arc<RnsBase>,
    /// `floor(q / t)` per coefficient prime.
    pub delta: Vec<u64>,
    /// Number of base-beta digits, `floor(log_beta q) + 1`.
    pub digits: usize,
    pub beta_pows: Vec<Vec<u64>>,
    pub tables: ScalingTables,
}

impl Instance {
    fn new(params: &EncryptionParams, idx: usize) -> Result<Self, FvError> {
        let n = params.n;
        let t = params.plain_moduli[idx];
        let q = Arc::new(RnsBase::from_primes(&params.coeff_moduli[idx], n)?);
        let qprod = q.product().clone();
        let need = aux_bits_needed(t, n, &qprod);
        let mut aux = Vec::new();
        let mut bits = 0u64;
        let mut exclude = params.coeff_moduli[idx].clone();
        while bits < need {
            let p = ntt_primes_below(DEFAULT_COEFF_BITS, n, 1, &exclude)
                .pop()
                .ok_or_else(|| FvError::InvalidParams("ran out of auxiliary primes".into()))?;
            exclude.push(p);
            aux.push(p);
            bits += 63 - p.leading_zeros() as u64;
        }
        let mut ext_moduli = q.moduli().to_vec();
        for &p in &aux {
            ext_moduli.push(crate::polyring::Modulus::new(p, n)?);
        }
        let ext = Arc::new(RnsBase::new(ext_moduli)?);
        let delta_big = &qprod / t;
        let delta = q
            .values()
            .iter()
            .map(|&qi| (&delta_big % qi).to_u64().unwrap())
            .collect();
        let beta_bits = params.relin_base_bits as u64;
        // floor(log_beta q) + 1 digits cover every value below q
        let digits = ((qprod.bits() - 1) / beta_bits + 1) as usize;
        let beta_pows = (0..digits)
            .map(|i| {
                let b = BigUint::from(1u32) << (beta_bits * i as u64);
                q.values().iter().map(|&qi| (&b % qi).to_u64().unwrap()).collect()
            })
            .collect();
        let tables = ScalingTables::new(t, &q, &ext);
        Ok(Self {
            t,
            q,
            ext,
            delta,
            digits,
            beta_pows,
            tables,
        })
    }
}

/// Parameters plus every table derived from them.
#[derive(Debug)]
pub struct FvContext {
    pub(crate) params: EncryptionParams,
    pub(crate) instances: Vec<Instance>,
    pub(crate) digest: [u8; 32],
    pub(crate) scaling: ScalingPath,
}

impl FvContext {
    pub fn new(params: EncryptionParams) -> Result<Self, FvError> {
        params.validate()?;
        let instances = (0..params.instances())
            .map(|i| Instance::new(&params, i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            digest: params.digest(),
            params,
            instances,
            scaling: ScalingPath::Fast,
        })
    }

    /// Select the rounding route used by decryption and multiplication.
    pub fn with_scaling(mut self, path: ScalingPath) -> Self {
        self.scaling = path;
        self
    }

    pub fn scaling(&self) -> ScalingPath {
        self.scaling
    }

    pub fn params(&self) -> &EncryptionParams {
        &self.params
    }

    pub fn digest(&self) -> [u8; 32] {
        self.digest
    }

    pub fn degree(&self) -> usize {
        self.params.n
    }

    pub fn plain_moduli(&self) -> &[u64] {
        &self.params.plain_moduli
    }

    pub fn instance_count(&self) -> usize {
        self.instances.len()
    }

    pub fn coeff_base(&self, instance: usize) -> &Arc<RnsBase> {
        &self.instances[instance].q
    }

    /// Number of relinearization digits `l + 1` for an instance.
    pub fn relin_digits(&self, instance: usize) -> usize {
        self.instances[instance].digits
    }

    /// Bit length of the coefficient modulus of an instance.
    pub fn coeff_bits(&self, instance: usize) -> u64 {
        self.instances[instance].q.product_bits()
    }
}
