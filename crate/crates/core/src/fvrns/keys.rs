use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::sampling::{gaussian_coeffs, ternary_coeffs, uniform};
use super::{FvContext, FvError};
use crate::polyring::RnsPoly;

/// Ternary secret, one per instance.
#[derive(Clone, Debug, PartialEq)]
pub struct SecretKey {
    pub(crate) s: Vec<RnsPoly>,
    pub(crate) s_eval: Vec<RnsPoly>,
}

impl SecretKey {
    pub(crate) fn new(s: Vec<RnsPoly>) -> Self {
        let s_eval = s
            .iter()
            .map(|p| {
                let mut e = p.clone();
                e.to_evaluation();
                e
            })
            .collect();
        Self { s, s_eval }
    }

    pub fn poly(&self, instance: usize) -> &RnsPoly {
        &self.s[instance]
    }
}

/// `(p0, p1)` with `p1 = -(s p0 + e)`, stored in the evaluation domain.
#[derive(Clone, Debug, PartialEq)]
pub struct PublicKey {
    pub(crate) keys: Vec<(RnsPoly, RnsPoly)>,
}

impl PublicKey {
    pub fn p0(&self, instance: usize) -> &RnsPoly {
        &self.keys[instance].0
    }

    pub fn p1(&self, instance: usize) -> &RnsPoly {
        &self.keys[instance].1
    }
}

/// Relinearization keys `(a_i, g_i)` with `g_i = -(a_i s + e_i) + beta^i s^2`,
/// stored in the evaluation domain.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationKeys {
    pub(crate) keys: Vec<Vec<(RnsPoly, RnsPoly)>>,
}

impl EvaluationKeys {
    pub fn digits(&self, instance: usize) -> usize {
        self.keys[instance].len()
    }

    pub fn pair(&self, instance: usize, digit: usize) -> (&RnsPoly, &RnsPoly) {
        let (a, g) = &self.keys[instance][digit];
        (a, g)
    }
}

impl FvContext {
    /// Deterministic key generation from a seed.
    pub fn keygen(&self, seed: u64) -> (SecretKey, PublicKey, EvaluationKeys) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        self.keygen_with_rng(&mut rng)
            .expect("context bases are internally consistent")
    }

    pub fn keygen_with_rng(
        &self,
        rng: &mut impl Rng,
    ) -> Result<(SecretKey, PublicKey, EvaluationKeys), FvError> {
        let n = self.params.n;
        let std = self.params.noise_std;
        let mut secrets = Vec::new();
        let mut public = Vec::new();
        let mut evk = Vec::new();
        for inst in &self.instances {
            let s = RnsPoly::from_signed(&inst.q, &ternary_coeffs(n, rng))?;
            let mut s_eval = s.clone();
            s_eval.to_evaluation();
            let s_sq = s_eval.mul_pointwise(&s_eval)?;

            let mut p0 = uniform(&inst.q, rng);
            p0.to_evaluation();
            let mut e = RnsPoly::from_signed(&inst.q, &gaussian_coeffs(n, std, rng))?;
            e.to_evaluation();
            let p1 = p0.mul_pointwise(&s_eval)?.add(&e)?.neg();
            public.push((p0, p1));

            let mut pairs = Vec::with_capacity(inst.digits);
            for beta_pow in &inst.beta_pows {
                let mut a = uniform(&inst.q, rng);
                a.to_evaluation();
                let mut e = RnsPoly::from_signed(&inst.q, &gaussian_coeffs(n, std, rng))?;
                e.to_evaluation();
                let g = s_sq
                    .mul_scalar(beta_pow)
                    .sub(&a.mul_pointwise(&s_eval)?.add(&e)?)?;
                pairs.push((a, g));
            }
            evk.push(pairs);
            secrets.push(s);
        }
        Ok((
            SecretKey::new(secrets),
            PublicKey { keys: public },
            EvaluationKeys { keys: evk },
        ))
    }

    /// Centered coefficients of `[p1 + s p0]_q` for one instance; small when
    /// the key pair is well formed.
    pub fn public_key_residual(
        &self,
        sk: &SecretKey,
        pk: &PublicKey,
        instance: usize,
    ) -> Result<Vec<i64>, FvError> {
        let (p0, p1) = &pk.keys[instance];
        let mut r = p1.add(&p0.mul_pointwise(&sk.s_eval[instance])?)?;
        r.to_coefficient();
        centered_small(&r)
    }

    /// Centered coefficients of `[g_i + a_i s - beta^i s^2]_q`.
    pub fn evaluation_key_residual(
        &self,
        sk: &SecretKey,
        evk: &EvaluationKeys,
        instance: usize,
        digit: usize,
    ) -> Result<Vec<i64>, FvError> {
        let inst = &self.instances[instance];
        let (a, g) = &evk.keys[instance][digit];
        let s = &sk.s_eval[instance];
        let s_sq = s.mul_pointwise(s)?;
        let mut r = g
            .add(&a.mul_pointwise(s)?)?
            .sub(&s_sq.mul_scalar(&inst.beta_pows[digit]))?;
        r.to_coefficient();
        centered_small(&r)
    }
}

fn centered_small(p: &RnsPoly) -> Result<Vec<i64>, FvError> {
    (0..p.degree())
        .map(|j| {
            let c = p.centered_coefficient(j)?;
            i64::try_from(c).map_err(|_| FvError::Format("residual coefficient exceeds 64 bits".into()))
        })
        .collect()
}
