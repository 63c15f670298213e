use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use super::encrypted::encrypted_forward;
use super::quantized::{EncryptedModel, QuantActivation};
use super::{Activation, ModelError};
use crate::fvrns::{Ciphertext, EvaluationKeys, FvContext, MulPlainPath, OpCounters};

/// Activation realizations compared by the benchmark. Everything else about
/// the circuit is shared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BenchVariant {
    Square,
    SwishGeneric,
    SwishShift,
}

impl BenchVariant {
    pub const ALL: [BenchVariant; 3] = [BenchVariant::Square, BenchVariant::SwishGeneric, BenchVariant::SwishShift];

    pub fn name(self) -> &'static str {
        match self {
            BenchVariant::Square => "square",
            BenchVariant::SwishGeneric => "swish-generic",
            BenchVariant::SwishShift => "swish-shift",
        }
    }

    pub fn path(self) -> MulPlainPath {
        match self {
            BenchVariant::SwishShift => MulPlainPath::Shift,
            _ => MulPlainPath::Generic,
        }
    }

    /// The model with this variant's activation in both positions.
    pub fn apply(self, em: &EncryptedModel) -> Result<EncryptedModel, ModelError> {
        let act = match self {
            BenchVariant::Square => QuantActivation::Square,
            _ => QuantActivation::from_activation(&Activation::swish_quant())?,
        };
        Ok(em.with_activations(act.clone(), act))
    }
}

impl fmt::Display for BenchVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchVariant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| ModelError::Config(format!("unknown benchmark variant {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct BenchResult {
    pub variant: BenchVariant,
    pub times_s: Vec<f64>,
    pub counters: OpCounters,
    /// Output of the last trial.
    pub output: Ciphertext,
}

impl BenchResult {
    pub fn median_s(&self) -> f64 {
        let mut t = self.times_s.clone();
        t.sort_by(f64::total_cmp);
        let m = t.len() / 2;
        if t.len() % 2 == 1 {
            t[m]
        } else {
            0.5 * (t[m - 1] + t[m])
        }
    }

    pub fn to_line(&self) -> String {
        format!(
            "variant={} median_s={:.6} trials={} ct_mults={} plain_mults={} additions={} multiplicative={}",
            self.variant,
            self.median_s(),
            self.times_s.len(),
            self.counters.ct_mults,
            self.counters.plain_mults,
            self.counters.additions,
            self.counters.multiplicative()
        )
    }
}

/// Times every variant on the same encrypted input. Trials are interleaved
/// round-robin so slow drift in machine load hits all variants alike.
pub fn bench_variants(
    em: &EncryptedModel,
    ctx: &FvContext,
    evk: &EvaluationKeys,
    inputs: &[Ciphertext],
    variants: &[BenchVariant],
    trials: usize,
) -> Result<Vec<BenchResult>, ModelError> {
    if trials == 0 {
        return Err(ModelError::Config("at least one trial is required".into()));
    }
    let models = variants.iter().map(|v| v.apply(em)).collect::<Result<Vec<_>, _>>()?;
    let mut results: Vec<Option<BenchResult>> = vec![None; variants.len()];
    for _ in 0..trials {
        for ((v, m), slot) in variants.iter().zip(&models).zip(results.iter_mut()) {
            let start = Instant::now();
            let out = encrypted_forward(m, ctx, evk, inputs, v.path())?;
            let dt = start.elapsed().as_secs_f64();
            match slot {
                Some(r) => {
                    r.times_s.push(dt);
                    r.output = out;
                }
                None => {
                    *slot = Some(BenchResult { variant: *v, times_s: vec![dt], counters: out.counters, output: out })
                }
            }
        }
    }
    Ok(results.into_iter().flatten().collect())
}
