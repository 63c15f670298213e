//! Differentially private SGD: per-example clipping, Gaussian sanitization,
//! lot sampling, Adam updates and privacy accounting.

mod accountant;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::data::Dataset;

pub use accountant::{
    default_orders, epsilon_for, epsilon_from_moments, log_moment, sigma_for_epsilon, PrivacyAccountant,
};

#[derive(Debug, Error)]
pub enum DpError {
    #[error("invalid DP configuration: {0}")]
    Config(String),
    #[error("gradient length {found} does not match model size {expected}")]
    GradientLength { expected: usize, found: usize },
}

/// Parameters of clipped, noised SGD over sampled lots.
#[derive(Clone, Debug, PartialEq)]
pub struct DpConfig {
    /// Per-example L2 clipping bound `C`; infinity disables clipping.
    pub clip: f64,
    /// Noise multiplier `sigma`; the noise std is `sigma * C`.
    pub sigma: f64,
    pub lot_size: usize,
    pub dataset_size: usize,
    pub delta: f64,
    /// Training halts before a step that would push epsilon above this.
    pub eps_budget: f64,
    /// Poisson sampling instead of fixed-size lots.
    pub poisson: bool,
}

impl DpConfig {
    pub fn sampling_probability(&self) -> f64 {
        self.lot_size as f64 / self.dataset_size as f64
    }

    pub fn validate(&self) -> Result<(), DpError> {
        let bad = |m: &str| Err(DpError::Config(m.into()));
        if !(self.clip > 0.0) {
            return bad("clip bound must be positive");
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return bad("noise multiplier must be finite and nonnegative");
        }
        if self.sigma > 0.0 && self.clip.is_infinite() {
            return bad("noise needs a finite clip bound");
        }
        if self.lot_size == 0 || self.lot_size > self.dataset_size {
            return bad("lot size must be in 1..=dataset size");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.eps_budget >= 0.0) {
            return bad("epsilon budget must be nonnegative");
        }
        Ok(())
    }
}

pub fn l2_norm(g: &[f64]) -> f64 {
    g.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `g / max(1, |g| / C)`; gradients within the bound are returned unchanged.
pub fn clip(g: &[f64], c: f64) -> Vec<f64> {
    let norm = l2_norm(g);
    if norm <= c {
        return g.to_vec();
    }
    let f = c / norm;
    g.iter().map(|x| x * f).collect()
}

/// Sum of per-example gradients after clipping each to `C`.
pub fn clipped_sum(grads: &[Vec<f64>], c: f64) -> Vec<f64> {
    let dim = grads.first().map_or(0, Vec::len);
    let mut sum = vec![0.0; dim];
    for g in grads {
        for (s, x) in sum.iter_mut().zip(clip(g, c)) {
            *s += x;
        }
    }
    sum
}

/// `(sum_i g_i + N(0, sigma^2 C^2 I)) / L` over already clipped gradients.
pub fn sanitize(clipped: &[Vec<f64>], sigma: f64, c: f64, lot_size: usize, dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    for g in clipped {
        for (s, x) in sum.iter_mut().zip(g) {
            *s += x;
        }
    }
    let std = sigma * c;
    for s in &mut sum {
        if std > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            *s += std * z;
        }
        *s /= lot_size as f64;
    }
    sum
}

/// Models trained by [`private_step`]: a flat parameter vector and exact
/// per-example loss gradients.
pub trait GradientModel {
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]);
    /// Loss and its gradient for one example.
    fn example_gradient(&self, x: &[f64], y: f64) -> (f64, Vec<f64>);
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, dim: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / b1t;
            let vh = self.v[i] / b2t;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Indices of one lot: `L` distinct rows, or each row independently with
/// probability `L / N` when Poisson sampling is on.
pub fn sample_lot(cfg: &DpConfig, rng: &mut impl Rng) -> Vec<usize> {
    if cfg.poisson {
        let q = cfg.sampling_probability();
        (0..cfg.dataset_size).filter(|_| rng.random::<f64>() < q).collect()
    } else {
        let mut idx = sample(rng, cfg.dataset_size, cfg.lot_size).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub loss: f64,
    pub epsilon: f64,
    pub grad_norm_median: f64,
}

impl StepRecord {
    pub fn to_line(&self) -> String {
        format!(
            "step={} loss={:.6} epsilon={:.6} grad_norm_median={:.6}",
            self.step, self.loss, self.epsilon, self.grad_norm_median
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Stepped(StepRecord),
    /// The next step would exceed the budget; nothing was changed.
    BudgetExhausted { epsilon: f64 },
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample a lot, clip and sanitize its gradients, apply Adam and charge the
/// accountant. Refuses to step once the budget would be exceeded.
pub fn private_step<M: GradientModel>(
    model: &mut M,
    data: &Dataset,
    cfg: &DpConfig,
    opt: &mut Adam,
    acct: &mut PrivacyAccountant,
    rng: &mut impl Rng,
) -> Result<StepOutcome, DpError> {
    cfg.validate()?;
    if data.len() != cfg.dataset_size {
        return Err(DpError::Config(format!(
            "dataset has {} rows, configuration says {}",
            data.len(),
            cfg.dataset_size
        )));
    }
    let q = cfg.sampling_probability();
    if acct.epsilon_after(q, cfg.sigma, 1, cfg.delta) > cfg.eps_budget {
        return Ok(StepOutcome::BudgetExhausted {
            epsilon: acct.epsilon(cfg.delta),
        });
    }
    let lot = sample_lot(cfg, rng);
    let mut params = model.params();
    let dim = params.len();
    let mut clipped = Vec::with_capacity(lot.len());
    let mut norms = Vec::with_capacity(lot.len());
    let mut loss = 0.0;
    for &i in &lot {
        let (l, g) = model.example_gradient(data.row(i), data.y[i]);
        if g.len() != dim {
            return Err(DpError::GradientLength { expected: dim, found: g.len() });
        }
        loss += l;
        norms.push(l2_norm(&g));
        clipped.push(clip(&g, cfg.clip));
    }
    let grad = sanitize(&clipped, cfg.sigma, cfg.clip, cfg.lot_size, dim, rng);
    opt.step(&mut params, &grad);
    model.set_params(&params);
    acct.update(q, cfg.sigma);
    Ok(StepOutcome::Stepped(StepRecord {
        step: acct.steps(),
        loss: if lot.is_empty() { 0.0 } else { loss / lot.len() as f64 },
        epsilon: acct.epsilon(cfg.delta),
        grad_norm_median: median(&mut norms),
    }))
}

#[cfg(test)]
mod tests;
