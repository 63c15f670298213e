//! Log-moment (Renyi) accounting for the subsampled Gaussian mechanism.
//!
//! For sampling probability `q` and noise multiplier `sigma`, one step has
//! log-moment `log A_alpha` with
//! `A_alpha = E_{z ~ N(0, sigma^2)} [((1 - q) + q exp((2z - 1) / (2 sigma^2)))^alpha]`.
//! Integer orders use the binomial expansion; fractional orders use the
//! two-sided series with `erfc` tails.

use std::f64::consts::{LN_2, PI};

/// Default Renyi orders.
pub fn default_orders() -> Vec<f64> {
    let mut v = vec![1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0, 3.5, 4.0, 4.5];
    v.extend((5..=12).map(f64::from));
    v.extend([14.0, 16.0, 20.0, 24.0, 28.0, 32.0, 40.0, 48.0, 56.0, 64.0]);
    v
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

// log(exp(a) - exp(b)) for a >= b
fn log_sub(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a <= b {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp()).ln_1p()
}

/// `ln(erfc(x))` accurate far into the tail.
pub(crate) fn log_erfc(x: f64) -> f64 {
    if x < 25.0 {
        return libm::erfc(x).ln();
    }
    // erfc(x) ~ exp(-x^2) / (x sqrt(pi)) * sum_k (-1)^k (2k-1)!! / (2x^2)^k
    let y = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        term *= -((2 * k - 1) as f64) * y;
        sum += term;
    }
    -x * x - x.ln() - 0.5 * PI.ln() + sum.ln()
}

fn log_a_int(q: f64, sigma: f64, alpha: u64) -> f64 {
    let mut acc = f64::NEG_INFINITY;
    let (lq, l1q) = (q.ln(), (-q).ln_1p());
    let mut log_binom = 0.0f64;
    for i in 0..=alpha {
        if i > 0 {
            log_binom += ((alpha - i + 1) as f64).ln() - (i as f64).ln();
        }
        let fi = i as f64;
        let term = log_binom + fi * lq + (alpha - i) as f64 * l1q + (fi * fi - fi) / (2.0 * sigma * sigma);
        acc = log_add(acc, term);
    }
    acc
}

fn log_a_frac(q: f64, sigma: f64, alpha: f64) -> f64 {
    let (mut a0, mut a1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let z0 = sigma * sigma * (1.0 / q - 1.0).ln() + 0.5;
    let (lq, l1q) = (q.ln(), (-q).ln_1p());
    let s2 = 2.0f64.sqrt() * sigma;
    let mut coef = 1.0f64;
    let mut i = 0.0f64;
    loop {
        if i > 0.0 {
            coef *= (alpha - i + 1.0) / i;
        }
        if coef == 0.0 {
            break;
        }
        let log_coef = coef.abs().ln();
        let j = alpha - i;
        let t0 = log_coef + i * lq + j * l1q;
        let t1 = log_coef + j * lq + i * l1q;
        let e0 = -LN_2 + log_erfc((i - z0) / s2);
        let e1 = -LN_2 + log_erfc((z0 - j) / s2);
        let s0 = t0 + (i * i - i) / (2.0 * sigma * sigma) + e0;
        let s1 = t1 + (j * j - j) / (2.0 * sigma * sigma) + e1;
        if coef > 0.0 {
            a0 = log_add(a0, s0);
            a1 = log_add(a1, s1);
        } else {
            a0 = log_sub(a0, s0);
            a1 = log_sub(a1, s1);
        }
        i += 1.0;
        if s0.max(s1) < -30.0 || i > 10_000.0 {
            break;
        }
    }
    log_add(a0, a1)
}

/// Single-step log-moment `log A_alpha` of the subsampled Gaussian.
pub fn log_moment(q: f64, sigma: f64, alpha: f64) -> f64 {
    if q == 0.0 {
        return 0.0;
    }
    if sigma == 0.0 {
        return f64::INFINITY;
    }
    if q >= 1.0 {
        return alpha * (alpha - 1.0) / (2.0 * sigma * sigma);
    }
    if alpha.fract() == 0.0 {
        log_a_int(q, sigma, alpha as u64)
    } else {
        log_a_frac(q, sigma, alpha)
    }
}

/// Accumulated log-moments over a fixed order grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PrivacyAccountant {
    orders: Vec<f64>,
    log_moments: Vec<f64>,
    steps: u64,
}

impl Default for PrivacyAccountant {
    fn default() -> Self {
        Self::new(default_orders())
    }
}

impl PrivacyAccountant {
    /// Orders must exceed one.
    pub fn new(orders: Vec<f64>) -> Self {
        assert!(orders.iter().all(|&a| a > 1.0), "Renyi orders must exceed 1");
        let n = orders.len();
        Self {
            orders,
            log_moments: vec![0.0; n],
            steps: 0,
        }
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn log_moments(&self) -> &[f64] {
        &self.log_moments
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Add one step of the subsampled Gaussian with probability `q` and
    /// noise multiplier `sigma`.
    pub fn update(&mut self, q: f64, sigma: f64) {
        self.compose(q, sigma, 1);
    }

    /// Add `steps` identical steps.
    pub fn compose(&mut self, q: f64, sigma: f64, steps: u64) {
        if steps == 0 {
            return;
        }
        for (m, &a) in self.log_moments.iter_mut().zip(&self.orders) {
            *m += steps as f64 * log_moment(q, sigma, a);
        }
        self.steps += steps;
    }

    /// `min_alpha (log A_total + ln(1/delta)) / (alpha - 1)`; zero before
    /// any step.
    pub fn epsilon(&self, delta: f64) -> f64 {
        if self.steps == 0 {
            return 0.0;
        }
        epsilon_from_moments(&self.orders, &self.log_moments, delta)
    }

    /// Epsilon after `extra` more steps, without mutating the state.
    pub fn epsilon_after(&self, q: f64, sigma: f64, extra: u64, delta: f64) -> f64 {
        let mut next = self.clone();
        next.compose(q, sigma, extra);
        next.epsilon(delta)
    }
}

pub fn epsilon_from_moments(orders: &[f64], log_moments: &[f64], delta: f64) -> f64 {
    let ld = (1.0 / delta).ln();
    orders
        .iter()
        .zip(log_moments)
        .map(|(&a, &m)| (m + ld) / (a - 1.0))
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

/// Epsilon of `steps` steps at `(q, sigma)`.
pub fn epsilon_for(q: f64, sigma: f64, steps: u64, delta: f64) -> f64 {
    let mut acct = PrivacyAccountant::default();
    acct.compose(q, sigma, steps);
    acct.epsilon(delta)
}

/// Smallest noise multiplier (to 1e-6 relative) reaching `target` epsilon,
/// by bisection; epsilon is decreasing in sigma.
pub fn sigma_for_epsilon(q: f64, steps: u64, delta: f64, target: f64) -> f64 {
    assert!(target > 0.0, "target epsilon must be positive");
    let mut hi = 1.0;
    while epsilon_for(q, hi, steps, delta) > target {
        hi *= 2.0;
        assert!(hi < 1e6, "no noise multiplier reaches epsilon {target}");
    }
    let mut lo = hi / 2.0;
    while lo > 1e-3 && epsilon_for(q, lo, steps, delta) <= target {
        lo /= 2.0;
    }
    while (hi - lo) > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if epsilon_for(q, mid, steps, delta) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
