use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::*;
use crate::data::Dataset;

/// log E_{z~N(0,σ²)}[((1−q) + q·exp((2z−1)/(2σ²)))^α] by trapezoid quadrature
/// in log space.
fn quadrature_log_moment(q: f64, sigma: f64, alpha: f64) -> f64 {
    let s2 = sigma * sigma;
    let lo = -40.0 * sigma - 1.0;
    let hi = 40.0 * sigma + alpha + 1.0;
    let n = 400_000;
    let h = (hi - lo) / n as f64;
    let log_f = |z: f64| {
        let log_ratio = (2.0 * z - 1.0) / (2.0 * s2);
        let mix = if log_ratio > 0.0 {
            log_ratio + ((1.0 - q) * (-log_ratio).exp() + q).ln()
        } else {
            (1.0 - q + q * log_ratio.exp()).ln()
        };
        -z * z / (2.0 * s2) - 0.5 * (2.0 * std::f64::consts::PI * s2).ln() + alpha * mix
    };
    let vals: Vec<f64> = (0..=n).map(|i| log_f(lo + i as f64 * h)).collect();
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = vals
        .iter()
        .enumerate()
        .map(|(i, v)| if i == 0 || i == n { 0.5 } else { 1.0 } * (v - m).exp())
        .sum();
    m + (sum * h).ln()
}

fn quadrature_epsilon(q: f64, sigma: f64, steps: u64, delta: f64) -> f64 {
    let orders = default_orders();
    let moments: Vec<f64> = orders.iter().map(|&a| steps as f64 * quadrature_log_moment(q, sigma, a)).collect();
    orders
        .iter()
        .zip(&moments)
        .map(|(a, m)| (m + (1.0 / delta).ln()) / (a - 1.0))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn clip_examples() {
    assert_eq!(clip(&[0.3, 0.4], 1.0), vec![0.3, 0.4]);
    let c = clip(&[3.0, 4.0], 1.0);
    assert!((c[0] - 0.6).abs() < 1e-15 && (c[1] - 0.8).abs() < 1e-15);
    assert_eq!(clip(&[3.0, 4.0], 5.0), vec![3.0, 4.0]);
    assert_eq!(clip(&[1.0, -2.0], f64::INFINITY), vec![1.0, -2.0]);
}

proptest! {
    #[test]
    fn clip_bounds_norm_and_keeps_direction(g in prop::collection::vec(-100.0f64..100.0, 1..20), c in 0.01f64..10.0) {
        let out = clip(&g, c);
        let (n_in, n_out) = (l2_norm(&g), l2_norm(&out));
        prop_assert!(n_out <= n_in.min(c) * (1.0 + 1e-12));
        prop_assert!((n_out - n_in.min(c)).abs() <= 1e-9 * (1.0 + c));
        if n_in > 0.0 {
            let cos = g.iter().zip(&out).map(|(a, b)| a * b).sum::<f64>() / (n_in * n_out);
            prop_assert!((cos - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn log_moments_additive(q in 0.001f64..0.5, sigma in 0.8f64..6.0, t in 1u64..50) {
        let mut stepwise = PrivacyAccountant::default();
        for _ in 0..t {
            stepwise.update(q, sigma);
        }
        let mut one = PrivacyAccountant::default();
        one.update(q, sigma);
        for (a, b) in stepwise.log_moments().iter().zip(one.log_moments()) {
            prop_assert!((a - t as f64 * b).abs() <= 1e-9 * a.abs().max(1e-300));
        }
    }
}

#[test]
fn sanitize_without_noise_is_the_mean() {
    let g = vec![vec![1.0, 2.0], vec![3.0, -4.0], vec![0.5, 0.0]];
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let s = sanitize(&g, 0.0, 1.0, 3, 2, &mut rng);
    assert_eq!(s, vec![4.5 / 3.0, -2.0 / 3.0]);
    let single = sanitize(&[vec![0.1, -0.2]], 0.0, 1.0, 1, 2, &mut rng);
    assert_eq!(single, vec![0.1, -0.2]);
}

#[test]
fn sanitize_noise_std() {
    let (sigma, c, l) = (1.5, 2.0, 4);
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let zero = vec![vec![0.0; 3]; l];
    let draws: Vec<f64> = (0..10_000).map(|_| sanitize(&zero, sigma, c, l, 3, &mut rng)[1]).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    let target = sigma * c / l as f64;
    assert!((var.sqrt() / target - 1.0).abs() < 0.05, "std {} vs {target}", var.sqrt());
}

#[test]
fn neighbouring_batches_have_bounded_sensitivity() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let c = 1.0;
    for _ in 0..100 {
        let dim = rng.random_range(1..30);
        let batch: Vec<Vec<f64>> =
            (0..16).map(|_| (0..dim).map(|_| rng.random_range(-20.0..20.0)).collect()).collect();
        let mut other = batch.clone();
        let k = rng.random_range(0..16);
        other[k] = (0..dim).map(|_| rng.random_range(-20.0..20.0)).collect();
        let (a, b) = (clipped_sum(&batch, c), clipped_sum(&other, c));
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        // Replacing one example moves the sum by at most 2C; adding or
        // removing one example (the neighbouring relation used here) by C.
        let mut removed = batch.clone();
        removed.remove(k);
        let r = clipped_sum(&removed, c);
        let d_remove: Vec<f64> = a.iter().zip(&r).map(|(x, y)| x - y).collect();
        assert!(l2_norm(&d_remove) <= c * (1.0 + 1e-12));
        assert!(l2_norm(&diff) <= 2.0 * c * (1.0 + 1e-12));
    }
}

#[test]
fn log_moments_match_quadrature() {
    for &(q, sigma) in &[(256.0 / 75000.0, 4.0), (0.01, 1.1), (0.05, 2.0), (1.0, 3.0)] {
        for &alpha in &[1.25, 1.5, 2.0, 3.5, 8.0, 16.0, 32.0, 64.0] {
            let got = log_moment(q, sigma, alpha);
            let want = quadrature_log_moment(q, sigma, alpha);
            let rel = ((got - want) / want).abs();
            assert!(rel < 0.005, "q={q} sigma={sigma} alpha={alpha}: {got} vs {want}");
        }
    }
}

#[test]
fn epsilon_matches_quadrature_for_one_epoch() {
    let q = 256.0 / 75000.0;
    let steps = (75000.0f64 / 256.0).round() as u64;
    let got = epsilon_for(q, 4.0, steps, 1e-5);
    let want = quadrature_epsilon(q, 4.0, steps, 1e-5);
    assert!(((got - want) / want).abs() < 0.01, "{got} vs {want}");
}

#[test]
fn epsilon_orderings() {
    let q = 0.01;
    assert_eq!(PrivacyAccountant::default().epsilon(1e-5), 0.0);
    let eps: Vec<f64> = [10, 50, 100, 500, 1000].iter().map(|&t| epsilon_for(q, 1.5, t, 1e-5)).collect();
    assert!(eps.windows(2).all(|w| w[0] < w[1]), "{eps:?}");
    assert!(epsilon_for(q, 2.0, 100, 1e-5) < epsilon_for(q, 1.0, 100, 1e-5));
    assert!(epsilon_for(0.02, 1.5, 100, 1e-5) > epsilon_for(0.01, 1.5, 100, 1e-5));
    assert!(epsilon_for(q, 1.5, 100, 1e-3) < epsilon_for(q, 1.5, 100, 1e-6));
    assert_eq!(epsilon_for(q, 0.0, 1, 1e-5), f64::INFINITY);
}

#[test]
fn sigma_search_hits_target() {
    let (q, t, delta) = (0.01, 1000, 1e-5);
    let s = sigma_for_epsilon(q, t, delta, 4.0);
    assert!(epsilon_for(q, s, t, delta) <= 4.0);
    assert!(epsilon_for(q, s * 0.99, t, delta) > 4.0);
}

/// Least squares on one weight vector; gradients are exact.
struct Linear {
    w: Vec<f64>,
}

impl GradientModel for Linear {
    fn params(&self) -> Vec<f64> {
        self.w.clone()
    }
    fn set_params(&mut self, p: &[f64]) {
        self.w = p.to_vec();
    }
    fn example_gradient(&self, x: &[f64], y: f64) -> (f64, Vec<f64>) {
        let r = x.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>() - y;
        (r * r, x.iter().map(|a| 2.0 * r * a).collect())
    }
}

fn toy() -> Dataset {
    crate::data::synthesize(200, 4, 0.3, 3.0, 9).unwrap()
}

fn config(n: usize) -> DpConfig {
    DpConfig { clip: 1.0, sigma: 1.0, lot_size: 20, dataset_size: n, delta: 1e-5, eps_budget: 10.0, poisson: false }
}

#[test]
fn zero_budget_stops_before_first_step() {
    let data = toy();
    let cfg = DpConfig { eps_budget: 0.0, ..config(data.len()) };
    let mut m = Linear { w: vec![0.1; 4] };
    let mut opt = Adam::new(0.01, 4);
    let mut acct = PrivacyAccountant::default();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let out = private_step(&mut m, &data, &cfg, &mut opt, &mut acct, &mut rng).unwrap();
    assert_eq!(out, StepOutcome::BudgetExhausted { epsilon: 0.0 });
    assert_eq!(m.w, vec![0.1; 4]);
    assert_eq!(acct.steps(), 0);
}

#[test]
fn budget_is_never_exceeded() {
    let data = toy();
    let cfg = DpConfig { eps_budget: 1.0, sigma: 4.0, ..config(data.len()) };
    let mut m = Linear { w: vec![0.0; 4] };
    let mut opt = Adam::new(0.01, 4);
    let mut acct = PrivacyAccountant::default();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut steps = 0;
    loop {
        match private_step(&mut m, &data, &cfg, &mut opt, &mut acct, &mut rng).unwrap() {
            StepOutcome::Stepped(r) => {
                assert!(r.epsilon <= 1.0);
                steps += 1;
            }
            StepOutcome::BudgetExhausted { epsilon } => {
                assert!(epsilon <= 1.0);
                break;
            }
        }
        assert!(steps < 100_000);
    }
    assert!(steps > 0);
}

#[test]
fn degenerate_config_is_plain_adam() {
    let data = toy();
    let cfg = DpConfig {
        clip: f64::INFINITY,
        sigma: 0.0,
        lot_size: data.len(),
        eps_budget: f64::INFINITY,
        ..config(data.len())
    };
    let mut m = Linear { w: vec![0.2, -0.1, 0.0, 0.3] };
    let mut expected = m.w.clone();
    let mut opt = Adam::new(0.05, 4);
    let mut acct = PrivacyAccountant::default();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    assert!(matches!(
        private_step(&mut m, &data, &cfg, &mut opt, &mut acct, &mut rng).unwrap(),
        StepOutcome::Stepped(_)
    ));
    let reference = Linear { w: expected.clone() };
    let mut grad = vec![0.0; 4];
    for i in 0..data.len() {
        let (_, g) = reference.example_gradient(data.row(i), data.y[i]);
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    grad.iter_mut().for_each(|g| *g /= data.len() as f64);
    Adam::new(0.05, 4).step(&mut expected, &grad);
    for (a, b) in m.w.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn seeded_runs_are_bit_identical() {
    let data = toy();
    let run = |poisson: bool| {
        let cfg = DpConfig { poisson, ..config(data.len()) };
        let mut m = Linear { w: vec![0.0; 4] };
        let mut opt = Adam::new(0.01, 4);
        let mut acct = PrivacyAccountant::default();
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let mut traj = Vec::new();
        for _ in 0..20 {
            private_step(&mut m, &data, &cfg, &mut opt, &mut acct, &mut rng).unwrap();
            traj.extend(m.w.iter().map(|v| v.to_bits()));
        }
        traj
    };
    assert_eq!(run(false), run(false));
    assert_eq!(run(true), run(true));
}

#[test]
fn invalid_configs_rejected() {
    let ok = config(100);
    assert!(ok.validate().is_ok());
    assert!(DpConfig { clip: 0.0, ..ok.clone() }.validate().is_err());
    assert!(DpConfig { lot_size: 0, ..ok.clone() }.validate().is_err());
    assert!(DpConfig { lot_size: 101, ..ok.clone() }.validate().is_err());
    assert!(DpConfig { delta: 1.0, ..ok.clone() }.validate().is_err());
    assert!(DpConfig { clip: f64::INFINITY, ..ok }.validate().is_err());
}

#[test]
fn lots_have_the_requested_shape() {
    let cfg = config(1000);
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let lot = sample_lot(&cfg, &mut rng);
    assert_eq!(lot.len(), 20);
    assert!(lot.windows(2).all(|w| w[0] < w[1]));
    let p = DpConfig { poisson: true, ..cfg };
    let sizes: Vec<usize> = (0..200).map(|_| sample_lot(&p, &mut rng).len()).collect();
    let mean = sizes.iter().sum::<usize>() as f64 / 200.0;
    assert!((mean - 20.0).abs() < 2.0);
}
