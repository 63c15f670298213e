use std::sync::OnceLock;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::*;
use crate::data::synthesize;
use crate::dpsgd::DpConfig;
use crate::fvrns::{EncryptionParams, EvaluationKeys, FvContext, MulPlainPath, OpCounters, PublicKey, SecretKey};
use crate::metrics::auc;

fn all_activations() -> Vec<Activation> {
    vec![
        Activation::Square,
        Activation::swish_poly(),
        Activation::swish_quant(),
        Activation::Relu,
        Activation::Sigmoid,
    ]
}

fn random_model(d: usize, hidden: usize, act: Activation, seed: u64) -> MlpModel {
    let mut m = MlpModel::new(d, hidden, act.clone(), act, seed);
    let mut r = ChaCha20Rng::seed_from_u64(seed ^ 0xabc);
    m.b1.iter_mut().for_each(|b| *b = r.random_range(-0.3..0.3));
    m.b2 = r.random_range(-0.3..0.3);
    m
}

#[test]
fn zero_network_propagates_the_constant() {
    let mut m = MlpModel::with_preset(5, ActivationPreset::SwishQuant, 1);
    m.w1.iter_mut().for_each(|w| *w = 0.0);
    m.w2.iter_mut().for_each(|w| *w = 0.0);
    let (s, cache) = m.forward(&[0.3, 0.1, 0.9, 0.0, 1.0]).unwrap();
    assert!(cache.a1.iter().all(|&a| a == 0.0625));
    assert_eq!(s, 0.0625);
}

#[test]
fn tiny_square_network() {
    let mut m = MlpModel::new(1, 1, Activation::Square, Activation::Square, 0);
    m.w1 = vec![1.0];
    m.w2 = vec![1.0];
    assert_eq!(m.score(&[2.0]).unwrap(), 16.0);
    assert!(matches!(m.score(&[1.0, 2.0]), Err(ModelError::Dimension { expected: 1, found: 2 })));
}

#[test]
fn forward_matches_straight_line_oracle() {
    for (n, act) in all_activations().into_iter().enumerate() {
        let m = random_model(4, 6, act, n as u64);
        let x = [0.2, -0.7, 0.5, 1.0];
        let f = |z: f64| match &m.hidden_act {
            Activation::Square => z * z,
            Activation::Poly(_) => 0.12050344 * z * z + 0.5 * z + 0.153613744,
            Activation::Base2(_) => z * z / 8.0 + z / 2.0 + 1.0 / 16.0,
            Activation::Relu => if z > 0.0 { z } else { 0.0 },
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        };
        let mut out = m.b2;
        for k in 0..6 {
            let mut z = m.b1[k];
            for j in 0..4 {
                z += x[j] * m.w1[j * 6 + k];
            }
            out += m.w2[k] * f(z);
        }
        let want = f(out);
        let got = m.score(&x).unwrap();
        assert!((got - want).abs() < 1e-12 * (1.0 + want.abs()), "{}: {got} vs {want}", m.hidden_act.to_text());
    }
}

#[test]
fn weighted_mse_examples() {
    assert_eq!(weighted_mse(1.0, 1.0, 8.0), 0.0);
    assert_eq!(weighted_mse(0.0, 1.0, 8.0), 8.0);
    assert_eq!(weighted_mse(1.0, 0.0, 8.0), 1.0);
}

#[test]
fn gradients_match_finite_differences() {
    let mut r = ChaCha20Rng::seed_from_u64(77);
    for (n, act) in all_activations().into_iter().enumerate() {
        for trial in 0..3 {
            let m = random_model(3, 5, act.clone(), 10 * n as u64 + trial);
            let x: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
            let y = f64::from(u8::from(trial % 2 == 0));
            let (_, g) = m.example_gradient(&x, y, 8.0).unwrap();
            let p = m.params();
            let h = 1e-5;
            for i in 0..p.len() {
                let mut probe = m.clone();
                let mut q = p.clone();
                q[i] += h;
                probe.set_params(&q);
                let up = weighted_mse(probe.score(&x).unwrap(), y, 8.0);
                q[i] -= 2.0 * h;
                probe.set_params(&q);
                let down = weighted_mse(probe.score(&x).unwrap(), y, 8.0);
                let fd = (up - down) / (2.0 * h);
                let tol = 1e-4 * fd.abs().max(g[i].abs()).max(1e-3);
                assert!((fd - g[i]).abs() <= tol, "{} coord {i}: fd {fd} vs {}", act.to_text(), g[i]);
            }
        }
    }
}

#[test]
fn zero_loss_gives_zero_gradient_and_sums_are_consistent() {
    let mut m = MlpModel::new(3, 4, Activation::Square, Activation::Square, 3);
    m.w2.iter_mut().for_each(|w| *w = 0.0);
    let (loss, g) = m.example_gradient(&[0.1, 0.2, 0.3], 0.0, 8.0).unwrap();
    assert_eq!(loss, 0.0);
    assert!(g.iter().all(|&v| v == 0.0));

    let data = synthesize(16, 3, 0.4, 2.0, 5).unwrap();
    let m = random_model(3, 4, Activation::swish_quant(), 8);
    let per = m.per_example_gradients(&data, 8.0).unwrap();
    let sum: Vec<f64> = (0..m.param_count()).map(|i| per.iter().map(|g| g[i]).sum()).collect();
    let mean_loss = |mm: &MlpModel| {
        (0..data.len()).map(|i| weighted_mse(mm.score(data.row(i)).unwrap(), data.y[i], 8.0)).sum::<f64>()
            / data.len() as f64
    };
    let p = m.params();
    for i in [0, 5, p.len() - 1] {
        let mut probe = m.clone();
        let mut q = p.clone();
        q[i] += 1e-6;
        probe.set_params(&q);
        let up = mean_loss(&probe);
        q[i] -= 2e-6;
        probe.set_params(&q);
        let fd = (up - mean_loss(&probe)) / 2e-6 * data.len() as f64;
        assert!((fd - sum[i]).abs() < 1e-5 * (1.0 + fd.abs()));
    }
}

#[test]
fn text_roundtrips() {
    for act in all_activations() {
        assert_eq!(Activation::parse(&act.to_text()).unwrap(), act);
    }
    let mut m = random_model(3, 4, Activation::swish_quant(), 1);
    m.preprocess_digest = Some("ab12".into());
    let back = MlpModel::from_text(&m.to_text()).unwrap();
    assert_eq!(back, m);
    assert!(MlpModel::from_text("privml-model 1\ninput_dim 2\n").is_err());
    assert!(Activation::parse("base2 2:1").is_err());
    for p in ["square", "swish-poly", "swish-quant", "relu-sigmoid"] {
        assert_eq!(p.parse::<ActivationPreset>().unwrap().name(), p);
    }
}

fn separable() -> crate::data::Dataset {
    let mut r = ChaCha20Rng::seed_from_u64(4);
    let n = 400;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let a: f64 = r.random();
        let b: f64 = r.random();
        if (a + b - 1.0).abs() < 0.1 {
            continue;
        }
        x.extend([a, b]);
        y.push(f64::from(u8::from(a + b > 1.0)));
    }
    crate::data::Dataset::new(x, y, vec!["a".into(), "b".into()]).unwrap()
}

#[test]
fn learns_a_separable_set() {
    let data = separable();
    let cfg = TrainConfig { epochs: 200, batch_size: 32, w_pos: 1.0, lr: 0.01, seed: 3, ..TrainConfig::default() };
    let (m, hist) = train(&data, &cfg).unwrap();
    let scores = m.predict_scores(&data).unwrap();
    let (acc, _) = crate::metrics::accuracy_recall(&scores, &data.y, 0.5).unwrap();
    assert!(acc >= 0.95, "training accuracy {acc}");
    assert_eq!(hist.epochs.len(), 200);
}

#[test]
fn loss_decreases_for_every_preset() {
    let data = separable();
    for preset in ["square", "swish-poly", "swish-quant", "relu-sigmoid"] {
        let cfg = TrainConfig {
            epochs: 10,
            batch_size: 32,
            w_pos: 1.0,
            lr: 0.005,
            activation: preset.parse().unwrap(),
            seed: 1,
            ..TrainConfig::default()
        };
        let (_, hist) = train(&data, &cfg).unwrap();
        let first = hist.epochs.first().unwrap().loss;
        let last = hist.epochs.last().unwrap().loss;
        assert!(last < first, "{preset}: {first} -> {last}");
    }
}

fn dp_config() -> DpConfig {
    DpConfig { clip: 1.0, sigma: 1.0, lot_size: 0, dataset_size: 0, delta: 1e-5, eps_budget: 0.0, poisson: false }
}

#[test]
fn private_training_respects_the_budget() {
    let data = synthesize(500, 4, 0.3, 4.0, 2).unwrap();
    let cfg = TrainConfig { epochs: 3, batch_size: 50, dp: Some(dp_config()), seed: 9, ..TrainConfig::default() };
    let (m, hist) = train(&data, &cfg).unwrap();
    let init = MlpModel::with_preset(4, ActivationPreset::SwishQuant, 9);
    assert_eq!(m, init);
    assert!(hist.budget_exhausted && hist.steps.is_empty());
    assert_eq!(hist.privacy, Some((0.0, 1e-5)));

    let cfg = TrainConfig { dp: Some(DpConfig { eps_budget: 2.0, sigma: 3.0, ..dp_config() }), epochs: 200, ..cfg };
    let (_, hist) = train(&data, &cfg).unwrap();
    let (eps, _) = hist.privacy.unwrap();
    assert!(eps <= 2.0 && eps > 0.0);
    assert!(hist.budget_exhausted);
}

#[test]
fn training_is_reproducible() {
    let data = synthesize(300, 4, 0.3, 4.0, 2).unwrap();
    for dp in [None, Some(DpConfig { eps_budget: 5.0, ..dp_config() })] {
        let cfg = TrainConfig { epochs: 3, batch_size: 30, dp, seed: 5, ..TrainConfig::default() };
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.predict_scores(&data).unwrap(), b.0.predict_scores(&data).unwrap());
    }
}

#[test]
fn divergence_is_reported() {
    let mut data = synthesize(64, 3, 0.5, 1.0, 1).unwrap();
    data.x.iter_mut().for_each(|v| *v *= 1e80);
    let cfg = TrainConfig { epochs: 2, batch_size: 16, activation: ActivationPreset::Square, ..TrainConfig::default() };
    assert!(matches!(train(&data, &cfg), Err(ModelError::Divergence { .. })));
}

#[test]
fn predictions_are_batch_invariant() {
    let data = synthesize(20, 3, 0.5, 1.0, 1).unwrap();
    let m = random_model(3, 4, Activation::swish_quant(), 2);
    let all = m.predict_scores(&data).unwrap();
    let one = m.predict_scores(&data.subset(&[7])).unwrap();
    assert_eq!(one[0], all[7]);
    assert_eq!(one[0], m.score(data.row(7)).unwrap());
}

#[test]
fn quantization_examples() {
    let mut m = random_model(3, 4, Activation::swish_quant(), 6);
    m.w1[0] = 0.5;
    let em = quantize_model(&m, QuantConfig::default()).unwrap();
    assert_eq!(em.w1[0], 16384);
    for (q, w) in em.w1.iter().zip(&m.w1) {
        assert!((*q as f64 / 32768.0 - w).abs() <= 2f64.powi(-16));
    }
    let exps: Vec<u32> = em.meta.schedule.iter().map(|(_, e)| *e).collect();
    assert_eq!(exps, vec![15, 30, 63, 78, 159]);
    let sq = em.with_activations(QuantActivation::Square, QuantActivation::Square);
    assert_eq!(sq.final_exponent(), 150);
    let relu = MlpModel::with_preset(3, ActivationPreset::ReluSigmoid, 1);
    assert!(matches!(quantize_model(&relu, QuantConfig::default()), Err(ModelError::Config(_))));
}

/// Independent fixed-point evaluation with i128 arithmetic for p*.
fn oracle_pstar(em: &EncryptedModel, x: &[f64]) -> BigInt {
    let xq: Vec<i128> = x.iter().map(|v| (v * 32768.0).round() as i128).collect();
    let h = em.hidden;
    let mut s = BigInt::from(em.b2) << 63;
    for k in 0..h {
        let mut z: i128 = i128::from(em.b1[k]) << 15;
        for j in 0..em.d {
            z += xq[j] * i128::from(em.w1[j * h + k]);
        }
        // p*(z) at exponent 63: z^2/8 -> z^2 (exp 63), z/2 -> z·2^32, 1/16 -> 2^59
        let z = BigInt::from(z);
        let a = &z * &z + (&z << 32) + (BigInt::from(1) << 59);
        s += a * em.w2[k];
    }
    &s * &s + (&s << 80) + (BigInt::from(1) << 155)
}

#[test]
fn integer_forward_matches_oracle_and_float() {
    let data = synthesize(60, 6, 0.3, 3.0, 11).unwrap();
    let cfg = TrainConfig { epochs: 5, batch_size: 20, seed: 2, ..TrainConfig::default() };
    let (m, _) = train(&data, &cfg).unwrap();
    let em = quantize_model(&m, QuantConfig::default()).unwrap();
    for i in 0..data.len() {
        let x = data.row(i);
        let int = em.forward_int(&em.quantize_input(x).unwrap()).unwrap();
        assert_eq!(int, oracle_pstar(&em, x));
        let (q, f) = (em.forward(x).unwrap(), m.score(x).unwrap());
        assert!((q - f).abs() <= 2f64.powi(-10) * (1.0 + f.abs()), "{q} vs {f}");
    }
    let fa = auc(&m.predict_scores(&data).unwrap(), &data.y).unwrap();
    let qa = auc(&em.predict_scores(&data).unwrap(), &data.y).unwrap();
    assert!((fa - qa).abs() <= 0.005);
    assert!(em.quantize_input(&[2.0; 6]).is_err());
}

#[test]
fn capacity_failure_names_the_stage() {
    let m = random_model(3, 4, Activation::swish_quant(), 6);
    let em = quantize_model(&m, QuantConfig::default()).unwrap();
    assert!(em.check_capacity(8192, &[576460752303423433, 576460752303423389]).is_ok());
    match em.check_capacity(8192, &[65537]) {
        Err(ModelError::Encoding(crate::encoding::EncodingError::Capacity { stage, .. })) => {
            assert!(stage.starts_with("hidden_activation") || stage.starts_with("layer"), "{stage}")
        }
        other => panic!("expected capacity error, got {other:?}"),
    }
}

#[test]
fn encrypted_model_file_roundtrip() {
    let m = random_model(3, 4, Activation::swish_quant(), 6);
    let mut em = quantize_model(&m, QuantConfig::default()).unwrap();
    em.params_digest = Some([7; 32]);
    let mut buf = Vec::new();
    em.write_to(&mut buf).unwrap();
    assert_eq!(EncryptedModel::read_from(&mut buf.as_slice()).unwrap(), em);
    buf[20] ^= 4;
    assert!(EncryptedModel::read_from(&mut buf.as_slice()).is_err());
}

struct Keys {
    ctx: FvContext,
    sk: SecretKey,
    pk: PublicKey,
    evk: EvaluationKeys,
}

fn keys() -> &'static Keys {
    static K: OnceLock<Keys> = OnceLock::new();
    K.get_or_init(|| {
        let ctx = FvContext::new(EncryptionParams::with_degree(1024)).unwrap();
        let (sk, pk, evk) = ctx.keygen(3);
        Keys { ctx, sk, pk, evk }
    })
}

#[test]
fn encrypted_forward_is_exact() {
    let k = keys();
    let data = synthesize(6, 3, 0.5, 2.0, 1).unwrap();
    let m = random_model(3, HIDDEN, Activation::swish_quant(), 12);
    let mut em = quantize_model(&m, QuantConfig::default()).unwrap();
    em.bind(&k.ctx).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for i in 0..3 {
        let x = data.row(i);
        let cts = encrypt_input(&em, &k.ctx, &k.pk, x, &mut rng).unwrap();
        for path in [MulPlainPath::Generic, MulPlainPath::Shift] {
            let out = encrypted_forward(&em, &k.ctx, &k.evk, &cts, path).unwrap();
            assert!(k.ctx.noise_budget(&out, &k.sk).unwrap() > 0.0);
            let dec = decrypt_score(&k.ctx, &k.sk, &out).unwrap();
            assert_eq!(dec.integer, em.forward_int(&em.quantize_input(x).unwrap()).unwrap());
            assert_eq!(dec.exponent, 159);
            assert_eq!(out.counters, expected_counters(&em));
            assert_eq!(out.counters.ct_mults, 33);
            assert_eq!(out.counters.plain_mults, 32 * 3 + 32 + 66);
        }
    }
    let zero = encrypt_input(&em, &k.ctx, &k.pk, &[0.0; 3], &mut rng).unwrap();
    let out = encrypted_forward(&em, &k.ctx, &k.evk, &zero, MulPlainPath::Shift).unwrap();
    let dec = decrypt_score(&k.ctx, &k.sk, &out).unwrap();
    assert_eq!(dec.integer, em.forward_int(&vec![BigInt::from(0); 3]).unwrap());
}

#[test]
fn square_circuit_counts() {
    let k = keys();
    let m = random_model(2, HIDDEN, Activation::Square, 4);
    let em = quantize_model(&m, QuantConfig::default()).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let x = [0.25, 0.75];
    let cts = encrypt_input(&em, &k.ctx, &k.pk, &x, &mut rng).unwrap();
    let out = encrypted_forward(&em, &k.ctx, &k.evk, &cts, MulPlainPath::Generic).unwrap();
    assert_eq!(decrypt_score(&k.ctx, &k.sk, &out).unwrap().integer, em.forward_int(&em.quantize_input(&x).unwrap()).unwrap());
    assert_eq!(out.counters, OpCounters { ct_mults: 33, plain_mults: 32 * 2 + 32, additions: 32 + 31 + 33 });
    assert_eq!(out.counters, expected_counters(&em));
    assert!(encrypted_forward(&em, &k.ctx, &k.evk, &cts[..1], MulPlainPath::Generic).is_err());
}
