//! End-to-end acceptance checks, one line per criterion.
//!
//! Run with `cargo test --test acceptance`; pass criterion numbers as extra
//! arguments (`-- 2 4 6`) to run a subset. The diabetes check uses the CSV at
//! `$PRIVML_DIABETES_CSV` or `data/diabetic_data.csv` when one exists and
//! falls back to synthetic properties otherwise.

#![allow(clippy::needless_range_loop)]

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use privml::data::{
    load_records, mimic_raw_scales, preprocess_apply, preprocess_fit, synthesize, Dataset, FeatureSpec,
    MinMaxScaler, PreprocessOptions, PreprocessSpec,
};
use privml::dpsgd::{clipped_sum, default_orders, epsilon_for, l2_norm, log_moment, sigma_for_epsilon, DpConfig};
use privml::encoding::{decode_plain_int, encode_int_plain};
use privml::fvrns::{EncryptionParams, FvContext, MulPlainPath, Plaintext, ScalingPath};
use privml::metrics::{accuracy_recall, auc, grad_norm_stats};
use privml::model::{
    bench_variants, decrypt_score, encrypt_input, encrypted_forward, gradient_norms, quantize_model, train,
    ActivationPreset, BenchVariant, MlpModel, QuantConfig, TrainConfig,
};
use privml::polyapprox::{ApproxConfig, ApproxReport, PUBLISHED_P};
use privml::polyring::arith::ntt_primes_below;
use privml::polyring::{MulMethod, RnsBase, RnsPoly};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn rel(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn criterion_1() -> Check {
    let ctx = FvContext::new(EncryptionParams::with_degree(8192)).map_err(err)?;
    let (sk, pk, evk) = ctx.keygen(101);
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let bound = 1i64 << 20;
    let pairs = 1000;
    let mut min_budget = f64::INFINITY;
    for i in 0..pairs {
        let a = rng.random_range(-bound..=bound);
        let b = rng.random_range(-bound..=bound);
        let ea = ctx.encrypt(&encode_int_plain(&ctx, &BigInt::from(a), 0).map_err(err)?, &pk, &mut rng).map_err(err)?;
        let eb = ctx.encrypt(&encode_int_plain(&ctx, &BigInt::from(b), 0).map_err(err)?, &pk, &mut rng).map_err(err)?;
        let sum = ctx.add_ct(&ea, &eb).map_err(err)?;
        let prod = ctx.mul_ct(&ea, &eb, &evk).map_err(err)?;
        let got_sum = decode_plain_int(&ctx.decrypt(&sum, &sk).map_err(err)?, ctx.plain_moduli()).map_err(err)?;
        let got_prod = decode_plain_int(&ctx.decrypt(&prod, &sk).map_err(err)?, ctx.plain_moduli()).map_err(err)?;
        ensure(got_sum == BigInt::from(a + b), || format!("pair {i}: {a} + {b} decrypted to {got_sum}"))?;
        ensure(got_prod == BigInt::from(a) * b, || format!("pair {i}: {a} * {b} decrypted to {got_prod}"))?;
        if i % 100 == 0 {
            min_budget = min_budget.min(ctx.noise_budget(&prod, &sk).map_err(err)?);
        }
    }
    Ok(format!("n=8192 pairs={pairs} add and mult exact, product noise budget >= {min_budget:.1} bits"))
}

/// Negacyclic schoolbook product over one prime, in u128.
fn schoolbook(a: &[i64], b: &[i64], q: u64) -> Vec<u64> {
    let n = a.len();
    let q128 = q as u128;
    let lift = |v: i64| v.rem_euclid(q as i64) as u128;
    let mut out = vec![0u128; n];
    for i in 0..n {
        for j in 0..n {
            let p = lift(a[i]) * lift(b[j]) % q128;
            let k = i + j;
            if k < n {
                out[k] = (out[k] + p) % q128;
            } else {
                out[k - n] = (out[k - n] + q128 - p) % q128;
            }
        }
    }
    out.into_iter().map(|v| v as u64).collect()
}

fn criterion_2() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut total = 0;
    for n in [16usize, 1024] {
        let primes = ntt_primes_below(62, n, 2, &[]);
        let base = Arc::new(RnsBase::from_primes(&primes, n).map_err(err)?);
        for case in 0..200 {
            let a: Vec<i64> = (0..n).map(|_| rng.random_range(-(1i64 << 61)..(1i64 << 61))).collect();
            let b: Vec<i64> = (0..n).map(|_| rng.random_range(-(1i64 << 61)..(1i64 << 61))).collect();
            let pa = RnsPoly::from_signed(&base, &a).map_err(err)?;
            let pb = RnsPoly::from_signed(&base, &b).map_err(err)?;
            let fast = pa.mul(&pb, MulMethod::Ntt).map_err(err)?;
            for (i, &q) in primes.iter().enumerate() {
                ensure(fast.residue(i) == schoolbook(&a, &b, q).as_slice(), || {
                    format!("n={n} case {case}: NTT product differs from schoolbook mod {q}")
                })?;
            }
            total += 1;
        }
    }
    Ok(format!("{total} products exact for n in {{16, 1024}} over two 62-bit primes"))
}

fn criterion_3() -> Check {
    let ctx = FvContext::new(EncryptionParams::with_degree(1024)).map_err(err)?;
    let (sk, pk, evk) = ctx.keygen(3);
    let n = ctx.degree();
    let t = ctx.plain_moduli()[0];
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let fresh = |rng: &mut ChaCha20Rng| {
        let m: Vec<i64> = (0..n).map(|_| rng.random_range(-(t as i64 / 2)..=(t as i64 / 2))).collect();
        ctx.encrypt(&Plaintext::from_signed(&ctx, &m, 0).unwrap(), &pk, rng).unwrap()
    };
    let cases = 200;
    for case in 0..cases {
        let a = fresh(&mut rng);
        let b = fresh(&mut rng);
        // Alternate fresh and relinearized operands so both noise regimes are covered.
        let (a, b) = if case % 2 == 1 { (ctx.mul_ct(&a, &b, &evk).map_err(err)?, b) } else { (a, b) };
        for ct in [&a, &b] {
            let r = ctx.decrypt_with(ct, &sk, ScalingPath::Reference).map_err(err)?;
            let f = ctx.decrypt_with(ct, &sk, ScalingPath::Fast).map_err(err)?;
            ensure(r == f, || format!("case {case}: fast and reference decryption differ"))?;
        }
        let r = ctx.tensor_with(&a, &b, ScalingPath::Reference).map_err(err)?;
        let f = ctx.tensor_with(&a, &b, ScalingPath::Fast).map_err(err)?;
        ensure(r == f, || format!("case {case}: fast and reference tensor rounding differ"))?;
    }
    Ok(format!("{cases} cases: decryption and tensor rounding bit-identical at n=1024"))
}

fn criterion_4() -> Check {
    let report = ApproxReport::run(&ApproxConfig::default()).map_err(err)?;
    let c = &report.fit.poly.coeffs;
    ensure(c.len() == 3, || format!("expected degree 2, got coefficients {c:?}"))?;
    let (c0, c1, c2) = (c[0], c[1], c[2]);
    ensure((c1 - 0.5).abs() <= 1e-6, || format!("linear coefficient {c1}"))?;
    ensure(rel(c2, PUBLISHED_P[0]) <= 0.02, || format!("quadratic coefficient {c2} vs {}", PUBLISHED_P[0]))?;
    ensure(rel(c0, PUBLISHED_P[2]) <= 0.02, || format!("constant coefficient {c0} vs {}", PUBLISHED_P[2]))?;
    ensure(report.chain_holds(), || {
        format!(
            "chain fails: delta(p)={} delta(p*)={} delta(p_hat)={}",
            report.fit_error, report.scan.error, report.rounded_error
        )
    })?;
    let scan = format!("{:?}", report.scan.best.exponents_desc());
    let outcome = if report.matches_published() {
        format!("scan {scan} matches published")
    } else {
        format!(
            "scan {scan} differs from published {:?}: errors {:.6} vs {:.6}",
            report.published.exponents_desc(),
            report.scan.error,
            report.published_error
        )
    };
    Ok(format!(
        "a={} p=({c2:.8}, {c1:.8}, {c0:.8}) {outcome}; chain {:.6} <= {:.6} <= {:.6}",
        report.half_width, report.fit_error, report.scan.error, report.rounded_error
    ))
}

fn criterion_5() -> Check {
    let d = 20;
    let data = synthesize(2000, d, 0.2, 4.0, 5).map_err(err)?;
    let (tr, te) = data.split(0.8, 5);
    let cfg = TrainConfig { epochs: 5, batch_size: 64, seed: 5, ..TrainConfig::default() };
    let (model, _) = train(&tr, &cfg).map_err(err)?;
    let ctx = FvContext::new(EncryptionParams::with_degree(8192)).map_err(err)?;
    let (sk, pk, evk) = ctx.keygen(55);
    let mut em = quantize_model(&model, QuantConfig::default()).map_err(err)?;
    em.bind(&ctx).map_err(err)?;
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let rows = 50.min(te.len());
    ensure(rows >= 50, || format!("only {rows} test rows"))?;
    let (mut worst_drift, mut min_budget) = (0.0f64, f64::INFINITY);
    for i in 0..rows {
        let x = te.row(i);
        let cts = encrypt_input(&em, &ctx, &pk, x, &mut rng).map_err(err)?;
        let out = encrypted_forward(&em, &ctx, &evk, &cts, MulPlainPath::Shift).map_err(err)?;
        min_budget = min_budget.min(ctx.noise_budget(&out, &sk).map_err(err)?);
        let dec = decrypt_score(&ctx, &sk, &out).map_err(err)?;
        let want = em.forward_int(&em.quantize_input(x).map_err(err)?).map_err(err)?;
        ensure(dec.integer == want, || format!("row {i}: decrypted {} vs fixed-point {want}", dec.integer))?;
        let float = model.score(x).map_err(err)?;
        let drift = (dec.value - float).abs();
        ensure(drift <= (1.0 + float.abs()) / 1024.0, || format!("row {i}: float {float} vs decrypted {}", dec.value))?;
        worst_drift = worst_drift.max(drift / (1.0 + float.abs()));
    }
    Ok(format!(
        "{rows} rows exact at n=8192 d={d}; max relative drift {worst_drift:.2e}; min noise budget {min_budget:.1} bits"
    ))
}

/// Numerical integration of the subsampled Gaussian moment, in log space.
fn quadrature_log_moment(q: f64, sigma: f64, alpha: f64) -> f64 {
    let s2 = sigma * sigma;
    let lo = -40.0 * sigma - 1.0;
    let hi = 40.0 * sigma + alpha + 1.0;
    let n = 400_000;
    let h = (hi - lo) / n as f64;
    let log_f = |z: f64| {
        let r = (2.0 * z - 1.0) / (2.0 * s2);
        let mix = if r > 0.0 { r + ((1.0 - q) * (-r).exp() + q).ln() } else { (1.0 - q + q * r.exp()).ln() };
        -z * z / (2.0 * s2) - 0.5 * (2.0 * std::f64::consts::PI * s2).ln() + alpha * mix
    };
    let vals: Vec<f64> = (0..=n).map(|i| log_f(lo + i as f64 * h)).collect();
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 =
        vals.iter().enumerate().map(|(i, v)| if i == 0 || i == n { 0.5 } else { 1.0 } * (v - m).exp()).sum();
    m + (sum * h).ln()
}

fn quadrature_epsilon(q: f64, sigma: f64, steps: u64, delta: f64) -> f64 {
    default_orders()
        .iter()
        .map(|&a| (steps as f64 * quadrature_log_moment(q, sigma, a) + (1.0 / delta).ln()) / (a - 1.0))
        .fold(f64::INFINITY, f64::min)
}

fn criterion_6() -> Check {
    let d = 8;
    let data = synthesize(400, d, 0.3, 4.0, 6).map_err(err)?;
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for pair in 0..100 {
        let model = MlpModel::with_preset(d, ActivationPreset::SwishQuant, pair);
        let size = rng.random_range(2..40);
        let idx: Vec<usize> = (0..size).map(|_| rng.random_range(0..data.len())).collect();
        let batch = data.subset(&idx);
        let grads = model.per_example_gradients(&batch, 8.0).map_err(err)?;
        let c = 10f64.powf(rng.random_range(-2.0..1.0));
        let k = rng.random_range(0..size);
        let mut neighbour = grads.clone();
        neighbour.remove(k);
        let (a, b) = (clipped_sum(&grads, c), clipped_sum(&neighbour, c));
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let s = l2_norm(&diff);
        ensure(s <= c * (1.0 + 1e-12), || format!("pair {pair}: sensitivity {s} exceeds C={c}"))?;
        worst = worst.max(s / c);
    }

    let mut worst_moment = 0.0f64;
    for &(q, sigma) in &[(256.0 / 75000.0, 4.0), (0.01, 1.1), (0.05, 2.0)] {
        for &alpha in &[1.5, 2.0, 4.0, 8.0, 16.0, 32.0] {
            let (got, want) = (log_moment(q, sigma, alpha), quadrature_log_moment(q, sigma, alpha));
            let r = rel(got, want);
            ensure(r <= 0.005, || format!("log moment q={q} sigma={sigma} alpha={alpha}: {got} vs {want}"))?;
            worst_moment = worst_moment.max(r);
        }
    }

    let mut worst_eps = 0.0f64;
    for &(q, sigma, steps) in &[(256.0 / 75000.0, 4.0, 293u64), (0.01, 1.1, 1000), (256.0 / 75000.0, 1.0, 5860)] {
        let (got, want) = (epsilon_for(q, sigma, steps, 1e-5), quadrature_epsilon(q, sigma, steps, 1e-5));
        let r = rel(got, want);
        ensure(r <= 0.01, || format!("epsilon q={q} sigma={sigma} T={steps}: {got} vs {want}"))?;
        worst_eps = worst_eps.max(r);
    }

    let grid = [100u64, 300, 1000, 3000, 10000];
    let eps: Vec<f64> = grid.iter().map(|&t| epsilon_for(0.01, 1.1, t, 1e-5)).collect();
    ensure(eps.windows(2).all(|w| w[0] < w[1]), || format!("epsilon not increasing over T: {eps:?}"))?;
    Ok(format!(
        "100 pairs max sensitivity {worst:.3}C; log-moment rel err {worst_moment:.1e}; epsilon rel err {worst_eps:.1e}; eps(T) {:?}",
        eps.iter().map(|e| (e * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    ))
}

fn criterion_7() -> Check {
    let d = 20;
    let data = synthesize(1000, d, 0.2, 4.0, 7).map_err(err)?;
    let cfg = TrainConfig { epochs: 2, batch_size: 64, seed: 7, ..TrainConfig::default() };
    let (model, _) = train(&data, &cfg).map_err(err)?;
    let ctx = FvContext::new(EncryptionParams::with_degree(8192)).map_err(err)?;
    let (sk, pk, evk) = ctx.keygen(77);
    let mut em = quantize_model(&model, QuantConfig::default()).map_err(err)?;
    em.bind(&ctx).map_err(err)?;
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let inputs = encrypt_input(&em, &ctx, &pk, data.row(0), &mut rng).map_err(err)?;
    let results = bench_variants(&em, &ctx, &evk, &inputs, &BenchVariant::ALL, 5).map_err(err)?;
    for r in &results {
        let m = r.variant.apply(&em).map_err(err)?;
        let want = m.forward_int(&m.quantize_input(data.row(0)).map_err(err)?).map_err(err)?;
        let got = decrypt_score(&ctx, &sk, &r.output).map_err(err)?.integer;
        ensure(got == want, || format!("{}: decrypted output is wrong", r.variant))?;
    }
    let get = |v: BenchVariant| results.iter().find(|r| r.variant == v).unwrap();
    let (sq, gen, sh) = (get(BenchVariant::Square), get(BenchVariant::SwishGeneric), get(BenchVariant::SwishShift));
    let mults = |r: &privml::model::BenchResult| r.counters.multiplicative();
    let summary = format!(
        "multiplicative square={} generic={} shift={}; median s square={:.3} generic={:.3} shift={:.3}",
        mults(sq),
        mults(gen),
        mults(sh),
        sq.median_s(),
        gen.median_s(),
        sh.median_s()
    );
    ensure(mults(gen) == mults(sh), || format!("swish counts differ: {summary}"))?;
    ensure(mults(sq) < mults(sh), || format!("square not cheaper: {summary}"))?;
    ensure((sh.median_s() - sq.median_s()).abs() <= 0.05 * sq.median_s(), || format!("shift not within 5%: {summary}"))?;
    ensure(sh.median_s() <= gen.median_s(), || format!("shift slower than generic: {summary}"))?;
    Ok(summary)
}

fn diabetes_csv() -> Option<PathBuf> {
    std::env::var_os("PRIVML_DIABETES_CSV")
        .map(PathBuf::from)
        .or_else(|| Some(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/diabetic_data.csv")))
        .filter(|p| p.is_file())
}

/// Undo the min-max scaling of numeric features.
fn unscale(spec: &PreprocessSpec, data: &Dataset) -> Dataset {
    let mut out = data.clone();
    let d = data.d;
    let mut col = 0;
    for f in &spec.features {
        match f {
            FeatureSpec::Numeric(n) => {
                for row in out.x.chunks_exact_mut(d) {
                    row[col] = n.min + row[col] * (n.max - n.min);
                }
                col += 1;
            }
            FeatureSpec::Categorical(c) => col += c.levels.len(),
        }
    }
    out
}

fn test_scores(model: &MlpModel, test: &Dataset) -> Result<(f64, f64), String> {
    let s = model.predict_scores(test).map_err(err)?;
    let a = auc(&s, &test.y).map_err(err)?;
    let (_, recall) = accuracy_recall(&s, &test.y, 0.5).map_err(err)?;
    Ok((a, recall))
}

fn criterion_8_real(path: PathBuf) -> Check {
    let records = load_records(&path).map_err(err)?;
    let (raw_train, raw_test) = records.split(0.8, 8);
    let spec = preprocess_fit(&raw_train, PreprocessOptions::default()).map_err(err)?;
    let train_set = preprocess_apply(&spec, &raw_train).map_err(err)?;
    let test_set = preprocess_apply(&spec, &raw_test).map_err(err)?;
    let base = TrainConfig::default();

    let mut aucs = Vec::new();
    let mut recalls = Vec::new();
    for seed in 0..5 {
        let (m, _) = train(&train_set, &TrainConfig { seed, ..base.clone() }).map_err(err)?;
        let (a, r) = test_scores(&m, &test_set)?;
        aucs.push(a);
        recalls.push(r);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (auc_np, recall_np) = (mean(&aucs), mean(&recalls));
    ensure(auc_np >= 0.66, || format!("non-private AUC {auc_np:.3}"))?;
    ensure(recall_np >= 0.50, || format!("non-private recall {recall_np:.3}"))?;

    let q = base.batch_size as f64 / train_set.len() as f64;
    let steps = (base.epochs * train_set.len().div_ceil(base.batch_size)) as u64;
    let sigma = sigma_for_epsilon(q, steps, 1e-5, 4.0);
    let dp = DpConfig {
        clip: 1.0,
        sigma,
        lot_size: 0,
        dataset_size: 0,
        delta: 1e-5,
        eps_budget: f64::INFINITY,
        poisson: false,
    };
    let (m, hist) = train(&train_set, &TrainConfig { dp: Some(dp), ..base.clone() }).map_err(err)?;
    let (auc_dp, _) = test_scores(&m, &test_set)?;
    let eps = hist.privacy.map_or(f64::NAN, |p| p.0);
    ensure(auc_dp >= 0.62, || format!("DP AUC {auc_dp:.3} at eps {eps:.2}"))?;

    let init = MlpModel::with_preset(train_set.d, ActivationPreset::SwishQuant, 0);
    let scaled = grad_norm_stats(&gradient_norms(&init, &train_set, base.w_pos).map_err(err)?).map_err(err)?.median;
    let raw = unscale(&spec, &train_set);
    let unscaled = grad_norm_stats(&gradient_norms(&init, &raw, base.w_pos).map_err(err)?).map_err(err)?.median;
    ensure(scaled <= 5.0 && unscaled >= 20.0, || format!("median grad norms {scaled:.2} scaled vs {unscaled:.2} raw"))?;
    Ok(format!(
        "diabetes CSV: AUC {auc_np:.3} recall {recall_np:.3}; DP AUC {auc_dp:.3} at eps {eps:.2}; grad norm medians {scaled:.2} vs {unscaled:.2}"
    ))
}

fn criterion_8_synthetic() -> Check {
    let d = 20;
    let planted = synthesize(6000, d, 0.3, 4.0, 8).map_err(err)?;
    let raw = mimic_raw_scales(&planted, 8);
    let scaled = MinMaxScaler::fit(&raw).transform(&raw);
    let init = MlpModel::with_preset(d, ActivationPreset::SwishQuant, 8);
    let med = |data: &Dataset| -> Result<f64, String> { Ok(median(&gradient_norms(&init, data, 8.0).map_err(err)?)) };
    let (m_raw, m_scaled) = (med(&raw)?, med(&scaled)?);
    let ratio = m_raw / m_scaled;
    ensure(ratio >= 4.0, || format!("median grad norm raw {m_raw:.3} vs scaled {m_scaled:.3}"))?;

    let (tr, te) = planted.split(0.8, 8);
    let base = TrainConfig { epochs: 30, batch_size: 100, seed: 8, ..TrainConfig::default() };
    let (m_np, _) = train(&tr, &base).map_err(err)?;
    let dp = DpConfig {
        clip: 1.0,
        sigma: 1.0,
        lot_size: 0,
        dataset_size: 0,
        delta: 1e-5,
        eps_budget: f64::INFINITY,
        poisson: false,
    };
    let (m_dp, hist) = train(&tr, &TrainConfig { dp: Some(dp), ..base }).map_err(err)?;
    let (auc_np, _) = test_scores(&m_np, &te)?;
    let (auc_dp, _) = test_scores(&m_dp, &te)?;
    let eps = hist.privacy.map_or(f64::NAN, |p| p.0);
    ensure(auc_np - auc_dp <= 0.05, || format!("DP AUC {auc_dp:.3} vs non-private {auc_np:.3}"))?;
    Ok(format!(
        "no diabetes CSV, synthetic suite: grad norm median {m_raw:.2} raw vs {m_scaled:.2} scaled ({ratio:.1}x); AUC {auc_np:.3} vs DP {auc_dp:.3} (sigma 1, eps {eps:.2})"
    ))
}

fn criterion_8() -> Check {
    match diabetes_csv() {
        Some(p) => criterion_8_real(p),
        None => criterion_8_synthetic(),
    }
}

fn main() {
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, fn() -> Check); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, f) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS ({secs:.1}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL ({secs:.1}s) {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
