use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use privml::data::{
    load_records, mimic_raw_scales, preprocess_apply, preprocess_fit, synthesize, synthesize_records, Dataset,
    PreprocessOptions, PreprocessSpec,
};
use privml::dpsgd::{sigma_for_epsilon, DpConfig};
use privml::encoding::encode_int_plain;
use privml::fvrns::io::{open, read_ciphertexts, save, write_ciphertexts};
use privml::fvrns::{EncryptionParams, EvaluationKeys, FvContext, MulPlainPath, PublicKey, SecretKey};
use privml::metrics::{grad_norm_stats, EvalReport};
use privml::model::{
    bench_variants, decrypt_score, encrypted_forward, gradient_norms, quantize_model, train, BenchVariant,
    EncryptedModel, MlpModel, QuantConfig, TrainConfig,
};
use privml::polyapprox::{calibrate_interval, calibration_grid, ApproxConfig, ApproxReport};

use crate::manifest::RunManifest;
use crate::{
    ApproxArgs, BenchArgs, CliError, Command, DecryptArgs, EncryptInputArgs, EncryptModelArgs, EvaluateArgs,
    InferArgs, KeygenArgs, PathArg, PreprocessArgs, SynthArgs, SynthFormat, TrainArgs,
};

pub(crate) fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Preprocess(a) => preprocess(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Approx(a) => approx(a),
        Command::Keygen(a) => keygen(a),
        Command::EncryptModel(a) => encrypt_model(a),
        Command::EncryptInput(a) => encrypt_input(a),
        Command::Infer(a) => infer(a),
        Command::Decrypt(a) => decrypt(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Bench(a) => bench(a),
    }
}

const TRAIN_FILE: &str = "train.pmds";
const TEST_FILE: &str = "test.pmds";
const SPEC_FILE: &str = "spec.txt";
const PARAMS_FILE: &str = "params.txt";
const SECRET_FILE: &str = "secret.key";
const PUBLIC_FILE: &str = "public.key";
const EVAL_FILE: &str = "eval.key";

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::file(dir, e))
}

fn check_fraction(f: f64) -> Result<(), CliError> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(CliError::Input(format!("train fraction {f} must lie in (0, 1)")))
    }
}

fn write_splits(
    dir: &Path,
    train: &Dataset,
    test: &Dataset,
    m: &mut RunManifest,
) -> Result<(), CliError> {
    for (name, ds) in [(TRAIN_FILE, train), (TEST_FILE, test)] {
        let p = dir.join(name);
        ds.save(&p)?;
        m.output(&p)?;
    }
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> Result<(), CliError> {
    check_fraction(a.train_fraction)?;
    let mut m = RunManifest::new("preprocess");
    m.config("train_fraction", a.train_fraction)
        .config("ordinal_age", a.ordinal_age)
        .config("group_secondary", a.group_secondary)
        .seed("split", a.seed);
    m.input(&a.input)?;
    let raw = load_records(&a.input)?;
    let (train_raw, test_raw) = raw.split(a.train_fraction, a.seed);
    let options = PreprocessOptions { ordinal_age: a.ordinal_age, group_secondary: a.group_secondary };
    let spec = preprocess_fit(&train_raw, options)?;
    let train = preprocess_apply(&spec, &train_raw)?;
    let test = preprocess_apply(&spec, &test_raw)?;
    create_dir(&a.out)?;
    let spec_path = a.out.join(SPEC_FILE);
    fs::write(&spec_path, spec.to_text()).map_err(|e| CliError::file(&spec_path, e))?;
    m.output(&spec_path)?;
    write_splits(&a.out, &train, &test, &mut m)?;
    let digest = m.finish()?;
    println!(
        "rows={} train={} test={} features={} positive_rate={:.4} spec_digest={} manifest={}",
        raw.len(),
        train.len(),
        test.len(),
        spec.dim(),
        train.positive_rate(),
        spec.digest_hex(),
        digest
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut m = RunManifest::new("synth");
    m.config("format", format!("{:?}", a.format)).config("n", a.n).seed("data", a.seed);
    create_dir(&a.out)?;
    match a.format {
        SynthFormat::Csv => {
            let table = synthesize_records(a.n, a.seed)?;
            let path = a.out.join("records.csv");
            let f = fs::File::create(&path).map_err(|e| CliError::file(&path, e))?;
            table.write_csv(f)?;
            m.output(&path)?;
            let digest = m.finish()?;
            println!("rows={} columns={} out={} manifest={}", table.len(), table.names.len(), path.display(), digest);
        }
        SynthFormat::Dataset => {
            check_fraction(a.train_fraction)?;
            m.config("d", a.d)
                .config("pos_rate", a.pos_rate)
                .config("signal", a.signal)
                .config("raw_scales", a.raw_scales)
                .config("train_fraction", a.train_fraction);
            let mut ds = synthesize(a.n, a.d, a.pos_rate, a.signal, a.seed)?;
            if a.raw_scales {
                ds = mimic_raw_scales(&ds, a.seed.wrapping_add(1));
            }
            let (train, test) = ds.split(a.train_fraction, a.seed);
            write_splits(&a.out, &train, &test, &mut m)?;
            let digest = m.finish()?;
            println!(
                "train={} test={} features={} positive_rate={:.4} manifest={}",
                train.len(),
                test.len(),
                ds.d,
                ds.positive_rate(),
                digest
            );
        }
    }
    Ok(())
}

fn data_file(dir: &Path, split: &str) -> Result<PathBuf, CliError> {
    let name = match split {
        "train" => TRAIN_FILE,
        "test" => TEST_FILE,
        other => return Err(CliError::Input(format!("unknown split {other:?}; use train or test"))),
    };
    Ok(dir.join(name))
}

fn train_cmd(a: TrainArgs) -> Result<(), CliError> {
    let path = data_file(&a.data, "train")?;
    let data = Dataset::load(&path)?;
    let mut m = RunManifest::new("train");
    m.input(&path)?;
    let dp = if a.dp.dp {
        let sigma = match a.dp.target_eps {
            Some(t) if t.is_nan() || t <= 0.0 => return Err(CliError::Input(format!("target epsilon {t} must be positive"))),
            Some(t) => {
                let q = a.batch.min(data.len()) as f64 / data.len() as f64;
                let steps = (a.epochs * data.len().div_ceil(a.batch)) as u64;
                sigma_for_epsilon(q, steps, a.dp.delta, t)
            }
            None => a.dp.sigma,
        };
        m.config("sigma", sigma)
            .config("clip", a.dp.clip)
            .config("delta", a.dp.delta)
            .config("eps_budget", a.dp.eps_budget.map_or("none".into(), |e| e.to_string()))
            .config("poisson", a.dp.poisson);
        Some(DpConfig {
            clip: a.dp.clip,
            sigma,
            lot_size: 0,
            dataset_size: 0,
            delta: a.dp.delta,
            eps_budget: a.dp.eps_budget.unwrap_or(f64::INFINITY),
            poisson: a.dp.poisson,
        })
    } else {
        None
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        w_pos: a.w_pos,
        lr: a.lr,
        activation: a.activation,
        hidden: a.hidden,
        use_bias: !a.no_bias,
        dp,
        seed: a.seed,
    };
    m.config("epochs", a.epochs)
        .config("batch", a.batch)
        .config("activation", a.activation)
        .config("lr", a.lr)
        .config("w_pos", a.w_pos)
        .config("hidden", a.hidden)
        .config("bias", !a.no_bias)
        .config("dp", a.dp.dp)
        .seed("train", a.seed);

    let (mut model, history) = train(&data, &cfg)?;
    let spec_path = a.data.join(SPEC_FILE);
    model.preprocess_digest = Some(if spec_path.exists() {
        let text = fs::read_to_string(&spec_path).map_err(|e| CliError::file(&spec_path, e))?;
        m.input(&spec_path)?;
        PreprocessSpec::from_text(&text)?.digest_hex()
    } else {
        hex::encode(data.digest())
    });
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    model.save(&a.out)?;
    m.output(&a.out)?;

    let mut log = String::new();
    for e in &history.epochs {
        log += &e.to_line();
        log.push('\n');
    }
    for s in &history.steps {
        log += &s.to_line();
        log.push('\n');
    }
    if let Some((eps, delta)) = history.privacy {
        log += &format!("privacy epsilon={eps:.6} delta={delta:e} budget_exhausted={}\n", history.budget_exhausted);
    }
    let mut log_path = a.out.as_os_str().to_owned();
    log_path.push(".log");
    let log_path = PathBuf::from(log_path);
    fs::write(&log_path, log).map_err(|e| CliError::file(&log_path, e))?;
    m.output(&log_path)?;

    for e in &history.epochs {
        println!("{}", e.to_line());
    }
    if let Some((eps, delta)) = history.privacy {
        println!("privacy epsilon={eps:.4} delta={delta:e} budget_exhausted={}", history.budget_exhausted);
    }
    println!("manifest={}", m.finish()?);
    Ok(())
}

fn approx(a: ApproxArgs) -> Result<(), CliError> {
    let half_width = match a.interval_a {
        Some(w) => w,
        None => {
            let (best, fits) = calibrate_interval(&calibration_grid())?;
            for (w, p) in &fits {
                println!("calibration a={w:<4} p={p}");
            }
            println!("calibrated a={best}");
            best
        }
    };
    let cfg = ApproxConfig { half_width, degree: a.degree, grid: a.grid, bound: a.bound, radius: a.radius };
    println!("{}", ApproxReport::run(&cfg)?);
    Ok(())
}

pub(crate) struct KeyDir(PathBuf);

impl KeyDir {
    fn context(&self) -> Result<FvContext, CliError> {
        let p = self.0.join(PARAMS_FILE);
        let text = fs::read_to_string(&p).map_err(|e| CliError::file(&p, e))?;
        Ok(FvContext::new(EncryptionParams::from_text(&text)?)?)
    }

    fn file(&self, name: &str) -> Result<PathBuf, CliError> {
        let p = self.0.join(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(CliError::Input(format!("{} not found", p.display())))
        }
    }

    fn secret(&self, ctx: &FvContext) -> Result<SecretKey, CliError> {
        Ok(SecretKey::read_from(&mut open(self.file(SECRET_FILE)?)?, ctx)?)
    }

    fn public(&self, ctx: &FvContext) -> Result<PublicKey, CliError> {
        Ok(PublicKey::read_from(&mut open(self.file(PUBLIC_FILE)?)?, ctx)?)
    }

    fn eval(&self, ctx: &FvContext) -> Result<EvaluationKeys, CliError> {
        Ok(EvaluationKeys::read_from(&mut open(self.file(EVAL_FILE)?)?, ctx)?)
    }
}

fn keygen(a: KeygenArgs) -> Result<(), CliError> {
    let mut m = RunManifest::new("keygen");
    m.config("n", a.n);
    let seed = match a.seed {
        Some(s) => {
            m.seed("keys", s);
            s
        }
        None => rand::rng().random(),
    };
    let params = EncryptionParams::with_degree(a.n);
    let ctx = FvContext::new(params.clone())?;
    let (sk, pk, evk) = ctx.keygen(seed);
    create_dir(&a.out)?;
    let p = a.out.join(PARAMS_FILE);
    fs::write(&p, params.to_text()).map_err(|e| CliError::file(&p, e))?;
    m.output(&p)?;
    let p = a.out.join(SECRET_FILE);
    save(&p, |w| sk.write_to(w, &ctx))?;
    m.output(&p)?;
    let p = a.out.join(PUBLIC_FILE);
    save(&p, |w| pk.write_to(w, &ctx))?;
    m.output(&p)?;
    let p = a.out.join(EVAL_FILE);
    save(&p, |w| evk.write_to(w, &ctx))?;
    m.output(&p)?;
    let digest = m.finish()?;
    println!(
        "n={} plain_moduli={:?} params_digest={} manifest={}",
        a.n,
        ctx.plain_moduli(),
        hex::encode(ctx.digest()),
        digest
    );
    Ok(())
}

fn encrypt_model(a: EncryptModelArgs) -> Result<(), CliError> {
    let keys = KeyDir(a.keys.clone());
    let ctx = keys.context()?;
    let mut m = RunManifest::new("encrypt-model");
    m.config("input_bits", a.input_bits).config("weight_bits", a.weight_bits);
    m.input(&a.model)?;
    let model = MlpModel::load(&a.model)?;
    let mut em = quantize_model(&model, QuantConfig { input_bits: a.input_bits, weight_bits: a.weight_bits })?;
    em.bind(&ctx)?;
    em.save(&a.out)?;
    m.output(&a.out)?;
    let stages: Vec<String> = em.meta.schedule.iter().map(|(s, e)| format!("{s}={e}")).collect();
    println!("schedule {} manifest={}", stages.join(" "), m.finish()?);
    Ok(())
}

fn parse_row(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let line = lines.next().ok_or_else(|| CliError::Input(format!("{} is empty", path.display())))?;
    if lines.next().is_some() {
        return Err(CliError::Input(format!("{} must hold exactly one row", path.display())));
    }
    line.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("{}: {v:?} is not a number", path.display())))
        })
        .collect()
}

fn encrypt_input(a: EncryptInputArgs) -> Result<(), CliError> {
    let keys = KeyDir(a.keys.clone());
    let ctx = keys.context()?;
    let pk = keys.public(&ctx)?;
    let mut m = RunManifest::new("encrypt-input");
    m.config("input_bits", a.input_bits);
    let row = match (&a.row, &a.data, a.index) {
        (Some(p), _, _) => {
            m.input(p)?;
            parse_row(p)?
        }
        (None, Some(p), Some(i)) => {
            m.input(p)?.config("index", i);
            let ds = Dataset::load(p)?;
            if i >= ds.len() {
                return Err(CliError::Input(format!("row {i} out of range for {} rows", ds.len())));
            }
            ds.row(i).to_vec()
        }
        _ => return Err(CliError::Input("give --row or --data with --index".into())),
    };
    let mut rng = match a.seed {
        Some(s) => {
            m.seed("encryption", s);
            ChaCha20Rng::seed_from_u64(s)
        }
        None => ChaCha20Rng::from_os_rng(),
    };
    let cts = row
        .iter()
        .map(|&x| {
            let q = privml::encoding::quantize(x, a.input_bits).map_err(privml::model::ModelError::from)?;
            let pt = encode_int_plain(&ctx, &q, a.input_bits).map_err(privml::model::ModelError::from)?;
            Ok(ctx.encrypt(&pt, &pk, &mut rng)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    save(&a.out, |w| write_ciphertexts(w, &ctx, &cts))?;
    m.output(&a.out)?;
    println!("ciphertexts={} manifest={}", cts.len(), m.finish()?);
    Ok(())
}

fn infer(a: InferArgs) -> Result<(), CliError> {
    let keys = KeyDir(a.keys.clone());
    let ctx = keys.context()?;
    let evk = keys.eval(&ctx)?;
    let em = EncryptedModel::load(&a.emodel)?;
    let inputs = read_ciphertexts(&mut open(&a.input)?, &ctx)?;
    let mut m = RunManifest::new("infer");
    m.config("path", format!("{:?}", a.path));
    m.input(&a.emodel)?.input(&a.input)?;
    let path = match a.path {
        PathArg::Generic => MulPlainPath::Generic,
        PathArg::Shift => MulPlainPath::Shift,
    };
    let out = encrypted_forward(&em, &ctx, &evk, &inputs, path)?;
    save(&a.out, |w| write_ciphertexts(w, &ctx, std::slice::from_ref(&out)))?;
    m.output(&a.out)?;
    m.counters = Some(out.counters);
    let digest = m.finish()?;
    println!(
        "exponent={} ct_mults={} plain_mults={} additions={} wallclock_s={:.3} manifest={}",
        out.scale, out.counters.ct_mults, out.counters.plain_mults, out.counters.additions, m.wallclock_s, digest
    );
    Ok(())
}

fn decrypt(a: DecryptArgs) -> Result<(), CliError> {
    let keys = KeyDir(a.keys.clone());
    let ctx = keys.context()?;
    let sk = keys.secret(&ctx)?;
    let cts = read_ciphertexts(&mut open(&a.input)?, &ctx)?;
    let ct = match cts.as_slice() {
        [ct] => ct,
        _ => return Err(CliError::Input(format!("expected one ciphertext, found {}", cts.len()))),
    };
    let s = decrypt_score(&ctx, &sk, ct)?;
    println!(
        "score={:.12} integer={} exponent={} noise_budget={:.1} ct_mults={} plain_mults={} additions={}",
        s.value,
        s.integer,
        s.exponent,
        ctx.noise_budget(ct, &sk)?,
        ct.counters.ct_mults,
        ct.counters.plain_mults,
        ct.counters.additions
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let model = MlpModel::load(&a.model)?;
    let path = data_file(&a.data, &a.split)?;
    let data = Dataset::load(&path)?;
    let (label, scores) = if a.quantized {
        let em = quantize_model(&model, QuantConfig::default())?;
        ("quantized", em.predict_scores(&data)?)
    } else {
        ("float", model.predict_scores(&data)?)
    };
    let report = EvalReport::from_scores(&scores, &data.y, a.threshold)?;
    println!("{}", EvalReport::table_header());
    println!("{}", report.table_row(label));
    println!("{}", report.to_line());
    if a.grad_norms {
        let stats = grad_norm_stats(&gradient_norms(&model, &data, a.w_pos)?)?;
        println!("grad_norm {stats}");
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), CliError> {
    let keys = KeyDir(a.keys.clone());
    let ctx = keys.context()?;
    let (pk, evk, sk) = (keys.public(&ctx)?, keys.eval(&ctx)?, keys.secret(&ctx)?);
    let em = EncryptedModel::load(&a.emodel)?;
    let mut rng = ChaCha20Rng::seed_from_u64(a.seed);
    let x: Vec<f64> = (0..em.d).map(|_| rng.random::<f64>()).collect();
    let inputs = privml::model::encrypt_input(&em, &ctx, &pk, &x, &mut rng)?;
    let results = if a.parallel {
        // One thread per variant. Timings then include contention and are
        // not comparable across variants.
        std::thread::scope(|s| {
            let handles: Vec<_> = BenchVariant::ALL
                .iter()
                .map(|v| s.spawn(|| bench_variants(&em, &ctx, &evk, &inputs, std::slice::from_ref(v), a.trials)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("bench thread panicked")).collect::<Result<Vec<_>, _>>()
        })?
        .into_iter()
        .flatten()
        .collect()
    } else {
        bench_variants(&em, &ctx, &evk, &inputs, &BenchVariant::ALL, a.trials)?
    };
    println!(
        "{:<14} {:>10} {:>9} {:>12} {:>10} {:>15} {:>6}",
        "variant", "median_s", "ct_mults", "plain_mults", "additions", "multiplicative", "exact"
    );
    for r in &results {
        let want = r.variant.apply(&em)?.forward_int(&em.quantize_input(&x)?)?;
        let got = decrypt_score(&ctx, &sk, &r.output)?.integer;
        println!(
            "{:<14} {:>10.4} {:>9} {:>12} {:>10} {:>15} {:>6}",
            r.variant.name(),
            r.median_s(),
            r.counters.ct_mults,
            r.counters.plain_mults,
            r.counters.additions,
            r.counters.multiplicative(),
            got == want
        );
    }
    for r in &results {
        println!("{}", r.to_line());
    }
    Ok(())
}
