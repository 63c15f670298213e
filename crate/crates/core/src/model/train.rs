use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{ActivationPreset, MlpModel, ModelError, Objective, HIDDEN};
use crate::data::Dataset;
use crate::dpsgd::{self, l2_norm, private_step, Adam, DpConfig, PrivacyAccountant, StepOutcome, StepRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Loss weight of positive examples.
    pub w_pos: f64,
    pub lr: f64,
    pub activation: ActivationPreset,
    pub hidden: usize,
    pub use_bias: bool,
    /// Private training; `lot_size` and `dataset_size` are overwritten with
    /// the batch size and the number of rows.
    pub dp: Option<DpConfig>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 256,
            w_pos: 8.0,
            lr: 1e-3,
            activation: ActivationPreset::SwishQuant,
            hidden: HIDDEN,
            use_bias: true,
            dp: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub grad_norm_median: f64,
    pub epsilon: f64,
}

impl EpochRecord {
    pub fn to_line(&self) -> String {
        format!(
            "epoch={} loss={:.6} grad_norm_median={:.6} epsilon={:.6}",
            self.epoch, self.loss, self.grad_norm_median, self.epsilon
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub steps: Vec<StepRecord>,
    /// Final `(epsilon, delta)` of a private run.
    pub privacy: Option<(f64, f64)>,
    pub budget_exhausted: bool,
}

/// Per-example gradient norms of the weighted loss at the current parameters.
pub fn gradient_norms(model: &MlpModel, data: &Dataset, w_pos: f64) -> Result<Vec<f64>, ModelError> {
    Ok(model.per_example_gradients(data, w_pos)?.iter().map(|g| l2_norm(g)).collect())
}

/// Trains a freshly initialised model (seeded by `cfg.seed`).
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<(MlpModel, TrainHistory), ModelError> {
    let (h, o) = cfg.activation.activations();
    let mut model = MlpModel::new(data.d, cfg.hidden, h, o, cfg.seed);
    model.use_bias = cfg.use_bias;
    train_from(model, data, cfg)
}

/// Continues training `model` with Adam, privately when `cfg.dp` is set.
pub fn train_from(model: MlpModel, data: &Dataset, cfg: &TrainConfig) -> Result<(MlpModel, TrainHistory), ModelError> {
    if data.d != model.d {
        return Err(ModelError::Dimension { expected: model.d, found: data.d });
    }
    if data.is_empty() || cfg.batch_size == 0 || cfg.batch_size > data.len() {
        return Err(ModelError::Config(format!(
            "batch size {} must be in 1..={} rows",
            cfg.batch_size,
            data.len()
        )));
    }
    if !(cfg.w_pos > 0.0) || !(cfg.lr > 0.0) {
        return Err(ModelError::Config("w_pos and the learning rate must be positive".into()));
    }
    let mut obj = Objective { model, w_pos: cfg.w_pos };
    let mut opt = Adam::new(cfg.lr, obj.model.param_count());
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut history = TrainHistory::default();
    match &cfg.dp {
        None => train_plain(&mut obj, data, cfg, &mut opt, &mut rng, &mut history)?,
        Some(dp) => {
            let dp = DpConfig { lot_size: cfg.batch_size, dataset_size: data.len(), ..dp.clone() };
            dp.validate()?;
            train_private(&mut obj, data, cfg, &dp, &mut opt, &mut rng, &mut history)?;
        }
    }
    Ok((obj.model, history))
}

fn train_plain(
    obj: &mut Objective,
    data: &Dataset,
    cfg: &TrainConfig,
    opt: &mut Adam,
    rng: &mut ChaCha20Rng,
    history: &mut TrainHistory,
) -> Result<(), ModelError> {
    use crate::dpsgd::GradientModel;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0u64;
    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        let mut norms = Vec::with_capacity(data.len());
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = vec![0.0; obj.model.param_count()];
            let mut loss = 0.0;
            let mut batch_norms = Vec::with_capacity(batch.len());
            for &i in batch {
                let (l, g) = obj.example_gradient(data.row(i), data.y[i]);
                loss += l;
                batch_norms.push(l2_norm(&g));
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            let m = batch.len() as f64;
            grad.iter_mut().for_each(|v| *v /= m);
            step += 1;
            if !loss.is_finite() || grad.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::Divergence { epoch, step, loss: loss / m });
            }
            let mut params = obj.params();
            opt.step(&mut params, &grad);
            obj.set_params(&params);
            epoch_loss += loss;
            norms.extend_from_slice(&batch_norms);
            let grad_norm_median = dpsgd::median(&mut batch_norms);
            history.steps.push(StepRecord { step, loss: loss / m, epsilon: 0.0, grad_norm_median });
        }
        history.epochs.push(EpochRecord {
            epoch,
            loss: epoch_loss / data.len() as f64,
            grad_norm_median: dpsgd::median(&mut norms),
            epsilon: 0.0,
        });
    }
    Ok(())
}

fn train_private(
    obj: &mut Objective,
    data: &Dataset,
    cfg: &TrainConfig,
    dp: &DpConfig,
    opt: &mut Adam,
    rng: &mut ChaCha20Rng,
    history: &mut TrainHistory,
) -> Result<(), ModelError> {
    let mut acct = PrivacyAccountant::default();
    let steps_per_epoch = data.len().div_ceil(dp.lot_size);
    'epochs: for epoch in 1..=cfg.epochs {
        let (mut loss, mut medians, mut taken) = (0.0, Vec::new(), 0usize);
        for _ in 0..steps_per_epoch {
            match private_step(obj, data, dp, opt, &mut acct, rng)? {
                StepOutcome::Stepped(rec) => {
                    if !rec.loss.is_finite() || obj.model.params().iter().any(|v| !v.is_finite()) {
                        return Err(ModelError::Divergence { epoch, step: rec.step, loss: rec.loss });
                    }
                    loss += rec.loss;
                    medians.push(rec.grad_norm_median);
                    taken += 1;
                    history.steps.push(rec);
                }
                StepOutcome::BudgetExhausted { .. } => {
                    history.budget_exhausted = true;
                    if taken > 0 {
                        history.epochs.push(epoch_record(epoch, loss, taken, &mut medians, &acct, dp));
                    }
                    break 'epochs;
                }
            }
        }
        history.epochs.push(epoch_record(epoch, loss, taken, &mut medians, &acct, dp));
    }
    history.privacy = Some((acct.epsilon(dp.delta), dp.delta));
    Ok(())
}

/// For private runs the epoch median is the median of the per-lot medians.
fn epoch_record(
    epoch: usize,
    loss: f64,
    taken: usize,
    medians: &mut [f64],
    acct: &PrivacyAccountant,
    dp: &DpConfig,
) -> EpochRecord {
    EpochRecord {
        epoch,
        loss: loss / taken.max(1) as f64,
        grad_norm_median: dpsgd::median(medians),
        epsilon: acct.epsilon(dp.delta),
    }
}
