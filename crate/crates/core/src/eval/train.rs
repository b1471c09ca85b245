use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{auc, bce_loss, EvalError};
use crate::data::TimeSeriesDataset;
use crate::nets::{ArchSpec, Model};
use crate::tensor::{adam_step, AdamConfig, AdamState, Graph, ParamSet, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Validation AUC is recorded every `eval_interval` steps and at the last step.
    pub eval_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { steps: 300, batch_size: 64, lr: 1e-3, seed: 0, eval_interval: 5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    /// Mean batch loss over the steps since the previous record.
    pub train_loss: f64,
    pub val_auc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
    /// Probabilities clamped inside the loss over the whole run.
    pub clamped: usize,
}

impl LearningCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,train_loss,val_auc\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.step, p.train_loss, p.val_auc));
        }
        s
    }
}

/// Smoothing window and tolerance for [`convergence_step`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRule {
    pub window: usize,
    pub tolerance: f64,
}

impl Default for ConvergenceRule {
    fn default() -> Self {
        ConvergenceRule { window: 5, tolerance: 0.005 }
    }
}

/// First recorded step whose trailing `window`-point mean validation AUC
/// reaches the curve's best smoothed value minus `tolerance`.
///
/// The first `window - 1` points average over what is available. Returns
/// `None` only for an empty curve.
pub fn convergence_step(curve: &LearningCurve, rule: ConvergenceRule) -> Option<usize> {
    let aucs: Vec<f64> = curve.points.iter().map(|p| p.val_auc).collect();
    if aucs.is_empty() {
        return None;
    }
    let w = rule.window.max(1);
    let smoothed: Vec<f64> = (0..aucs.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            aucs[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect();
    let best = smoothed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let i = smoothed.iter().position(|&s| s >= best - rule.tolerance).expect("the maximum qualifies");
    Some(curve.points[i].step)
}

/// Class-1 probabilities for every sample of `ds`.
pub fn predict_dataset<E: Scalar>(model: &Model<E>, ds: &TimeSeriesDataset<E>) -> Result<Vec<f64>, EvalError> {
    Ok(model.predict_tensor(ds.samples())?.into_iter().map(|v| v.as_f64()).collect())
}

pub fn dataset_auc<E: Scalar>(model: &Model<E>, ds: &TimeSeriesDataset<E>) -> Result<f64, EvalError> {
    auc(&predict_dataset(model, ds)?, ds.labels())
}

/// Trains `spec` with Adam on BCE, returning the snapshot with the best
/// validation AUC and the learning curve.
///
/// Minibatches come from a fresh shuffle each epoch; when the training set
/// is no larger than the batch every step is full-batch.
pub fn train_classifier<E: Scalar>(
    spec: &ArchSpec,
    train: &TimeSeriesDataset<E>,
    val: &TimeSeriesDataset<E>,
    config: &TrainConfig,
) -> Result<(Model<E>, LearningCurve), EvalError> {
    if config.batch_size == 0 || config.eval_interval == 0 {
        return Err(EvalError::Config("batch size and eval interval must be at least 1".into()));
    }
    if !(config.lr >= 0.0 && config.lr.is_finite()) {
        return Err(EvalError::Config(format!("learning rate must be finite and non-negative, got {}", config.lr)));
    }
    if train.stats().map(|s| &s.source) != val.stats().map(|s| &s.source) {
        return Err(EvalError::Config("train and validation sets use different standardization".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::<E>::build(spec, rng.next_u64())?;
    let mut adam = AdamState::new(AdamConfig { lr: config.lr, ..AdamConfig::default() });
    let mut curve = LearningCurve::default();
    let mut best: Option<(f64, ParamSet<E>)> = None;

    let n = train.n();
    let full_batch = n <= config.batch_size;
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;

    for step in 1..=config.steps {
        let idx: Vec<usize> = if full_batch {
            order.clone()
        } else {
            if cursor + config.batch_size > n {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            cursor += config.batch_size;
            order[cursor - config.batch_size..cursor].to_vec()
        };
        let x = train.samples().select_rows(&idx)?;
        let y: Vec<E> = idx.iter().map(|&i| E::from_f64_lossy(train.labels()[i] as f64)).collect();

        let mut g = Graph::new();
        let p = model.bind(&mut g, true);
        let xv = g.leaf(&x.with_requires_grad(false));
        let yv = g.constant(vec![idx.len()], y);
        let probs = model.predict(&mut g, &p, xv)?;
        let bce = bce_loss(&mut g, probs, yv)?;
        let value = g.item(bce.loss).as_f64();
        if !value.is_finite() {
            return Err(EvalError::NonFinite { step });
        }
        curve.clamped += bce.clamped;
        let grads = g.backward(bce.loss)?;
        model.params_mut().store_grads(&p, &grads)?;
        adam_step(model.params_mut(), &mut adam)?;
        model.params_mut().clear_grads();
        loss_sum += value;
        loss_count += 1;

        if step % config.eval_interval == 0 || step == config.steps {
            let val_auc = dataset_auc(&model, val)?;
            curve.points.push(CurvePoint { step, train_loss: loss_sum / loss_count as f64, val_auc });
            loss_sum = 0.0;
            loss_count = 0;
            if best.as_ref().is_none_or(|(b, _)| val_auc > *b) {
                best = Some((val_auc, model.params().clone()));
            }
        }
    }
    if let Some((_, params)) = best {
        model = Model::from_params(spec, params)?;
    }
    Ok((model, curve))
}
