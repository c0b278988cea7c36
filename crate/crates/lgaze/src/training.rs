//! MLP optimization: AdamW with decoupled weight decay, plateau learning-rate
//! scheduling, early stopping, and best-checkpoint tracking.

use crate::neural::loss::angular_loss_and_grad;
use crate::neural::{GazeMlp, NeuralError};
use ndarray::{s, Array2, ArrayView2};
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    DivergedLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("feature/target row mismatch: {features} vs {targets}")]
    RowMismatch { features: usize, targets: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    /// Validation MAE must improve by at least this much (degrees) to reset
    /// the plateau and early-stop counters. Set on the scale of the SGD
    /// noise in the validation trace: far smaller values let noise reset
    /// the counters every few epochs and the learning rate never anneals.
    pub min_delta: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self { factor: 0.5, patience: 5, min_lr: 1e-6, min_delta: 5e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub weight_decay: f64,
    /// Initial learning rate (1e-1 holistic, 1e-3 siamese).
    pub lr0: f64,
    pub scheduler: PlateauConfig,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    /// Optional global gradient-norm clip; off by default so the published
    /// optimization protocol runs unmodified.
    pub clip_grad_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            weight_decay: 1e-4,
            lr0: 1e-3,
            scheduler: PlateauConfig::default(),
            max_epochs: 200,
            early_stop_patience: 15,
            clip_grad_norm: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn holistic_default() -> Self {
        Self { lr0: 1e-1, ..Self::default() }
    }

    pub fn siamese_default() -> Self {
        Self { lr0: 1e-3, ..Self::default() }
    }
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

/// AdamW over a flat parameter vector. Weight decay is decoupled:
/// `theta <- theta * (1 - lr * wd)` happens independently of the
/// bias-corrected adaptive step, so a zero gradient still decays.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(param_count: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64, weight_decay: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] = params[i] * (1.0 - lr * weight_decay) - lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

// ---------------------------------------------------------------------------
// Plateau scheduler
// ---------------------------------------------------------------------------

/// Learning-rate scheduler: multiply by `factor` when the validation metric
/// fails to improve for `patience` consecutive observations.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    cfg: PlateauConfig,
    lr: f64,
    best: f64,
    stale: usize,
}

impl PlateauScheduler {
    pub fn new(lr0: f64, cfg: PlateauConfig) -> Self {
        Self { cfg, lr: lr0, best: f64::INFINITY, stale: 0 }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Feed one validation observation; returns the learning rate to use
    /// for the next epoch.
    pub fn observe(&mut self, val_metric: f64) -> f64 {
        if val_metric < self.best - self.cfg.min_delta {
            self.best = val_metric;
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.cfg.patience {
                self.lr = (self.lr * self.cfg.factor).max(self.cfg.min_lr);
                self.stale = 0;
            }
        }
        self.lr
    }
}

/// Learning rate after consuming an entire validation history (the pure
/// functional view of [`PlateauScheduler`]).
pub fn plateau_schedule(lr0: f64, history: &[f64], cfg: &PlateauConfig) -> f64 {
    let mut s = PlateauScheduler::new(lr0, *cfg);
    for &v in history {
        s.observe(v);
    }
    s.lr()
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean train-mode batch loss per epoch, degrees.
    pub train_mae_deg: Vec<f64>,
    /// Eval-mode validation MAE per epoch, degrees.
    pub val_mae_deg: Vec<f64>,
    /// Learning rate used in each epoch.
    pub lr_trace: Vec<f64>,
    /// Epoch (0-based) of the restored best checkpoint.
    pub best_epoch: usize,
    pub best_val_mae_deg: f64,
    pub epochs_run: usize,
    pub wall_time_s: f64,
}

/// Eval-mode mean angular error in degrees, computed in batches.
pub fn validation_mae_deg<M: GazeMlp>(
    model: &M,
    x: ArrayView2<f64>,
    targets: ArrayView2<f64>,
) -> Result<f64, TrainError> {
    let n = x.nrows();
    if n == 0 {
        return Err(TrainError::EmptySplit("validation"));
    }
    let chunk = 1024;
    let mut total = 0.0;
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let pred = model.forward_eval(x.slice(s![start..end, ..]))?;
        let (loss, _) = angular_loss_and_grad(&pred, &targets.slice(s![start..end, ..]).to_owned())?;
        total += loss * (end - start) as f64;
        start = end;
    }
    Ok((total / n as f64).to_degrees())
}

/// Train a model on precomputed features, tracking the best checkpoint by
/// validation MAE and restoring it before returning.
///
/// Every train sample is consumed exactly once per epoch (seeded shuffle);
/// a trailing 1-sample chunk is merged into the previous batch so batch
/// statistics stay defined.
pub fn train<M: GazeMlp>(
    model: &mut M,
    x_train: ArrayView2<f64>,
    t_train: ArrayView2<f64>,
    x_val: ArrayView2<f64>,
    t_val: ArrayView2<f64>,
    cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    let n = x_train.nrows();
    if n < 2 {
        return Err(TrainError::EmptySplit("train"));
    }
    if x_val.nrows() == 0 {
        return Err(TrainError::EmptySplit("validation"));
    }
    if t_train.nrows() != n {
        return Err(TrainError::RowMismatch { features: n, targets: t_train.nrows() });
    }
    let started = std::time::Instant::now();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut optimizer = AdamW::new(model.param_count());
    let mut scheduler = PlateauScheduler::new(cfg.lr0, cfg.scheduler);
    let mut report = TrainReport {
        train_mae_deg: Vec::new(),
        val_mae_deg: Vec::new(),
        lr_trace: Vec::new(),
        best_epoch: 0,
        best_val_mae_deg: f64::INFINITY,
        epochs_run: 0,
        wall_time_s: 0.0,
    };

    let dim = model.input_dim();
    let mut best_state = model.flat_state();
    let mut best_val = f64::INFINITY;
    let mut epochs_since_improvement = 0usize;
    let mut indices: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.max_epochs {
        let lr = scheduler.lr();
        indices.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut consumed = 0usize;
        let mut start = 0usize;
        let mut batch_no = 0usize;
        while start < n {
            let mut end = (start + cfg.batch_size).min(n);
            if n - end == 1 {
                end = n; // fold a trailing single sample into this batch
            }
            let batch_idx = &indices[start..end];
            let bsz = batch_idx.len();
            let mut xb = Array2::<f64>::zeros((bsz, dim));
            let mut tb = Array2::<f64>::zeros((bsz, 3));
            for (row, &src) in batch_idx.iter().enumerate() {
                xb.row_mut(row).assign(&x_train.row(src));
                tb.row_mut(row).assign(&t_train.row(src));
            }

            let (pred, tape) = model.forward_train(xb.view(), &mut rng)?;
            let (loss, d_pred) = angular_loss_and_grad(&pred, &tb)?;
            if !loss.is_finite() {
                return Err(TrainError::DivergedLoss { epoch, batch: batch_no });
            }
            model.zero_grads();
            model.backward(&tape, &d_pred)?;

            let mut params = model.flat_params();
            let mut grads = model.flat_grads();
            if let Some(max_norm) = cfg.clip_grad_norm {
                let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max_norm {
                    let scale = max_norm / norm;
                    grads.iter_mut().for_each(|g| *g *= scale);
                }
            }
            optimizer.step(&mut params, &grads, lr, cfg.weight_decay);
            model.set_flat_params(&params)?;

            epoch_loss += loss * bsz as f64;
            consumed += bsz;
            start = end;
            batch_no += 1;
        }
        debug_assert_eq!(consumed, n, "every train sample must be consumed once per epoch");

        let train_mae = (epoch_loss / n as f64).to_degrees();
        let val_mae = validation_mae_deg(model, x_val, t_val)?;
        report.train_mae_deg.push(train_mae);
        report.val_mae_deg.push(val_mae);
        report.lr_trace.push(lr);
        report.epochs_run = epoch + 1;

        // The checkpoint tracks the strict minimum; the patience counters
        // use the noise threshold.
        if val_mae < best_val {
            best_val = val_mae;
            report.best_epoch = epoch;
            report.best_val_mae_deg = val_mae;
            best_state = model.flat_state();
        }
        if val_mae < scheduler.best() - cfg.scheduler.min_delta {
            epochs_since_improvement = 0;
        } else {
            epochs_since_improvement += 1;
        }
        scheduler.observe(val_mae);

        if epochs_since_improvement >= cfg.early_stop_patience {
            break;
        }
    }

    model.set_flat_state(&best_state)?;
    report.wall_time_s = started.elapsed().as_secs_f64();
    Ok(report)
}
