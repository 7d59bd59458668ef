//! Training machinery: reversed min-max scaling, MSE loss, Adam, early
//! stopping with best-weights restoration, metrics, and the epoch loop.
//!
//! Everything here operates in scaled space; callers scale data first and
//! inverse-transform predictions before computing original-unit metrics.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Mode, Network, Param};
use crate::tensor::{Matrix, Rng};

/// Per-column reversed min-max parameters: a column's minimum maps to 1 and
/// its maximum to 0 (`u_hat = (max - u) / (max - min)`). Fit on the training
/// partition only; transformed validation/test values may fall outside [0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl ScalerParams {
    /// Column-wise min/max over the given partition. Obtaining a
    /// `ScalerParams` is only possible through fitting, so transform-before-
    /// fit cannot be expressed.
    pub fn fit(data: &Matrix) -> Result<ScalerParams> {
        if data.rows() == 0 {
            return Err(Error::Domain("cannot fit a scaler on zero rows".into()));
        }
        let mut mins = vec![f64::INFINITY; data.cols()];
        let mut maxs = vec![f64::NEG_INFINITY; data.cols()];
        for i in 0..data.rows() {
            for (j, &v) in data.row(i).iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        Ok(ScalerParams { mins, maxs })
    }

    pub fn n_cols(&self) -> usize {
        self.mins.len()
    }

    fn check_cols(&self, m: &Matrix, op: &'static str) -> Result<()> {
        if m.cols() != self.n_cols() {
            return Err(Error::ShapeMismatch {
                op,
                left: format!("{} columns", m.cols()),
                right: format!("scaler fit on {}", self.n_cols()),
            });
        }
        Ok(())
    }

    /// Applies `u_hat = (max - u) / (max - min)` per column. Degenerate
    /// columns (max == min on the fit partition) map to 0.5.
    pub fn transform(&self, m: &Matrix) -> Result<Matrix> {
        self.check_cols(m, "scaler_transform")?;
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let (lo, hi) = (self.mins[j], self.maxs[j]);
                let v = if hi == lo {
                    0.5
                } else {
                    (hi - m.get(i, j)) / (hi - lo)
                };
                out.set(i, j, v);
            }
        }
        Ok(out)
    }

    /// Recovers `u = max - u_hat * (max - min)`; degenerate columns return
    /// the constant the scaler saw.
    pub fn inverse_transform(&self, m: &Matrix) -> Result<Matrix> {
        self.check_cols(m, "scaler_inverse_transform")?;
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let (lo, hi) = (self.mins[j], self.maxs[j]);
                let v = if hi == lo {
                    hi
                } else {
                    hi - m.get(i, j) * (hi - lo)
                };
                out.set(i, j, v);
            }
        }
        Ok(out)
    }
}

/// Mean squared error `(1/N) * sum (y - y_hat)^2`.
pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Domain("mse of empty vectors".into()));
    }
    if y.len() != y_hat.len() {
        return Err(Error::ShapeMismatch {
            op: "mse",
            left: format!("{} values", y.len()),
            right: format!("{} values", y_hat.len()),
        });
    }
    let n = y.len() as f64;
    Ok(y
        .iter()
        .zip(y_hat)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Hyperparameters for [`fit`]. `scale_target` records whether the target
/// column was scaled alongside the features; the flag travels with run
/// artifacts so a checkpoint knows how to undo its scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub scale_target: bool,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 1000,
            max_epochs: 200,
            patience: 50,
            seed: 0,
            scale_target: true,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "batch_size must be at least 2 (batch norm needs batch statistics), got {}",
                self.batch_size
            )));
        }
        if self.max_epochs > 0 && (self.patience == 0 || self.patience > self.max_epochs) {
            return Err(Error::InvalidConfig(format!(
                "patience must be in 1..=max_epochs, got patience {} with max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

/// Adam with bias correction. Moment tensors are allocated on first use, one
/// pair per parameter in visitation order; the step counter is shared by all
/// parameters and increments once per [`Adam::step`].
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    moments: Vec<(Matrix, Matrix)>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            moments: Vec::new(),
        }
    }

    pub fn from_config(cfg: &TrainConfig) -> Self {
        Adam::new(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update over every parameter the network exposes.
    pub fn step<N: Network + ?Sized>(&mut self, net: &mut N) -> Result<()> {
        self.t += 1;
        let t = self.t;
        let (lr, b1, b2, eps) = (self.lr, self.beta1, self.beta2, self.eps);
        let bc1 = 1.0 - b1.powi(t as i32);
        let bc2 = 1.0 - b2.powi(t as i32);
        let moments = &mut self.moments;
        let mut idx = 0;
        let mut err: Option<Error> = None;
        net.for_each_param(&mut |p: &mut Param| {
            if err.is_some() {
                return;
            }
            if idx == moments.len() {
                let (r, c) = p.value.shape();
                moments.push((Matrix::zeros(r, c), Matrix::zeros(r, c)));
            }
            let (m, v) = &mut moments[idx];
            if m.shape() != p.grad.shape() {
                err = Some(Error::ShapeMismatch {
                    op: "adam_step",
                    left: format!("moment {}x{}", m.rows(), m.cols()),
                    right: format!("grad {}x{}", p.grad.rows(), p.grad.cols()),
                });
                return;
            }
            for (((theta, &g), m_e), v_e) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(p.grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m_e = b1 * *m_e + (1.0 - b1) * g;
                *v_e = b2 * *v_e + (1.0 - b2) * g * g;
                let m_hat = *m_e / bc1;
                let v_hat = *v_e / bc2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            idx += 1;
        });
        match err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Same update applied to a bare parameter slice (used where no full
    /// network exists).
    pub fn step_params(&mut self, params: &mut [Param]) -> Result<()> {
        struct Slice<'a>(&'a mut [Param]);
        impl Network for Slice<'_> {
            fn forward(&mut self, _x: &Matrix, _mode: Mode) -> Result<Matrix> {
                unreachable!("parameter slice has no forward pass")
            }
            fn backward(&mut self, _d: &Matrix) -> Result<()> {
                unreachable!("parameter slice has no backward pass")
            }
            fn for_each_param(&mut self, f: &mut dyn FnMut(&mut Param)) {
                for p in self.0.iter_mut() {
                    f(p);
                }
            }
            fn state(&self) -> Vec<Matrix> {
                Vec::new()
            }
            fn set_state(&mut self, _s: &[Matrix]) -> Result<()> {
                Ok(())
            }
        }
        self.step(&mut Slice(params))
    }
}

/// Whether training should continue after an early-stop update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Tracks the best validation loss seen so far and a snapshot of the weights
/// that produced it. Only strict improvement resets the counter; once
/// `epochs_since_best` reaches the patience the decision flips to stop.
pub struct EarlyStopState {
    patience: usize,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub epochs_since_best: usize,
    pub snapshot: Option<Vec<Matrix>>,
}

impl EarlyStopState {
    pub fn new(patience: usize) -> Self {
        EarlyStopState {
            patience,
            best_val_loss: f64::INFINITY,
            best_epoch: 0,
            epochs_since_best: 0,
            snapshot: None,
        }
    }

    /// `weights` must be the full state that produced `val_loss`, including
    /// batch-norm moving statistics, so restoration reproduces the exact
    /// validation behavior.
    pub fn update(&mut self, epoch: usize, val_loss: f64, weights: Vec<Matrix>) -> StopDecision {
        if val_loss < self.best_val_loss {
            self.best_val_loss = val_loss;
            self.best_epoch = epoch;
            self.epochs_since_best = 0;
            self.snapshot = Some(weights);
        } else {
            self.epochs_since_best += 1;
        }
        if self.epochs_since_best >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

/// Inference-mode predictions computed in fixed-size row chunks so that
/// arbitrarily large inputs stay within memory. Rows are independent in
/// inference mode, so chunking never changes results.
pub const PREDICT_CHUNK: usize = 8192;

pub fn predict<N: Network + ?Sized>(net: &mut N, x: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(x.rows(), 1);
    let mut start = 0;
    while start < x.rows() {
        let end = (start + PREDICT_CHUNK).min(x.rows());
        let idx: Vec<usize> = (start..end).collect();
        let chunk = x.gather_rows(&idx);
        let pred = net.forward(&chunk, Mode::Infer)?;
        for (i, row) in (start..end).enumerate() {
            out.set(row, 0, pred.get(i, 0));
        }
        start = end;
    }
    Ok(out)
}

/// Training outcome: loss curves in scaled space, where the run stopped, and
/// (once a caller computes them) held-out metrics.
///
/// Equality deliberately ignores `wall_time_seconds`: two runs of the same
/// seed are "identical" when every numeric outcome matches, regardless of
/// how long the machine took.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_curve: Vec<f64>,
    pub val_curve: Vec<f64>,
    pub stopping_epoch: usize,
    pub best_epoch: usize,
    pub best_val_loss: Option<f64>,
    pub wall_time_seconds: f64,
    pub test_loss_scaled: Option<f64>,
    pub test_metrics: Option<Metrics>,
}

impl PartialEq for TrainReport {
    fn eq(&self, other: &Self) -> bool {
        self.train_curve == other.train_curve
            && self.val_curve == other.val_curve
            && self.stopping_epoch == other.stopping_epoch
            && self.best_epoch == other.best_epoch
            && self.best_val_loss == other.best_val_loss
            && self.test_loss_scaled == other.test_loss_scaled
            && self.test_metrics == other.test_metrics
    }
}

impl TrainReport {
    /// Writes the per-epoch loss curve as `epoch,train_loss,val_loss`.
    pub fn write_loss_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for (i, (tr, va)) in self.train_curve.iter().zip(&self.val_curve).enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, tr, va));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Runs the training loop: per epoch a seeded shuffle, minibatch
/// forward/backward/Adam updates (batches smaller than 2 are dropped), and a
/// full-validation pass in inference mode feeding early stopping. The best
/// snapshot is always restored before returning, so the fitted network is
/// the one that achieved the minimum validation loss.
///
/// Data must already be scaled; `y` matrices are single-column.
pub fn fit<N: Network + ?Sized>(
    net: &mut N,
    x_train: &Matrix,
    y_train: &Matrix,
    x_val: &Matrix,
    y_val: &Matrix,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if y_train.cols() != 1 || y_val.cols() != 1 {
        return Err(Error::Domain("targets must be single-column".into()));
    }
    if x_train.rows() != y_train.rows() || x_val.rows() != y_val.rows() {
        return Err(Error::ShapeMismatch {
            op: "fit",
            left: format!("{} feature rows", x_train.rows()),
            right: format!("{} target rows", y_train.rows()),
        });
    }
    if x_val.rows() == 0 {
        return Err(Error::Domain(
            "fit requires a nonempty validation partition".into(),
        ));
    }
    let n = x_train.rows();
    if n < 2 && cfg.max_epochs > 0 {
        return Err(Error::Domain(format!(
            "fit requires at least 2 training rows, got {n}"
        )));
    }

    let start = Instant::now();
    let mut adam = Adam::from_config(cfg);
    let mut stopper = EarlyStopState::new(cfg.patience.max(1));
    let mut rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut train_curve = Vec::new();
    let mut val_curve = Vec::new();
    let mut stopping_epoch = 0;

    for epoch in 1..=cfg.max_epochs {
        if cfg.shuffle {
            rng.shuffle(&mut order);
        }
        let mut loss_sum = 0.0;
        let mut rows_used = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let xb = x_train.gather_rows(chunk);
            let yb = y_train.gather_rows(chunk);
            let pred = net.forward(&xb, Mode::Train)?;
            let m = chunk.len() as f64;
            let mut batch_loss = 0.0;
            let mut d = Matrix::zeros(chunk.len(), 1);
            for i in 0..chunk.len() {
                let e = pred.get(i, 0) - yb.get(i, 0);
                batch_loss += e * e;
                d.set(i, 0, 2.0 * e / m);
            }
            batch_loss /= m;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            net.backward(&d)?;
            adam.step(net)?;
            loss_sum += batch_loss * m;
            rows_used += chunk.len();
        }
        let train_loss = loss_sum / rows_used as f64;
        let val_pred = predict(net, x_val)?;
        let val_loss = mse(y_val.data(), val_pred.data())?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        train_curve.push(train_loss);
        val_curve.push(val_loss);
        stopping_epoch = epoch;
        if stopper.update(epoch, val_loss, net.state()) == StopDecision::Stop {
            break;
        }
    }

    if let Some(snapshot) = &stopper.snapshot {
        net.set_state(snapshot)?;
    }
    Ok(TrainReport {
        train_curve,
        val_curve,
        stopping_epoch,
        best_epoch: stopper.best_epoch,
        best_val_loss: stopper.snapshot.is_some().then_some(stopper.best_val_loss),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        test_loss_scaled: None,
        test_metrics: None,
    })
}

/// Aggregate regression metrics in whatever units the inputs carry.
///
/// `pearson` is `None` when either vector has zero variance; `r_squared` is
/// `None` when the observations are constant; `mean_relative_error` is `None`
/// when every observation was within 1e-12 of zero (each skipped entry is
/// counted in `relative_error_skipped`). The fallible single-metric
/// functions [`pearson`] and [`r_squared`] report those cases as errors
/// instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub pearson: Option<f64>,
    pub r_squared: Option<f64>,
    pub mean_relative_error: Option<f64>,
    pub relative_error_skipped: usize,
}

/// Sample Pearson correlation; errors when either input has zero variance.
pub fn pearson(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_metric_inputs(y, y_hat)?;
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let mp = y_hat.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vy = 0.0;
    let mut vp = 0.0;
    for (&a, &b) in y.iter().zip(y_hat) {
        cov += (a - my) * (b - mp);
        vy += (a - my) * (a - my);
        vp += (b - mp) * (b - mp);
    }
    if vy == 0.0 || vp == 0.0 {
        return Err(Error::UndefinedMetric(
            "pearson correlation requires nonzero variance in both inputs".into(),
        ));
    }
    Ok(cov / (vy.sqrt() * vp.sqrt()))
}

/// Coefficient of determination `1 - SS_res/SS_tot`; errors when the
/// observations are constant.
pub fn r_squared(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_metric_inputs(y, y_hat)?;
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|&a| (a - my) * (a - my)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric(
            "r_squared requires non-constant observations".into(),
        ));
    }
    let ss_res: f64 = y.iter().zip(y_hat).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

fn check_metric_inputs(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Domain("metrics of empty vectors".into()));
    }
    if y.len() != y_hat.len() {
        return Err(Error::ShapeMismatch {
            op: "metrics",
            left: format!("{} values", y.len()),
            right: format!("{} values", y_hat.len()),
        });
    }
    Ok(())
}

/// Computes the full metric set, mapping undefined metrics to `None` rather
/// than failing the whole aggregate.
pub fn metrics(y: &[f64], y_hat: &[f64]) -> Result<Metrics> {
    check_metric_inputs(y, y_hat)?;
    let mse = mse(y, y_hat)?;
    let pearson = match pearson(y, y_hat) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    let r_squared = match r_squared(y, y_hat) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    let mut rel_sum = 0.0;
    let mut rel_n = 0usize;
    let mut skipped = 0usize;
    for (&a, &b) in y.iter().zip(y_hat) {
        if a.abs() > 1e-12 {
            rel_sum += (b - a).abs() / a.abs();
            rel_n += 1;
        } else {
            skipped += 1;
        }
    }
    Ok(Metrics {
        mse,
        pearson,
        r_squared,
        mean_relative_error: (rel_n > 0).then(|| rel_sum / rel_n as f64),
        relative_error_skipped: skipped,
    })
}
