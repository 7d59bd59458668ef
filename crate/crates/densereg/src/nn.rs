//! Layer primitives with explicit forward and backward passes: dense, batch
//! normalization, ReLU, and column concatenation.
//!
//! Each layer caches the forward intermediates it needs for backward; calling
//! backward without a matching forward is a state error, and every backward
//! consumes its cache.

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

/// Forward-pass mode. Training mode uses batch statistics and updates moving
/// averages; inference mode reads moving statistics and mutates nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A trainable tensor paired with its gradient. Gradients are overwritten by
/// each backward pass (one forward/backward pair per optimizer step).
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Matrix,
    pub grad: Matrix,
}

impl Param {
    pub fn new(value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Param { value, grad }
    }
}

/// Fully connected layer: `y = x W + b` with `W` of shape fan_in x fan_out.
#[derive(Debug, Clone)]
pub struct Dense {
    pub w: Param,
    pub b: Param,
    cache_x: Option<Matrix>,
}

impl Dense {
    /// Glorot-uniform weights on +-sqrt(6/(fan_in+fan_out)), zero biases.
    pub fn new(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = rng
            .uniform(fan_in * fan_out, -limit, limit)
            .expect("limit > 0");
        let w = Matrix::from_vec(fan_in, fan_out, data).expect("sized above");
        Dense {
            w: Param::new(w),
            b: Param::new(Matrix::zeros(1, fan_out)),
            cache_x: None,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.w.value.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.value.cols()
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        if x.cols() != self.fan_in() {
            return Err(Error::ShapeMismatch {
                op: "dense_forward",
                left: format!("input {}x{}", x.rows(), x.cols()),
                right: format!("weights {}x{}", self.fan_in(), self.fan_out()),
            });
        }
        let mut y = x.matmul(&self.w.value)?;
        let bias = self.b.value.row(0);
        for i in 0..y.rows() {
            for (v, b) in y.row_mut(i).iter_mut().zip(bias) {
                *v += b;
            }
        }
        if mode == Mode::Train {
            self.cache_x = Some(x.clone());
        }
        Ok(y)
    }

    /// Populates `grad_w = x^T dY` and `grad_b = column sums of dY`, returns
    /// `dX = dY W^T`.
    pub fn backward(&mut self, d_out: &Matrix) -> Result<Matrix> {
        let x = self
            .cache_x
            .take()
            .ok_or_else(|| Error::State("dense backward without cached forward".into()))?;
        if d_out.rows() != x.rows() || d_out.cols() != self.fan_out() {
            return Err(Error::ShapeMismatch {
                op: "dense_backward",
                left: format!("grad {}x{}", d_out.rows(), d_out.cols()),
                right: format!("expected {}x{}", x.rows(), self.fan_out()),
            });
        }
        self.w.grad = x.transpose().matmul(d_out)?;
        for j in 0..self.fan_out() {
            let mut s = 0.0;
            for i in 0..d_out.rows() {
                s += d_out.get(i, j);
            }
            self.b.grad.set(0, j, s);
        }
        d_out.matmul(&self.w.value.transpose())
    }
}

#[derive(Debug)]
struct BnCache {
    normalized: Matrix,
    inv_std: Vec<f64>,
}

/// Batch normalization over feature columns.
///
/// Training mode normalizes by the batch mean and biased variance and folds
/// the batch statistics into the moving averages as
/// `m <- momentum * m + (1 - momentum) * batch_stat`. Inference mode uses the
/// moving statistics only. Parameter count contribution is 4 per feature:
/// gamma and beta (trainable) plus the two moving statistics.
#[derive(Debug)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub moving_mean: Matrix,
    pub moving_var: Matrix,
    pub eps: f64,
    pub momentum: f64,
    cache: Option<BnCache>,
}

pub const BN_EPS: f64 = 1e-3;
pub const BN_MOMENTUM: f64 = 0.99;

impl BatchNorm {
    /// gamma = 1, beta = 0, moving mean = 0, moving variance = 1.
    pub fn new(width: usize) -> Self {
        BatchNorm {
            gamma: Param::new(Matrix::filled(1, width, 1.0)),
            beta: Param::new(Matrix::zeros(1, width)),
            moving_mean: Matrix::zeros(1, width),
            moving_var: Matrix::filled(1, width, 1.0),
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
            cache: None,
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.value.cols()
    }

    #[allow(clippy::needless_range_loop)]
    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        let width = self.width();
        if x.cols() != width {
            return Err(Error::ShapeMismatch {
                op: "batchnorm_forward",
                left: format!("input {}x{}", x.rows(), x.cols()),
                right: format!("width {width}"),
            });
        }
        match mode {
            Mode::Train => {
                let m = x.rows();
                if m < 2 {
                    return Err(Error::Domain(format!(
                        "batchnorm train mode requires batch >= 2, got {m}"
                    )));
                }
                let mut out = Matrix::zeros(m, width);
                let mut normalized = Matrix::zeros(m, width);
                let mut inv_std = vec![0.0; width];
                for j in 0..width {
                    let mut mean = 0.0;
                    for i in 0..m {
                        mean += x.get(i, j);
                    }
                    mean /= m as f64;
                    let mut var = 0.0;
                    for i in 0..m {
                        let d = x.get(i, j) - mean;
                        var += d * d;
                    }
                    var /= m as f64; // biased (population) variance
                    let inv = 1.0 / (var + self.eps).sqrt();
                    inv_std[j] = inv;
                    let g = self.gamma.value.get(0, j);
                    let b = self.beta.value.get(0, j);
                    for i in 0..m {
                        let xh = (x.get(i, j) - mean) * inv;
                        normalized.set(i, j, xh);
                        out.set(i, j, g * xh + b);
                    }
                    let mm = self.moving_mean.get(0, j);
                    let mv = self.moving_var.get(0, j);
                    self.moving_mean
                        .set(0, j, self.momentum * mm + (1.0 - self.momentum) * mean);
                    self.moving_var
                        .set(0, j, self.momentum * mv + (1.0 - self.momentum) * var);
                }
                self.cache = Some(BnCache {
                    normalized,
                    inv_std,
                });
                Ok(out)
            }
            Mode::Infer => {
                let mut out = Matrix::zeros(x.rows(), width);
                for j in 0..width {
                    let inv = 1.0 / (self.moving_var.get(0, j) + self.eps).sqrt();
                    let mean = self.moving_mean.get(0, j);
                    let g = self.gamma.value.get(0, j);
                    let b = self.beta.value.get(0, j);
                    for i in 0..x.rows() {
                        out.set(i, j, g * (x.get(i, j) - mean) * inv + b);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Exact gradients through the batch mean and variance. Only valid after
    /// a train-mode forward; inference-mode backward is a state error.
    pub fn backward(&mut self, d_out: &Matrix) -> Result<Matrix> {
        let cache = self.cache.take().ok_or_else(|| {
            Error::State("batchnorm backward without cached train-mode forward".into())
        })?;
        let (m, width) = cache.normalized.shape();
        if d_out.shape() != (m, width) {
            return Err(Error::ShapeMismatch {
                op: "batchnorm_backward",
                left: format!("grad {}x{}", d_out.rows(), d_out.cols()),
                right: format!("expected {m}x{width}"),
            });
        }
        let mut d_in = Matrix::zeros(m, width);
        let mf = m as f64;
        for j in 0..width {
            let g = self.gamma.value.get(0, j);
            let mut d_gamma = 0.0;
            let mut d_beta = 0.0;
            let mut sum_dxh = 0.0;
            let mut sum_dxh_xh = 0.0;
            for i in 0..m {
                let dy = d_out.get(i, j);
                let xh = cache.normalized.get(i, j);
                d_gamma += dy * xh;
                d_beta += dy;
                let dxh = dy * g;
                sum_dxh += dxh;
                sum_dxh_xh += dxh * xh;
            }
            self.gamma.grad.set(0, j, d_gamma);
            self.beta.grad.set(0, j, d_beta);
            let inv = cache.inv_std[j];
            for i in 0..m {
                let dxh = d_out.get(i, j) * g;
                let xh = cache.normalized.get(i, j);
                d_in.set(
                    i,
                    j,
                    (inv / mf) * (mf * dxh - sum_dxh - xh * sum_dxh_xh),
                );
            }
        }
        Ok(d_in)
    }
}

/// Elementwise `max(0, x)`. The derivative at exactly 0 is taken as 0.
#[derive(Debug)]
pub struct Relu {
    cache_x: Option<Matrix>,
}

impl Relu {
    pub fn new() -> Self {
        Relu { cache_x: None }
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Matrix {
        let y = x.map(|v| v.max(0.0));
        if mode == Mode::Train {
            self.cache_x = Some(x.clone());
        }
        y
    }

    pub fn backward(&mut self, d_out: &Matrix) -> Result<Matrix> {
        let x = self
            .cache_x
            .take()
            .ok_or_else(|| Error::State("relu backward without cached forward".into()))?;
        if d_out.shape() != x.shape() {
            return Err(Error::ShapeMismatch {
                op: "relu_backward",
                left: format!("grad {}x{}", d_out.rows(), d_out.cols()),
                right: format!("expected {}x{}", x.rows(), x.cols()),
            });
        }
        let mut d_in = Matrix::zeros(x.rows(), x.cols());
        for (out, (&g, &v)) in d_in
            .data_mut()
            .iter_mut()
            .zip(d_out.iter().zip(x.iter()))
        {
            *out = if v > 0.0 { g } else { 0.0 };
        }
        Ok(d_in)
    }
}

impl Default for Relu {
    fn default() -> Self {
        Relu::new()
    }
}

/// Concatenate matrices along columns, in the given order.
pub fn concat_cols(parts: &[&Matrix]) -> Result<Matrix> {
    let rows = parts
        .first()
        .ok_or_else(|| Error::Domain("concat of zero parts".into()))?
        .rows();
    for p in parts {
        if p.rows() != rows {
            return Err(Error::ShapeMismatch {
                op: "concat_cols",
                left: format!("{rows} rows"),
                right: format!("{} rows", p.rows()),
            });
        }
    }
    let total: usize = parts.iter().map(|p| p.cols()).sum();
    let mut out = Matrix::zeros(rows, total);
    for i in 0..rows {
        let dst = out.row_mut(i);
        let mut off = 0;
        for p in parts {
            dst[off..off + p.cols()].copy_from_slice(p.row(i));
            off += p.cols();
        }
    }
    Ok(out)
}

/// Inverse of [`concat_cols`]: slice a gradient back into per-part pieces.
/// Pure index arithmetic, no floating-point math.
pub fn split_cols(m: &Matrix, widths: &[usize]) -> Result<Vec<Matrix>> {
    let total: usize = widths.iter().sum();
    if total != m.cols() {
        return Err(Error::ShapeMismatch {
            op: "split_cols",
            left: format!("{} cols", m.cols()),
            right: format!("widths summing to {total}"),
        });
    }
    let mut parts: Vec<Matrix> = widths
        .iter()
        .map(|&w| Matrix::zeros(m.rows(), w))
        .collect();
    for i in 0..m.rows() {
        let src = m.row(i);
        let mut off = 0;
        for part in parts.iter_mut() {
            let w = part.cols();
            part.row_mut(i).copy_from_slice(&src[off..off + w]);
            off += w;
        }
    }
    Ok(parts)
}

/// A regression network trainable by [`crate::train::fit`]: forward/backward
/// over batches plus uniform access to parameters and full state.
///
/// `state`/`set_state` cover every tensor including batch-norm moving
/// statistics, in a fixed traversal order, so snapshots restore inference
/// behavior exactly.
pub trait Network {
    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix>;
    fn backward(&mut self, d_out: &Matrix) -> Result<()>;
    fn for_each_param(&mut self, f: &mut dyn FnMut(&mut Param));
    fn state(&self) -> Vec<Matrix>;
    fn set_state(&mut self, state: &[Matrix]) -> Result<()>;
}
