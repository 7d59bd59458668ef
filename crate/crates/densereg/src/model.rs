//! Assembly of the three network variants (densely concatenated, plain
//! feed-forward, residual) from the layer primitives, plus an exact
//! parameter-count oracle.
//!
//! All three variants share the unit pattern BN -> dense -> ReLU, differing
//! only in wiring:
//!
//! * `densenet`: after each three-layer block, the block input is appended to
//!   the block output, so widths double per block: block k runs at width
//!   `d * 2^(k-1)` and the top layer sees `d * 2^B` columns.
//! * `plain_ann`: the same per-layer output widths with the concatenation
//!   removed; each block consumes its predecessor's output directly.
//! * `residual`: a width-adapting entry layer, then identity-addition blocks
//!   at a fixed width.
//!
//! Depth counts the block layers plus the output layer (`depth = 3B + 1`);
//! the entry layer is uncounted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{concat_cols, split_cols, BatchNorm, Dense, Mode, Network, Param, Relu};
use crate::tensor::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Densenet,
    PlainAnn,
    Residual,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Densenet => "densenet",
            ModelKind::PlainAnn => "plain_ann",
            ModelKind::Residual => "residual",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "densenet" => Ok(ModelKind::Densenet),
            "plain_ann" => Ok(ModelKind::PlainAnn),
            "residual" => Ok(ModelKind::Residual),
            other => Err(Error::InvalidSpec(format!(
                "unknown model kind {other:?} (expected densenet, plain_ann, or residual)"
            ))),
        }
    }
}

/// Architecture description. `width` is the fixed hidden width of the
/// residual variant and must be absent for the other kinds, whose widths are
/// fully determined by `input_dim` and `depth`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, input_dim: usize, depth: usize, width: Option<usize>) -> Result<Self> {
        let spec = ModelSpec {
            kind,
            input_dim,
            depth,
            width,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidSpec("input_dim must be at least 1".into()));
        }
        if self.depth < 4 || self.depth % 3 != 1 {
            return Err(Error::InvalidSpec(format!(
                "depth must be 3*blocks + 1 with at least one block (4, 7, 10, ...), got {}",
                self.depth
            )));
        }
        match self.kind {
            ModelKind::Residual => match self.width {
                Some(w) if w >= 1 => {}
                Some(_) => return Err(Error::InvalidSpec("residual width must be at least 1".into())),
                None => return Err(Error::InvalidSpec("residual kind requires a width".into())),
            },
            _ => {
                if self.width.is_some() {
                    return Err(Error::InvalidSpec(format!(
                        "width applies only to the residual kind, not {}",
                        self.kind
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_blocks(&self) -> usize {
        (self.depth - 1) / 3
    }

    /// Width of block k's input (1-based) for the doubling variants.
    fn block_width(&self, k: usize) -> usize {
        self.input_dim << (k - 1)
    }

    /// One (fan_in, fan_out, has_relu) entry per BN -> dense -> activation
    /// unit: entry layer, then 3 units per block, then the linear output
    /// unit. Batch-norm width always equals fan_in. This ordering is the
    /// initialization draw order and the checkpoint traversal order.
    fn unit_dims(&self) -> Vec<(usize, usize, bool)> {
        let d = self.input_dim;
        let b = self.num_blocks();
        let mut dims = Vec::with_capacity(3 * b + 2);
        match self.kind {
            ModelKind::Densenet => {
                dims.push((d, d, true));
                for k in 1..=b {
                    let w = self.block_width(k);
                    for _ in 0..3 {
                        dims.push((w, w, true));
                    }
                }
                dims.push((d << b, 1, false));
            }
            ModelKind::PlainAnn => {
                dims.push((d, d, true));
                for k in 1..=b {
                    let w_out = self.block_width(k);
                    let w_in = if k == 1 { d } else { self.block_width(k - 1) };
                    dims.push((w_in, w_out, true));
                    dims.push((w_out, w_out, true));
                    dims.push((w_out, w_out, true));
                }
                dims.push((self.block_width(b), 1, false));
            }
            ModelKind::Residual => {
                let w = self.width.expect("validated");
                dims.push((d, w, true));
                for _ in 1..=b {
                    for _ in 0..3 {
                        dims.push((w, w, true));
                    }
                }
                dims.push((w, 1, false));
            }
        }
        dims
    }

    /// Every tensor of the built model: name, shape, and whether the
    /// optimizer updates it (batch-norm moving statistics are carried state,
    /// not trainable). Pure arithmetic; nothing is allocated, so this works
    /// at depths whose parameters would not fit in memory.
    pub fn tensor_shapes(&self) -> Result<Vec<TensorShape>> {
        self.validate()?;
        let dims = self.unit_dims();
        let n_units = dims.len();
        let mut shapes = Vec::with_capacity(6 * n_units);
        for (u, &(fan_in, fan_out, _)) in dims.iter().enumerate() {
            let prefix = unit_prefix(u, n_units);
            for (part, rows, cols, trainable) in [
                ("bn.gamma", 1, fan_in, true),
                ("bn.beta", 1, fan_in, true),
                ("bn.moving_mean", 1, fan_in, false),
                ("bn.moving_var", 1, fan_in, false),
                ("dense.weight", fan_in, fan_out, true),
                ("dense.bias", 1, fan_out, true),
            ] {
                shapes.push(TensorShape {
                    name: format!("{prefix}.{part}"),
                    rows,
                    cols,
                    trainable,
                });
            }
        }
        Ok(shapes)
    }

    /// Parameter counts obtained by summing tensor shapes. Works for every
    /// kind, unlike the closed form of [`count_params`].
    pub fn walked_param_counts(&self) -> Result<ParamCounts> {
        let mut total = 0u64;
        let mut trainable = 0u64;
        for t in self.tensor_shapes()? {
            let n = (t.rows * t.cols) as u64;
            total += n;
            if t.trainable {
                trainable += n;
            }
        }
        Ok(ParamCounts { total, trainable })
    }
}

/// Shape and role of one model tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub trainable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParamCounts {
    pub total: u64,
    pub trainable: u64,
}

/// Closed-form parameter counts for the densenet variant.
///
/// With d = input_dim and B blocks, `total = 4^B d^2 + 10 (2^(B+1) - 1) d + 1`,
/// counting batch norm as 4 per feature (gamma, beta, and the two moving
/// statistics). `trainable` excludes the moving statistics.
pub fn count_params(spec: &ModelSpec) -> Result<ParamCounts> {
    spec.validate()?;
    if spec.kind != ModelKind::Densenet {
        return Err(Error::InvalidSpec(format!(
            "closed-form parameter count is defined for densenet only, got {}",
            spec.kind
        )));
    }
    let d = spec.input_dim as u64;
    let b = spec.num_blocks() as u32;
    let total = 4u64.pow(b) * d * d + 10 * (2u64.pow(b + 1) - 1) * d + 1;
    // Batch-norm features: entry d, three layers per block at d*2^(k-1),
    // output layer d*2^B; the sum telescopes to 4d*2^B - 2d.
    let bn_features = 4 * d * 2u64.pow(b) - 2 * d;
    Ok(ParamCounts {
        total,
        trainable: total - 2 * bn_features,
    })
}

fn unit_prefix(u: usize, n_units: usize) -> String {
    if u == 0 {
        "input".to_string()
    } else if u == n_units - 1 {
        "output".to_string()
    } else {
        format!("block{}.layer{}", (u - 1) / 3 + 1, (u - 1) % 3 + 1)
    }
}

/// One BN -> dense -> optional-ReLU stage.
#[derive(Debug)]
struct Unit {
    bn: BatchNorm,
    dense: Dense,
    relu: Option<Relu>,
}

impl Unit {
    fn new(fan_in: usize, fan_out: usize, has_relu: bool, rng: &mut Rng) -> Self {
        Unit {
            bn: BatchNorm::new(fan_in),
            dense: Dense::new(fan_in, fan_out, rng),
            relu: has_relu.then(Relu::new),
        }
    }

    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        let h = self.bn.forward(x, mode)?;
        let h = self.dense.forward(&h, mode)?;
        Ok(match &mut self.relu {
            Some(r) => r.forward(&h, mode),
            None => h,
        })
    }

    fn backward(&mut self, d_out: &Matrix) -> Result<Matrix> {
        let d_act = match &mut self.relu {
            Some(r) => Some(r.backward(d_out)?),
            None => None,
        };
        let d = self.dense.backward(d_act.as_ref().unwrap_or(d_out))?;
        self.bn.backward(&d)
    }

    fn for_each_param(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.bn.gamma);
        f(&mut self.bn.beta);
        f(&mut self.dense.w);
        f(&mut self.dense.b);
    }

    fn tensors(&self) -> [&Matrix; 6] {
        [
            &self.bn.gamma.value,
            &self.bn.beta.value,
            &self.bn.moving_mean,
            &self.bn.moving_var,
            &self.dense.w.value,
            &self.dense.b.value,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Matrix; 6] {
        [
            &mut self.bn.gamma.value,
            &mut self.bn.beta.value,
            &mut self.bn.moving_mean,
            &mut self.bn.moving_var,
            &mut self.dense.w.value,
            &mut self.dense.b.value,
        ]
    }
}

/// A built network: the spec plus its units in traversal order (entry layer,
/// block layers, output layer).
#[derive(Debug)]
pub struct Model {
    spec: ModelSpec,
    units: Vec<Unit>,
}

impl Model {
    /// Instantiates the architecture, drawing dense weights in unit order
    /// (row-major within each weight matrix). The draw order is part of the
    /// reproducibility contract: a given (spec, seed) pair always produces
    /// the same initial tensors.
    pub fn build(spec: &ModelSpec, rng: &mut Rng) -> Result<Model> {
        spec.validate()?;
        let units = spec
            .unit_dims()
            .into_iter()
            .map(|(fan_in, fan_out, has_relu)| Unit::new(fan_in, fan_out, has_relu, rng))
            .collect();
        Ok(Model {
            spec: spec.clone(),
            units,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Single-column predictions for a batch.
    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        if x.cols() != self.spec.input_dim {
            return Err(Error::ShapeMismatch {
                op: "model_forward",
                left: format!("input {}x{}", x.rows(), x.cols()),
                right: format!("expected {} columns", self.spec.input_dim),
            });
        }
        let b = self.spec.num_blocks();
        let last = self.units.len() - 1;
        match self.spec.kind {
            ModelKind::Densenet => {
                let mut cur = self.units[0].forward(x, mode)?;
                for k in 0..b {
                    let block_in = cur.clone();
                    let mut h = cur;
                    for j in 0..3 {
                        h = self.units[1 + 3 * k + j].forward(&h, mode)?;
                    }
                    cur = concat_cols(&[&h, &block_in])?;
                }
                self.units[last].forward(&cur, mode)
            }
            ModelKind::PlainAnn => {
                let mut cur = self.units[0].forward(x, mode)?;
                for u in 1..=last {
                    cur = self.units[u].forward(&cur, mode)?;
                }
                Ok(cur)
            }
            ModelKind::Residual => {
                let mut cur = self.units[0].forward(x, mode)?;
                for k in 0..b {
                    let block_in = cur.clone();
                    let mut h = cur;
                    for j in 0..3 {
                        h = self.units[1 + 3 * k + j].forward(&h, mode)?;
                    }
                    cur = h.add(&block_in)?;
                }
                self.units[last].forward(&cur, mode)
            }
        }
    }

    /// Backpropagates d(loss)/d(prediction), filling every parameter's grad.
    /// Where a tensor feeds two consumers (a block's layers and its shortcut)
    /// the arriving gradients are summed.
    pub fn backward(&mut self, d_pred: &Matrix) -> Result<()> {
        let b = self.spec.num_blocks();
        let last = self.units.len() - 1;
        match self.spec.kind {
            ModelKind::Densenet => {
                let mut d = self.units[last].backward(d_pred)?;
                for k in (0..b).rev() {
                    let w = self.spec.block_width(k + 1);
                    let mut parts = split_cols(&d, &[w, w])?.into_iter();
                    let mut dh = parts.next().expect("two parts");
                    let d_skip = parts.next().expect("two parts");
                    for j in (0..3).rev() {
                        dh = self.units[1 + 3 * k + j].backward(&dh)?;
                    }
                    d = dh.add(&d_skip)?;
                }
                self.units[0].backward(&d)?;
                Ok(())
            }
            ModelKind::PlainAnn => {
                let mut d = self.units[last].backward(d_pred)?;
                for u in (0..last).rev() {
                    d = self.units[u].backward(&d)?;
                }
                Ok(())
            }
            ModelKind::Residual => {
                let mut d = self.units[last].backward(d_pred)?;
                for k in (0..b).rev() {
                    let identity = d.clone();
                    let mut dh = d;
                    for j in (0..3).rev() {
                        dh = self.units[1 + 3 * k + j].backward(&dh)?;
                    }
                    d = dh.add(&identity)?;
                }
                self.units[0].backward(&d)?;
                Ok(())
            }
        }
    }

    /// All tensors paired with their stable names, in traversal order
    /// (matches [`ModelSpec::tensor_shapes`]).
    pub fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        let n_units = self.units.len();
        let mut out = Vec::with_capacity(6 * n_units);
        for (u, unit) in self.units.iter().enumerate() {
            let prefix = unit_prefix(u, n_units);
            for (part, t) in TENSOR_PARTS.iter().zip(unit.tensors()) {
                out.push((format!("{prefix}.{part}"), t));
            }
        }
        out
    }

    /// Mutable counterpart of [`Model::named_tensors`], used to restore a
    /// model from stored tensors.
    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let n_units = self.units.len();
        let mut out = Vec::with_capacity(6 * n_units);
        for (u, unit) in self.units.iter_mut().enumerate() {
            let prefix = unit_prefix(u, n_units);
            for (part, t) in TENSOR_PARTS.iter().zip(unit.tensors_mut()) {
                out.push((format!("{prefix}.{part}"), t));
            }
        }
        out
    }
}

const TENSOR_PARTS: [&str; 6] = [
    "bn.gamma",
    "bn.beta",
    "bn.moving_mean",
    "bn.moving_var",
    "dense.weight",
    "dense.bias",
];

impl Network for Model {
    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        Model::forward(self, x, mode)
    }

    fn backward(&mut self, d_out: &Matrix) -> Result<()> {
        Model::backward(self, d_out)
    }

    fn for_each_param(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for unit in &mut self.units {
            unit.for_each_param(f);
        }
    }

    fn state(&self) -> Vec<Matrix> {
        self.units
            .iter()
            .flat_map(|u| u.tensors().map(Matrix::clone))
            .collect()
    }

    fn set_state(&mut self, state: &[Matrix]) -> Result<()> {
        let expected = 6 * self.units.len();
        if state.len() != expected {
            return Err(Error::TensorMismatch(format!(
                "state has {} tensors, model needs {expected}",
                state.len()
            )));
        }
        let mut it = state.iter();
        for unit in &mut self.units {
            for slot in unit.tensors_mut() {
                let src = it.next().expect("length checked");
                if src.shape() != slot.shape() {
                    return Err(Error::TensorMismatch(format!(
                        "state tensor is {}x{}, model slot is {}x{}",
                        src.rows(),
                        src.cols(),
                        slot.rows(),
                        slot.cols()
                    )));
                }
                *slot = src.clone();
            }
        }
        Ok(())
    }
}
