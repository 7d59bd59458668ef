//! Shared run plumbing: materializing the configured dataset, producing the
//! split-and-scaled matrices every command consumes, and training a single
//! network on them.

use densereg::data::{self, Dataset};
use densereg::model::{Model, ModelSpec};
use densereg::tensor::{Matrix, Rng};
use densereg::train::{self, ScalerParams, TrainReport};

use crate::config::{DataSource, RunConfig};
use crate::errors::{CliError, CmdResult};

/// Loads the dataset named by the config: synthetic sources are generated
/// from the seed, CSV sources read with the configured columns (target
/// defaults to the last column, features to everything else).
pub fn load_dataset(cfg: &RunConfig) -> CmdResult<Dataset> {
    match &cfg.source {
        DataSource::Eq2 => Ok(data::generate(cfg.n_samples, &mut Rng::new(cfg.seed))?),
        DataSource::Humidity => {
            Ok(data::generate_humidity(cfg.n_samples, &mut Rng::new(cfg.seed))?)
        }
        DataSource::Csv(path) => {
            let header = data::csv_header(path)?;
            let target = match &cfg.target_column {
                Some(t) => t.clone(),
                None => header
                    .last()
                    .ok_or_else(|| CliError::data(format!("{}: empty header", path.display())))?
                    .clone(),
            };
            let features: Vec<String> = match &cfg.feature_columns {
                Some(cols) => cols.clone(),
                None => header.iter().filter(|c| **c != target).cloned().collect(),
            };
            if features.is_empty() {
                return Err(CliError::data(format!(
                    "{}: no feature columns besides the target {target:?}",
                    path.display()
                )));
            }
            Ok(data::load_csv(path, &features, &target)?)
        }
    }
}

/// The design matrices a run works with: split by the configured fractions,
/// features (and optionally the target) scaled by parameters fitted on the
/// training partition only.
pub struct Prepared {
    pub feature_scaler: ScalerParams,
    pub target_scaler: Option<ScalerParams>,
    pub x_train: Matrix,
    pub y_train: Matrix,
    pub x_val: Matrix,
    pub y_val: Matrix,
    pub x_test: Matrix,
    pub y_test: Matrix,
    pub test_targets_raw: Vec<f64>,
}

impl Prepared {
    pub fn input_dim(&self) -> usize {
        self.x_train.cols()
    }
}

pub fn prepare(ds: &Dataset, cfg: &RunConfig) -> CmdResult<Prepared> {
    let (train, val, test) = data::split(ds, &cfg.split_spec()?)?;
    if train.is_empty() {
        return Err(CliError::data("training partition is empty".to_string()));
    }
    let feature_scaler = ScalerParams::fit(&train.features)?;
    let target_scaler = if cfg.scale_target {
        Some(ScalerParams::fit(&train.targets_matrix())?)
    } else {
        None
    };
    let scale_y = |d: &Dataset| -> densereg::Result<Matrix> {
        match &target_scaler {
            Some(s) if !d.is_empty() => s.transform(&d.targets_matrix()),
            _ => Ok(d.targets_matrix()),
        }
    };
    let scale_x = |d: &Dataset| -> densereg::Result<Matrix> {
        if d.is_empty() {
            Ok(Matrix::zeros(0, ds.dim()))
        } else {
            feature_scaler.transform(&d.features)
        }
    };
    Ok(Prepared {
        x_train: scale_x(&train)?,
        y_train: scale_y(&train)?,
        x_val: scale_x(&val)?,
        y_val: scale_y(&val)?,
        x_test: scale_x(&test)?,
        y_test: scale_y(&test)?,
        test_targets_raw: test.targets.clone(),
        feature_scaler,
        target_scaler,
    })
}

/// Model predictions mapped back to original target units.
pub fn predict_original_units(
    model: &mut Model,
    x_scaled: &Matrix,
    target_scaler: &Option<ScalerParams>,
) -> densereg::Result<Vec<f64>> {
    let pred = train::predict(model, x_scaled)?;
    let pred = match target_scaler {
        Some(s) => s.inverse_transform(&pred)?,
        None => pred,
    };
    Ok(pred.data().to_vec())
}

/// Builds and trains one network with the given seed, then attaches
/// held-out results to the report: the scaled-space test MSE and metrics in
/// original units.
pub fn train_one(
    cfg: &RunConfig,
    prep: &Prepared,
    spec: &ModelSpec,
    seed: u64,
) -> CmdResult<(Model, TrainReport)> {
    let mut model = Model::build(spec, &mut Rng::new(seed))?;
    let mut train_config = cfg.train_config();
    train_config.seed = seed;
    let mut report = train::fit(
        &mut model,
        &prep.x_train,
        &prep.y_train,
        &prep.x_val,
        &prep.y_val,
        &train_config,
    )?;
    if prep.x_test.rows() > 0 {
        let pred_scaled = train::predict(&mut model, &prep.x_test)?;
        report.test_loss_scaled = Some(train::mse(prep.y_test.data(), pred_scaled.data())?);
        let pred_raw = match &prep.target_scaler {
            Some(s) => s.inverse_transform(&pred_scaled)?,
            None => pred_scaled,
        };
        report.test_metrics = Some(train::metrics(&prep.test_targets_raw, pred_raw.data())?);
    }
    Ok((model, report))
}

/// Losses of a fitted network at its restored best weights: training and
/// validation from the report, test computed fresh.
pub struct NetLosses {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

pub fn net_losses(report: &TrainReport) -> CmdResult<NetLosses> {
    let best = report.best_epoch;
    if best == 0 || best > report.train_curve.len() {
        return Err(CliError::data("training produced no epochs".to_string()));
    }
    Ok(NetLosses {
        train: report.train_curve[best - 1],
        val: report
            .best_val_loss
            .unwrap_or(report.val_curve[best - 1]),
        test: report.test_loss_scaled.unwrap_or(f64::NAN),
    })
}
