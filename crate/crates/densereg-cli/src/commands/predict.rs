//! `predict`: run a checkpoint over feature rows from a CSV and write the
//! rows back out with a prediction column appended.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use densereg::checkpoint;
use densereg::data;
use densereg::train::TrainConfig;

use crate::artifacts::{write_csv, write_meta};
use crate::errors::{CliError, CmdResult};
use crate::pipeline;

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Checkpoint to predict with
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,

    /// CSV of feature rows (a target column, if present, is ignored)
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,

    /// Target column to skip when the CSV is labeled
    #[arg(long)]
    pub target_column: Option<String>,

    /// Comma-separated feature columns (default: all except the target)
    #[arg(long, value_name = "COLS")]
    pub feature_columns: Option<String>,

    /// Output CSV path
    #[arg(short, long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct PredictMeta<'a> {
    command: &'static str,
    checkpoint: String,
    data: String,
    feature_columns: &'a [String],
    train_config: &'a TrainConfig,
}

pub fn run(args: PredictArgs) -> CmdResult {
    let mut ckpt = checkpoint::load(&args.checkpoint).map_err(CliError::checkpoint)?;

    let header = data::csv_header(&args.data)?;
    let features: Vec<String> = match &args.feature_columns {
        Some(list) => list
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect(),
        None => header
            .iter()
            .filter(|c| Some(*c) != args.target_column.as_ref())
            .cloned()
            .collect(),
    };
    if features.is_empty() {
        return Err(CliError::data(format!(
            "{}: no feature columns to predict from",
            args.data.display()
        )));
    }

    let x = data::load_csv_features(&args.data, &features)?;
    let expected = ckpt.model.spec().input_dim;
    if x.cols() != expected {
        return Err(CliError::data(format!(
            "{} has {} feature columns but the checkpoint expects {expected}",
            args.data.display(),
            x.cols()
        )));
    }

    let x_scaled = ckpt.feature_scaler.transform(&x)?;
    let pred =
        pipeline::predict_original_units(&mut ckpt.model, &x_scaled, &ckpt.target_scaler)?;

    let header_line = format!("{},prediction", features.join(","));
    let lines: Vec<String> = (0..x.rows())
        .map(|i| {
            let mut cells: Vec<String> = x.row(i).iter().map(|v| format!("{v}")).collect();
            cells.push(format!("{}", pred[i]));
            cells.join(",")
        })
        .collect();
    write_csv(&args.out, &header_line, &lines)?;
    write_meta(
        &args.out,
        &PredictMeta {
            command: "predict",
            checkpoint: args.checkpoint.display().to_string(),
            data: args.data.display().to_string(),
            feature_columns: &features,
            train_config: &ckpt.train_config,
        },
    )?;

    println!("wrote {} predictions to {}", pred.len(), args.out.display());
    Ok(())
}
