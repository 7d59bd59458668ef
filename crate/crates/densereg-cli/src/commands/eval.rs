//! `eval`: score a saved checkpoint against a labeled dataset and report
//! metrics in original target units.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use densereg::checkpoint;
use densereg::train::{self, Metrics, TrainConfig};

use crate::artifacts::write_json;
use crate::config::{ConfigFlags, RunConfig, SourceFlags};
use crate::errors::{CliError, CmdResult};
use crate::pipeline;

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint to score
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,

    /// Optional file for the metrics JSON (also printed to stdout)
    #[arg(short, long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub source: SourceFlags,

    #[command(flatten)]
    pub config: ConfigFlags,
}

#[derive(Serialize)]
struct EvalReport<'a> {
    command: &'static str,
    checkpoint: String,
    data: String,
    n_rows: usize,
    metrics: Metrics,
    train_config: &'a TrainConfig,
}

pub fn run(args: EvalArgs) -> CmdResult {
    let mut cfg = RunConfig::resolve(&args.config)?;
    args.source.install(&mut cfg);

    let mut ckpt = checkpoint::load(&args.checkpoint).map_err(CliError::checkpoint)?;
    let ds = pipeline::load_dataset(&cfg)?;
    let expected = ckpt.model.spec().input_dim;
    if ds.dim() != expected {
        return Err(CliError::data(format!(
            "{} has {} feature columns but the checkpoint expects {expected}",
            cfg.source.describe(),
            ds.dim()
        )));
    }

    let x_scaled = ckpt.feature_scaler.transform(&ds.features)?;
    let pred =
        pipeline::predict_original_units(&mut ckpt.model, &x_scaled, &ckpt.target_scaler)?;
    let metrics = train::metrics(&ds.targets, &pred)?;

    let report = EvalReport {
        command: "eval",
        checkpoint: args.checkpoint.display().to_string(),
        data: cfg.source.describe(),
        n_rows: ds.len(),
        metrics,
        train_config: &ckpt.train_config,
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::data(format!("serializing eval report: {e}")))?;
    println!("{text}");
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    Ok(())
}
