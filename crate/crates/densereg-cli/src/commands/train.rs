//! `train`: fit one network on the configured dataset and write a run
//! directory containing the checkpoint, the per-epoch loss curve, and a
//! summary of the resolved configuration and results.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use densereg::checkpoint;
use densereg::model::ParamCounts;
use densereg::train::TrainReport;

use crate::artifacts::{write_json, write_meta};
use crate::config::{ConfigFlags, RunConfig, SourceFlags};
use crate::errors::{CliError, CmdResult};
use crate::pipeline;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory for the checkpoint, loss curve, and summary
    #[arg(short, long, value_name = "DIR", default_value = "run")]
    pub out: PathBuf,

    #[command(flatten)]
    pub source: SourceFlags,

    #[command(flatten)]
    pub config: ConfigFlags,
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    command: &'static str,
    config: &'a RunConfig,
    feature_names: &'a [String],
    target_name: &'a str,
    params: ParamCounts,
    report: &'a TrainReport,
}

pub fn run(args: TrainArgs) -> CmdResult {
    let mut cfg = RunConfig::resolve(&args.config)?;
    args.source.install(&mut cfg);

    let ds = pipeline::load_dataset(&cfg)?;
    let prep = pipeline::prepare(&ds, &cfg)?;
    let spec = cfg.model_spec(prep.input_dim())?;
    let params = spec.walked_param_counts()?;

    println!(
        "training {} depth {} on {} ({} rows, {} trainable parameters)",
        cfg.kind,
        cfg.depth,
        cfg.source.describe(),
        ds.len(),
        params.trainable
    );

    let (model, report) = pipeline::train_one(&cfg, &prep, &spec, cfg.seed)?;

    std::fs::create_dir_all(&args.out).map_err(|e| {
        CliError::data(format!("cannot create {}: {e}", args.out.display()))
    })?;

    let ckpt_path = args.out.join("checkpoint.json");
    checkpoint::save(
        &model,
        &prep.feature_scaler,
        prep.target_scaler.as_ref(),
        &cfg.train_config(),
        &ckpt_path,
    )
    .map_err(CliError::checkpoint)?;

    let curve_path = args.out.join("loss_curve.csv");
    report.write_loss_csv(&curve_path)?;
    write_meta(&curve_path, &cfg)?;

    write_json(
        &args.out.join("summary.json"),
        &TrainSummary {
            command: "train",
            config: &cfg,
            feature_names: &ds.feature_names,
            target_name: &ds.target_name,
            params,
            report: &report,
        },
    )?;

    println!(
        "stopped after epoch {} (best epoch {}, val loss {:.6e}); wrote {}",
        report.stopping_epoch,
        report.best_epoch,
        report.best_val_loss.unwrap_or(f64::NAN),
        args.out.display()
    );
    Ok(())
}
