//! `sweep`: train one network per requested depth on a shared dataset and
//! split, and tabulate parameter counts, stopping epochs, and losses.

use std::path::PathBuf;
use std::sync::Mutex;

use clap::Args;

use densereg::model::{self, ModelKind};

use crate::artifacts::{write_csv, write_meta};
use crate::config::{ConfigFlags, RunConfig, SourceFlags};
use crate::errors::{CliError, CmdResult};
use crate::pipeline::{self, Prepared};

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated depths to train, e.g. 4,7,13
    #[arg(long, value_name = "LIST")]
    pub depths: String,

    /// Output CSV path
    #[arg(short, long, value_name = "FILE", default_value = "sweep.csv")]
    pub out: PathBuf,

    #[command(flatten)]
    pub source: SourceFlags,

    #[command(flatten)]
    pub config: ConfigFlags,
}

struct SweepRow {
    depth: usize,
    params: u64,
    stopping_epoch: usize,
    train_loss: f64,
    val_loss: f64,
    test_loss: f64,
    wall_time: f64,
}

fn parse_depths(text: &str) -> CmdResult<Vec<usize>> {
    let mut depths = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let d: usize = part
            .parse()
            .map_err(|_| CliError::config(format!("invalid depth {part:?} in --depths")))?;
        depths.push(d);
    }
    depths.sort_unstable();
    depths.dedup();
    if depths.is_empty() {
        return Err(CliError::config("--depths lists no depths"));
    }
    Ok(depths)
}

pub fn run(args: SweepArgs) -> CmdResult {
    let mut cfg = RunConfig::resolve(&args.config)?;
    args.source.install(&mut cfg);
    let depths = parse_depths(&args.depths)?;

    for &depth in &depths {
        let mut probe = cfg.clone();
        probe.depth = depth;
        probe.model_spec(1).map_err(CliError::from)?;
    }

    let ds = pipeline::load_dataset(&cfg)?;
    let prep = pipeline::prepare(&ds, &cfg)?;
    println!(
        "sweeping {} depths {:?} on {} ({} rows)",
        cfg.kind,
        depths,
        cfg.source.describe(),
        ds.len()
    );

    let rows = run_parallel(&cfg, &prep, &depths)?;

    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.depth,
                r.params,
                r.stopping_epoch,
                r.train_loss,
                r.val_loss,
                r.test_loss,
                r.wall_time
            )
        })
        .collect();
    write_csv(
        &args.out,
        "depth,params,stopping_epoch,train_loss,val_loss,test_loss,wall_time",
        &lines,
    )?;
    write_meta(&args.out, &cfg)?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

/// Trains the depths across a small worker pool. Each depth trains with its
/// own derived seed (`base seed + depth`), so results are independent of
/// how work lands on threads, and rows come back in depth order.
fn run_parallel(cfg: &RunConfig, prep: &Prepared, depths: &[usize]) -> CmdResult<Vec<SweepRow>> {
    let next = Mutex::new(0usize);
    let slots: Mutex<Vec<Option<CmdResult<SweepRow>>>> =
        Mutex::new(depths.iter().map(|_| None).collect());
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(depths.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = {
                    let mut claim = next.lock().expect("sweep index lock");
                    if *claim >= depths.len() {
                        return;
                    }
                    *claim += 1;
                    *claim - 1
                };
                let row = train_depth(cfg, prep, depths[i]);
                slots.lock().expect("sweep slot lock")[i] = Some(row);
            });
        }
    });
    slots
        .into_inner()
        .expect("sweep slot lock")
        .into_iter()
        .map(|slot| slot.expect("every index was claimed"))
        .collect()
}

fn train_depth(cfg: &RunConfig, prep: &Prepared, depth: usize) -> CmdResult<SweepRow> {
    let mut run_cfg = cfg.clone();
    run_cfg.depth = depth;
    let spec = run_cfg.model_spec(prep.input_dim())?;
    let seed = cfg.seed.wrapping_add(depth as u64);
    let (_, report) = pipeline::train_one(&run_cfg, prep, &spec, seed)?;
    let losses = pipeline::net_losses(&report)?;
    let params = match run_cfg.kind {
        ModelKind::Densenet => model::count_params(&spec)?.total,
        _ => spec.walked_param_counts()?.total,
    };
    Ok(SweepRow {
        depth,
        params,
        stopping_epoch: report.stopping_epoch,
        train_loss: losses.train,
        val_loss: losses.val,
        test_loss: losses.test,
        wall_time: report.wall_time_seconds,
    })
}
