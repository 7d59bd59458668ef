//! `generate`: write one of the synthetic datasets to CSV.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use densereg::data;
use densereg::tensor::Rng;

use crate::artifacts::write_meta;
use crate::config::{ConfigFlags, RunConfig, SyntheticKind};
use crate::errors::CmdResult;

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Which synthetic dataset to produce
    #[arg(long, value_enum, default_value = "eq2")]
    pub kind: SyntheticKind,

    /// Output CSV path
    #[arg(short, long, value_name = "FILE")]
    pub out: PathBuf,

    /// JSON config file (its n_samples and seed apply here)
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Full-scale row count (10M) instead of the desk default (100k)
    #[arg(long)]
    pub paper_scale: bool,

    /// Rows to generate
    #[arg(short, long, value_name = "N")]
    pub n_samples: Option<usize>,

    /// Seed for the feature draws
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct GenerateMeta<'a> {
    command: &'static str,
    kind: SyntheticKind,
    n_samples: usize,
    seed: u64,
    config: &'a RunConfig,
}

pub fn run(args: GenerateArgs) -> CmdResult {
    let flags = ConfigFlags {
        config: args.config.clone(),
        paper_scale: args.paper_scale,
        n_samples: args.n_samples,
        seed: args.seed,
        ..Default::default()
    };
    let mut cfg = RunConfig::resolve(&flags)?;
    cfg.source = args.kind.into();

    match args.kind {
        SyntheticKind::Eq2 => {
            data::generate_to_csv(cfg.n_samples, cfg.seed, &args.out)?;
        }
        SyntheticKind::Humidity => {
            let ds = data::generate_humidity(cfg.n_samples, &mut Rng::new(cfg.seed))?;
            data::write_csv(&ds, &args.out)?;
        }
    }

    write_meta(
        &args.out,
        &GenerateMeta {
            command: "generate",
            kind: args.kind,
            n_samples: cfg.n_samples,
            seed: cfg.seed,
            config: &cfg,
        },
    )?;

    println!(
        "wrote {} rows to {} (seed {})",
        cfg.n_samples,
        args.out.display(),
        cfg.seed
    );
    Ok(())
}
