//! `bench`: fit classical baselines and the three network variants on one
//! shared split and tabulate their losses in scaled space.
//!
//! Baseline hyperparameters are selected on the validation partition:
//! ridge and lasso search penalty strengths 1e-10 through 1e10 in decade
//! steps, the elastic net crosses that strength grid with mixing ratios 0
//! through 1 in steps of 0.1, and the decision tree searches depths 1
//! through 14. Support-vector regression is omitted; this stack has no
//! kernel quadratic-programming solver, and the omission is recorded in the
//! output metadata.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use densereg::baselines::{
    self, cart_fit, cart_predict, grid_search, lasso_elastic_fit, ols_fit, ridge_fit,
};
use densereg::model::{ModelKind, ModelSpec};
use densereg::train::mse;

use crate::artifacts::{write_csv, write_meta};
use crate::config::{ConfigFlags, RunConfig, SourceFlags};
use crate::errors::CmdResult;
use crate::pipeline::{self, Prepared};

const SVR_NOTE: &str =
    "svr omitted: no kernel quadratic-programming solver in this stack";

const ELASTIC_MAX_ITER: usize = 100_000;
const ELASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Output CSV path
    #[arg(short, long, value_name = "FILE", default_value = "bench.csv")]
    pub out: PathBuf,

    #[command(flatten)]
    pub source: SourceFlags,

    #[command(flatten)]
    pub config: ConfigFlags,
}

struct BenchRow {
    technique: &'static str,
    detail: String,
    train_loss: f64,
    val_loss: f64,
    test_loss: f64,
}

#[derive(Serialize)]
struct BenchMeta<'a> {
    command: &'static str,
    config: &'a RunConfig,
    omitted: &'static str,
}

fn penalty_grid() -> Vec<f64> {
    (-10..=10).map(|e| 10f64.powi(e)).collect()
}

/// Train/val/test losses of a fitted linear model over the shared split.
fn linear_losses(
    model: &baselines::LinearModel,
    prep: &Prepared,
) -> densereg::Result<(f64, f64, f64)> {
    Ok((
        mse(prep.y_train.data(), &model.predict(&prep.x_train)?)?,
        mse(prep.y_val.data(), &model.predict(&prep.x_val)?)?,
        mse(prep.y_test.data(), &model.predict(&prep.x_test)?)?,
    ))
}

fn linear_row(prep: &Prepared) -> CmdResult<BenchRow> {
    let model = ols_fit(&prep.x_train, prep.y_train.data())?;
    let (train_loss, val_loss, test_loss) = linear_losses(&model, prep)?;
    Ok(BenchRow {
        technique: "linear",
        detail: "ols".into(),
        train_loss,
        val_loss,
        test_loss,
    })
}

fn ridge_row(prep: &Prepared) -> CmdResult<BenchRow> {
    let grid = penalty_grid();
    let search = grid_search(&grid, |&alpha| {
        let model = ridge_fit(&prep.x_train, prep.y_train.data(), alpha)?;
        mse(prep.y_val.data(), &model.predict(&prep.x_val)?)
    })?;
    let model = ridge_fit(&prep.x_train, prep.y_train.data(), search.best_params)?;
    let (train_loss, val_loss, test_loss) = linear_losses(&model, prep)?;
    Ok(BenchRow {
        technique: "ridge",
        detail: format!("alpha={:e}", search.best_params),
        train_loss,
        val_loss,
        test_loss,
    })
}

fn lasso_row(prep: &Prepared) -> CmdResult<BenchRow> {
    let grid = penalty_grid();
    let search = grid_search(&grid, |&alpha| {
        let fit = lasso_elastic_fit(
            &prep.x_train,
            prep.y_train.data(),
            alpha,
            1.0,
            ELASTIC_MAX_ITER,
            ELASTIC_TOL,
        )?;
        mse(prep.y_val.data(), &fit.model.predict(&prep.x_val)?)
    })?;
    let fit = lasso_elastic_fit(
        &prep.x_train,
        prep.y_train.data(),
        search.best_params,
        1.0,
        ELASTIC_MAX_ITER,
        ELASTIC_TOL,
    )?;
    let (train_loss, val_loss, test_loss) = linear_losses(&fit.model, prep)?;
    Ok(BenchRow {
        technique: "lasso",
        detail: format!("alpha={:e}", search.best_params),
        train_loss,
        val_loss,
        test_loss,
    })
}

fn elastic_row(prep: &Prepared) -> CmdResult<BenchRow> {
    let mut grid = Vec::new();
    for alpha in penalty_grid() {
        for i in 0..=10 {
            grid.push((alpha, f64::from(i) / 10.0));
        }
    }
    let search = grid_search(&grid, |&(alpha, l1_ratio)| {
        let fit = lasso_elastic_fit(
            &prep.x_train,
            prep.y_train.data(),
            alpha,
            l1_ratio,
            ELASTIC_MAX_ITER,
            ELASTIC_TOL,
        )?;
        mse(prep.y_val.data(), &fit.model.predict(&prep.x_val)?)
    })?;
    let (alpha, l1_ratio) = search.best_params;
    let fit = lasso_elastic_fit(
        &prep.x_train,
        prep.y_train.data(),
        alpha,
        l1_ratio,
        ELASTIC_MAX_ITER,
        ELASTIC_TOL,
    )?;
    let (train_loss, val_loss, test_loss) = linear_losses(&fit.model, prep)?;
    Ok(BenchRow {
        technique: "elastic_net",
        detail: format!("alpha={alpha:e};l1_ratio={l1_ratio}"),
        train_loss,
        val_loss,
        test_loss,
    })
}

fn tree_row(prep: &Prepared) -> CmdResult<BenchRow> {
    let grid: Vec<usize> = (1..=14).collect();
    let search = grid_search(&grid, |&depth| {
        let tree = cart_fit(&prep.x_train, prep.y_train.data(), Some(depth), 1)?;
        mse(prep.y_val.data(), &cart_predict(&tree, &prep.x_val))
    })?;
    let tree = cart_fit(
        &prep.x_train,
        prep.y_train.data(),
        Some(search.best_params),
        1,
    )?;
    Ok(BenchRow {
        technique: "decision_tree",
        detail: format!("max_depth={}", search.best_params),
        train_loss: mse(prep.y_train.data(), &cart_predict(&tree, &prep.x_train))?,
        val_loss: mse(prep.y_val.data(), &cart_predict(&tree, &prep.x_val))?,
        test_loss: mse(prep.y_test.data(), &cart_predict(&tree, &prep.x_test))?,
    })
}

fn network_row(
    cfg: &RunConfig,
    prep: &Prepared,
    kind: ModelKind,
    technique: &'static str,
) -> CmdResult<BenchRow> {
    let width = match kind {
        ModelKind::Residual => Some(cfg.width.unwrap_or(16)),
        _ => None,
    };
    let spec = ModelSpec::new(kind, prep.input_dim(), cfg.depth, width)?;
    let (_, report) = pipeline::train_one(cfg, prep, &spec, cfg.seed)?;
    let losses = pipeline::net_losses(&report)?;
    let detail = match width {
        Some(w) => format!("depth={};width={w}", cfg.depth),
        None => format!("depth={}", cfg.depth),
    };
    Ok(BenchRow {
        technique,
        detail,
        train_loss: losses.train,
        val_loss: losses.val,
        test_loss: losses.test,
    })
}

pub fn run(args: BenchArgs) -> CmdResult {
    let mut cfg = RunConfig::resolve(&args.config)?;
    args.source.install(&mut cfg);

    let ds = pipeline::load_dataset(&cfg)?;
    let prep = pipeline::prepare(&ds, &cfg)?;
    println!(
        "benchmarking on {} ({} rows, {} features); losses are in scaled space",
        cfg.source.describe(),
        ds.len(),
        prep.input_dim()
    );
    println!("{SVR_NOTE}");

    type Fitter = fn(&Prepared) -> CmdResult<BenchRow>;
    let mut rows = Vec::new();
    let baselines: [Fitter; 5] = [linear_row, ridge_row, lasso_row, elastic_row, tree_row];
    for fit in baselines {
        let row = fit(&prep)?;
        println!("{}: val loss {:e}", row.technique, row.val_loss);
        rows.push(row);
    }
    for (kind, technique) in [
        (ModelKind::PlainAnn, "plain_ann"),
        (ModelKind::Residual, "residual"),
        (ModelKind::Densenet, "densenet"),
    ] {
        let row = network_row(&cfg, &prep, kind, technique)?;
        println!("{technique}: val loss {:e}", row.val_loss);
        rows.push(row);
    }

    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{}",
                r.technique, r.detail, r.train_loss, r.val_loss, r.test_loss
            )
        })
        .collect();
    write_csv(
        &args.out,
        "technique,detail,train_loss,val_loss,test_loss",
        &lines,
    )?;
    write_meta(
        &args.out,
        &BenchMeta {
            command: "bench",
            config: &cfg,
            omitted: SVR_NOTE,
        },
    )?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}
