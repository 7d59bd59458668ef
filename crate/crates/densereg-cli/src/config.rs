//! Run configuration: desk-scale defaults, the `--paper-scale` overlay, an
//! optional JSON config file, and command-line flags, merged in that order
//! (later sources win). The resolved configuration is echoed into every
//! artifact so a run can be replayed from its outputs.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use densereg::data::SplitSpec;
use densereg::model::{ModelKind, ModelSpec};
use densereg::train::TrainConfig;

use crate::errors::{CliError, CmdResult};

/// Environment variable supplying the default seed when no config file or
/// flag sets one.
pub const SEED_ENV: &str = "DENSEREG_SEED";

/// Which dataset a command operates on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// The seven-input piecewise-polynomial synthetic target.
    Eq2,
    /// The two-input synthetic relative-humidity target.
    Humidity,
    /// A CSV file on disk.
    Csv(PathBuf),
}

/// The two built-in synthetic datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Eq2,
    Humidity,
}

impl From<SyntheticKind> for DataSource {
    fn from(kind: SyntheticKind) -> DataSource {
        match kind {
            SyntheticKind::Eq2 => DataSource::Eq2,
            SyntheticKind::Humidity => DataSource::Humidity,
        }
    }
}

/// Where a training-style command reads its rows from.
#[derive(Debug, Clone, Default, Args)]
pub struct SourceFlags {
    /// Labeled CSV to run on (default: the eq2 synthetic source)
    #[arg(long, value_name = "FILE", conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,

    /// Generate a synthetic dataset instead of reading a file
    #[arg(long, value_enum)]
    pub synthetic: Option<SyntheticKind>,

    /// Target column for CSV data (default: last column)
    #[arg(long)]
    pub target_column: Option<String>,

    /// Comma-separated feature columns for CSV data (default: all but target)
    #[arg(long, value_name = "COLS")]
    pub feature_columns: Option<String>,
}

impl SourceFlags {
    /// Applies these flags to a resolved config.
    pub fn install(&self, cfg: &mut RunConfig) {
        cfg.source = match (&self.data, self.synthetic) {
            (Some(path), _) => DataSource::Csv(path.clone()),
            (None, Some(kind)) => kind.into(),
            (None, None) => DataSource::Eq2,
        };
        cfg.set_columns(self.target_column.clone(), self.feature_columns.clone());
    }
}

impl DataSource {
    pub fn describe(&self) -> String {
        match self {
            DataSource::Eq2 => "synthetic:eq2".into(),
            DataSource::Humidity => "synthetic:humidity".into(),
            DataSource::Csv(p) => p.display().to_string(),
        }
    }
}

/// Fully resolved settings for one run. Field names match the config-file
/// schema and the long command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub kind: ModelKind,
    pub depth: usize,
    pub width: Option<usize>,
    pub n_samples: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub shuffle: bool,
    pub scale_target: bool,
    pub paper_scale: bool,
    pub source: DataSource,
    pub target_column: Option<String>,
    pub feature_columns: Option<Vec<String>>,
}

/// The optional JSON config file: every field optional, unknown fields
/// rejected so typos surface as config errors.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub kind: Option<ModelKind>,
    pub depth: Option<usize>,
    pub width: Option<usize>,
    pub n_samples: Option<usize>,
    pub train_frac: Option<f64>,
    pub val_frac: Option<f64>,
    pub test_frac: Option<f64>,
    pub seed: Option<u64>,
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub adam_eps: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub patience: Option<usize>,
    pub shuffle: Option<bool>,
    pub scale_target: Option<bool>,
    pub paper_scale: Option<bool>,
}

/// Shared tuning flags for commands that train or fit models. Every flag
/// overrides both the built-in defaults and the JSON config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// JSON config file; individual flags override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Full-scale experiment defaults: 10M samples, 800 epochs, batch 5000,
    /// patience 100 (heavy; desk defaults are 100k/200/1000/50)
    #[arg(long)]
    pub paper_scale: bool,

    /// Network wiring: densenet, plain_ann, or residual
    #[arg(long)]
    pub kind: Option<ModelKind>,

    /// Layer count; must be one more than a multiple of three
    #[arg(long)]
    pub depth: Option<usize>,

    /// Hidden width (residual networks only; defaults to 16 there)
    #[arg(long)]
    pub width: Option<usize>,

    /// Rows to generate for synthetic sources
    #[arg(long, value_name = "N")]
    pub n_samples: Option<usize>,

    /// Fraction of rows for training
    #[arg(long)]
    pub train_frac: Option<f64>,

    /// Fraction of rows for validation
    #[arg(long)]
    pub val_frac: Option<f64>,

    /// Fraction of rows for testing
    #[arg(long)]
    pub test_frac: Option<f64>,

    /// Master seed for generation, splitting, init, and shuffling
    #[arg(long)]
    pub seed: Option<u64>,

    /// Adam learning rate
    #[arg(long)]
    pub learning_rate: Option<f64>,

    /// Adam first-moment decay
    #[arg(long)]
    pub beta1: Option<f64>,

    /// Adam second-moment decay
    #[arg(long)]
    pub beta2: Option<f64>,

    /// Adam denominator epsilon
    #[arg(long)]
    pub adam_eps: Option<f64>,

    /// Minibatch size (at least 2; batch norm needs real batches)
    #[arg(long)]
    pub batch_size: Option<usize>,

    /// Maximum training epochs
    #[arg(long)]
    pub epochs: Option<usize>,

    /// Epochs without validation improvement before stopping
    #[arg(long)]
    pub patience: Option<usize>,

    /// Shuffle training rows each epoch (true/false)
    #[arg(long)]
    pub shuffle: Option<bool>,

    /// Min-max scale the target as well as the features (true/false)
    #[arg(long)]
    pub scale_target: Option<bool>,
}

impl ConfigFlags {
    fn as_overrides(&self) -> Overrides {
        Overrides {
            kind: self.kind,
            depth: self.depth,
            width: self.width,
            n_samples: self.n_samples,
            train_frac: self.train_frac,
            val_frac: self.val_frac,
            test_frac: self.test_frac,
            seed: self.seed,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            adam_eps: self.adam_eps,
            batch_size: self.batch_size,
            epochs: self.epochs,
            patience: self.patience,
            shuffle: self.shuffle,
            scale_target: self.scale_target,
            paper_scale: None,
        }
    }
}

impl RunConfig {
    /// Desk-scale defaults: small enough to finish in minutes on a laptop.
    pub fn desk_defaults() -> RunConfig {
        RunConfig {
            kind: ModelKind::Densenet,
            depth: 13,
            width: None,
            n_samples: 100_000,
            train_frac: 0.675,
            val_frac: 0.075,
            test_frac: 0.25,
            seed: 0,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 1000,
            epochs: 200,
            patience: 50,
            shuffle: true,
            scale_target: true,
            paper_scale: false,
            source: DataSource::Eq2,
            target_column: None,
            feature_columns: None,
        }
    }

    fn apply_paper_scale(&mut self) {
        self.n_samples = 10_000_000;
        self.epochs = 800;
        self.batch_size = 5000;
        self.patience = 100;
        self.paper_scale = true;
    }

    fn apply(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = o.$field.clone() { self.$field = v; })*
            };
        }
        take!(
            kind,
            depth,
            n_samples,
            train_frac,
            val_frac,
            test_frac,
            seed,
            learning_rate,
            beta1,
            beta2,
            adam_eps,
            batch_size,
            epochs,
            patience,
            shuffle,
            scale_target
        );
        if o.width.is_some() {
            self.width = o.width;
        }
    }

    /// Merges defaults, the seed environment variable, the paper-scale
    /// overlay, the JSON config file, and flags, then validates the result.
    pub fn resolve(flags: &ConfigFlags) -> CmdResult<RunConfig> {
        let mut cfg = RunConfig::desk_defaults();
        if let Ok(text) = std::env::var(SEED_ENV) {
            cfg.seed = text.parse().map_err(|_| {
                CliError::config(format!("{SEED_ENV}={text:?} is not an unsigned integer"))
            })?;
        }
        let file: Option<Overrides> = match &flags.config {
            Some(path) => Some(load_config_file(path)?),
            None => None,
        };
        if flags.paper_scale || file.as_ref().is_some_and(|f| f.paper_scale == Some(true)) {
            cfg.apply_paper_scale();
        }
        if let Some(file) = &file {
            cfg.apply(file);
        }
        cfg.apply(&flags.as_overrides());
        if cfg.kind == ModelKind::Residual && cfg.width.is_none() {
            cfg.width = Some(16);
        }
        // patience above the epoch budget can never fire, so short runs
        // need not override the default patience explicitly
        cfg.patience = cfg.patience.min(cfg.epochs.max(1));
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CmdResult {
        // surfaces bad kind/depth/width combinations before any data work;
        // the input dimension is unknown until the data is loaded
        self.model_spec(1).map_err(CliError::from)?;
        self.split_spec().map_err(CliError::from)?;
        self.train_config().validate().map_err(CliError::from)?;
        if self.n_samples == 0 {
            return Err(CliError::config("n_samples must be positive"));
        }
        Ok(())
    }

    pub fn model_spec(&self, input_dim: usize) -> densereg::Result<ModelSpec> {
        ModelSpec::new(self.kind, input_dim, self.depth, self.width)
    }

    pub fn split_spec(&self) -> densereg::Result<SplitSpec> {
        SplitSpec::new(self.train_frac, self.val_frac, self.test_frac, self.seed)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            adam_eps: self.adam_eps,
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            patience: self.patience,
            seed: self.seed,
            scale_target: self.scale_target,
            shuffle: self.shuffle,
        }
    }

    /// Comma-separated `--feature-columns` value, split and trimmed.
    pub fn set_columns(&mut self, target: Option<String>, features: Option<String>) {
        self.target_column = target;
        self.feature_columns = features.map(|list| {
            list.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        });
    }
}

fn load_config_file(path: &Path) -> CmdResult<Overrides> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
}
