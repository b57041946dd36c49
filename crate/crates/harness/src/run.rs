//! Training runs and the on-disk layout of a run directory.
//!
//! ```text
//! <run>/manifest.cfg        full experiment config
//! <run>/split.json          five-fold index plan
//! <run>/model.json          final target checkpoint
//! <run>/trace.csv           per-epoch training trace
//! <run>/checkpoints/epoch_<n>.json
//! <run>/attacks.csv         written by `attack`
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use relaxlab::data::{five_fold_split, generate_synthetic, load_csv, Dataset, SplitPlan};
use relaxlab::nn::MlpModel;
use relaxlab::relaxloss::{train, TrainTrace};
use relaxlab::{Error, Result};

use crate::config::ExperimentConfig;

pub const MANIFEST: &str = "manifest.cfg";
pub const SPLIT: &str = "split.json";
pub const MODEL: &str = "model.json";
pub const TRACE: &str = "trace.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

pub fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(CHECKPOINT_DIR).join(format!("epoch_{epoch}.json"))
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.data_path {
        None => generate_synthetic(&cfg.synthetic_spec()),
        Some(path) => load_csv(path, &cfg.label_col, cfg.feature_kind),
    }
}

/// Dataset and fold plan, both driven by the data seed.
pub fn prepare(cfg: &ExperimentConfig) -> Result<(Dataset, SplitPlan)> {
    let dataset = load_dataset(cfg)?;
    let split = five_fold_split(dataset.len(), cfg.seeds.data)?;
    Ok((dataset, split))
}

#[derive(Debug)]
pub struct TrainSummary {
    pub dir: PathBuf,
    pub trace: TrainTrace,
}

/// Trains the target model on the target folds and writes the run directory.
///
/// A run that diverges still writes its manifest and the trace of every
/// completed epoch before returning the numeric error.
pub fn run_train(cfg: &ExperimentConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let (dataset, split) = prepare(cfg)?;
    let spec = cfg.model_spec(dataset.dim(), dataset.num_classes);
    let model = spec.build(cfg.seeds.init)?;
    let outcome = train(model, &dataset, split.target_train(), split.target_test(), &cfg.train_config())?;

    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(MANIFEST), cfg.to_text())?;
    fs::write(dir.join(SPLIT), serde_json::to_string_pretty(&split)?)?;
    fs::write(dir.join(TRACE), outcome.trace.to_csv())?;
    if let Some(msg) = outcome.abort {
        return Err(Error::Numeric(format!("training aborted: {msg}")));
    }
    outcome.model.save_checkpoint(dir.join(MODEL))?;
    if !outcome.checkpoints.is_empty() {
        fs::create_dir_all(dir.join(CHECKPOINT_DIR))?;
        for (epoch, m) in &outcome.checkpoints {
            m.save_checkpoint(checkpoint_path(&dir, *epoch))?;
        }
    }
    Ok(TrainSummary {
        dir,
        trace: outcome.trace,
    })
}

/// A finished run loaded back from disk.
#[derive(Debug)]
pub struct Run {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub dataset: Dataset,
    pub split: SplitPlan,
    pub model: MlpModel,
    pub trace: TrainTrace,
}

fn require(dir: &Path, name: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(Error::Config(format!("{} has no {name}; is it a finished run?", dir.display())))
    }
}

impl Run {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        Self::open_at(dir, None)
    }

    /// Opens a run using the checkpoint saved after `epoch` instead of the final model.
    pub fn open_at(dir: impl AsRef<Path>, epoch: Option<usize>) -> Result<Self> {
        let dir = dir.as_ref();
        let config = ExperimentConfig::load(require(dir, MANIFEST)?)?;
        let split: SplitPlan = serde_json::from_str(&fs::read_to_string(require(dir, SPLIT)?)?)?;
        let model_path = match epoch {
            None => require(dir, MODEL)?,
            Some(e) => {
                let p = checkpoint_path(dir, e);
                if !p.is_file() {
                    return Err(Error::Config(format!("{} has no checkpoint for epoch {e}", dir.display())));
                }
                p
            }
        };
        let model = MlpModel::load_checkpoint(model_path)?;
        let trace = TrainTrace::from_csv(&fs::read_to_string(require(dir, TRACE)?)?)?;
        let dataset = load_dataset(&config)?;
        if split.folds.iter().flatten().any(|&i| i >= dataset.len()) {
            return Err(Error::Config("split plan does not fit the dataset".into()));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            dataset,
            split,
            model,
            trace,
        })
    }
}
