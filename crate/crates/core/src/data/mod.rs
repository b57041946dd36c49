//! Datasets, the five-fold split and batch iteration.

mod csv_io;
mod split;
mod synthetic;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::nn::Matrix;
use crate::rng;

pub use csv_io::{load_csv, read_csv, save_csv, write_csv};
pub use split::{five_fold_split, FoldRole, SplitPlan};
pub use synthetic::{generate_synthetic, SyntheticMode, SyntheticSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    #[default]
    RealValued,
    Binary,
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real_valued" | "real" => Ok(FeatureKind::RealValued),
            "binary" => Ok(FeatureKind::Binary),
            other => Err(config_err!("unknown feature kind `{other}`")),
        }
    }
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::RealValued => "real_valued",
            FeatureKind::Binary => "binary",
        }
    }
}

/// Labeled samples `z_i = (x_i, y_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub feature_kind: FeatureKind,
    pub feature_names: Vec<String>,
    pub label_name: String,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
        feature_kind: FeatureKind,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(crate::error::dim_err!(
                "{} feature rows vs {} labels",
                features.rows(),
                labels.len()
            ));
        }
        if num_classes < 2 {
            return Err(config_err!("a dataset needs at least 2 classes"));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(config_err!("label {y} out of range for {num_classes} classes"));
        }
        if labels.len() < num_classes {
            return Err(config_err!(
                "{} samples cannot cover {num_classes} classes",
                labels.len()
            ));
        }
        let feature_names = (0..features.cols()).map(|j| format!("f{j}")).collect();
        Ok(Self {
            name: name.into(),
            features,
            labels,
            num_classes,
            feature_kind,
            feature_names,
            label_name: "label".into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Features and labels of the given samples, in order.
    pub fn gather(&self, indices: &[usize]) -> (Matrix, Vec<usize>) {
        (
            self.features.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

/// Splits `indices` into `ceil(n / batch_size)` batches; the last may be short.
/// With `shuffle` the order is a seeded permutation.
pub fn batch_iter(indices: &[usize], batch_size: usize, seed: u64, shuffle: bool) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(config_err!("batch size must be at least 1"));
    }
    let mut order = indices.to_vec();
    if shuffle {
        order.shuffle(&mut rng::stream(seed, 0xBA7C));
    }
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}
