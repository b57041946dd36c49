use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::rng;

/// Role of each of the five folds, in fold order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldRole {
    TargetTrain,
    TargetTest,
    ShadowTrain,
    ShadowTest,
    Surrogate,
}

impl FoldRole {
    pub const ALL: [FoldRole; 5] = [
        FoldRole::TargetTrain,
        FoldRole::TargetTest,
        FoldRole::ShadowTrain,
        FoldRole::ShadowTest,
        FoldRole::Surrogate,
    ];
}

/// Five disjoint folds: target train/test, shadow train/test, surrogate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: [Vec<usize>; 5],
}

impl SplitPlan {
    pub fn fold(&self, role: FoldRole) -> &[usize] {
        let i = FoldRole::ALL.iter().position(|&r| r == role).unwrap();
        &self.folds[i]
    }

    pub fn target_train(&self) -> &[usize] {
        self.fold(FoldRole::TargetTrain)
    }

    pub fn target_test(&self) -> &[usize] {
        self.fold(FoldRole::TargetTest)
    }

    pub fn shadow_train(&self) -> &[usize] {
        self.fold(FoldRole::ShadowTrain)
    }

    pub fn shadow_test(&self) -> &[usize] {
        self.fold(FoldRole::ShadowTest)
    }

    pub fn surrogate(&self) -> &[usize] {
        self.fold(FoldRole::Surrogate)
    }
}

/// Seeded shuffle of `0..n`, sliced into five contiguous folds whose sizes
/// differ by at most one (the first `n % 5` folds get the extra sample).
pub fn five_fold_split(n: usize, seed: u64) -> Result<SplitPlan> {
    if n < 5 {
        return Err(config_err!("five-fold split needs at least 5 samples, got {n}"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, 0x5B17));
    let base = n / 5;
    let extra = n % 5;
    let mut folds: [Vec<usize>; 5] = Default::default();
    let mut start = 0;
    for (k, fold) in folds.iter_mut().enumerate() {
        let size = base + usize::from(k < extra);
        *fold = order[start..start + size].to_vec();
        start += size;
    }
    Ok(SplitPlan { folds })
}
