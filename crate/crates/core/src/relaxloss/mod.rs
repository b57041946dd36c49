//! Relaxed-loss training and the regularizer baselines.
//!
//! Each batch compares its mean cross-entropy against a target level `α`.
//! Above it the model takes a normal descent step. Below it, even epochs take
//! a gradient *ascent* step on the same loss and odd epochs take a descent
//! step towards flattened soft targets. With `α = 0` this is plain training.

mod softlabel;
mod trace;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

pub use softlabel::{construct_softlabels, flatten_targets};
pub use trace::{EpochRecord, TrainTrace, TRACE_CSV_HEADER};
pub use train::{evaluate, relaxloss_epoch, train, train_epoch, EpochRun, EvalStats, TrainConfig, TrainOutcome};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlattenScope {
    #[default]
    AllSamples,
    IncorrectOnly,
}

impl std::str::FromStr for FlattenScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_samples" | "all" => Ok(FlattenScope::AllSamples),
            "incorrect_only" | "incorrect" => Ok(FlattenScope::IncorrectOnly),
            other => Err(config_err!("unknown flatten scope `{other}`")),
        }
    }
}

impl FlattenScope {
    pub fn name(self) -> &'static str {
        match self {
            FlattenScope::AllSamples => "all_samples",
            FlattenScope::IncorrectOnly => "incorrect_only",
        }
    }
}

/// Relaxed-loss settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxConfig {
    /// Target mean training loss; 0 reduces to plain training.
    pub alpha: f64,
    pub flatten_scope: FlattenScope,
    /// Upper bound on the ground-truth score of a flattened target.
    pub gt_cap: Option<f64>,
}

/// Cap used for categorical data when one is requested without a value.
pub const DEFAULT_GT_CAP: f64 = 0.3;

impl RelaxConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            flatten_scope: FlattenScope::AllSamples,
            gt_cap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(config_err!("alpha must be a finite non-negative number, got {}", self.alpha));
        }
        if let Some(cap) = self.gt_cap {
            if !(cap > 0.0 && cap <= 1.0) {
                return Err(config_err!("ground-truth cap {cap} outside (0,1]"));
            }
        }
        Ok(())
    }
}

/// Training objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Method {
    Vanilla,
    RelaxLoss(RelaxConfig),
    /// `α·D_KL(U ∥ p) + (1−α)·CE`.
    LabelSmoothing(f64),
    /// `CE − α·H(p)`.
    ConfidencePenalty(f64),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::RelaxLoss(_) => "relaxloss",
            Method::LabelSmoothing(_) => "label_smoothing",
            Method::ConfidencePenalty(_) => "confidence_penalty",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Method::Vanilla => Ok(()),
            Method::RelaxLoss(cfg) => cfg.validate(),
            Method::LabelSmoothing(a) if !(0.0..=1.0).contains(a) => {
                Err(config_err!("label smoothing weight {a} outside [0,1]"))
            }
            Method::ConfidencePenalty(a) if !(*a >= 0.0 && a.is_finite()) => {
                Err(config_err!("confidence penalty weight {a} must be non-negative"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Descent,
    Ascent,
    Flatten,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochPhaseDecision {
    pub branch: Branch,
    pub batch_mean_loss: f64,
    /// 1-based.
    pub epoch_index: usize,
}

/// Descent iff `loss ≥ α`; otherwise ascent on even epochs, flattening on odd ones.
pub fn decide_branch(batch_mean_loss: f64, alpha: f64, epoch_index: usize) -> EpochPhaseDecision {
    let branch = if batch_mean_loss >= alpha {
        Branch::Descent
    } else if epoch_index.is_multiple_of(2) {
        Branch::Ascent
    } else {
        Branch::Flatten
    };
    EpochPhaseDecision {
        branch,
        batch_mean_loss,
        epoch_index,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_truth_table() {
        let alpha = 1.0;
        let cases = [
            (1.2, 2, Branch::Descent),
            (1.2, 3, Branch::Descent),
            (1.0, 2, Branch::Descent),
            (1.0, 3, Branch::Descent),
            (0.8, 2, Branch::Ascent),
            (0.8, 3, Branch::Flatten),
            (0.8, 1, Branch::Flatten),
        ];
        for (loss, epoch, expected) in cases {
            let d = decide_branch(loss, alpha, epoch);
            assert_eq!(d.branch, expected, "loss {loss}, epoch {epoch}");
        }
    }

    #[test]
    fn zero_alpha_always_descends() {
        for epoch in 1..10 {
            assert_eq!(decide_branch(0.0, 0.0, epoch).branch, Branch::Descent);
        }
    }

    #[test]
    fn config_validation() {
        assert!(RelaxConfig::new(-0.1).validate().is_err());
        let capped = RelaxConfig {
            gt_cap: Some(1.5),
            ..RelaxConfig::new(1.0)
        };
        assert!(capped.validate().is_err());
        assert!(Method::LabelSmoothing(1.1).validate().is_err());
        assert!(Method::ConfidencePenalty(-1.0).validate().is_err());
        assert!(Method::ConfidencePenalty(2.0).validate().is_ok());
    }
}
