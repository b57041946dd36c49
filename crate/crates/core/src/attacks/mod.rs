//! Membership inference attacks.
//!
//! Threshold attacks turn a per-sample statistic into a "member-likeness"
//! score (higher means more likely a member) and calibrate a single
//! threshold on a shadow model. The NN attack learns a classifier over the
//! shadow model's sorted output vectors.

mod nn_attack;
mod pipeline;
mod scores;
mod threshold;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

pub use nn_attack::{attack_features, train_nn_attack, AttackFeatures, NnAttackConfig, NnAttackModel};
pub use pipeline::{
    balanced_query, evaluate_attacks, per_class_auc, run_adaptive_attack, shadow_config, train_shadow,
    AdaptiveReport, AttackResult, QuerySet,
};
pub use scores::{
    m_entropy, score_entropy, score_grad_norm, score_loss, score_m_entropy, threshold_scores, GradNormKind,
};
pub use threshold::{evaluate_attack, select_threshold, AttackEvaluation, ThresholdRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Loss,
    Entropy,
    MEntropy,
    GradXL1,
    GradXL2,
    GradWL1,
    GradWL2,
    Nn,
}

impl AttackKind {
    pub const ALL: [AttackKind; 8] = [
        AttackKind::Loss,
        AttackKind::Entropy,
        AttackKind::MEntropy,
        AttackKind::GradXL1,
        AttackKind::GradXL2,
        AttackKind::GradWL1,
        AttackKind::GradWL2,
        AttackKind::Nn,
    ];

    pub const BLACK_BOX: [AttackKind; 4] = [
        AttackKind::Loss,
        AttackKind::Entropy,
        AttackKind::MEntropy,
        AttackKind::Nn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Loss => "loss",
            AttackKind::Entropy => "entropy",
            AttackKind::MEntropy => "m_entropy",
            AttackKind::GradXL1 => "grad_x_l1",
            AttackKind::GradXL2 => "grad_x_l2",
            AttackKind::GradWL1 => "grad_w_l1",
            AttackKind::GradWL2 => "grad_w_l2",
            AttackKind::Nn => "nn",
        }
    }

    /// Needs only the model's output vector, not its gradients.
    pub fn is_black_box(self) -> bool {
        Self::BLACK_BOX.contains(&self)
    }

    /// Parses a comma-separated list; `all` and `black_box` are shorthands.
    pub fn parse_list(s: &str) -> Result<Vec<AttackKind>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "all" => out.extend(Self::ALL),
                "black_box" => out.extend(Self::BLACK_BOX),
                "white_box" => out.extend(Self::ALL.iter().filter(|k| !k.is_black_box())),
                other => out.push(other.parse()?),
            }
        }
        if out.is_empty() {
            return Err(config_err!("empty attack list"));
        }
        let mut seen = std::collections::BTreeSet::new();
        out.retain(|k| seen.insert(*k));
        Ok(out)
    }
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| config_err!("unknown attack `{s}`"))
    }
}

/// Per-sample membership scores with ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipScoreSet {
    pub attack_name: String,
    /// Higher means more member-like.
    pub scores: Vec<f64>,
    /// `true` for members.
    pub truths: Vec<bool>,
    pub class_labels: Option<Vec<usize>>,
}

impl MembershipScoreSet {
    pub fn new(attack_name: impl Into<String>, scores: Vec<f64>, truths: Vec<bool>) -> Result<Self> {
        if scores.len() != truths.len() {
            return Err(crate::error::dim_err!("{} scores vs {} truths", scores.len(), truths.len()));
        }
        Ok(Self {
            attack_name: attack_name.into(),
            scores,
            truths,
            class_labels: None,
        })
    }

    /// Members first, then non-members.
    pub fn from_groups(attack_name: impl Into<String>, members: &[f64], non_members: &[f64]) -> Self {
        Self {
            attack_name: attack_name.into(),
            scores: members.iter().chain(non_members).copied().collect(),
            truths: std::iter::repeat_n(true, members.len())
                .chain(std::iter::repeat_n(false, non_members.len()))
                .collect(),
            class_labels: None,
        }
    }

    pub fn with_class_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.scores.len() {
            return Err(crate::error::dim_err!("{} class labels for {} scores", labels.len(), self.scores.len()));
        }
        self.class_labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn member_count(&self) -> usize {
        self.truths.iter().filter(|&&t| t).count()
    }

    pub fn is_balanced(&self) -> bool {
        2 * self.member_count() == self.len()
    }

    pub fn split_by_truth(&self) -> (Vec<f64>, Vec<f64>) {
        let mut m = Vec::new();
        let mut n = Vec::new();
        for (&s, &t) in self.scores.iter().zip(&self.truths) {
            if t {
                m.push(s);
            } else {
                n.push(s);
            }
        }
        (m, n)
    }
}
