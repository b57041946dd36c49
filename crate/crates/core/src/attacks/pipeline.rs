use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::analysis::auc;
use crate::data::{Dataset, SplitPlan};
use crate::error::{config_err, Error, Result};
use crate::nn::{MlpModel, ModelSpec};
use crate::relaxloss::{train, Method, TrainConfig};
use crate::rng;

use super::nn_attack::{train_nn_attack, NnAttackConfig};
use super::scores::threshold_scores;
use super::threshold::{evaluate_attack, select_threshold, ThresholdRule};
use super::{AttackKind, MembershipScoreSet};

/// Balanced target query set: members from the target training fold,
/// non-members from the target test fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySet {
    pub members: Vec<usize>,
    pub non_members: Vec<usize>,
}

impl QuerySet {
    pub fn indices(&self) -> Vec<usize> {
        self.members.iter().chain(&self.non_members).copied().collect()
    }

    pub fn truths(&self) -> Vec<bool> {
        std::iter::repeat_n(true, self.members.len())
            .chain(std::iter::repeat_n(false, self.non_members.len()))
            .collect()
    }
}

fn subsample(indices: &[usize], n: usize, seed: u64, stream: u64) -> Vec<usize> {
    if indices.len() <= n {
        return indices.to_vec();
    }
    let mut v = indices.to_vec();
    v.shuffle(&mut rng::stream(seed, stream));
    v.truncate(n);
    v.sort_unstable();
    v
}

/// Truncates the larger of the target train/test folds to the smaller's size
/// with a seeded subsample.
pub fn balanced_query(split: &SplitPlan, seed: u64) -> QuerySet {
    let n = split.target_train().len().min(split.target_test().len());
    QuerySet {
        members: subsample(split.target_train(), n, seed, 0x0A),
        non_members: subsample(split.target_test(), n, seed, 0x0B),
    }
}

/// Shadow training recipe. Without `adaptive` the attacker trains a plain
/// model with the same schedule; with it the shadow copies the defense.
pub fn shadow_config(target: &TrainConfig, adaptive: bool, seed: u64) -> TrainConfig {
    let mut cfg = target.clone();
    if !adaptive {
        cfg.method = Method::Vanilla;
    }
    cfg.batch_seed = rng::mix(&[seed, 0x5BA7]);
    cfg.checkpoint_epochs.clear();
    cfg
}

/// Trains a shadow model on the shadow folds.
pub fn train_shadow(
    spec: &ModelSpec,
    config: &TrainConfig,
    dataset: &Dataset,
    split: &SplitPlan,
    seed: u64,
) -> Result<MlpModel> {
    let init = spec.build(rng::mix(&[seed, 0x5AD0]))?;
    let out = train(init, dataset, split.shadow_train(), split.shadow_test(), config)?;
    if let Some(msg) = out.abort {
        return Err(Error::Training(format!("shadow training diverged: {msg}")));
    }
    Ok(out.model)
}

/// One row of an attack report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub attack: AttackKind,
    pub threshold: f64,
    pub shadow_accuracy: f64,
    pub target_accuracy: f64,
    pub target_auc: f64,
    pub adaptive: bool,
    pub degenerate: bool,
    /// Up to ten largest per-class AUCs, descending.
    pub per_class_auc_top10: Vec<f64>,
}

/// AUC restricted to each class that has both members and non-members.
pub fn per_class_auc(set: &MembershipScoreSet) -> Result<Vec<(usize, f64)>> {
    let labels = set
        .class_labels
        .as_ref()
        .ok_or_else(|| Error::Usage("per-class AUC needs class labels".into()))?;
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = Vec::new();
    for c in 0..classes {
        let mut m = Vec::new();
        let mut n = Vec::new();
        for ((&s, &t), &y) in set.scores.iter().zip(&set.truths).zip(labels) {
            if y == c {
                if t {
                    m.push(s);
                } else {
                    n.push(s);
                }
            }
        }
        if !m.is_empty() && !n.is_empty() {
            out.push((c, auc(&m, &n)?));
        }
    }
    Ok(out)
}

fn top10(set: &MembershipScoreSet) -> Result<Vec<f64>> {
    let mut v: Vec<f64> = per_class_auc(set)?.into_iter().map(|(_, a)| a).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.truncate(10);
    Ok(v)
}

fn check_folds(split: &SplitPlan) -> Result<()> {
    if split.folds.iter().any(Vec::is_empty) {
        return Err(config_err!("attacks need all five folds to be non-empty"));
    }
    Ok(())
}

/// Calibrates every requested attack on `shadow` and evaluates it against
/// `target` on the balanced `query` set.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_attacks(
    target: &MlpModel,
    shadow: &MlpModel,
    dataset: &Dataset,
    split: &SplitPlan,
    query: &QuerySet,
    attacks: &[AttackKind],
    nn_config: &NnAttackConfig,
    adaptive: bool,
) -> Result<Vec<AttackResult>> {
    check_folds(split)?;
    let (xs_in, ys_in) = dataset.gather(split.shadow_train());
    let (xs_out, ys_out) = dataset.gather(split.shadow_test());
    let q_idx = query.indices();
    let (xq, yq) = dataset.gather(&q_idx);
    let truths = query.truths();

    let shadow_in = threshold_scores(shadow, &xs_in, &ys_in, attacks)?;
    let shadow_out = threshold_scores(shadow, &xs_out, &ys_out, attacks)?;
    let target_scores = threshold_scores(target, &xq, &yq, attacks)?;

    let mut results = Vec::with_capacity(attacks.len());
    for (k, &kind) in attacks.iter().enumerate() {
        let (rule, scores) = if kind == AttackKind::Nn {
            let nn = train_nn_attack(shadow, dataset, split, nn_config)?;
            let rule = ThresholdRule {
                attack_name: kind.name().into(),
                threshold: 0.5,
                shadow_accuracy: nn.train_accuracy,
                degenerate: nn.train_accuracy <= 0.5,
            };
            (rule, nn.member_scores(target, &xq)?)
        } else {
            let rule = select_threshold(kind.name(), &shadow_in[k], &shadow_out[k])?;
            (rule, target_scores[k].clone())
        };
        let set = MembershipScoreSet::new(kind.name(), scores, truths.clone())?.with_class_labels(yq.clone())?;
        let eval = evaluate_attack(&rule, &set, false)?;
        results.push(AttackResult {
            attack: kind,
            threshold: rule.threshold,
            shadow_accuracy: rule.shadow_accuracy,
            target_accuracy: eval.accuracy,
            target_auc: auc(&set.split_by_truth().0, &set.split_by_truth().1)?,
            adaptive,
            degenerate: rule.degenerate,
            per_class_auc_top10: top10(&set)?,
        });
    }
    Ok(results)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveReport {
    pub results: Vec<AttackResult>,
    /// Highest target accuracy over all attacks (worst-case privacy risk).
    pub max_accuracy: f64,
    pub max_attack: AttackKind,
}

impl AdaptiveReport {
    pub fn from_results(results: Vec<AttackResult>) -> Result<Self> {
        let best = results
            .iter()
            .max_by(|a, b| a.target_accuracy.total_cmp(&b.target_accuracy))
            .ok_or_else(|| config_err!("no attacks were run"))?;
        Ok(Self {
            max_accuracy: best.target_accuracy,
            max_attack: best.attack,
            results,
        })
    }
}

/// Adaptive evaluation: the shadow model is trained with the defender's own
/// configuration before calibrating every attack on it.
#[allow(clippy::too_many_arguments)]
pub fn run_adaptive_attack(
    target: &MlpModel,
    spec: &ModelSpec,
    defense: &TrainConfig,
    dataset: &Dataset,
    split: &SplitPlan,
    query: &QuerySet,
    attacks: &[AttackKind],
    nn_config: &NnAttackConfig,
    seed: u64,
) -> Result<AdaptiveReport> {
    check_folds(split)?;
    let shadow = train_shadow(spec, &shadow_config(defense, true, seed), dataset, split, seed)?;
    AdaptiveReport::from_results(evaluate_attacks(
        target, &shadow, dataset, split, query, attacks, nn_config, true,
    )?)
}
