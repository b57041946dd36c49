use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::analysis::auc;
use crate::data::{Dataset, FeatureKind, SplitPlan};
use crate::error::{config_err, Error, Result};
use crate::nn::{Activation, Matrix, MlpModel, SgdConfig};
use crate::relaxloss::{train, Method, TrainConfig};
use crate::rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackFeatures {
    #[default]
    Logits,
    Posteriors,
}

impl std::str::FromStr for AttackFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logits" => Ok(AttackFeatures::Logits),
            "posteriors" => Ok(AttackFeatures::Posteriors),
            other => Err(config_err!("unknown attack feature kind `{other}`")),
        }
    }
}

impl AttackFeatures {
    pub fn name(self) -> &'static str {
        match self {
            AttackFeatures::Logits => "logits",
            AttackFeatures::Posteriors => "posteriors",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NnAttackConfig {
    pub hidden: Vec<usize>,
    pub features: AttackFeatures,
    pub epochs: usize,
    pub batch_size: usize,
    pub sgd: SgdConfig,
    pub seed: u64,
    /// Share of shadow members held out for validation against the surrogate fold.
    pub holdout_fraction: f64,
}

impl Default for NnAttackConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            features: AttackFeatures::Logits,
            epochs: 30,
            batch_size: 64,
            sgd: SgdConfig {
                learning_rate: 0.05,
                momentum: 0.9,
                weight_decay: 5e-4,
                lr_schedule: vec![],
            },
            seed: 0,
            holdout_fraction: 0.2,
        }
    }
}

/// Sorted-descending output vectors of `model`, one row per input.
pub fn attack_features(model: &MlpModel, inputs: &Matrix, kind: AttackFeatures) -> Result<Matrix> {
    let mut out = match kind {
        AttackFeatures::Logits => model.logits(inputs)?,
        AttackFeatures::Posteriors => model.predict(inputs)?.into_matrix(),
    };
    for r in 0..out.rows() {
        out.row_mut(r).sort_by(|a, b| b.total_cmp(a));
    }
    Ok(out)
}

/// Binary member/non-member classifier over a model's sorted outputs.
#[derive(Clone, Debug)]
pub struct NnAttackModel {
    pub model: MlpModel,
    pub features: AttackFeatures,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// Balanced accuracy at 0.5 on the attack's own training data.
    pub train_accuracy: f64,
    /// AUC on held-out shadow members vs. surrogate-fold non-members.
    pub validation_auc: Option<f64>,
}

impl NnAttackModel {
    fn standardize(&self, mut f: Matrix) -> Matrix {
        for r in 0..f.rows() {
            for ((v, m), s) in f.row_mut(r).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        f
    }

    /// Predicted membership probability for each input queried through `target`.
    pub fn member_scores(&self, target: &MlpModel, inputs: &Matrix) -> Result<Vec<f64>> {
        let f = self.standardize(attack_features(target, inputs, self.features)?);
        let p = self.model.predict(&f)?;
        Ok(p.matrix().row_iter().map(|r| r[1]).collect())
    }
}

fn shuffled(indices: &[usize], seed: u64, stream: u64) -> Vec<usize> {
    let mut v = indices.to_vec();
    v.shuffle(&mut rng::stream(seed, stream));
    v
}

/// Trains the NN attack on a shadow model: shadow-train samples are members,
/// shadow-test samples non-members, balanced by truncation. A held-out slice
/// of members together with the surrogate fold gives a validation AUC.
pub fn train_nn_attack(
    shadow: &MlpModel,
    dataset: &Dataset,
    split: &SplitPlan,
    config: &NnAttackConfig,
) -> Result<NnAttackModel> {
    if split.shadow_train().is_empty() || split.shadow_test().is_empty() {
        return Err(Error::Training("NN attack needs both shadow members and non-members".into()));
    }
    if !(0.0..1.0).contains(&config.holdout_fraction) {
        return Err(config_err!("holdout fraction {} outside [0,1)", config.holdout_fraction));
    }
    let n = split.shadow_train().len().min(split.shadow_test().len());
    let members = shuffled(split.shadow_train(), config.seed, 0xA1);
    let non_members = shuffled(split.shadow_test(), config.seed, 0xA2);
    let holdout = ((n as f64) * config.holdout_fraction).floor() as usize;
    let n_train = n - holdout;
    if n_train == 0 {
        return Err(Error::Training("no shadow samples left to train the NN attack".into()));
    }

    let train_idx: Vec<usize> = members[..n_train].iter().chain(&non_members[..n_train]).copied().collect();
    let (x, _) = dataset.gather(&train_idx);
    let raw = attack_features(shadow, &x, config.features)?;
    let c = raw.cols();
    let rows = raw.rows() as f64;
    let mean: Vec<f64> = (0..c).map(|j| raw.row_iter().map(|r| r[j]).sum::<f64>() / rows).collect();
    let scale: Vec<f64> = (0..c)
        .map(|j| {
            let var = raw.row_iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / rows;
            var.sqrt().max(1e-8)
        })
        .collect();
    let mut attack = NnAttackModel {
        model: MlpModel::new(&[1, 2], Activation::Relu, 0.0, 0)?,
        features: config.features,
        mean,
        scale,
        train_accuracy: f64::NAN,
        validation_auc: None,
    };
    let feats = attack.standardize(raw);
    let labels: Vec<usize> = (0..2 * n_train).map(|i| usize::from(i < n_train)).collect();
    let feature_set = Dataset::new("nn-attack", feats.clone(), labels, 2, FeatureKind::RealValued)?;

    let mut dims = vec![c];
    dims.extend(&config.hidden);
    dims.push(2);
    let init = MlpModel::new(&dims, Activation::Relu, 0.0, rng::mix(&[config.seed, 0xA77]))?;
    let all: Vec<usize> = (0..feature_set.len()).collect();
    let outcome = train(
        init,
        &feature_set,
        &all,
        &[],
        &TrainConfig {
            method: Method::Vanilla,
            epochs: config.epochs,
            batch_size: config.batch_size,
            sgd: config.sgd.clone(),
            batch_seed: rng::mix(&[config.seed, 0xA78]),
            checkpoint_epochs: vec![],
        },
    )?;
    if let Some(msg) = outcome.abort {
        return Err(Error::Training(format!("NN attack training diverged: {msg}")));
    }
    attack.model = outcome.model;

    let p = attack.model.predict(&feats)?;
    let (mut tp, mut tn) = (0usize, 0usize);
    for (i, row) in p.matrix().row_iter().enumerate() {
        let predicted_member = row[1] > 0.5;
        if i < n_train {
            tp += usize::from(predicted_member);
        } else {
            tn += usize::from(!predicted_member);
        }
    }
    attack.train_accuracy = 0.5 * (tp + tn) as f64 / n_train as f64;

    if holdout > 0 && !split.surrogate().is_empty() {
        let (xm, _) = dataset.gather(&members[n_train..n]);
        let surrogate = shuffled(split.surrogate(), config.seed, 0xA3);
        let (xn, _) = dataset.gather(&surrogate[..holdout.min(surrogate.len())]);
        let sm = attack.member_scores(shadow, &xm)?;
        let sn = attack.member_scores(shadow, &xn)?;
        attack.validation_auc = Some(auc(&sm, &sn)?);
    }
    Ok(attack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{five_fold_split, generate_synthetic, SyntheticSpec};

    fn data() -> (Dataset, SplitPlan) {
        let ds = generate_synthetic(&SyntheticSpec {
            classes: 5,
            dim: 6,
            per_class: 40,
            seed: 2,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let split = five_fold_split(ds.len(), 1).unwrap();
        (ds, split)
    }

    #[test]
    fn features_are_sorted() {
        let m = MlpModel::new(&[3, 4, 5], Activation::Relu, 0.0, 1).unwrap();
        let x = Matrix::from_rows(&[[0.1, -0.2, 0.3], [1.0, 2.0, -1.0]]).unwrap();
        for kind in [AttackFeatures::Logits, AttackFeatures::Posteriors] {
            let f = attack_features(&m, &x, kind).unwrap();
            for r in f.row_iter() {
                assert!(r.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn constant_features_give_chance_validation_auc() {
        let (ds, split) = data();
        let zero = MlpModel::from_parameters(
            vec![Matrix::zeros(6, 5)],
            vec![vec![0.0; 5]],
            Activation::Relu,
            0.0,
        )
        .unwrap();
        let a = train_nn_attack(&zero, &ds, &split, &NnAttackConfig::default()).unwrap();
        let v = a.validation_auc.unwrap();
        assert!((v - 0.5).abs() <= 0.05, "{v}");
    }

    #[test]
    fn deterministic() {
        let (ds, split) = data();
        let shadow = MlpModel::new(&[6, 8, 5], Activation::Relu, 0.0, 3).unwrap();
        let cfg = NnAttackConfig {
            epochs: 3,
            ..NnAttackConfig::default()
        };
        let a = train_nn_attack(&shadow, &ds, &split, &cfg).unwrap();
        let b = train_nn_attack(&shadow, &ds, &split, &cfg).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn empty_shadow_fold_is_a_training_error() {
        let (ds, mut split) = data();
        split.folds[3].clear();
        let shadow = MlpModel::new(&[6, 8, 5], Activation::Relu, 0.0, 3).unwrap();
        let err = train_nn_attack(&shadow, &ds, &split, &NnAttackConfig::default());
        assert!(matches!(err, Err(Error::Training(_))));
    }
}
