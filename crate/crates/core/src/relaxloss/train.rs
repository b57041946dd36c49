use serde::{Deserialize, Serialize};

use crate::analysis::loss_stats;
use crate::data::{batch_iter, Dataset};
use crate::error::{config_err, Error, Result};
use crate::nn::{
    confidence_penalty_logit_grad, cross_entropy, label_smoothing_targets, one_hot, per_sample_ce,
    Direction, MlpModel, Mode, OptimizerState, SgdConfig,
};
use crate::rng;

use super::{decide_branch, flatten_targets, Branch, EpochRecord, Method, RelaxConfig, TrainTrace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    pub batch_size: usize,
    pub sgd: SgdConfig,
    /// Drives batch order and dropout masks.
    pub batch_seed: u64,
    /// Epochs (1-based) after which a copy of the model is kept.
    pub checkpoint_epochs: Vec<usize>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        self.sgd.validate()?;
        if self.batch_size == 0 {
            return Err(config_err!("batch size must be at least 1"));
        }
        if let Some(e) = self.checkpoint_epochs.iter().find(|&&e| e == 0 || e > self.epochs) {
            return Err(config_err!("checkpoint epoch {e} outside [1, {}]", self.epochs));
        }
        Ok(())
    }
}

/// Bookkeeping for one epoch of updates.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EpochRun {
    pub descent: usize,
    pub ascent: usize,
    pub flatten: usize,
    pub forward_passes: usize,
    pub backward_passes: usize,
}

impl EpochRun {
    pub fn batches(&self) -> usize {
        self.descent + self.ascent + self.flatten
    }

    fn count(&mut self, branch: Branch) {
        match branch {
            Branch::Descent => self.descent += 1,
            Branch::Ascent => self.ascent += 1,
            Branch::Flatten => self.flatten += 1,
        }
    }
}

fn epoch_batches(indices: &[usize], batch_size: usize, batch_seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    batch_iter(indices, batch_size, rng::mix(&[batch_seed, epoch as u64]), true)
}

fn dropout_seed(batch_seed: u64, epoch: usize, batch: usize) -> u64 {
    rng::mix(&[batch_seed, epoch as u64, batch as u64, 0xD0])
}

/// One relaxed-loss epoch. Every batch costs exactly one forward and one
/// backward pass; the flattening branch reuses the forward posteriors.
#[allow(clippy::too_many_arguments)]
pub fn relaxloss_epoch(
    model: &mut MlpModel,
    optimizer: &mut OptimizerState,
    dataset: &Dataset,
    indices: &[usize],
    config: &RelaxConfig,
    batch_size: usize,
    epoch_index: usize,
    batch_seed: u64,
) -> Result<EpochRun> {
    if epoch_index == 0 {
        return Err(config_err!("epochs are 1-based"));
    }
    let mut run = EpochRun::default();
    for (k, batch) in epoch_batches(indices, batch_size, batch_seed, epoch_index)?.iter().enumerate() {
        let (x, y) = dataset.gather(batch);
        let fwd = model.forward(&x, Mode::Train { dropout_seed: dropout_seed(batch_seed, epoch_index, k) })?;
        run.forward_passes += 1;
        let hard = one_hot(&y, model.num_classes())?;
        let loss = cross_entropy(&fwd.posteriors, &hard)?.mean;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite batch loss in epoch {epoch_index}, batch {}", k + 1)));
        }
        let decision = decide_branch(loss, config.alpha, epoch_index);
        let (targets, direction) = match decision.branch {
            Branch::Descent => (hard, Direction::Descent),
            Branch::Ascent => (hard, Direction::Ascent),
            Branch::Flatten => (flatten_targets(&fwd.posteriors, &y, config)?, Direction::Descent),
        };
        let grads = model.backward(&fwd.cache, &fwd.posteriors, &targets)?;
        run.backward_passes += 1;
        optimizer.step(model, &grads, direction)?;
        run.count(decision.branch);
    }
    Ok(run)
}

/// One epoch of any [`Method`]. Vanilla is the relaxed-loss epoch with `α = 0`.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch(
    model: &mut MlpModel,
    optimizer: &mut OptimizerState,
    dataset: &Dataset,
    indices: &[usize],
    method: &Method,
    batch_size: usize,
    epoch_index: usize,
    batch_seed: u64,
) -> Result<EpochRun> {
    match method {
        Method::Vanilla => relaxloss_epoch(
            model,
            optimizer,
            dataset,
            indices,
            &RelaxConfig::new(0.0),
            batch_size,
            epoch_index,
            batch_seed,
        ),
        Method::RelaxLoss(cfg) => {
            relaxloss_epoch(model, optimizer, dataset, indices, cfg, batch_size, epoch_index, batch_seed)
        }
        Method::LabelSmoothing(_) | Method::ConfidencePenalty(_) => {
            let mut run = EpochRun::default();
            for (k, batch) in epoch_batches(indices, batch_size, batch_seed, epoch_index)?.iter().enumerate() {
                let (x, y) = dataset.gather(batch);
                let fwd = model.forward(&x, Mode::Train { dropout_seed: dropout_seed(batch_seed, epoch_index, k) })?;
                run.forward_passes += 1;
                let grads = match *method {
                    Method::LabelSmoothing(a) => {
                        let t = label_smoothing_targets(&y, model.num_classes(), a)?;
                        model.backward(&fwd.cache, &fwd.posteriors, &t)?
                    }
                    Method::ConfidencePenalty(a) => {
                        let g = confidence_penalty_logit_grad(&fwd.posteriors, &y, a)?;
                        model.backward_logits(&fwd.cache, &g)?
                    }
                    _ => unreachable!(),
                };
                run.backward_passes += 1;
                optimizer.step(model, &grads, Direction::Descent)?;
                run.count(Branch::Descent);
            }
            Ok(run)
        }
    }
}

/// Evaluation-mode per-sample losses and top-1/top-5 accuracy (percent).
#[derive(Clone, Debug, PartialEq)]
pub struct EvalStats {
    pub losses: Vec<f64>,
    pub acc1: f64,
    pub acc5: f64,
}

impl EvalStats {
    pub fn loss_mean(&self) -> f64 {
        loss_stats(&self.losses).map_or(f64::NAN, |s| s.mean)
    }

    pub fn loss_var(&self) -> f64 {
        loss_stats(&self.losses).map_or(f64::NAN, |s| s.variance)
    }
}

pub fn evaluate(model: &MlpModel, dataset: &Dataset, indices: &[usize]) -> Result<EvalStats> {
    let mut losses = Vec::with_capacity(indices.len());
    let mut hit1 = 0usize;
    let mut hit5 = 0usize;
    for chunk in indices.chunks(1024) {
        let (x, y) = dataset.gather(chunk);
        let p = model.predict(&x)?;
        losses.extend(per_sample_ce(&p, &y)?);
        for (i, &label) in y.iter().enumerate() {
            let row = p.row(i);
            // rank of the true class: number of classes scored strictly higher
            let higher = row.iter().filter(|&&v| v > row[label]).count();
            hit1 += usize::from(higher == 0);
            hit5 += usize::from(higher < 5);
        }
    }
    let n = indices.len().max(1) as f64;
    Ok(EvalStats {
        losses,
        acc1: 100.0 * hit1 as f64 / n,
        acc5: 100.0 * hit5 as f64 / n,
    })
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub trace: TrainTrace,
    pub checkpoints: Vec<(usize, MlpModel)>,
    /// Set when training stopped early on a numeric failure; the trace holds
    /// every completed epoch.
    pub abort: Option<String>,
}

/// Trains `model` on `train_idx`, evaluating on both folds after every epoch.
pub fn train(
    mut model: MlpModel,
    dataset: &Dataset,
    train_idx: &[usize],
    test_idx: &[usize],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_idx.is_empty() {
        return Err(config_err!("empty training split"));
    }
    if dataset.dim() != model.input_dim() || dataset.num_classes != model.num_classes() {
        return Err(config_err!(
            "model {:?} does not fit data with {} features and {} classes",
            model.layer_dims(),
            dataset.dim(),
            dataset.num_classes
        ));
    }
    let mut optimizer = OptimizerState::new(config.sgd.clone(), &model)?;
    let mut trace = TrainTrace::default();
    let mut checkpoints = Vec::new();
    for epoch in 1..=config.epochs {
        optimizer.set_epoch(epoch);
        let run = match train_epoch(
            &mut model,
            &mut optimizer,
            dataset,
            train_idx,
            &config.method,
            config.batch_size,
            epoch,
            config.batch_seed,
        ) {
            Ok(run) => run,
            Err(Error::Numeric(msg)) => {
                return Ok(TrainOutcome {
                    model,
                    trace,
                    checkpoints,
                    abort: Some(msg),
                })
            }
            Err(e) => return Err(e),
        };
        let tr = evaluate(&model, dataset, train_idx)?;
        let te = if test_idx.is_empty() { None } else { Some(evaluate(&model, dataset, test_idx)?) };
        trace.epochs.push(EpochRecord {
            epoch,
            branch_desc: run.descent,
            branch_asc: run.ascent,
            branch_flat: run.flatten,
            train_loss_mean: tr.loss_mean(),
            train_loss_var: tr.loss_var(),
            test_loss_mean: te.as_ref().map_or(f64::NAN, EvalStats::loss_mean),
            train_acc1: tr.acc1,
            test_acc1: te.as_ref().map_or(f64::NAN, |t| t.acc1),
            train_acc5: tr.acc5,
            test_acc5: te.as_ref().map_or(f64::NAN, |t| t.acc5),
            lr: optimizer.learning_rate(),
        });
        if config.checkpoint_epochs.contains(&epoch) {
            checkpoints.push((epoch, model.clone()));
        }
    }
    Ok(TrainOutcome {
        model,
        trace,
        checkpoints,
        abort: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use crate::nn::Activation;

    fn tiny() -> (Dataset, Vec<usize>, Vec<usize>) {
        let ds = generate_synthetic(&SyntheticSpec {
            classes: 4,
            dim: 6,
            per_class: 30,
            class_separation: 2.0,
            noise_sigma: 1.0,
            seed: 3,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let train: Vec<usize> = (0..ds.len()).step_by(2).collect();
        let test: Vec<usize> = (1..ds.len()).step_by(2).collect();
        (ds, train, test)
    }

    fn config(method: Method, epochs: usize) -> TrainConfig {
        TrainConfig {
            method,
            epochs,
            batch_size: 16,
            sgd: SgdConfig {
                learning_rate: 0.05,
                ..SgdConfig::default()
            },
            batch_seed: 1,
            checkpoint_epochs: vec![],
        }
    }

    #[test]
    fn vanilla_is_relaxloss_with_zero_alpha() {
        let (ds, tr, te) = tiny();
        let m = MlpModel::new(&[6, 16, 4], Activation::Relu, 0.0, 0).unwrap();
        let a = train(m.clone(), &ds, &tr, &te, &config(Method::Vanilla, 6)).unwrap();
        let b = train(m, &ds, &tr, &te, &config(Method::RelaxLoss(RelaxConfig::new(0.0)), 6)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.trace, b.trace);
        assert!(a.trace.epochs.iter().all(|r| r.branch_asc == 0 && r.branch_flat == 0));
        assert!(a.trace.epochs.iter().all(|r| r.batches() == 4));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let (ds, tr, te) = tiny();
        let m = MlpModel::new(&[6, 16, 4], Activation::Relu, 0.3, 0).unwrap();
        let cfg = config(Method::RelaxLoss(RelaxConfig::new(0.5)), 8);
        let a = train(m.clone(), &ds, &tr, &te, &cfg).unwrap();
        let b = train(m, &ds, &tr, &te, &cfg).unwrap();
        assert_eq!(a.model.to_checkpoint_json(), b.model.to_checkpoint_json());
    }

    #[test]
    fn relaxloss_uses_all_three_branches() {
        let (ds, tr, te) = tiny();
        let m = MlpModel::new(&[6, 32, 4], Activation::Relu, 0.0, 0).unwrap();
        let out = train(m, &ds, &tr, &te, &config(Method::RelaxLoss(RelaxConfig::new(0.8)), 30)).unwrap();
        let asc: usize = out.trace.epochs.iter().map(|r| r.branch_asc).sum();
        let flat: usize = out.trace.epochs.iter().map(|r| r.branch_flat).sum();
        assert!(asc > 0 && flat > 0);
        // ascent only on even epochs, flattening only on odd ones
        for r in &out.trace.epochs {
            if r.epoch % 2 == 0 {
                assert_eq!(r.branch_flat, 0);
            } else {
                assert_eq!(r.branch_asc, 0);
            }
        }
    }

    #[test]
    fn one_forward_and_backward_per_batch() {
        let (ds, tr, _) = tiny();
        let mut m = MlpModel::new(&[6, 32, 4], Activation::Relu, 0.0, 0).unwrap();
        let mut opt = OptimizerState::new(SgdConfig::default(), &m).unwrap();
        // a huge alpha forces every batch below target
        let cfg = RelaxConfig::new(100.0);
        for epoch in 1..=2 {
            let run = relaxloss_epoch(&mut m, &mut opt, &ds, &tr, &cfg, 16, epoch, 0).unwrap();
            assert_eq!(run.forward_passes, run.batches());
            assert_eq!(run.backward_passes, run.batches());
            if epoch == 1 {
                assert_eq!(run.flatten, run.batches());
            } else {
                assert_eq!(run.ascent, run.batches());
            }
        }
    }

    #[test]
    fn checkpoints_and_validation() {
        let (ds, tr, te) = tiny();
        let m = MlpModel::new(&[6, 8, 4], Activation::Relu, 0.0, 0).unwrap();
        let mut cfg = config(Method::Vanilla, 4);
        cfg.checkpoint_epochs = vec![2, 4];
        let out = train(m.clone(), &ds, &tr, &te, &cfg).unwrap();
        assert_eq!(out.checkpoints.iter().map(|c| c.0).collect::<Vec<_>>(), vec![2, 4]);
        assert_eq!(out.checkpoints[1].1, out.model);

        cfg.checkpoint_epochs = vec![5];
        assert!(matches!(train(m.clone(), &ds, &tr, &te, &cfg), Err(Error::Config(_))));
        assert!(matches!(train(m, &ds, &[], &te, &config(Method::Vanilla, 1)), Err(Error::Config(_))));
    }

    #[test]
    fn divergence_aborts_with_trace() {
        let (ds, tr, te) = tiny();
        let m = MlpModel::new(&[6, 8, 4], Activation::Relu, 0.0, 0).unwrap();
        let mut cfg = config(Method::Vanilla, 50);
        cfg.sgd.learning_rate = 1e200;
        let out = train(m, &ds, &tr, &te, &cfg).unwrap();
        assert!(out.abort.is_some());
        assert!(out.trace.epochs.len() < 50);
    }

    #[test]
    fn baselines_train() {
        let (ds, tr, te) = tiny();
        for method in [Method::LabelSmoothing(0.2), Method::ConfidencePenalty(0.5)] {
            let m = MlpModel::new(&[6, 16, 4], Activation::Relu, 0.0, 0).unwrap();
            let out = train(m, &ds, &tr, &te, &config(method, 10)).unwrap();
            let first = &out.trace.epochs[0];
            let last = out.trace.last().unwrap();
            assert!(last.train_acc1 >= first.train_acc1);
            assert!(out.trace.epochs.iter().all(|r| r.branch_desc == 4));
        }
    }
}
