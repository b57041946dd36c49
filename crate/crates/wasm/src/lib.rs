//! Browser bindings for three small relaxlab demos: the Gaussian bound
//! chain, softlabel flattening of one posterior row, and a 2-D toy that
//! trains a normal and a relaxed-loss classifier side by side.
//!
//! Everything crosses the boundary as flat `f64` arrays; `www/index.html`
//! documents the layouts it reads.

use relaxlab::analysis::{auc, BoundReport, GaussianFit};
use relaxlab::data::{five_fold_split, generate_synthetic, Dataset, SplitPlan, SyntheticSpec};
use relaxlab::nn::{Activation, Matrix, MlpModel, Posteriors, SgdConfig};
use relaxlab::relaxloss::{construct_softlabels, evaluate, train, Method, RelaxConfig, TrainConfig};
use wasm_bindgen::prelude::*;

fn js_err(e: relaxlab::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `[D_H, D_TV bound, AUC bound, term_star, term_dstar, c]` for member loss
/// `N(mu1, sigma1²)` against non-member loss `N(mu2, sigma2²)`.
#[wasm_bindgen]
pub fn bound_chain(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> Result<Vec<f64>, JsError> {
    let member = GaussianFit::new(mu1, sigma1).map_err(js_err)?;
    let non_member = GaussianFit::new(mu2, sigma2).map_err(js_err)?;
    let r = BoundReport::new(&member, &non_member).map_err(js_err)?;
    Ok(vec![r.d_hellinger, r.d_tv_upper, r.auc_upper, r.term_star, r.term_dstar, r.c_ratio])
}

/// Softmax of `logits` followed by the flattened softlabel for `label`.
/// A `gt_cap` outside `(0, 1]` means no cap.
#[wasm_bindgen]
pub fn flatten_softlabel(logits: &[f64], label: usize, gt_cap: f64) -> Result<Vec<f64>, JsError> {
    let logits = Matrix::from_vec(1, logits.len(), logits.to_vec()).map_err(js_err)?;
    let p = Posteriors::from_logits(&logits);
    let cap = (gt_cap > 0.0 && gt_cap <= 1.0).then_some(gt_cap);
    let t = construct_softlabels(&p, &[label], cap).map_err(js_err)?;
    Ok(p.row(0).iter().chain(t.row(0)).copied().collect())
}

struct Fitted {
    model: MlpModel,
    train_loss_mean: f64,
    train_loss_var: f64,
    test_acc: f64,
    loss_auc: f64,
}

fn fit(data: &Dataset, split: &SplitPlan, method: Method, epochs: usize, seed: u64) -> relaxlab::Result<Fitted> {
    let init = MlpModel::new(&[2, 64, data.num_classes], Activation::Relu, 0.0, seed)?;
    let cfg = TrainConfig {
        method,
        epochs,
        batch_size: 16,
        sgd: SgdConfig {
            learning_rate: 0.05,
            ..SgdConfig::default()
        },
        batch_seed: seed.wrapping_add(1),
        checkpoint_epochs: Vec::new(),
    };
    let out = train(init, data, split.target_train(), split.target_test(), &cfg)?;
    if let Some(msg) = out.abort {
        return Err(relaxlab::Error::Training(msg));
    }
    let last = out.trace.last().cloned().expect("at least one epoch");
    let members = evaluate(&out.model, data, split.target_train())?;
    let non_members = evaluate(&out.model, data, split.target_test())?;
    let neg = |v: &[f64]| v.iter().map(|l| -l).collect::<Vec<_>>();
    Ok(Fitted {
        loss_auc: auc(&neg(&members.losses), &neg(&non_members.losses))?,
        model: out.model,
        train_loss_mean: last.train_loss_mean,
        train_loss_var: last.train_loss_var,
        test_acc: last.test_acc1,
    })
}

/// A 3-class, two-feature blob task with one normally trained and one
/// relaxed-loss model.
#[wasm_bindgen]
pub struct ToyDemo {
    data: Dataset,
    split: SplitPlan,
    vanilla: Fitted,
    relaxed: Fitted,
}

#[wasm_bindgen]
impl ToyDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(alpha: f64, epochs: usize, seed: u64) -> Result<ToyDemo, JsError> {
        let data = generate_synthetic(&SyntheticSpec {
            classes: 3,
            dim: 2,
            per_class: 40,
            class_separation: 1.5,
            noise_sigma: 1.0,
            seed,
            ..SyntheticSpec::default()
        })
        .map_err(js_err)?;
        let split = five_fold_split(data.len(), seed).map_err(js_err)?;
        let vanilla = fit(&data, &split, Method::Vanilla, epochs, seed).map_err(js_err)?;
        let relaxed = fit(&data, &split, Method::RelaxLoss(RelaxConfig::new(alpha)), epochs, seed).map_err(js_err)?;
        Ok(ToyDemo {
            data,
            split,
            vanilla,
            relaxed,
        })
    }

    /// Training points as `[x, y, label]` triples.
    pub fn points(&self) -> Vec<f64> {
        let (x, y) = self.data.gather(self.split.target_train());
        x.row_iter().zip(y).flat_map(|(r, c)| [r[0], r[1], c as f64]).collect()
    }

    /// `[train loss mean, train loss variance, test accuracy %, loss-attack AUC]`.
    pub fn stats(&self, relaxed: bool) -> Vec<f64> {
        let f = if relaxed { &self.relaxed } else { &self.vanilla };
        vec![f.train_loss_mean, f.train_loss_var, f.test_acc, f.loss_auc]
    }

    /// `[top posterior, argmax]` for each point of a `steps × steps` grid over
    /// `[lo, hi]²`, rows of constant `y` from `lo` upwards.
    pub fn grid(&self, relaxed: bool, lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, JsError> {
        let model = if relaxed { &self.relaxed.model } else { &self.vanilla.model };
        let h = if steps > 1 { (hi - lo) / (steps - 1) as f64 } else { 0.0 };
        let mut pts = Vec::with_capacity(steps * steps * 2);
        for j in 0..steps {
            for i in 0..steps {
                pts.extend([lo + h * i as f64, lo + h * j as f64]);
            }
        }
        let p = model
            .predict(&Matrix::from_vec(steps * steps, 2, pts).map_err(js_err)?)
            .map_err(js_err)?;
        let top = p.argmax();
        Ok(top.iter().enumerate().flat_map(|(r, &c)| [p.row(r)[c], c as f64]).collect())
    }
}
