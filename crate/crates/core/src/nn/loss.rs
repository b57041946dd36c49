//! Softmax, cross-entropy and the regularized losses used by the baselines.

use crate::error::{config_err, dim_err, Error, Result};

use super::matrix::Matrix;

/// Lower clamp applied to probabilities before any logarithm.
pub const PROB_EPS: f64 = 1e-12;

#[inline]
pub(crate) fn safe_ln(p: f64) -> f64 {
    p.max(PROB_EPS).ln()
}

/// Row-stochastic matrix of predicted class probabilities, shape `(batch, C)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Posteriors(Matrix);

impl Posteriors {
    /// Validates that every row is a probability vector.
    pub fn new(values: Matrix) -> Result<Self> {
        for (i, row) in values.row_iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::Numeric(format!("posterior row {i} has entries outside [0,1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::Numeric(format!("posterior row {i} sums to {s}")));
            }
        }
        Ok(Self(values))
    }

    /// Row-wise softmax of `logits`.
    pub fn from_logits(logits: &Matrix) -> Self {
        let mut out = logits.clone();
        for r in 0..out.rows() {
            softmax_in_place(out.row_mut(r));
        }
        Self(out)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn classes(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    /// Index of the largest score in each row (first one on ties).
    pub fn argmax(&self) -> Vec<usize> {
        self.0.row_iter().map(argmax).collect()
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// One-hot encoding of class indices.
pub fn one_hot(labels: &[usize], classes: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(labels.len(), classes);
    for (i, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(dim_err!("label {y} out of range for {classes} classes"));
        }
        m.set(i, y, 1.0);
    }
    Ok(m)
}

/// Batch cross-entropy together with its per-sample terms.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossEntropy {
    pub mean: f64,
    pub per_sample: Vec<f64>,
}

/// `−Σ_c t^c log p^c` per row, averaged over the batch. Targets may be one-hot or soft.
pub fn cross_entropy(posteriors: &Posteriors, targets: &Matrix) -> Result<CrossEntropy> {
    let p = posteriors.matrix();
    if p.shape() != targets.shape() {
        return Err(dim_err!(
            "posteriors {:?} vs targets {:?}",
            p.shape(),
            targets.shape()
        ));
    }
    let per_sample: Vec<f64> = p
        .row_iter()
        .zip(targets.row_iter())
        .map(|(pr, tr)| {
            -pr.iter()
                .zip(tr)
                .filter(|(_, &t)| t != 0.0)
                .map(|(&p, &t)| t * safe_ln(p))
                .sum::<f64>()
        })
        .collect();
    Ok(CrossEntropy {
        mean: mean(&per_sample),
        per_sample,
    })
}

/// Per-sample cross-entropy against hard labels.
pub fn per_sample_ce(posteriors: &Posteriors, labels: &[usize]) -> Result<Vec<f64>> {
    check_labels(posteriors, labels)?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -safe_ln(posteriors.row(i)[y]))
        .collect())
}

/// Shannon entropy with `0·log 0 = 0`.
pub fn entropy(row: &[f64]) -> f64 {
    -row.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * safe_ln(p))
        .sum::<f64>()
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn check_labels(posteriors: &Posteriors, labels: &[usize]) -> Result<()> {
    if posteriors.rows() != labels.len() {
        return Err(dim_err!(
            "{} posterior rows vs {} labels",
            posteriors.rows(),
            labels.len()
        ));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= posteriors.classes()) {
        return Err(dim_err!("label {y} out of range for {} classes", posteriors.classes()));
    }
    Ok(())
}

/// `α·D_KL(U ∥ p) + (1−α)·CE(p, y)`, batch mean.
pub fn label_smoothing_loss(posteriors: &Posteriors, labels: &[usize], alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(config_err!("label smoothing weight {alpha} outside [0,1]"));
    }
    check_labels(posteriors, labels)?;
    let c = posteriors.classes() as f64;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let row = posteriors.row(i);
            let kl: f64 = row.iter().map(|&p| (1.0 / c) * ((1.0 / c).ln() - safe_ln(p))).sum();
            alpha * kl + (1.0 - alpha) * -safe_ln(row[y])
        })
        .sum();
    Ok(total / labels.len().max(1) as f64)
}

/// Soft targets whose cross-entropy gradient equals the label-smoothing
/// gradient: `α·U + (1−α)·onehot(y)`. The loss itself differs from
/// `CE(p, t)` only by the constant `α·ln C`.
pub fn label_smoothing_targets(labels: &[usize], classes: usize, alpha: f64) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(config_err!("label smoothing weight {alpha} outside [0,1]"));
    }
    let mut t = one_hot(labels, classes)?;
    let u = alpha / classes as f64;
    for v in t.data_mut() {
        *v = (1.0 - alpha) * *v + u;
    }
    Ok(t)
}

/// `CE(p, y) − α·H(p)`, batch mean.
pub fn confidence_penalty_loss(posteriors: &Posteriors, labels: &[usize], alpha: f64) -> Result<f64> {
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(config_err!("confidence penalty weight {alpha} must be non-negative"));
    }
    let ce = per_sample_ce(posteriors, labels)?;
    let total: f64 = ce
        .iter()
        .enumerate()
        .map(|(i, l)| l - alpha * entropy(posteriors.row(i)))
        .sum();
    Ok(total / labels.len().max(1) as f64)
}

/// Gradient of [`confidence_penalty_loss`] with respect to the logits.
///
/// `∂(−H)/∂z_j = p_j (log p_j + H)`, added to the usual `p − y`.
pub fn confidence_penalty_logit_grad(
    posteriors: &Posteriors,
    labels: &[usize],
    alpha: f64,
) -> Result<Matrix> {
    check_labels(posteriors, labels)?;
    let b = labels.len().max(1) as f64;
    let mut g = posteriors.matrix().clone();
    for (i, &y) in labels.iter().enumerate() {
        let h = entropy(posteriors.row(i));
        let row = g.row_mut(i);
        for v in row.iter_mut() {
            let p = *v;
            let pen = if p > 0.0 { p * (p.ln() + h) } else { 0.0 };
            *v = p + alpha * pen;
        }
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v /= b;
        }
    }
    Ok(g)
}
