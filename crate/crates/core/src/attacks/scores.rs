use crate::error::Result;
use crate::nn::{entropy, per_sample_ce, safe_ln, Matrix, MlpModel, Posteriors};

use super::AttackKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradNormKind {
    XL1,
    XL2,
    WL1,
    WL2,
}

/// `−CE(p, y)`.
pub fn score_loss(model: &MlpModel, inputs: &Matrix, labels: &[usize]) -> Result<Vec<f64>> {
    let p = model.predict(inputs)?;
    Ok(per_sample_ce(&p, labels)?.into_iter().map(|l| -l).collect())
}

/// `−H(p)`; ignores the labels.
pub fn score_entropy(model: &MlpModel, inputs: &Matrix) -> Result<Vec<f64>> {
    let p = model.predict(inputs)?;
    Ok(p.matrix().row_iter().map(|r| -entropy(r)).collect())
}

/// Modified entropy `−(1−p_y)·log p_y − Σ_{c≠y} p_c·log(1−p_c)`.
pub fn m_entropy(row: &[f64], label: usize) -> f64 {
    let p_y = row[label];
    let mut v = -(1.0 - p_y) * safe_ln(p_y);
    for (c, &p) in row.iter().enumerate() {
        if c != label {
            v -= p * safe_ln(1.0 - p);
        }
    }
    v
}

/// `−Mentr(p, y)`.
pub fn score_m_entropy(model: &MlpModel, inputs: &Matrix, labels: &[usize]) -> Result<Vec<f64>> {
    let p = model.predict(inputs)?;
    Ok(m_entropy_scores(&p, labels))
}

fn m_entropy_scores(p: &Posteriors, labels: &[usize]) -> Vec<f64> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -m_entropy(p.row(i), y))
        .collect()
}

/// Negated per-sample gradient norm.
pub fn score_grad_norm(model: &MlpModel, inputs: &Matrix, labels: &[usize], kind: GradNormKind) -> Result<Vec<f64>> {
    Ok(model
        .per_sample_grad_norms(inputs, labels)?
        .into_iter()
        .map(|n| {
            -match kind {
                GradNormKind::XL1 => n.x_l1,
                GradNormKind::XL2 => n.x_l2,
                GradNormKind::WL1 => n.w_l1,
                GradNormKind::WL2 => n.w_l2,
            }
        })
        .collect())
}

/// Scores for several threshold attacks, sharing one forward pass and one
/// per-sample gradient computation. The NN attack is not a threshold attack
/// and yields an empty vector here.
pub fn threshold_scores(
    model: &MlpModel,
    inputs: &Matrix,
    labels: &[usize],
    kinds: &[AttackKind],
) -> Result<Vec<Vec<f64>>> {
    let p = model.predict(inputs)?;
    let norms = if kinds.iter().any(|k| !k.is_black_box()) {
        Some(model.per_sample_grad_norms(inputs, labels)?)
    } else {
        None
    };
    kinds
        .iter()
        .map(|k| {
            Ok(match k {
                AttackKind::Loss => per_sample_ce(&p, labels)?.into_iter().map(|l| -l).collect(),
                AttackKind::Entropy => p.matrix().row_iter().map(|r| -entropy(r)).collect(),
                AttackKind::MEntropy => m_entropy_scores(&p, labels),
                AttackKind::GradXL1 => norms.as_ref().unwrap().iter().map(|n| -n.x_l1).collect(),
                AttackKind::GradXL2 => norms.as_ref().unwrap().iter().map(|n| -n.x_l2).collect(),
                AttackKind::GradWL1 => norms.as_ref().unwrap().iter().map(|n| -n.w_l1).collect(),
                AttackKind::GradWL2 => norms.as_ref().unwrap().iter().map(|n| -n.w_l2).collect(),
                AttackKind::Nn => Vec::new(),
            })
        })
        .collect()
}
