use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

use super::MembershipScoreSet;

/// Constant threshold: predict "member" iff `score > threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub attack_name: String,
    pub threshold: f64,
    /// Balanced accuracy on the calibration (shadow) data.
    pub shadow_accuracy: f64,
    /// No threshold beat chance on the calibration data.
    pub degenerate: bool,
}

fn between(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    // adjacent floats: `a` itself still separates under the strict comparison
    if mid >= b {
        a
    } else {
        mid
    }
}

/// Picks the threshold with the best balanced accuracy on shadow scores.
///
/// Candidates are a sentinel below the minimum, the midpoints between
/// adjacent distinct pooled scores and a sentinel above the maximum; the
/// smallest best candidate wins.
pub fn select_threshold(attack_name: &str, members: &[f64], non_members: &[f64]) -> Result<ThresholdRule> {
    if members.is_empty() || non_members.is_empty() {
        return Err(config_err!("threshold calibration needs members and non-members"));
    }
    if members.iter().chain(non_members).any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite calibration score".into()));
    }
    let mut pooled: Vec<(f64, bool)> = members
        .iter()
        .map(|&s| (s, true))
        .chain(non_members.iter().map(|&s| (s, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let n1 = members.len() as u128;
    let n0 = non_members.len() as u128;
    // balanced accuracy ∝ tp·n0 + tn·n1, compared exactly in integers
    let objective = |tp: u128, tn: u128| tp * n0 + tn * n1;

    let lo = pooled[0].0;
    let hi = pooled[pooled.len() - 1].0;
    let mut best_threshold = lo - lo.abs().max(1.0);
    let mut best = objective(n1, 0);
    let (mut tp, mut tn) = (n1, 0u128);
    let mut i = 0;
    while i < pooled.len() {
        let v = pooled[i].0;
        while i < pooled.len() && pooled[i].0 == v {
            if pooled[i].1 {
                tp -= 1;
            } else {
                tn += 1;
            }
            i += 1;
        }
        let candidate = if i < pooled.len() {
            between(v, pooled[i].0)
        } else {
            hi + hi.abs().max(1.0)
        };
        let score = objective(tp, tn);
        if score > best {
            best = score;
            best_threshold = candidate;
        }
    }
    let shadow_accuracy = best as f64 / (2 * n1 * n0) as f64;
    Ok(ThresholdRule {
        attack_name: attack_name.to_string(),
        threshold: best_threshold,
        shadow_accuracy,
        degenerate: best <= n1 * n0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackEvaluation {
    pub accuracy: f64,
    pub balanced: bool,
}

/// Fraction of correct membership predictions under `rule`.
///
/// The query set must be balanced unless `allow_unbalanced` is set, in which
/// case the result is marked as unbalanced.
pub fn evaluate_attack(rule: &ThresholdRule, query: &MembershipScoreSet, allow_unbalanced: bool) -> Result<AttackEvaluation> {
    if query.is_empty() {
        return Err(config_err!("empty query set"));
    }
    let balanced = query.is_balanced();
    if !balanced && !allow_unbalanced {
        return Err(config_err!(
            "query set has {} members out of {}; balanced evaluation required",
            query.member_count(),
            query.len()
        ));
    }
    let correct = query
        .scores
        .iter()
        .zip(&query.truths)
        .filter(|(&s, &t)| (s > rule.threshold) == t)
        .count();
    Ok(AttackEvaluation {
        accuracy: correct as f64 / query.len() as f64,
        balanced,
    })
}
