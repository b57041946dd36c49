use crate::error::{config_err, dim_err, Result};
use crate::nn::{argmax, Matrix, Posteriors};

use super::{FlattenScope, RelaxConfig};

/// Flattened targets: keep the ground-truth score (optionally capped) and
/// spread the remaining mass evenly over the other `C − 1` classes.
///
/// The result is a constant target; callers never differentiate through it.
pub fn construct_softlabels(posteriors: &Posteriors, labels: &[usize], gt_cap: Option<f64>) -> Result<Matrix> {
    let c = posteriors.classes();
    if c < 2 {
        return Err(config_err!("posterior flattening needs at least 2 classes"));
    }
    if let Some(cap) = gt_cap {
        if !(cap > 0.0 && cap <= 1.0) {
            return Err(config_err!("ground-truth cap {cap} outside (0,1]"));
        }
    }
    if labels.len() != posteriors.rows() {
        return Err(dim_err!("{} labels for {} posterior rows", labels.len(), posteriors.rows()));
    }
    let mut t = Matrix::zeros(posteriors.rows(), c);
    for (i, &y) in labels.iter().enumerate() {
        if y >= c {
            return Err(dim_err!("label {y} out of range for {c} classes"));
        }
        let p_gt = posteriors.row(i)[y];
        let kept = gt_cap.map_or(p_gt, |cap| p_gt.min(cap));
        let rest = (1.0 - kept) / (c - 1) as f64;
        let row = t.row_mut(i);
        row.fill(rest);
        row[y] = kept;
    }
    Ok(t)
}

/// Targets for the flattening branch. With [`FlattenScope::IncorrectOnly`],
/// correctly classified samples keep their one-hot target.
pub fn flatten_targets(posteriors: &Posteriors, labels: &[usize], config: &RelaxConfig) -> Result<Matrix> {
    let mut t = construct_softlabels(posteriors, labels, config.gt_cap)?;
    if config.flatten_scope == FlattenScope::IncorrectOnly {
        for (i, &y) in labels.iter().enumerate() {
            if argmax(posteriors.row(i)) == y {
                let row = t.row_mut(i);
                row.fill(0.0);
                row[y] = 1.0;
            }
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use proptest::prelude::*;

    fn post(rows: &[&[f64]]) -> Posteriors {
        Posteriors::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn remaining_mass_is_spread_evenly() {
        let t = construct_softlabels(&post(&[&[0.4, 0.3, 0.2, 0.1]]), &[0], None).unwrap();
        for (a, b) in t.row(0).iter().zip([0.4, 0.2, 0.2, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn one_hot_is_a_fixed_point() {
        let t = construct_softlabels(&post(&[&[1.0, 0.0]]), &[0], None).unwrap();
        assert_eq!(t.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn cap_limits_ground_truth() {
        let t = construct_softlabels(&post(&[&[0.4, 0.3, 0.2, 0.1]]), &[0], Some(0.3)).unwrap();
        assert_eq!(t.row(0)[0], 0.3);
        for &v in &t.row(0)[1..] {
            assert!((v - 0.7 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_class_is_a_config_error() {
        let p = Posteriors::new(Matrix::from_rows(&[[1.0]]).unwrap()).unwrap();
        assert!(matches!(construct_softlabels(&p, &[0], None), Err(Error::Config(_))));
    }

    #[test]
    fn incorrect_only_keeps_correct_rows_hard() {
        let p = post(&[&[0.6, 0.3, 0.1], &[0.5, 0.3, 0.2]]);
        let cfg = RelaxConfig {
            flatten_scope: FlattenScope::IncorrectOnly,
            ..RelaxConfig::new(1.0)
        };
        let t = flatten_targets(&p, &[0, 2], &cfg).unwrap();
        assert_eq!(t.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(t.row(1)[2], 0.2);
        assert!((t.row(1)[0] - 0.4).abs() < 1e-15);
    }

    fn random_posterior() -> impl Strategy<Value = (Vec<f64>, usize)> {
        (2usize..=10).prop_flat_map(|c| {
            (proptest::collection::vec(-8.0f64..8.0, c), 0..c)
        })
    }

    proptest! {
        #[test]
        fn softlabels_are_distributions((logits, y) in random_posterior(), cap in proptest::option::of(0.01f64..=1.0)) {
            let p = Posteriors::from_logits(&Matrix::from_rows(&[logits]).unwrap());
            let t = construct_softlabels(&p, &[y], cap).unwrap();
            let row = t.row(0);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            let expected = cap.map_or(p.row(0)[y], |c| p.row(0)[y].min(c));
            prop_assert_eq!(row[y], expected);
        }
    }
}
