//! Metrics and loss-distribution theory.
//!
//! Besides AUC and the usual summary statistics this module carries the
//! Gaussian model of member/non-member losses: the closed-form Hellinger
//! distance, the total-variation and AUC upper bounds it implies, and the two
//! factors of the Hellinger expression that move with the variance ratio
//! `c = σ₂/σ₁`.

use serde::{Deserialize, Serialize};

use crate::attacks::MembershipScoreSet;
use crate::error::{config_err, Error, Result};
use crate::relaxloss::TrainTrace;

/// Rank-based (Mann–Whitney) AUC with half credit for ties; members are the
/// positive class.
pub fn compute_auc(set: &MembershipScoreSet) -> Result<f64> {
    let (members, non_members) = set.split_by_truth();
    auc(&members, &non_members)
}

/// AUC of `members` (positives) against `non_members`.
///
/// Computed as `2U / (2·n₁·n₀)` with `2U` accumulated in integers from doubled
/// mid-ranks, so the value is the exact rational rounded once.
pub fn auc(members: &[f64], non_members: &[f64]) -> Result<f64> {
    if members.is_empty() || non_members.is_empty() {
        return Err(Error::UndefinedMetric("AUC needs both members and non-members".into()));
    }
    if members.iter().chain(non_members).any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("NaN score".into()));
    }
    let mut pooled: Vec<(f64, bool)> = members
        .iter()
        .map(|&s| (s, true))
        .chain(non_members.iter().map(|&s| (s, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let n1 = members.len() as u128;
    let n0 = non_members.len() as u128;
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < pooled.len() {
        let mut end = start;
        while end + 1 < pooled.len() && pooled[end + 1].0 == pooled[start].0 {
            end += 1;
        }
        // 1-based ranks start+1..=end+1, doubled mid-rank = start + end + 2
        let positives = pooled[start..=end].iter().filter(|p| p.1).count() as u128;
        twice_rank_sum += positives * (start + end + 2) as u128;
        start = end + 1;
    }
    let twice_u = twice_rank_sum - n1 * (n1 + 1);
    Ok(twice_u as f64 / (2 * n1 * n0) as f64)
}

/// Population mean and variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub mean: f64,
    pub variance: f64,
    pub count: usize,
}

pub fn loss_stats(losses: &[f64]) -> Result<LossStats> {
    if losses.is_empty() {
        return Err(Error::UndefinedMetric("statistics of an empty sample".into()));
    }
    let n = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let variance = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
    Ok(LossStats {
        mean,
        variance,
        count: losses.len(),
    })
}

fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n
}

/// `Var(ℓ+Δℓ)` against `Var(ℓ) + Var(Δℓ) + 2·Cov(ℓ, Δℓ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    pub var_loss: f64,
    pub var_delta: f64,
    pub covariance: f64,
    /// Directly measured `Var(ℓ + Δℓ)`.
    pub var_sum: f64,
    pub identity_residual: f64,
    pub covariance_positive: bool,
    pub variance_increased: bool,
}

pub fn variance_decomposition(losses: &[f64], deltas: &[f64]) -> Result<VarianceDecomposition> {
    if losses.len() != deltas.len() {
        return Err(crate::error::dim_err!("{} losses vs {} deltas", losses.len(), deltas.len()));
    }
    if losses.len() < 2 {
        return Err(config_err!("variance decomposition needs at least 2 samples"));
    }
    let var_loss = covariance(losses, losses);
    let var_delta = covariance(deltas, deltas);
    let cov = covariance(losses, deltas);
    let sums: Vec<f64> = losses.iter().zip(deltas).map(|(l, d)| l + d).collect();
    let var_sum = covariance(&sums, &sums);
    Ok(VarianceDecomposition {
        var_loss,
        var_delta,
        covariance: cov,
        var_sum,
        identity_residual: (var_sum - (var_loss + var_delta + 2.0 * cov)).abs(),
        covariance_positive: cov > 0.0,
        variance_increased: var_sum > var_loss,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianFit {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
            return Err(config_err!("Gaussian needs finite mu and positive sigma, got ({mu}, {sigma})"));
        }
        Ok(Self { mu, sigma })
    }

    /// Method of moments. A zero variance is floored at `1e-12` so degenerate
    /// samples still produce a usable (very narrow) fit.
    pub fn from_stats(stats: &LossStats) -> Result<Self> {
        Self::new(stats.mean, stats.variance.sqrt().max(1e-12))
    }

    pub fn fit(samples: &[f64]) -> Result<Self> {
        Self::from_stats(&loss_stats(samples)?)
    }
}

/// Closed-form Hellinger distance between two univariate Gaussians.
pub fn hellinger_gaussian(p: &GaussianFit, q: &GaussianFit) -> Result<f64> {
    GaussianFit::new(p.mu, p.sigma)?;
    GaussianFit::new(q.mu, q.sigma)?;
    let s2 = p.sigma * p.sigma + q.sigma * q.sigma;
    let d_mu = p.mu - q.mu;
    let bc = (2.0 * p.sigma * q.sigma / s2).sqrt() * (-0.25 * d_mu * d_mu / s2).exp();
    Ok((1.0 - bc).clamp(0.0, 1.0).sqrt())
}

/// `min(1, √2·D_H)`.
pub fn tv_upper_bound(d_hellinger: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&d_hellinger) {
        return Err(config_err!("Hellinger distance {d_hellinger} outside [0,1]"));
    }
    Ok((std::f64::consts::SQRT_2 * d_hellinger).min(1.0))
}

/// `−½·D_TV² + D_TV + ½`.
pub fn auc_upper_bound(d_tv: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&d_tv) {
        return Err(config_err!("total variation {d_tv} outside [0,1]"));
    }
    Ok(-0.5 * d_tv * d_tv + d_tv + 0.5)
}

/// The two factors of `1 − D_H²` written in terms of `c = σ₂/σ₁`:
/// `(√(2c/(1+c²)), exp(−¼(μ₁−μ₂)²/((1+c²)σ₁²)))`.
pub fn bound_terms(mu1: f64, mu2: f64, sigma1: f64, c_ratio: f64) -> Result<(f64, f64)> {
    if !(sigma1 > 0.0) || !(c_ratio > 0.0) {
        return Err(config_err!("sigma1 and c must be positive"));
    }
    let one_c2 = 1.0 + c_ratio * c_ratio;
    let star = (2.0 * c_ratio / one_c2).sqrt();
    let d_mu = mu1 - mu2;
    let dstar = (-0.25 * d_mu * d_mu / (one_c2 * sigma1 * sigma1)).exp();
    Ok((star, dstar))
}

/// Bound chain for a member (1) / non-member (2) Gaussian pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub d_hellinger: f64,
    pub d_tv_upper: f64,
    pub auc_upper: f64,
    pub term_star: f64,
    pub term_dstar: f64,
    pub c_ratio: f64,
}

impl BoundReport {
    pub fn new(member: &GaussianFit, non_member: &GaussianFit) -> Result<Self> {
        let d_hellinger = hellinger_gaussian(member, non_member)?;
        let d_tv_upper = tv_upper_bound(d_hellinger)?;
        let c_ratio = non_member.sigma / member.sigma;
        let (term_star, term_dstar) = bound_terms(member.mu, non_member.mu, member.sigma, c_ratio)?;
        Ok(Self {
            d_hellinger,
            d_tv_upper,
            auc_upper: auc_upper_bound(d_tv_upper)?,
            term_star,
            term_dstar,
            c_ratio,
        })
    }
}

/// Product-moment correlation coefficient.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(crate::error::dim_err!("{} vs {} values", xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(Error::UndefinedMetric("correlation needs at least 2 points".into()));
    }
    let vx = covariance(xs, xs);
    let vy = covariance(ys, ys);
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::UndefinedMetric("correlation of a constant sequence".into()));
    }
    Ok((covariance(xs, ys) / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub low: f64,
    pub high: f64,
    pub counts: Vec<usize>,
    pub underflow: usize,
    pub overflow: usize,
}

impl Histogram {
    pub fn edges(&self) -> Vec<f64> {
        let k = self.counts.len();
        (0..=k)
            .map(|i| self.low + (self.high - self.low) * i as f64 / k as f64)
            .collect()
    }
}

/// Equal-width bins over `[low, high]`; the top edge belongs to the last bin.
/// Values outside the range (and NaN) land in the under/overflow counters.
pub fn loss_histogram(losses: &[f64], bins: usize, low: f64, high: f64) -> Result<Histogram> {
    if bins == 0 {
        return Err(config_err!("histogram needs at least one bin"));
    }
    if !(low < high) {
        return Err(config_err!("inverted histogram range [{low}, {high}]"));
    }
    let mut h = Histogram {
        low,
        high,
        counts: vec![0; bins],
        underflow: 0,
        overflow: 0,
    };
    let width = (high - low) / bins as f64;
    for &v in losses {
        if v < low {
            h.underflow += 1;
        } else if v <= high {
            let b = (((v - low) / width) as usize).min(bins - 1);
            h.counts[b] += 1;
        } else {
            h.overflow += 1;
        }
    }
    Ok(h)
}

/// Final-epoch top-1 train accuracy minus top-1 test accuracy.
pub fn generalization_gap(trace: &TrainTrace) -> Result<f64> {
    let last = trace
        .last()
        .ok_or_else(|| Error::Usage("generalization gap of an empty trace".into()))?;
    Ok(last.train_acc1 - last.test_acc1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relaxloss::EpochRecord;
    use proptest::prelude::*;

    fn set(members: &[f64], non_members: &[f64]) -> MembershipScoreSet {
        MembershipScoreSet::from_groups("t", members, non_members)
    }

    /// Sweep every distinct threshold from high to low and integrate the ROC
    /// polyline with the trapezoid rule, in doubled count units.
    fn sweep_auc(members: &[f64], non_members: &[f64]) -> f64 {
        let mut thresholds: Vec<f64> = members.iter().chain(non_members).copied().collect();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let (mut tp_prev, mut fp_prev) = (0u64, 0u64);
        let mut twice_area = 0u64;
        for t in thresholds {
            let tp = members.iter().filter(|&&s| s >= t).count() as u64;
            let fp = non_members.iter().filter(|&&s| s >= t).count() as u64;
            twice_area += (fp - fp_prev) * (tp + tp_prev);
            tp_prev = tp;
            fp_prev = fp;
        }
        twice_area as f64 / (2 * members.len() * non_members.len()) as f64
    }

    #[test]
    fn auc_examples() {
        assert_eq!(compute_auc(&set(&[2.0, 3.0], &[0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(compute_auc(&set(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0])).unwrap(), 0.5);
        assert_eq!(compute_auc(&set(&[2.0, 0.0], &[1.0])).unwrap(), 0.5);
        assert!(matches!(compute_auc(&set(&[1.0], &[])), Err(Error::UndefinedMetric(_))));
    }

    proptest! {
        #[test]
        fn auc_matches_threshold_sweep(
            m in proptest::collection::vec(0i32..8, 1..25),
            n in proptest::collection::vec(0i32..8, 1..25),
        ) {
            let m: Vec<f64> = m.into_iter().map(f64::from).collect();
            let n: Vec<f64> = n.into_iter().map(f64::from).collect();
            prop_assert_eq!(auc(&m, &n).unwrap(), sweep_auc(&m, &n));
        }

        #[test]
        fn auc_is_invariant_under_monotone_transforms(
            m in proptest::collection::vec(-3.0f64..3.0, 1..30),
            n in proptest::collection::vec(-3.0f64..3.0, 1..30),
        ) {
            let f = |v: &Vec<f64>| v.iter().map(|x| (2.0 * x).exp() + x).collect::<Vec<_>>();
            prop_assert_eq!(auc(&m, &n).unwrap(), auc(&f(&m), &f(&n)).unwrap());
        }

        #[test]
        fn decomposition_identity(
            pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..60)
        ) {
            let (l, d): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let v = variance_decomposition(&l, &d).unwrap();
            prop_assert!(v.identity_residual < 1e-10);
        }
    }

    #[test]
    fn stats_examples() {
        let s = loss_stats(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.variance), (1.0, 0.0));
        let s = loss_stats(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.variance - 2.0 / 3.0).abs() < 1e-15);
        let s = loss_stats(&[5.0]).unwrap();
        assert_eq!((s.mean, s.variance, s.count), (5.0, 0.0, 1));
        assert!(loss_stats(&[]).is_err());
    }

    #[test]
    fn decomposition_examples() {
        let v = variance_decomposition(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((v.var_loss - 2.0 / 3.0).abs() < 1e-15);
        assert!((v.covariance - 2.0 / 3.0).abs() < 1e-15);
        assert!((v.var_sum - 8.0 / 3.0).abs() < 1e-15);
        assert!(v.identity_residual < 1e-15 && v.covariance_positive && v.variance_increased);

        let v = variance_decomposition(&[1.0, 4.0, 2.0], &[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(v.covariance, 0.0);
        assert!((v.var_sum - v.var_loss).abs() < 1e-15);

        let v = variance_decomposition(&[1.0, 4.0, 2.0], &[-1.0, -4.0, -2.0]).unwrap();
        assert_eq!(v.var_sum, 0.0);
        assert!(v.covariance < 0.0);

        assert!(variance_decomposition(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn hellinger_examples() {
        let g = |m, s| GaussianFit::new(m, s).unwrap();
        assert_eq!(hellinger_gaussian(&g(1.0, 2.0), &g(1.0, 2.0)).unwrap(), 0.0);
        let d = hellinger_gaussian(&g(0.0, 1.0), &g(2.0, 1.0)).unwrap();
        assert!((d * d - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert!((d - 0.62727).abs() < 1e-4);
        let d = hellinger_gaussian(&g(0.0, 1.0), &g(0.0, 3.0)).unwrap();
        assert!((d * d - (1.0 - 0.6f64.sqrt())).abs() < 1e-15);
        assert!((d - 0.47476).abs() < 1e-4);
        assert!(GaussianFit::new(0.0, 0.0).is_err());
        let bad = GaussianFit { mu: 0.0, sigma: -1.0 };
        assert!(hellinger_gaussian(&bad, &g(0.0, 1.0)).is_err());
    }

    #[test]
    fn bound_examples() {
        assert_eq!(tv_upper_bound(0.0).unwrap(), 0.0);
        assert!((tv_upper_bound(0.5).unwrap() - 0.5 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(tv_upper_bound(0.9).unwrap(), 1.0);
        assert!(tv_upper_bound(1.2).is_err());

        assert_eq!(auc_upper_bound(0.0).unwrap(), 0.5);
        assert_eq!(auc_upper_bound(1.0).unwrap(), 1.0);
        assert!((auc_upper_bound(0.4).unwrap() - 0.82).abs() < 1e-15);
        assert!(auc_upper_bound(-0.1).is_err());
    }

    #[test]
    fn bound_term_examples() {
        assert_eq!(bound_terms(0.0, 1.0, 1.0, 1.0).unwrap().0, 1.0);
        let s2 = bound_terms(0.0, 1.0, 1.0, 2.0).unwrap().0;
        let s3 = bound_terms(0.0, 1.0, 1.0, 3.0).unwrap().0;
        assert!(s2 > s3);
        for c in [0.5, 1.0, 7.0] {
            assert_eq!(bound_terms(2.0, 2.0, 0.3, c).unwrap().1, 1.0);
        }
    }

    proptest! {
        #[test]
        fn hellinger_is_symmetric_and_matches_terms(
            mu1 in -3.0f64..3.0, mu2 in -3.0f64..3.0, s1 in 0.1f64..4.0, s2 in 0.1f64..4.0
        ) {
            let p = GaussianFit::new(mu1, s1).unwrap();
            let q = GaussianFit::new(mu2, s2).unwrap();
            let d = hellinger_gaussian(&p, &q).unwrap();
            prop_assert_eq!(d, hellinger_gaussian(&q, &p).unwrap());
            prop_assert!((0.0..=1.0).contains(&d));
            let (a, b) = bound_terms(mu1, mu2, s1, s2 / s1).unwrap();
            prop_assert!(((1.0 - a * b) - d * d).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_bound_is_monotone() {
        let mut prev = auc_upper_bound(0.0).unwrap();
        for i in 1..=1000 {
            let v = auc_upper_bound(i as f64 / 1000.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn pearson_examples() {
        let xs = [0.0, 1.0, 2.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((pearson_correlation(&xs, &ys).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson_correlation(&xs, &neg).unwrap() + 1.0).abs() < 1e-15);
        let r = pearson_correlation(&[0.0, 1.0, 2.0], &[0.0, 0.0, 1.0]).unwrap();
        assert!((r - 0.75f64.sqrt()).abs() < 1e-12);
        assert!(matches!(pearson_correlation(&[1.0, 1.0], &[0.0, 2.0]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn histogram_examples() {
        let h = loss_histogram(&[0.5, 0.55, 0.6], 4, 0.0, 4.0).unwrap();
        assert_eq!(h.counts, vec![3, 0, 0, 0]);
        let grid: Vec<f64> = (0..40).map(|i| i as f64 / 10.0 + 0.05).collect();
        assert_eq!(loss_histogram(&grid, 4, 0.0, 4.0).unwrap().counts, vec![10; 4]);
        let h = loss_histogram(&[0.1, 0.9], 2, 0.0, 1.0).unwrap();
        assert_eq!(h.counts, vec![1, 1]);
        let h = loss_histogram(&[-1.0, 1.0, 2.0], 2, 0.0, 1.0).unwrap();
        assert_eq!((h.underflow, h.counts.clone(), h.overflow), (1, vec![0, 1], 1));
        assert!(loss_histogram(&[], 2, 1.0, 0.0).is_err());
        assert_eq!(h.edges(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn gap_examples() {
        let rec = |train, test| EpochRecord {
            epoch: 1,
            branch_desc: 1,
            branch_asc: 0,
            branch_flat: 0,
            train_loss_mean: 0.0,
            train_loss_var: 0.0,
            test_loss_mean: 0.0,
            train_acc1: train,
            test_acc1: test,
            train_acc5: 100.0,
            test_acc5: 100.0,
            lr: 0.1,
        };
        let t = TrainTrace { epochs: vec![rec(100.0, 70.5)] };
        assert!((generalization_gap(&t).unwrap() - 29.5).abs() < 1e-12);
        let t = TrainTrace { epochs: vec![rec(81.0, 81.0)] };
        assert_eq!(generalization_gap(&t).unwrap(), 0.0);
        assert!(generalization_gap(&TrainTrace::default()).is_err());
    }
}
