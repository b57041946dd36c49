//! Loss-distribution analysis across finished runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use relaxlab::analysis::{
    auc, loss_histogram, loss_stats, pearson_correlation, BoundReport, GaussianFit, Histogram, LossStats,
};
use relaxlab::attacks::AttackKind;
use relaxlab::nn::per_sample_ce;
use relaxlab::{Error, Result};
use serde::Serialize;

use crate::attack::{load_report, ATTACK_REPORT};
use crate::run::Run;

#[derive(Clone, Debug, Serialize)]
pub struct TrainTest<T> {
    pub train: T,
    pub test: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackMetrics {
    pub auc: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunAnalysis {
    pub run: String,
    pub method: String,
    pub loss_stats: TrainTest<LossStats>,
    /// Member (train) and non-member (test) fits.
    pub gaussian_fits: TrainTest<GaussianFit>,
    pub bound_report: BoundReport,
    /// AUC of the raw loss score on the full target folds.
    pub empirical_loss_auc: f64,
    pub histograms: TrainTest<Histogram>,
    /// From the run's attack report, when one exists.
    pub attacks: BTreeMap<String, AttackMetrics>,
    pub mean_black_box_auc: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub variance_convention: &'static str,
    pub runs: Vec<RunAnalysis>,
    /// Train-loss variance against mean black-box attack AUC across runs.
    pub pearson_var_auc: Option<f64>,
    /// Train-loss variance against the empirical loss-attack AUC across runs.
    pub pearson_var_loss_auc: Option<f64>,
}

fn fold_losses(run: &Run, indices: &[usize]) -> Result<Vec<f64>> {
    let (x, y) = run.dataset.gather(indices);
    per_sample_ce(&run.model.predict(&x)?, &y)
}

pub fn analyze_run(dir: &Path, bins: usize) -> Result<RunAnalysis> {
    let run = Run::open(dir)?;
    let train = fold_losses(&run, run.split.target_train())?;
    let test = fold_losses(&run, run.split.target_test())?;
    let stats = TrainTest {
        train: loss_stats(&train)?,
        test: loss_stats(&test)?,
    };
    let fits = TrainTest {
        train: GaussianFit::from_stats(&stats.train)?,
        test: GaussianFit::from_stats(&stats.test)?,
    };
    let neg = |v: &[f64]| v.iter().map(|l| -l).collect::<Vec<_>>();
    let high = train
        .iter()
        .chain(&test)
        .copied()
        .filter(|l| l.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-6);

    let mut attacks = BTreeMap::new();
    let mut mean_black_box_auc = None;
    let report = run.dir.join(ATTACK_REPORT);
    if report.is_file() {
        let rows = load_report(&report)?;
        let bb: Vec<f64> = rows.iter().filter(|r| r.attack.is_black_box()).map(|r| r.target_auc).collect();
        if !bb.is_empty() {
            mean_black_box_auc = Some(bb.iter().sum::<f64>() / bb.len() as f64);
        }
        for r in rows {
            attacks.insert(
                r.attack.name().to_string(),
                AttackMetrics {
                    auc: r.target_auc,
                    accuracy: r.target_accuracy,
                },
            );
        }
    }

    Ok(RunAnalysis {
        run: run.dir.display().to_string(),
        method: run.config.method.name().to_string(),
        bound_report: BoundReport::new(&fits.train, &fits.test)?,
        empirical_loss_auc: auc(&neg(&train), &neg(&test))?,
        histograms: TrainTest {
            train: loss_histogram(&train, bins, 0.0, high)?,
            test: loss_histogram(&test, bins, 0.0, high)?,
        },
        loss_stats: stats,
        gaussian_fits: fits,
        attacks,
        mean_black_box_auc,
    })
}

/// Analyzes every run; with `correlation` at least two runs are required and
/// each needs an attack report containing a black-box attack.
pub fn cmd_analyze(dirs: &[PathBuf], bins: usize, correlation: bool) -> Result<AnalysisReport> {
    if dirs.is_empty() {
        return Err(Error::Config("no run directories given".into()));
    }
    if correlation && dirs.len() < 2 {
        return Err(Error::Config("correlation needs at least two runs".into()));
    }
    let runs = dirs.iter().map(|d| analyze_run(d, bins)).collect::<Result<Vec<_>>>()?;
    let (mut pearson_var_auc, mut pearson_var_loss_auc) = (None, None);
    if correlation {
        let vars: Vec<f64> = runs.iter().map(|r| r.loss_stats.train.variance).collect();
        let bb = runs
            .iter()
            .map(|r| {
                r.mean_black_box_auc.ok_or_else(|| {
                    Error::Config(format!(
                        "{} has no attack report with black-box attacks ({}); run `relaxlab attack` first",
                        r.run,
                        AttackKind::BLACK_BOX.map(AttackKind::name).join(", ")
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let loss_aucs: Vec<f64> = runs.iter().map(|r| r.empirical_loss_auc).collect();
        pearson_var_auc = Some(pearson_correlation(&vars, &bb)?);
        pearson_var_loss_auc = Some(pearson_correlation(&vars, &loss_aucs)?);
    }
    Ok(AnalysisReport {
        variance_convention: "population",
        runs,
        pearson_var_auc,
        pearson_var_loss_auc,
    })
}
