//! Hyperparameter sweeps: one independent train + attack run per value.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use relaxlab::attacks::AttackKind;
use relaxlab::{Error, Result};
use serde::Serialize;

use crate::attack::{report_csv, report_name, run_attacks};
use crate::config::{ExperimentConfig, MethodKind};
use crate::run::{run_train, Run};

pub const SWEEP_CSV: &str = "sweep.csv";
pub const SELECTION_JSON: &str = "selection.json";

/// The hyperparameter a sweep varies. Each one fixes the training method.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    AlphaLs,
    AlphaCp,
    Dropout,
    EarlyStop,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepParam::Alpha),
            "alpha_ls" | "label_smoothing" => Ok(SweepParam::AlphaLs),
            "alpha_cp" | "confidence_penalty" => Ok(SweepParam::AlphaCp),
            "dropout" => Ok(SweepParam::Dropout),
            "early_stop" | "epochs" => Ok(SweepParam::EarlyStop),
            other => Err(Error::Config(format!("cannot sweep over `{other}`"))),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::AlphaLs => "alpha_ls",
            SweepParam::AlphaCp => "alpha_cp",
            SweepParam::Dropout => "dropout",
            SweepParam::EarlyStop => "early_stop",
        }
    }

    /// The config for one sweep point, writing into its own sub-directory.
    pub fn configure(self, base: &ExperimentConfig, value: f64, sweep_dir: &Path) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        match self {
            SweepParam::Alpha => {
                cfg.method = MethodKind::RelaxLoss;
                cfg.alpha = value;
            }
            SweepParam::AlphaLs => {
                cfg.method = MethodKind::LabelSmoothing;
                cfg.alpha_ls = value;
            }
            SweepParam::AlphaCp => {
                cfg.method = MethodKind::ConfidencePenalty;
                cfg.alpha_cp = value;
            }
            SweepParam::Dropout => {
                cfg.method = MethodKind::Vanilla;
                cfg.dropout = value;
            }
            SweepParam::EarlyStop => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Config(format!("early_stop value {value} is not a positive epoch count")));
                }
                cfg.method = MethodKind::Vanilla;
                cfg.epochs = value as usize;
                cfg.checkpoint_epochs.retain(|&e| e <= cfg.epochs);
            }
        }
        cfg.out_dir = sweep_dir.join(format!("{}_{value}", self.name()));
        Ok(cfg)
    }
}

/// One row per (value, attack). Failed runs produce rows with `error` set and
/// no numbers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub method: String,
    pub param: String,
    pub value: f64,
    pub attack_name: String,
    pub attack_auc: Option<f64>,
    pub attack_accuracy: Option<f64>,
    pub test_acc_top1: Option<f64>,
    pub test_acc_top5: Option<f64>,
    pub train_loss_mean: Option<f64>,
    pub train_loss_var: Option<f64>,
    pub generalization_gap: Option<f64>,
    pub error: Option<String>,
}

fn run_point(cfg: &ExperimentConfig) -> Result<Vec<(AttackKind, f64, f64)>> {
    run_train(cfg)?;
    let run = Run::open(&cfg.out_dir)?;
    let results = run_attacks(&run, &cfg.attacks, false)?;
    fs::write(run.dir.join(report_name(false, None)), report_csv(&results)?)?;
    let mut out: Vec<_> = results.iter().map(|r| (r.attack, r.target_auc, r.target_accuracy)).collect();
    out.sort_by_key(|r| r.0);
    Ok(out)
}

fn rows_for(param: SweepParam, value: f64, cfg: &ExperimentConfig) -> Vec<SweepRow> {
    let blank = |attack: AttackKind, error: Option<String>| SweepRow {
        method: cfg.method.name().into(),
        param: param.name().into(),
        value,
        attack_name: attack.name().into(),
        attack_auc: None,
        attack_accuracy: None,
        test_acc_top1: None,
        test_acc_top5: None,
        train_loss_mean: None,
        train_loss_var: None,
        generalization_gap: None,
        error,
    };
    let outcome = run_point(cfg).and_then(|res| {
        let trace = relaxlab::relaxloss::TrainTrace::from_csv(&fs::read_to_string(cfg.out_dir.join(crate::run::TRACE))?)?;
        let last = trace
            .last()
            .cloned()
            .ok_or_else(|| Error::Training("empty training trace".into()))?;
        Ok((res, last))
    });
    match outcome {
        Ok((res, last)) => res
            .into_iter()
            .map(|(attack, auc, acc)| SweepRow {
                attack_auc: Some(auc),
                attack_accuracy: Some(acc),
                test_acc_top1: Some(last.test_acc1),
                test_acc_top5: Some(last.test_acc5),
                train_loss_mean: Some(last.train_loss_mean),
                train_loss_var: Some(last.train_loss_var),
                generalization_gap: Some(last.train_acc1 - last.test_acc1),
                ..blank(attack, None)
            })
            .collect(),
        Err(e) => {
            let mut attacks = cfg.attacks.clone();
            attacks.sort();
            attacks.into_iter().map(|a| blank(a, Some(e.to_string()))).collect()
        }
    }
}

/// Post-hoc choice of a sweep value: the lowest mean attack AUC among values
/// whose test accuracy is no worse than the reference value's, minus `tolerance`
/// percentage points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Selection {
    pub param: String,
    pub reference_value: f64,
    pub reference_test_acc_top1: f64,
    pub tolerance: f64,
    pub selected_value: Option<f64>,
    pub mean_attack_auc: Option<f64>,
    pub test_acc_top1: Option<f64>,
}

fn mean_auc_by_value(rows: &[SweepRow]) -> Vec<(f64, f64, f64)> {
    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    for chunk in rows.chunk_by(|a, b| a.value == b.value) {
        if chunk.iter().any(|r| r.error.is_some()) {
            continue;
        }
        let aucs: Vec<f64> = chunk.iter().filter_map(|r| r.attack_auc).collect();
        let acc = chunk[0].test_acc_top1.unwrap_or(f64::NAN);
        out.push((chunk[0].value, aucs.iter().sum::<f64>() / aucs.len() as f64, acc));
    }
    out
}

pub fn select_value(rows: &[SweepRow], reference_value: f64, tolerance: f64) -> Option<Selection> {
    let summary = mean_auc_by_value(rows);
    let (_, _, ref_acc) = *summary.iter().find(|(v, _, _)| *v == reference_value)?;
    let best = summary
        .iter()
        .filter(|(_, _, acc)| *acc >= ref_acc - tolerance)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    Some(Selection {
        param: rows[0].param.clone(),
        reference_value,
        reference_test_acc_top1: ref_acc,
        tolerance,
        selected_value: best.map(|b| b.0),
        mean_attack_auc: best.map(|b| b.1),
        test_acc_top1: best.map(|b| b.2),
    })
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub dir: PathBuf,
    pub rows: Vec<SweepRow>,
    pub selection: Option<Selection>,
    pub failed_values: Vec<f64>,
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Runs every value (in parallel on `jobs` threads), writes `sweep.csv` and,
/// when the undefended value 0 is part of a non-epoch sweep, `selection.json`.
pub fn run_sweep(
    base: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    jobs: usize,
    tolerance: f64,
) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let dir = base.out_dir.clone();
    let configs = values
        .iter()
        .map(|&v| param.configure(base, v, &dir))
        .collect::<Result<Vec<_>>>()?;
    for c in &configs {
        c.validate()?;
    }
    fs::create_dir_all(&dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let per_value: Vec<Vec<SweepRow>> = pool.install(|| {
        values
            .par_iter()
            .zip(&configs)
            .map(|(&v, cfg)| rows_for(param, v, cfg))
            .collect()
    });
    let rows: Vec<SweepRow> = per_value.into_iter().flatten().collect();
    let failed_values = failed_values_of(&rows);

    fs::write(dir.join(SWEEP_CSV), sweep_csv(&rows)?)?;
    let selection = if param == SweepParam::EarlyStop {
        None
    } else {
        select_value(&rows, 0.0, tolerance)
    };
    if let Some(s) = &selection {
        fs::write(dir.join(SELECTION_JSON), serde_json::to_string_pretty(s)?)?;
    }
    Ok(SweepOutcome {
        dir,
        rows,
        selection,
        failed_values,
    })
}

fn failed_values_of(rows: &[SweepRow]) -> Vec<f64> {
    let mut v: Vec<f64> = rows.iter().filter(|r| r.error.is_some()).map(|r| r.value).collect();
    v.dedup();
    v
}
