//! Attack reports for a finished run.

use std::fs;
use std::path::{Path, PathBuf};

use relaxlab::attacks::{
    balanced_query, evaluate_attacks, run_adaptive_attack, shadow_config, train_shadow, AttackKind, AttackResult,
};
use relaxlab::{Error, Result};

use crate::run::Run;

pub const ATTACK_REPORT: &str = "attacks.csv";
pub const ADAPTIVE_REPORT: &str = "attacks_adaptive.csv";

pub const REPORT_HEADER: [&str; 7] = [
    "attack_name",
    "threshold",
    "shadow_accuracy",
    "target_accuracy",
    "target_auc",
    "adaptive_flag",
    "per_class_auc_top10",
];

/// Report file name for a run, optionally for one of its epoch checkpoints.
pub fn report_name(adaptive: bool, epoch: Option<usize>) -> String {
    let base = if adaptive { "attacks_adaptive" } else { "attacks" };
    match epoch {
        None => format!("{base}.csv"),
        Some(e) => format!("{base}_epoch_{e}.csv"),
    }
}

/// Calibrates the attacks on a shadow model and evaluates them on the run's
/// target model. The adaptive variant trains the shadow with the defender's
/// own recipe.
pub fn run_attacks(run: &Run, attacks: &[AttackKind], adaptive: bool) -> Result<Vec<AttackResult>> {
    let cfg = &run.config;
    let seed = cfg.seeds.attack;
    let query = balanced_query(&run.split, seed);
    let spec = cfg.model_spec(run.dataset.dim(), run.dataset.num_classes);
    let nn = cfg.nn_attack_config();
    let target_cfg = cfg.train_config();
    if adaptive {
        let report = run_adaptive_attack(
            &run.model,
            &spec,
            &target_cfg,
            &run.dataset,
            &run.split,
            &query,
            attacks,
            &nn,
            seed,
        )?;
        Ok(report.results)
    } else {
        let shadow = train_shadow(&spec, &shadow_config(&target_cfg, false, seed), &run.dataset, &run.split, seed)?;
        evaluate_attacks(&run.model, &shadow, &run.dataset, &run.split, &query, attacks, &nn, false)
    }
}

pub fn report_csv(results: &[AttackResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER).map_err(csv_err)?;
    for r in results {
        let top: Vec<String> = r.per_class_auc_top10.iter().map(f64::to_string).collect();
        w.write_record([
            r.attack.name().to_string(),
            r.threshold.to_string(),
            r.shadow_accuracy.to_string(),
            r.target_accuracy.to_string(),
            r.target_auc.to_string(),
            u8::from(r.adaptive).to_string(),
            top.join(";"),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// One parsed row of an attack report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub attack: AttackKind,
    pub threshold: f64,
    pub shadow_accuracy: f64,
    pub target_accuracy: f64,
    pub target_auc: f64,
    pub adaptive: bool,
    pub per_class_auc_top10: Vec<f64>,
}

pub fn parse_report(text: &str) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(REPORT_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: "not an attack report header".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let num = |k: usize| -> Result<f64> {
            rec[k].parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad number `{}` in column {}", &rec[k], REPORT_HEADER[k]),
            })
        };
        let top = rec[6]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad per-class AUC `{s}`"),
                })
            })
            .collect::<Result<_>>()?;
        rows.push(ReportRow {
            attack: rec[0].parse()?,
            threshold: num(1)?,
            shadow_accuracy: num(2)?,
            target_accuracy: num(3)?,
            target_auc: num(4)?,
            adaptive: &rec[5] == "1",
            per_class_auc_top10: top,
        });
    }
    Ok(rows)
}

pub fn load_report(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    parse_report(&fs::read_to_string(path)?)
}

/// Runs the attacks on `dir` and writes the report next to the model.
/// `attacks = None` uses the list from the run manifest.
pub fn cmd_attack(
    dir: impl AsRef<Path>,
    attacks: Option<&[AttackKind]>,
    adaptive: bool,
    epoch: Option<usize>,
    seed_attack: Option<u64>,
) -> Result<(PathBuf, Vec<AttackResult>)> {
    let mut run = Run::open_at(dir, epoch)?;
    if let Some(s) = seed_attack {
        run.config.seeds.attack = s;
    }
    let list = attacks.map_or_else(|| run.config.attacks.clone(), <[_]>::to_vec);
    if list.is_empty() {
        return Err(Error::Config("attack list is empty".into()));
    }
    let results = run_attacks(&run, &list, adaptive)?;
    let path = run.dir.join(report_name(adaptive, epoch));
    fs::write(&path, report_csv(&results)?)?;
    Ok((path, results))
}
