use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRACE_CSV_HEADER: [&str; 12] = [
    "epoch",
    "branch_desc",
    "branch_asc",
    "branch_flat",
    "train_loss_mean",
    "train_loss_var",
    "test_loss_mean",
    "train_acc1",
    "test_acc1",
    "train_acc5",
    "test_acc5",
    "lr",
];

/// Statistics collected after one training epoch. Accuracies are percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub branch_desc: usize,
    pub branch_asc: usize,
    pub branch_flat: usize,
    pub train_loss_mean: f64,
    pub train_loss_var: f64,
    pub test_loss_mean: f64,
    pub train_acc1: f64,
    pub test_acc1: f64,
    pub train_acc5: f64,
    pub test_acc5: f64,
    pub lr: f64,
}

impl EpochRecord {
    pub fn batches(&self) -> usize {
        self.branch_desc + self.branch_asc + self.branch_flat
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = TRACE_CSV_HEADER.join(",");
        out.push('\n');
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.epoch,
                r.branch_desc,
                r.branch_asc,
                r.branch_flat,
                r.train_loss_mean,
                r.train_loss_var,
                r.test_loss_mean,
                r.train_acc1,
                r.test_acc1,
                r.train_acc5,
                r.test_acc5,
                r.lr
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.split(',').eq(TRACE_CSV_HEADER.iter().copied()) => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "unexpected trace header".into(),
                })
            }
        }
        let mut epochs = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let err = |m: &str| Error::Parse {
                line: i + 1,
                message: m.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != TRACE_CSV_HEADER.len() {
                return Err(err("wrong number of fields"));
            }
            let u = |k: usize| f[k].parse::<usize>().map_err(|_| err("bad integer"));
            let x = |k: usize| f[k].parse::<f64>().map_err(|_| err("bad number"));
            epochs.push(EpochRecord {
                epoch: u(0)?,
                branch_desc: u(1)?,
                branch_asc: u(2)?,
                branch_flat: u(3)?,
                train_loss_mean: x(4)?,
                train_loss_var: x(5)?,
                test_loss_mean: x(6)?,
                train_acc1: x(7)?,
                test_acc1: x(8)?,
                train_acc5: x(9)?,
                test_acc5: x(10)?,
                lr: x(11)?,
            });
        }
        Ok(Self { epochs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let trace = TrainTrace {
            epochs: vec![EpochRecord {
                epoch: 1,
                branch_desc: 3,
                branch_asc: 0,
                branch_flat: 1,
                train_loss_mean: 0.123456789012345,
                train_loss_var: 1e-7,
                test_loss_mean: 2.5,
                train_acc1: 97.5,
                test_acc1: 61.25,
                train_acc5: 100.0,
                test_acc5: 88.0,
                lr: 0.1,
            }],
        };
        let csv = trace.to_csv();
        assert!(csv.starts_with("epoch,branch_desc,branch_asc,branch_flat,train_loss_mean"));
        assert_eq!(TrainTrace::from_csv(&csv).unwrap(), trace);
        assert!(TrainTrace::from_csv("nope\n").is_err());
    }
}
