//! Experiment configuration in a plain `key = value` text format.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default, so an empty file describes the default desk-scale experiment.
//! [`ExperimentConfig::to_text`] writes every key, which is what run
//! manifests contain.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use relaxlab::attacks::{AttackFeatures, AttackKind, NnAttackConfig};
use relaxlab::data::{FeatureKind, SyntheticMode, SyntheticSpec};
use relaxlab::nn::{Activation, ModelSpec, SgdConfig};
use relaxlab::relaxloss::{FlattenScope, Method, RelaxConfig, TrainConfig};
use relaxlab::{Error, Result};

/// Every recognised key with a one-line description, in manifest order.
pub const SCHEMA: &[(&str, &str)] = &[
    ("data", "`synthetic` or the path of a CSV file"),
    ("label_col", "label column of the CSV file"),
    ("feature_kind", "real_valued | binary (CSV only)"),
    ("classes", "synthetic: number of classes"),
    ("dim", "synthetic: feature dimension"),
    ("per_class", "synthetic: samples per class"),
    ("separation", "synthetic: class separation"),
    ("noise", "synthetic: noise standard deviation"),
    ("synthetic_mode", "gaussian_blobs | binary_records"),
    ("hidden", "hidden layer widths, comma separated (may be empty)"),
    ("activation", "relu | tanh"),
    ("dropout", "dropout rate on the last hidden layer"),
    ("method", "vanilla | relaxloss | label_smoothing | confidence_penalty"),
    ("alpha", "relaxloss: target mean training loss"),
    ("flatten_scope", "relaxloss: all_samples | incorrect_only"),
    ("gt_cap", "relaxloss: cap on the ground-truth softlabel, or none"),
    ("alpha_ls", "label_smoothing: weight of the uniform term"),
    ("alpha_cp", "confidence_penalty: entropy weight"),
    ("epochs", "training epochs"),
    ("batch_size", "mini-batch size"),
    ("checkpoint_epochs", "epochs after which a checkpoint is saved, comma separated"),
    ("lr", "base learning rate"),
    ("momentum", "SGD momentum"),
    ("weight_decay", "L2 weight decay"),
    ("lr_schedule", "epoch:multiplier pairs, comma separated; multipliers compound"),
    ("attacks", "attack list: all | black_box | white_box | names, comma separated"),
    ("nn_features", "NN attack input: logits | posteriors"),
    ("nn_hidden", "NN attack hidden widths"),
    ("nn_epochs", "NN attack training epochs"),
    ("seed_data", "seed for data generation and the fold split"),
    ("seed_init", "seed for weight initialisation"),
    ("seed_batch", "seed for batch order and dropout masks"),
    ("seed_attack", "seed for shadow models, NN attacks and query subsampling"),
    ("out_dir", "run directory"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodKind {
    Vanilla,
    RelaxLoss,
    LabelSmoothing,
    ConfidencePenalty,
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(MethodKind::Vanilla),
            "relaxloss" => Ok(MethodKind::RelaxLoss),
            "label_smoothing" => Ok(MethodKind::LabelSmoothing),
            "confidence_penalty" => Ok(MethodKind::ConfidencePenalty),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Vanilla => "vanilla",
            MethodKind::RelaxLoss => "relaxloss",
            MethodKind::LabelSmoothing => "label_smoothing",
            MethodKind::ConfidencePenalty => "confidence_penalty",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Seeds {
    pub data: u64,
    pub init: u64,
    pub batch: u64,
    pub attack: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// `None` means synthetic data.
    pub data_path: Option<PathBuf>,
    pub label_col: String,
    pub feature_kind: FeatureKind,
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub separation: f64,
    pub noise: f64,
    pub synthetic_mode: SyntheticMode,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub dropout: f64,
    pub method: MethodKind,
    pub alpha: f64,
    pub flatten_scope: FlattenScope,
    pub gt_cap: Option<f64>,
    pub alpha_ls: f64,
    pub alpha_cp: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub checkpoint_epochs: Vec<usize>,
    pub sgd: SgdConfig,
    pub attacks: Vec<AttackKind>,
    pub nn_features: AttackFeatures,
    pub nn_hidden: Vec<usize>,
    pub nn_epochs: usize,
    pub seeds: Seeds,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let nn = NnAttackConfig::default();
        Self {
            data_path: None,
            label_col: "label".into(),
            feature_kind: FeatureKind::RealValued,
            classes: 20,
            dim: 50,
            per_class: 500,
            separation: 2.0,
            noise: 1.0,
            synthetic_mode: SyntheticMode::GaussianBlobs,
            hidden: vec![256],
            activation: Activation::Relu,
            dropout: 0.0,
            method: MethodKind::Vanilla,
            alpha: 1.0,
            flatten_scope: FlattenScope::AllSamples,
            gt_cap: None,
            alpha_ls: 0.1,
            alpha_cp: 0.5,
            epochs: 40,
            batch_size: 64,
            checkpoint_epochs: Vec::new(),
            sgd: SgdConfig {
                learning_rate: 0.02,
                momentum: 0.9,
                weight_decay: 1e-4,
                lr_schedule: vec![(25, 0.1)],
            },
            attacks: AttackKind::ALL.to_vec(),
            nn_features: nn.features,
            nn_hidden: nn.hidden,
            nn_epochs: nn.epochs,
            seeds: Seeds {
                data: 0,
                init: 1,
                batch: 2,
                attack: 3,
            },
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses a config file body, starting from the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Applies a single `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "data" => {
                self.data_path = if value == "synthetic" { None } else { Some(PathBuf::from(value)) };
            }
            "label_col" => self.label_col = value.to_string(),
            "feature_kind" => self.feature_kind = value.parse()?,
            "classes" => self.classes = parse(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            "per_class" => self.per_class = parse(key, value)?,
            "separation" => self.separation = parse(key, value)?,
            "noise" => self.noise = parse(key, value)?,
            "synthetic_mode" => self.synthetic_mode = value.parse()?,
            "hidden" => self.hidden = parse_list(key, value)?,
            "activation" => self.activation = value.parse()?,
            "dropout" => self.dropout = parse(key, value)?,
            "method" => self.method = value.parse()?,
            "alpha" => self.alpha = parse(key, value)?,
            "flatten_scope" => self.flatten_scope = value.parse()?,
            "gt_cap" => self.gt_cap = if value == "none" { None } else { Some(parse(key, value)?) },
            "alpha_ls" => self.alpha_ls = parse(key, value)?,
            "alpha_cp" => self.alpha_cp = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "checkpoint_epochs" => self.checkpoint_epochs = parse_list(key, value)?,
            "lr" => self.sgd.learning_rate = parse(key, value)?,
            "momentum" => self.sgd.momentum = parse(key, value)?,
            "weight_decay" => self.sgd.weight_decay = parse(key, value)?,
            "lr_schedule" => {
                self.sgd.lr_schedule = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|pair| {
                        let (e, m) = pair
                            .split_once(':')
                            .ok_or_else(|| Error::Config(format!("lr_schedule entry `{pair}` is not epoch:multiplier")))?;
                        Ok((parse(key, e.trim())?, parse(key, m.trim())?))
                    })
                    .collect::<Result<_>>()?;
            }
            "attacks" => self.attacks = AttackKind::parse_list(value)?,
            "nn_features" => self.nn_features = value.parse()?,
            "nn_hidden" => self.nn_hidden = parse_list(key, value)?,
            "nn_epochs" => self.nn_epochs = parse(key, value)?,
            "seed_data" => self.seeds.data = parse(key, value)?,
            "seed_init" => self.seeds.init = parse(key, value)?,
            "seed_batch" => self.seeds.batch = parse(key, value)?,
            "seed_attack" => self.seeds.attack = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` overrides, as given on the command line.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "data" => self
                .data_path
                .as_ref()
                .map_or_else(|| "synthetic".to_string(), |p| p.display().to_string()),
            "label_col" => self.label_col.clone(),
            "feature_kind" => self.feature_kind.name().to_string(),
            "classes" => self.classes.to_string(),
            "dim" => self.dim.to_string(),
            "per_class" => self.per_class.to_string(),
            "separation" => self.separation.to_string(),
            "noise" => self.noise.to_string(),
            "synthetic_mode" => self.synthetic_mode.name().to_string(),
            "hidden" => join(&self.hidden),
            "activation" => self.activation.name().to_string(),
            "dropout" => self.dropout.to_string(),
            "method" => self.method.name().to_string(),
            "alpha" => self.alpha.to_string(),
            "flatten_scope" => self.flatten_scope.name().to_string(),
            "gt_cap" => self.gt_cap.map_or_else(|| "none".to_string(), |c| c.to_string()),
            "alpha_ls" => self.alpha_ls.to_string(),
            "alpha_cp" => self.alpha_cp.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "checkpoint_epochs" => join(&self.checkpoint_epochs),
            "lr" => self.sgd.learning_rate.to_string(),
            "momentum" => self.sgd.momentum.to_string(),
            "weight_decay" => self.sgd.weight_decay.to_string(),
            "lr_schedule" => self
                .sgd
                .lr_schedule
                .iter()
                .map(|(e, m)| format!("{e}:{m}"))
                .collect::<Vec<_>>()
                .join(","),
            "attacks" => self.attacks.iter().map(|a| a.name()).collect::<Vec<_>>().join(","),
            "nn_features" => self.nn_features.name().to_string(),
            "nn_hidden" => join(&self.nn_hidden),
            "nn_epochs" => self.nn_epochs.to_string(),
            "seed_data" => self.seeds.data.to_string(),
            "seed_init" => self.seeds.init.to_string(),
            "seed_batch" => self.seeds.batch.to_string(),
            "seed_attack" => self.seeds.attack.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            _ => unreachable!("key missing from SCHEMA"),
        }
    }

    /// Every key, one per line, in [`SCHEMA`] order.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# relaxlab experiment manifest\n");
        for (key, _) in SCHEMA {
            let _ = writeln!(out, "{key} = {}", self.value_of(key));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_path.is_none() {
            if self.classes < 2 || self.dim == 0 || self.per_class == 0 {
                return Err(Error::Config("synthetic data needs classes ≥ 2, dim ≥ 1, per_class ≥ 1".into()));
            }
            if !(self.separation >= 0.0 && self.noise > 0.0) {
                return Err(Error::Config("separation must be ≥ 0 and noise > 0".into()));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0,1)", self.dropout)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.attacks.is_empty() {
            return Err(Error::Config("attack list is empty".into()));
        }
        self.train_config().validate()
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            classes: self.classes,
            dim: self.dim,
            per_class: self.per_class,
            class_separation: self.separation,
            noise_sigma: self.noise,
            mode: self.synthetic_mode,
            seed: self.seeds.data,
        }
    }

    pub fn training_method(&self) -> Method {
        match self.method {
            MethodKind::Vanilla => Method::Vanilla,
            MethodKind::RelaxLoss => Method::RelaxLoss(RelaxConfig {
                alpha: self.alpha,
                flatten_scope: self.flatten_scope,
                gt_cap: self.gt_cap,
            }),
            MethodKind::LabelSmoothing => Method::LabelSmoothing(self.alpha_ls),
            MethodKind::ConfidencePenalty => Method::ConfidencePenalty(self.alpha_cp),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            method: self.training_method(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            sgd: self.sgd.clone(),
            batch_seed: self.seeds.batch,
            checkpoint_epochs: self.checkpoint_epochs.clone(),
        }
    }

    pub fn model_spec(&self, input_dim: usize, classes: usize) -> ModelSpec {
        let mut layer_dims = vec![input_dim];
        layer_dims.extend(&self.hidden);
        layer_dims.push(classes);
        ModelSpec {
            layer_dims,
            activation: self.activation,
            dropout_rate: self.dropout,
        }
    }

    pub fn nn_attack_config(&self) -> NnAttackConfig {
        NnAttackConfig {
            hidden: self.nn_hidden.clone(),
            features: self.nn_features,
            epochs: self.nn_epochs,
            seed: relaxlab::rng::mix(&[self.seeds.attack, 0x4E4E]),
            ..NnAttackConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_overrides(&[
            "method=relaxloss",
            "alpha=1.5",
            "gt_cap=0.3",
            "lr_schedule=20:0.1,30:0.5",
            "checkpoint_epochs=5,10",
            "attacks=loss,nn",
            "hidden=",
            "data=some/file.csv",
        ])
        .unwrap();
        let text = cfg.to_text();
        assert_eq!(ExperimentConfig::from_text(&text).unwrap(), cfg);
        assert_eq!(text.lines().filter(|l| l.contains(" = ")).count(), SCHEMA.len());
    }

    #[test]
    fn defaults_describe_the_desk_task() {
        let cfg = ExperimentConfig::from_text("# nothing\n\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.model_spec(50, 20).layer_dims, vec![50, 256, 20]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = ExperimentConfig::from_text("epochs = 3\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = ExperimentConfig::from_text("epochs three").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(ExperimentConfig::from_text("alpha = x").is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("method", "relaxloss").unwrap();
        cfg.set("alpha", "-1").unwrap();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.set("checkpoint_epochs", "41").unwrap();
        assert!(cfg.validate().is_err());
    }
}
