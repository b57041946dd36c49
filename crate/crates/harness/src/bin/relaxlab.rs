use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relaxlab::attacks::AttackKind;
use relaxlab::Error;
use relaxlab_harness::analyze::cmd_analyze;
use relaxlab_harness::attack::cmd_attack;
use relaxlab_harness::boundary::{boundary_grid, data_extent, GridSpec};
use relaxlab_harness::config::SCHEMA;
use relaxlab_harness::run::{run_train, Run};
use relaxlab_harness::sweep::{run_sweep, SweepParam, SWEEP_CSV};
use relaxlab_harness::{exit_code, ExperimentConfig, EXIT_CONFIG, EXIT_OK};

#[derive(Parser)]
#[command(name = "relaxlab", version, about = "Membership-inference experiments with relaxed-loss training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file with `key = value` lines.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed_data: Option<u64>,
    #[arg(long)]
    seed_init: Option<u64>,
    #[arg(long)]
    seed_batch: Option<u64>,
    #[arg(long)]
    seed_attack: Option<u64>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> relaxlab::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply_overrides(&self.overrides)?;
        let seeds = &mut cfg.seeds;
        for (slot, v) in [
            (&mut seeds.data, self.seed_data),
            (&mut seeds.init, self.seed_init),
            (&mut seeds.batch, self.seed_batch),
            (&mut seeds.attack, self.seed_attack),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a target model and write a run directory.
    Train(ConfigArgs),
    /// Run membership attacks against a finished run.
    Attack {
        run: PathBuf,
        /// Attack list (defaults to the one in the manifest).
        #[arg(long)]
        attacks: Option<String>,
        /// Calibrate on shadows trained with the defender's own recipe.
        #[arg(long)]
        adaptive: bool,
        /// Attack the checkpoint saved after this epoch.
        #[arg(long)]
        epoch: Option<usize>,
        #[arg(long)]
        seed_attack: Option<u64>,
    },
    /// Train and attack one run per hyperparameter value.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// alpha | alpha_ls | alpha_cp | dropout | early_stop
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Parallel runs (defaults to the number of CPUs).
        #[arg(long)]
        jobs: Option<usize>,
        /// Accuracy slack in percentage points for the post-hoc selection.
        #[arg(long, default_value_t = 0.0)]
        acc_tolerance: f64,
    },
    /// Loss statistics, Gaussian bounds and cross-run correlation.
    Analyze {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value_t = 30)]
        bins: usize,
        /// Skip the cross-run correlation (allows a single run).
        #[arg(long)]
        no_correlation: bool,
        /// Output file (defaults to stdout).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Dump posterior scores on a grid for a two-feature model.
    Boundary {
        run: PathBuf,
        /// `lo,hi`; defaults to the padded data range.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        x_range: Option<(f64, f64)>,
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        y_range: Option<(f64, f64)>,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Output CSV (defaults to `<run>/boundary.csv`).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print the config file schema with default values.
    Schema,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [lo, hi] => Ok((
            lo.trim().parse().map_err(|e| format!("{e}"))?,
            hi.trim().parse().map_err(|e| format!("{e}"))?,
        )),
        _ => Err(format!("expected `lo,hi`, got `{s}`")),
    }
}

fn execute(cmd: Command) -> relaxlab::Result<()> {
    match cmd {
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let summary = run_train(&cfg)?;
            if let Some(last) = summary.trace.last() {
                println!(
                    "epoch {}: train loss {:.4} (var {:.4}), test loss {:.4}, acc {:.2}/{:.2}",
                    last.epoch,
                    last.train_loss_mean,
                    last.train_loss_var,
                    last.test_loss_mean,
                    last.train_acc1,
                    last.test_acc1
                );
            }
            println!("run written to {}", summary.dir.display());
        }
        Command::Attack {
            run,
            attacks,
            adaptive,
            epoch,
            seed_attack,
        } => {
            let list = attacks.as_deref().map(AttackKind::parse_list).transpose()?;
            let (path, results) = cmd_attack(&run, list.as_deref(), adaptive, epoch, seed_attack)?;
            for r in &results {
                println!(
                    "{:<10} auc {:.4}  acc {:.4}{}",
                    r.attack.name(),
                    r.target_auc,
                    r.target_accuracy,
                    if r.degenerate { "  (degenerate threshold)" } else { "" }
                );
            }
            println!("report written to {}", path.display());
        }
        Command::Sweep {
            config,
            param,
            values,
            jobs,
            acc_tolerance,
        } => {
            let cfg = config.resolve()?;
            let param: SweepParam = param.parse()?;
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let outcome = run_sweep(&cfg, param, &values, jobs, acc_tolerance)?;
            println!("{} rows written to {}", outcome.rows.len(), outcome.dir.join(SWEEP_CSV).display());
            if let Some(sel) = &outcome.selection {
                match sel.selected_value {
                    Some(v) => println!("selected {} = {v} (mean attack AUC {:.4})", sel.param, sel.mean_attack_auc.unwrap_or(f64::NAN)),
                    None => println!("no value keeps test accuracy at the reference level"),
                }
            }
            if !outcome.failed_values.is_empty() {
                return Err(Error::Training(format!("runs failed for values {:?}", outcome.failed_values)));
            }
        }
        Command::Analyze {
            runs,
            bins,
            no_correlation,
            out,
        } => {
            let report = cmd_analyze(&runs, bins, !no_correlation)?;
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(path) => fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
        }
        Command::Boundary {
            run,
            x_range,
            y_range,
            steps,
            out,
        } => {
            let run = Run::open(&run)?;
            let (dx, dy) = data_extent(&run.dataset.features);
            let grid = GridSpec {
                x_range: x_range.unwrap_or(dx),
                y_range: y_range.unwrap_or(dy),
                steps,
            };
            let g = boundary_grid(&run.model, &grid)?;
            let path = out.unwrap_or_else(|| run.dir.join("boundary.csv"));
            fs::write(&path, g.to_csv())?;
            println!(
                "{} grid points, {:.1}% with top posterior below 0.9; written to {}",
                g.argmax.len(),
                100.0 * g.low_confidence_fraction(0.9),
                path.display()
            );
        }
        Command::Schema => {
            let defaults = ExperimentConfig::default().to_text();
            for ((key, doc), line) in SCHEMA.iter().zip(defaults.lines().skip(1)) {
                println!("# {key}: {doc}\n{line}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { EXIT_OK as u8 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
