mod config;
mod exit;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use radcom::dataset::{generate_dataset, DatasetContainer, DatasetKind, Splits, WaveformKey};
use radcom::eval::{evaluate, EvalReport, OraclePredictor, Predictor};
use radcom::experiment::{sweep_density, sweep_task_weights, EvalSet, SweepRun};
use radcom::nn::Checkpoint;
use radcom::report::{self, Series};
use radcom::train::{train, transfer_train, TrainHistory};
use radcom::MtlModel32;

use crate::config::ExperimentConfig;
use crate::exit::{Data, Usage};

#[derive(Parser)]
#[command(name = "radcom", version, about = "Joint radar and communication signal classification workbench")]
struct Cli {
    /// Repeat for more log output (-v debug, -vv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a dataset container.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Dataset kind, overriding the config (RadComAWGN or RadComDynamic).
        #[arg(long)]
        kind: Option<DatasetKind>,
        /// Frames per (pair, SNR) stratum, overriding the config.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Train a model from random initialization and evaluate it on the test split.
    Train(Common),
    /// Evaluate a checkpoint on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Score the true labels instead of a model.
        #[arg(long, hide = true)]
        oracle: bool,
    },
    /// Train one model per task-weight grid point.
    SweepWeights(Common),
    /// Train one model per configured architecture.
    SweepDensity(Common),
    /// Warm-start training from a checkpoint.
    Transfer(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset container to read (written by `generate`).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Model checkpoint to evaluate or warm-start from.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for `generate`, training seed for the other commands.
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    /// Refuses up front when any of `names` exists and `--force` is absent.
    fn claim(dir: PathBuf, force: bool, names: &[&str]) -> Result<Self> {
        if !force {
            for n in names {
                let p = dir.join(n);
                if p.exists() {
                    bail!(Usage(format!("{} exists; pass --force to overwrite", p.display())));
                }
            }
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs { dir })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        info!("wrote {}", p.display());
        Ok(())
    }

    fn create(&self, name: &str) -> Result<fs::File> {
        let p = self.path(name);
        info!("writing {}", p.display());
        fs::File::create(&p).with_context(|| format!("creating {}", p.display()))
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| {
            if e.is::<Usage>() {
                e
            } else {
                anyhow::Error::new(Usage(format!("{e:#}")))
            }
        })?,
        None => ExperimentConfig::default(),
    };
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &ExperimentConfig, fallback: &str) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(fallback))
}

fn load_dataset(common: &Common, cfg: &mut ExperimentConfig) -> Result<(DatasetContainer, Splits)> {
    let path = common.dataset.clone().or_else(|| cfg.dataset_path.clone());
    let data = match &path {
        Some(p) => {
            info!("loading {}", p.display());
            let d = DatasetContainer::load(p).map_err(|e| Data(format!("cannot read container {}: {e}", p.display())))?;
            cfg.dataset_path = Some(p.clone());
            d
        }
        None => {
            info!(
                "no container given; generating {} with {} frames per stratum",
                cfg.dataset.kind.name(),
                cfg.dataset.frames_per_stratum
            );
            generate_dataset(&cfg.dataset, &cfg.signals()?)?
        }
    };
    let splits = data
        .splits()
        .cloned()
        .ok_or_else(|| Data("container has no split manifest".into()))?;
    Ok((data, splits))
}

fn require_snr(keys: &[WaveformKey], snr: i32) -> Result<()> {
    if !keys.iter().any(|k| k.snr.db() == snr) {
        bail!(Data(format!("test split has no records at {snr} dB")));
    }
    Ok(())
}

fn write_eval(out: &Outputs, r: &EvalReport, title: &str) -> Result<()> {
    report::write_accuracy_csv(out.create("accuracy.csv")?, r)?;
    out.write("accuracy.svg", report::accuracy_chart_svg(&format!("{title}: accuracy vs SNR"), r))?;
    let at = r.confusion_snr.map_or("all SNRs".to_string(), |s| format!("{s} dB"));
    let mods = report::modulation_names();
    let sigs = report::signal_names();
    report::write_confusion_csv(out.create("confusion_modulation.csv")?, &mods, &r.mod_confusion)?;
    report::write_confusion_csv(out.create("confusion_signal.csv")?, &sigs, &r.sig_confusion)?;
    out.write(
        "confusion_modulation.svg",
        report::heatmap_svg(&format!("Modulation confusion ({at})"), &mods, &r.mod_confusion),
    )?;
    out.write(
        "confusion_signal.svg",
        report::heatmap_svg(&format!("Signal confusion ({at})"), &sigs, &r.sig_confusion),
    )?;
    let o = r.overall();
    println!(
        "test accuracy: modulation {:.4}, signal {:.4}, both {:.4} over {} records",
        o.mod_acc(),
        o.sig_acc(),
        o.both_acc(),
        o.n
    );
    Ok(())
}

fn write_history(out: &Outputs, h: &TrainHistory) -> Result<()> {
    report::write_history_csv(out.create("history.csv")?, h)?;
    let curve = |f: fn(&radcom::train::EpochRecord) -> f64| h.epochs.iter().map(|e| (e.epoch as f64, f(e))).collect();
    out.write(
        "loss.svg",
        report::line_chart_svg(
            "Training curves",
            "epoch",
            "total loss",
            &[
                Series {
                    name: "train".into(),
                    points: curve(|e| e.train.total),
                },
                Series {
                    name: "validation".into(),
                    points: curve(|e| e.val.total),
                },
            ],
            None,
        ),
    )?;
    println!(
        "trained {} epochs, best epoch {}{}",
        h.epochs.len(),
        h.best_epoch,
        if h.stopped_early { " (early stop)" } else { "" }
    );
    Ok(())
}

const TRAIN_OUTPUTS: [&str; 11] = [
    "experiment.toml",
    "model.rcmw",
    "history.csv",
    "loss.svg",
    "accuracy.csv",
    "accuracy.svg",
    "confusion_modulation.csv",
    "confusion_signal.csv",
    "confusion_modulation.svg",
    "confusion_signal.svg",
    "summary.txt",
];

fn cmd_generate(common: &Common, kind: Option<DatasetKind>, frames: Option<usize>) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(k) = kind {
        cfg.dataset.kind = k;
    }
    if let Some(f) = frames {
        cfg.dataset.frames_per_stratum = f;
    }
    if let Some(s) = common.seed {
        cfg.dataset.master_seed = s;
    }
    cfg.validate()?;
    let file = match &common.dataset {
        Some(p) => p.clone(),
        None => out_dir(common, &cfg, "generate").join("dataset.rcds"),
    };
    let dir = file.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
    let file_name = file.file_name().and_then(|n| n.to_str()).context("dataset path has no file name")?.to_string();
    let out = Outputs::claim(dir, common.force, &[&file_name, "experiment.toml"])?;
    let signals = cfg.signals()?;
    let data = generate_dataset(&cfg.dataset, &signals)?;
    data.save(out.path(&file_name))?;
    cfg.dataset_path = Some(out.path(&file_name));
    out.write("experiment.toml", cfg.to_toml()?)?;

    println!("{}: {} records -> {}", cfg.dataset.kind.name(), data.len(), out.path(&file_name).display());
    let strata = data.strata();
    let snrs: Vec<i32> = cfg.dataset.snr_levels()?.iter().map(|s| s.db()).collect();
    print!("{:<22}", "pair \\ SNR (dB)");
    for s in &snrs {
        print!("{s:>5}");
    }
    println!();
    for pair in cfg.dataset.pairs() {
        print!("{:<22}", pair.to_string());
        for s in cfg.dataset.snr_levels()? {
            print!("{:>5}", strata.get(&(pair, s)).copied().unwrap_or(0));
        }
        println!();
    }
    if let Some(sp) = data.splits() {
        println!("splits: train {}, val {}, test {}", sp.train.len(), sp.val.len(), sp.test.len());
    }
    Ok(())
}

fn cmd_train(common: &Common) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(s) = common.seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    let out = Outputs::claim(out_dir(common, &cfg, "train"), common.force, &TRAIN_OUTPUTS)?;
    let (data, splits) = load_dataset(common, &mut cfg)?;
    if let Some(s) = cfg.evaluate.confusion_snr {
        require_snr(&splits.test, s)?;
    }
    out.write("experiment.toml", cfg.to_toml()?)?;
    let mut model = MtlModel32::build(cfg.model, cfg.train.seed)?;
    info!("{}: {} parameters", cfg.model.label(), model.param_count());
    let h = train(&mut model, &data, &splits, &cfg.train)?;
    model.save(out.path("model.rcmw"))?;
    write_history(&out, &h)?;
    let r = evaluate(&model, &data, &splits.test, cfg.evaluate.confusion_snr)?;
    write_eval(&out, &r, &cfg.model.label())?;
    write_summary(&out, &model, &h, &r)
}

fn write_summary(out: &Outputs, model: &MtlModel32, h: &TrainHistory, r: &EvalReport) -> Result<()> {
    let o = r.overall();
    let best = h.best().map_or(f64::NAN, |e| e.val.total);
    out.write(
        "summary.txt",
        format!(
            "model {}\nparameters {}\nepochs {}\nbest_epoch {}\nbest_val_total {best}\ntest_records {}\ntest_mod_acc {}\ntest_sig_acc {}\ntest_both_acc {}\n",
            model.config().label(),
            model.param_count(),
            h.epochs.len(),
            h.best_epoch,
            o.n,
            o.mod_acc(),
            o.sig_acc(),
            o.both_acc()
        ),
    )
}

fn cmd_evaluate(common: &Common, oracle: bool) -> Result<()> {
    let mut cfg = load_config(common)?;
    cfg.validate()?;
    let names = [
        "experiment.toml",
        "accuracy.csv",
        "accuracy.svg",
        "confusion_modulation.csv",
        "confusion_signal.csv",
        "confusion_modulation.svg",
        "confusion_signal.svg",
    ];
    let out = Outputs::claim(out_dir(common, &cfg, "evaluate"), common.force, &names)?;
    let (predictor, title): (Box<dyn Predictor>, String) = if oracle {
        (Box::new(OraclePredictor), "oracle".into())
    } else {
        let p = common
            .checkpoint
            .as_ref()
            .ok_or_else(|| Usage("evaluate needs --checkpoint".into()))?;
        let m = MtlModel32::load(p).map_err(|e| Data(format!("cannot load checkpoint {}: {e}", p.display())))?;
        cfg.model = *m.config();
        let label = m.config().label();
        (Box::new(m), label)
    };
    let (data, splits) = load_dataset(common, &mut cfg)?;
    if let Some(s) = cfg.evaluate.confusion_snr {
        require_snr(&splits.test, s)?;
    }
    out.write("experiment.toml", cfg.to_toml()?)?;
    let r = evaluate(predictor.as_ref(), &data, &splits.test, cfg.evaluate.confusion_snr)?;
    write_eval(&out, &r, &title)
}

fn cmd_sweep_weights(common: &Common) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(s) = common.seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    let names = ["experiment.toml", "sweep_weights.csv", "sweep_weights_history.csv", "sweep_weights.svg"];
    let out = Outputs::claim(out_dir(common, &cfg, "sweep-weights"), common.force, &names)?;
    let (data, splits) = load_dataset(common, &mut cfg)?;
    let snr = cfg.sweep.weight_snr;
    require_snr(&splits.test, snr)?;
    out.write("experiment.toml", cfg.to_toml()?)?;
    let eval = EvalSet {
        data: &data,
        keys: &splits.test,
    };
    let runs = sweep_task_weights::<f32>(&data, &splits, &cfg.model, &cfg.train, &cfg.sweep.weight_grid, eval)?;
    report::write_sweep_csv(out.create("sweep_weights.csv")?, &runs, Some(snr))?;
    report::write_sweep_history_csv(out.create("sweep_weights_history.csv")?, &runs)?;
    let pts = |f: fn(&radcom::eval::Counts) -> f64| -> Vec<(f64, f64)> {
        runs.iter()
            .filter_map(|r| r.report.at(snr).map(|c| (r.weights.w_s(), f(c))))
            .collect()
    };
    out.write(
        "sweep_weights.svg",
        report::line_chart_svg(
            &format!("Accuracy at {snr} dB vs signal-task weight"),
            "w_s (w_m = 1 - w_s)",
            "accuracy",
            &[
                Series {
                    name: "modulation".into(),
                    points: pts(|c| c.mod_acc()),
                },
                Series {
                    name: "signal".into(),
                    points: pts(|c| c.sig_acc()),
                },
            ],
            Some((0.0, 1.0)),
        ),
    )?;
    for r in &runs {
        if let Some(c) = r.report.at(snr) {
            println!("{}: modulation {:.4}, signal {:.4}", r.label, c.mod_acc(), c.sig_acc());
        }
    }
    Ok(())
}

fn density_chart(runs: &[SweepRun], title: &str, f: fn(&radcom::eval::Counts) -> f64) -> String {
    let series: Vec<Series> = runs
        .iter()
        .map(|r| Series {
            name: r.label.clone(),
            points: r.report.per_snr.iter().map(|(s, c)| (*s as f64, f(c))).collect(),
        })
        .collect();
    report::line_chart_svg(title, "SNR (dB)", "accuracy", &series, Some((0.0, 1.0)))
}

fn cmd_sweep_density(common: &Common) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(s) = common.seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    if cfg.sweep.density.is_empty() {
        bail!(Usage("sweep.density lists no model configs".into()));
    }
    let names = [
        "experiment.toml",
        "density.csv",
        "density_history.csv",
        "density_modulation.svg",
        "density_signal.svg",
        "density_val_loss.svg",
    ];
    let out = Outputs::claim(out_dir(common, &cfg, "sweep-density"), common.force, &names)?;
    let (data, splits) = load_dataset(common, &mut cfg)?;
    out.write("experiment.toml", cfg.to_toml()?)?;
    let eval = EvalSet {
        data: &data,
        keys: &splits.test,
    };
    let runs = sweep_density::<f32>(&data, &splits, &cfg.sweep.density, &cfg.train, eval)?;
    report::write_sweep_csv(out.create("density.csv")?, &runs, None)?;
    report::write_sweep_history_csv(out.create("density_history.csv")?, &runs)?;
    out.write("density_modulation.svg", density_chart(&runs, "Modulation accuracy by architecture", |c| c.mod_acc()))?;
    out.write("density_signal.svg", density_chart(&runs, "Signal accuracy by architecture", |c| c.sig_acc()))?;
    let loss: Vec<Series> = runs
        .iter()
        .map(|r| Series {
            name: r.label.clone(),
            points: r.history.epochs.iter().map(|e| (e.epoch as f64, e.val.total)).collect(),
        })
        .collect();
    out.write(
        "density_val_loss.svg",
        report::line_chart_svg("Validation loss by architecture", "epoch", "total loss", &loss, None),
    )?;
    for r in &runs {
        let o = r.report.overall();
        println!(
            "{}: {} parameters, {} epochs, test modulation {:.4}, signal {:.4}",
            r.label,
            r.param_count,
            r.history.epochs.len(),
            o.mod_acc(),
            o.sig_acc()
        );
    }
    Ok(())
}

fn cmd_transfer(common: &Common) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(s) = common.seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    let ck_path = common
        .checkpoint
        .as_ref()
        .ok_or_else(|| Usage("transfer needs --checkpoint".into()))?;
    let out = Outputs::claim(out_dir(common, &cfg, "transfer"), common.force, &TRAIN_OUTPUTS)?;
    let ck = Checkpoint::load(ck_path).map_err(|e| Data(format!("cannot load checkpoint {}: {e}", ck_path.display())))?;
    let (data, splits) = load_dataset(common, &mut cfg)?;
    if let Some(s) = cfg.evaluate.confusion_snr {
        require_snr(&splits.test, s)?;
    }
    out.write("experiment.toml", cfg.to_toml()?)?;
    let mut model = MtlModel32::build(cfg.model, cfg.train.seed)?;
    let h = transfer_train(&mut model, &ck, &data, &splits, &cfg.train)?;
    model.save(out.path("model.rcmw"))?;
    write_history(&out, &h)?;
    let r = evaluate(&model, &data, &splits.test, cfg.evaluate.confusion_snr)?;
    write_eval(&out, &r, &format!("{} (warm start)", cfg.model.label()))?;
    write_summary(&out, &model, &h, &r)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common, kind, frames } => cmd_generate(&common, kind, frames),
        Command::Train(c) => cmd_train(&c),
        Command::Evaluate { common, oracle } => cmd_evaluate(&common, oracle),
        Command::SweepWeights(c) => cmd_sweep_weights(&c),
        Command::SweepDensity(c) => cmd_sweep_density(&c),
        Command::Transfer(c) => cmd_transfer(&c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(exit::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit::code_for(&e)
        }
    }
}
