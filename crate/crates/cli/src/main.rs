use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rccnet::data::{self, Dataset, CLASS_NAMES};
use rccnet::metrics::softmax;
use rccnet::model::{load_checkpoint, parse_model_spec, zoo, LayerSpec, Model, ModelSpec};
use rccnet::optim::DecayMode;
use rccnet::train::{self, Timing, TrainConfig, ValidationSource};
use rccnet::{Error, ErrorKind, MetricsReport, Tensor};

#[derive(Parser)]
#[command(
    name = "rccnet",
    version,
    about = "Train and evaluate nuclei patch classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the shape trace and parameter table of a model.
    Summary {
        /// Spec file, or one of: rccnet, softmax_cnn_in27, softmax_cnn.
        #[arg(long, default_value = "rccnet")]
        spec: String,
    },
    /// Train a model and write checkpoints and metric logs.
    Train {
        /// `.rccd` file or class-folder directory.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "rccnet")]
        spec: String,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long, default_value_t = 128)]
        batch: usize,
        #[arg(long, default_value_t = rccnet::optim::DEFAULT_LR)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Drive the learning-rate schedule with the test split instead of a held-out part of training.
        #[arg(long)]
        val_from_test: bool,
        #[arg(long, value_enum, default_value_t = DecayArg::Lr)]
        decay_mode: DecayArg,
        /// Override every dropout rate in the spec.
        #[arg(long)]
        dropout: Option<f64>,
        /// Record 0 seconds per epoch so logs are byte-comparable across runs.
        #[arg(long)]
        no_timing: bool,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Classify one 32x32 RGB PNG.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: PathBuf,
    },
    /// Pack a class-folder PNG tree into a `.rccd` file.
    Convert {
        #[arg(long)]
        from_dir: PathBuf,
        #[arg(long)]
        to: PathBuf,
    },
    /// Write a synthetic four-class dataset.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        per_class: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DecayArg {
    Lr,
    L2,
}

fn load_spec(arg: &str) -> rccnet::Result<ModelSpec> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            context: format!("reading {}", path.display()),
            source: e,
        })?;
        parse_model_spec(&text)
    } else {
        zoo::builtin(arg)
    }
}

fn summary(spec: &ModelSpec) -> rccnet::Result<String> {
    let infos = spec.layer_infos()?;
    let mut out = String::new();
    let _ = writeln!(out, "model {}  input {}", spec.name, spec.input());
    let _ = writeln!(
        out,
        "{:>3}  {:<28} {:>12} {:>10}",
        "#", "layer", "output", "params"
    );
    for info in &infos {
        let _ = writeln!(
            out,
            "{:>3}  {:<28} {:>12} {:>10}",
            info.index,
            info.layer.to_string(),
            info.output.to_string(),
            info.parameters
        );
    }
    let bn: usize = infos
        .iter()
        .filter(|i| matches!(i.layer, LayerSpec::BatchNorm))
        .map(|i| i.parameters)
        .sum();
    let total: usize = infos.iter().map(|i| i.parameters).sum();
    let trace: Vec<String> = spec
        .feature_map_trace()?
        .iter()
        .map(ToString::to_string)
        .collect();
    let _ = writeln!(out, "feature maps: {}", trace.join(" -> "));
    let _ = writeln!(out, "batch-norm parameters: {bn}");
    let _ = writeln!(out, "total parameters: {total}");
    Ok(out)
}

fn report_text(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "samples      {}", report.samples);
    let _ = writeln!(out, "accuracy     {:.2} %", report.accuracy);
    let _ = writeln!(out, "weighted F1  {:.4}", report.weighted_f1);
    let _ = writeln!(out, "loss         {:.4}", report.loss);
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<14} {:>9} {:>7} {:>7} {:>8}",
        "class", "precision", "recall", "f1", "support"
    );
    for (name, s) in CLASS_NAMES.iter().zip(&report.per_class) {
        let _ = writeln!(
            out,
            "{name:<14} {:>9.4} {:>7.4} {:>7.4} {:>8}",
            s.precision, s.recall, s.f1, s.support
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "confusion (rows true, columns predicted)");
    let k = report.confusion.classes();
    for t in 0..k {
        let row: Vec<String> = (0..k)
            .map(|p| format!("{:>7}", report.confusion.get(t, p)))
            .collect();
        let _ = writeln!(
            out,
            "{:<14}{}",
            CLASS_NAMES.get(t).unwrap_or(&"?"),
            row.join("")
        );
    }
    out
}

fn run(command: Command) -> rccnet::Result<()> {
    match command {
        Command::Summary { spec } => {
            print!("{}", summary(&load_spec(&spec)?)?);
        }
        Command::Train {
            data,
            spec,
            epochs,
            batch,
            lr,
            seed,
            out,
            val_from_test,
            decay_mode,
            dropout,
            no_timing,
            quiet,
        } => {
            let spec = load_spec(&spec)?;
            let mut config = TrainConfig {
                epochs,
                batch_size: batch,
                dropout,
                seed,
                validation: if val_from_test {
                    ValidationSource::Test
                } else {
                    ValidationSource::FromTrain(0.1)
                },
                timing: if no_timing {
                    Timing::Omitted
                } else {
                    Timing::WallClock
                },
                out_dir: Some(out.clone()),
                ..TrainConfig::default()
            };
            config.adam.lr = lr;
            config.adam.decay_mode = match decay_mode {
                DecayArg::Lr => DecayMode::LearningRate,
                DecayArg::L2 => DecayMode::L2,
            };
            let ds = data::load_dataset(&data)?;
            if !quiet {
                let counts = ds.class_counts();
                eprintln!(
                    "loaded {} samples {:?} from {}",
                    ds.len(),
                    counts,
                    data.display()
                );
            }
            let outcome = train::train_with(&config, &spec, &ds, |r| {
                if !quiet {
                    println!(
                        "epoch {:>4}  loss {:.4}  train {:6.2}%  val_loss {:.4}  test {:6.2}%  f1 {:.4}  lr {:.3e}  {:.1}s",
                        r.epoch, r.train_loss, r.train_acc, r.val_loss, r.test_acc, r.test_f1, r.lr, r.seconds
                    );
                }
            })?;
            let last = outcome.records.last().expect("at least one epoch");
            println!(
                "done: {} train / {} validation / {} test samples, {:.3} min",
                outcome.train.len(),
                outcome.validation.len(),
                outcome.split.test.len(),
                outcome.minutes()
            );
            println!(
                "final test accuracy {:.2}%  weighted F1 {:.4}  overfitting gap {:.2}",
                last.test_acc,
                last.test_f1,
                rccnet::metrics::overfitting_gap(last.train_acc, last.test_acc)
            );
            println!(
                "best checkpoint (epoch {}): {}",
                outcome.best.epoch,
                out.join("best.rcck").display()
            );
            println!("last checkpoint: {}", out.join("last.rcck").display());
        }
        Command::Eval {
            checkpoint,
            data,
            json,
        } => {
            let ck = load_checkpoint(&checkpoint)?;
            let ds = data::load_dataset(&data)?;
            let report = train::evaluate(&ck, &ds)?;
            if json {
                let text = serde_json::to_string_pretty(&report)
                    .map_err(|e| Error::Numerical(format!("cannot encode report: {e}")))?;
                println!("{text}");
            } else {
                print!("{}", report_text(&report));
            }
        }
        Command::Predict { checkpoint, image } => {
            let ck = load_checkpoint(&checkpoint)?;
            let patch = data::read_png_patch(&image)?;
            let mut ds = Dataset::empty();
            ds.push(&patch, 0)?;
            let (x, _) = ds.batch::<f32>(&[0])?;
            let model = Model::new(ck.spec, ck.params)?;
            let probs: Tensor<f32> = softmax(&model.forward_eval(&x)?)?;
            let best = rccnet::metrics::predict(&probs)?[0];
            println!("{}", CLASS_NAMES[best]);
            for (name, p) in CLASS_NAMES.iter().zip(probs.data()) {
                println!("  {name:<14} {p:.4}");
            }
        }
        Command::Convert { from_dir, to } => {
            let ds = data::load_image_dir(&from_dir)?;
            data::write_binary(&to, &ds)?;
            println!(
                "wrote {} samples {:?} to {}",
                ds.len(),
                ds.class_counts(),
                to.display()
            );
        }
        Command::Synth {
            seed,
            per_class,
            out,
        } => {
            if per_class == 0 {
                return Err(Error::InvalidArgument(
                    "--per-class must be at least 1".into(),
                ));
            }
            let ds = data::synthetic_dataset(seed, per_class);
            data::write_binary(&out, &ds)?;
            println!("wrote {} samples to {}", ds.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            })
        }
    }
}
