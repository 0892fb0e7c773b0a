//! Training loop, evaluation and metric export.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::data::{
    make_batches, split_train_test, stratified_split, Dataset, SplitResult, NUM_CLASSES,
};
use crate::error::{Error, Result};
use crate::metrics::{cross_entropy, cross_entropy_grad, MetricsReport};
use crate::model::{BnConfig, Checkpoint, LayerSpec, Model, ModelSpec};
use crate::optim::{AdamConfig, AdamState, PlateauScheduler, DEFAULT_MIN_DELTA, DEFAULT_PATIENCE};
use crate::rng::{SeededRng, Stream};
use crate::tensor::Tensor;

/// Samples per forward pass during evaluation.
pub const EVAL_BATCH: usize = 256;

pub const CSV_HEADER: &str = "epoch,train_loss,train_acc,val_loss,test_acc,test_f1,lr,seconds";

/// Where the plateau scheduler takes its loss from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValidationSource {
    /// Stratified hold-out of this fraction of the training split.
    FromTrain(f64),
    /// The test split itself.
    Test,
}

/// Whether epoch records carry wall-clock durations. `Omitted` writes zero,
/// which makes metric logs byte-comparable across runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    WallClock,
    Omitted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Overrides every dropout rate in the spec when set.
    pub dropout: Option<f64>,
    pub seed: u64,
    pub train_fraction: f64,
    pub validation: ValidationSource,
    pub patience: usize,
    pub min_delta: f64,
    pub min_lr: f64,
    pub bn: BnConfig,
    pub timing: Timing,
    /// Checkpoints, `metrics.csv` and `curve.svg` are written here when set.
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 128,
            adam: AdamConfig::default(),
            dropout: None,
            seed: 0,
            train_fraction: 0.8,
            validation: ValidationSource::FromTrain(0.1),
            patience: DEFAULT_PATIENCE,
            min_delta: DEFAULT_MIN_DELTA,
            min_lr: 0.0,
            bn: BnConfig::default(),
            timing: Timing::WallClock,
            out_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid(format!(
                "batch size must be at least 2 for batch normalization, got {}",
                self.batch_size
            )));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.adam.lr
            )));
        }
        if let Some(rate) = self.dropout {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::invalid(format!(
                    "dropout rate must lie in [0, 1), got {rate}"
                )));
            }
        }
        if let ValidationSource::FromTrain(f) = self.validation {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid(format!(
                    "validation fraction must lie in (0, 1), got {f}"
                )));
            }
        }
        Ok(())
    }
}

/// One completed epoch. Accuracies are percentages; `test_f1` is support-weighted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub test_acc: f64,
    pub test_f1: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Lowest validation loss seen.
    pub best: Checkpoint,
    /// State after the final epoch.
    pub last: Checkpoint,
    pub records: Vec<EpochRecord>,
    pub split: SplitResult,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl TrainOutcome {
    pub fn minutes(&self) -> f64 {
        self.records.iter().map(|r| r.seconds).sum::<f64>() / 60.0
    }
}

fn with_dropout(spec: &ModelSpec, rate: f64) -> ModelSpec {
    let layers = spec
        .layers
        .iter()
        .map(|l| match l {
            LayerSpec::Dropout { .. } => LayerSpec::Dropout { rate },
            other => *other,
        })
        .collect();
    ModelSpec::new(spec.name.clone(), spec.input_shape, layers)
}

/// Eval-mode logits for the listed samples, `EVAL_BATCH` at a time.
fn eval_logits(
    model: &Model<f32>,
    ds: &Dataset,
    indices: &[usize],
) -> Result<(Tensor<f32>, Vec<usize>)> {
    let mut data = Vec::with_capacity(indices.len() * NUM_CLASSES);
    let mut labels = Vec::with_capacity(indices.len());
    let mut classes = 0;
    for chunk in indices.chunks(EVAL_BATCH) {
        let (x, y) = ds.batch::<f32>(chunk)?;
        let logits = model.forward_eval(&x)?;
        classes = logits.shape()[1];
        data.extend_from_slice(logits.data());
        labels.extend(y);
    }
    Ok((Tensor::from_vec(&[indices.len(), classes], data)?, labels))
}

/// Metrics for `model` over the listed samples.
pub fn evaluate_indices(
    model: &Model<f32>,
    ds: &Dataset,
    indices: &[usize],
) -> Result<MetricsReport> {
    if indices.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty dataset".into()));
    }
    let (logits, labels) = eval_logits(model, ds, indices)?;
    if !logits.all_finite() {
        return Err(Error::Numerical("model produced non-finite scores".into()));
    }
    MetricsReport::from_logits(&logits, &labels)
}

/// Eval-mode metrics of a checkpoint over every sample of `ds`.
pub fn evaluate(checkpoint: &Checkpoint, ds: &Dataset) -> Result<MetricsReport> {
    let model = Model::new(checkpoint.spec.clone(), checkpoint.params.clone())?;
    let all: Vec<usize> = (0..ds.len()).collect();
    evaluate_indices(&model, ds, &all)
}

/// Batches for one epoch. A trailing single sample joins the previous batch,
/// since batch statistics are undefined for one sample.
fn epoch_batches(
    train: &[usize],
    batch_size: usize,
    rng: &mut SeededRng,
) -> Result<Vec<Vec<usize>>> {
    let mut batches = make_batches(train, batch_size, rng)?;
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        let tail = batches.pop().expect("non-empty");
        batches.last_mut().expect("non-empty").extend(tail);
    }
    Ok(batches)
}

fn io_write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// [`train_with`] without a progress callback.
pub fn train(config: &TrainConfig, spec: &ModelSpec, ds: &Dataset) -> Result<TrainOutcome> {
    train_with(config, spec, ds, |_| {})
}

/// Full protocol: stratified split, seeded mini-batch Adam, per-epoch
/// evaluation, plateau scheduling on validation loss and best-loss
/// checkpointing. `on_epoch` sees each record as it is produced.
///
/// A non-finite training loss aborts with [`Error::Numerical`]; files already
/// written to `out_dir` (including the best checkpoint) are left in place.
pub fn train_with(
    config: &TrainConfig,
    spec: &ModelSpec,
    ds: &Dataset,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    let spec = match config.dropout {
        Some(rate) => with_dropout(spec, rate),
        None => spec.clone(),
    };
    spec.validate_classifier(NUM_CLASSES)?;
    if spec.input_shape != [32, 32, 3] {
        return Err(Error::invalid(format!(
            "model `{}` takes {:?} input but patches are 32x32x3",
            spec.name, spec.input_shape
        )));
    }

    let split = split_train_test(ds, config.train_fraction, config.seed)?;
    let (train_idx, val_idx) = match config.validation {
        ValidationSource::Test => (split.train.clone(), split.test.clone()),
        ValidationSource::FromTrain(f) => {
            let mut rng = SeededRng::stream(config.seed, Stream::Validation);
            stratified_split(&split.train, ds.labels(), 1.0 - f, &mut rng)?
        }
    };
    if train_idx.len() < 2 {
        return Err(Error::Data(format!(
            "only {} training samples after splitting",
            train_idx.len()
        )));
    }

    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }

    let mut model = Model::<f32>::init(
        spec.clone(),
        &mut SeededRng::stream(config.seed, Stream::Init),
        config.bn,
    )?;
    let mut adam = AdamState::new(config.adam.clone(), model.params.learnable())?;
    let mut scheduler = PlateauScheduler::new(
        config.adam.lr,
        config.patience,
        config.min_delta,
        config.min_lr,
    )?;
    let mut shuffle_rng = SeededRng::stream(config.seed, Stream::Shuffle);
    let mut dropout_rng = SeededRng::stream(config.seed, Stream::Dropout);

    let snapshot = |model: &Model<f32>, adam: &AdamState<f32>, epoch: usize| Checkpoint {
        spec: spec.clone(),
        params: model.params.clone(),
        optimizer: Some(adam.clone()),
        epoch: epoch as u32,
        seed: config.seed,
    };
    let mut best = snapshot(&model, &adam, 0);
    let mut best_loss = f64::INFINITY;
    if let Some(dir) = &config.out_dir {
        best.save(dir.join("best.rcck"))?;
    }
    let mut records = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        for (b, batch) in epoch_batches(&train_idx, config.batch_size, &mut shuffle_rng)?
            .iter()
            .enumerate()
        {
            let (x, y) = ds.batch::<f32>(batch)?;
            let (logits, cache) = model.forward_train(&x, &mut dropout_rng)?;
            let loss = cross_entropy(&logits, &y)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "training loss became {loss} in epoch {epoch}, batch {}; last good checkpoint is from epoch {}",
                    b + 1,
                    best.epoch
                )));
            }
            loss_sum += loss * batch.len() as f64;
            let grads = model.backward(&cache, &cross_entropy_grad(&logits, &y)?)?;
            let grad_refs: Vec<&Tensor<f32>> = grads.tensors().collect();
            adam.step(&mut model.params.learnable_mut(), &grad_refs)?;
        }
        let applied_lr = adam.effective_lr(adam.t);

        let train_report = evaluate_indices(&model, ds, &train_idx)?;
        let val_loss = if config.validation == ValidationSource::Test {
            None
        } else {
            Some(evaluate_indices(&model, ds, &val_idx)?.loss)
        };
        let test_report = evaluate_indices(&model, ds, &split.test)?;
        let val_loss = val_loss.unwrap_or(test_report.loss);

        adam.lr = scheduler.observe(val_loss)?.lr;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_idx.len() as f64,
            train_acc: train_report.accuracy,
            val_loss,
            test_acc: test_report.accuracy,
            test_f1: test_report.weighted_f1,
            lr: applied_lr,
            seconds: match config.timing {
                Timing::WallClock => started.elapsed().as_secs_f64(),
                Timing::Omitted => 0.0,
            },
        };

        if val_loss < best_loss {
            best_loss = val_loss;
            best = snapshot(&model, &adam, epoch);
            if let Some(dir) = &config.out_dir {
                best.save(dir.join("best.rcck"))?;
            }
        }
        on_epoch(&record);
        records.push(record);
        if let Some(dir) = &config.out_dir {
            export_metrics_csv(&records, dir.join("metrics.csv"))?;
        }
    }

    let last = snapshot(&model, &adam, config.epochs);
    if let Some(dir) = &config.out_dir {
        last.save(dir.join("last.rcck"))?;
        export_curve_svg(&records, dir.join("curve.svg"))?;
    }
    Ok(TrainOutcome {
        best,
        last,
        records,
        split,
        train: train_idx,
        validation: val_idx,
    })
}

pub fn metrics_csv(records: &[EpochRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::invalid("no epoch records to export"));
    }
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.test_acc, r.test_f1, r.lr, r.seconds
        )
        .expect("writing to a String");
    }
    Ok(out)
}

pub fn export_metrics_csv(records: &[EpochRecord], path: impl AsRef<Path>) -> Result<()> {
    io_write(path.as_ref(), metrics_csv(records)?.as_bytes())
}

/// Train and test accuracy against epoch, one `<polyline>` each.
pub fn curve_svg(records: &[EpochRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::invalid("no epoch records to plot"));
    }
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let last_epoch = records.last().map_or(1, |r| r.epoch).max(2) as f64;
    let x = |epoch: usize| M + (epoch as f64 - 1.0) / (last_epoch - 1.0) * (W - 2.0 * M);
    let y = |acc: f64| H - M - acc.clamp(0.0, 100.0) / 100.0 * (H - 2.0 * M);
    let points = |f: fn(&EpochRecord) -> f64| {
        records
            .iter()
            .map(|r| format!("{:.2},{:.2}", x(r.epoch), y(f(r))))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{M}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{M}" y1="{M}" x2="{M}" y2="{b}" stroke="black"/>"#,
        b = H - M,
        r = W - M
    );
    for pct in [0, 25, 50, 75, 100] {
        let _ = writeln!(
            svg,
            r#"<text x="{tx}" y="{ty:.2}" font-size="11" text-anchor="end">{pct}</text>"#,
            tx = M - 6.0,
            ty = y(pct as f64) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{cx}" y="{ty}" font-size="12" text-anchor="middle">epoch (1 to {e})</text>"#,
        cx = W / 2.0,
        ty = H - 15.0,
        e = records.last().map_or(1, |r| r.epoch)
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{cy}" font-size="12" transform="rotate(-90 15 {cy})" text-anchor="middle">accuracy (%)</text>"#,
        cy = H / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<polyline id="train_acc" fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
        points(|r| r.train_acc)
    );
    let _ = writeln!(
        svg,
        r#"<polyline id="test_acc" fill="none" stroke="firebrick" stroke-width="1.5" points="{}"/>"#,
        points(|r| r.test_acc)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{lx}" y="{M}" font-size="12" fill="steelblue">train</text>"#,
        lx = W - M - 80.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{lx}" y="{ly}" font-size="12" fill="firebrick">test</text>"#,
        lx = W - M - 80.0,
        ly = M + 16.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn export_curve_svg(records: &[EpochRecord], path: impl AsRef<Path>) -> Result<()> {
    io_write(path.as_ref(), curve_svg(records)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(epoch: usize, acc: f64) -> EpochRecord {
        EpochRecord {
            epoch,
            train_loss: 1.0 / epoch as f64,
            train_acc: acc + 1.0,
            val_loss: 0.5,
            test_acc: acc,
            test_f1: acc / 100.0,
            lr: 6e-5,
            seconds: 0.0,
        }
    }

    #[test]
    fn config_guards() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig {
            epochs: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            batch_size: 1,
            ..ok.clone()
        }
        .validate()
        .is_err());
        let mut bad_lr = ok.clone();
        bad_lr.adam.lr = 0.0;
        assert!(bad_lr.validate().is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let csv = metrics_csv(&[record(1, 30.0), record(2, 40.0), record(3, 50.5)]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[3],
            "3,0.3333333333333333,51.5,0.5,50.5,0.505,0.00006,0"
        );
        assert!(metrics_csv(&[]).is_err());
    }

    #[test]
    fn svg_single_epoch_has_finite_coordinates() {
        let svg = curve_svg(&[record(1, 10.0)]).unwrap();
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn tail_of_one_is_folded() {
        let idx: Vec<usize> = (0..9).collect();
        let b = epoch_batches(&idx, 4, &mut SeededRng::new(0)).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 5]);
    }

    #[test]
    fn dropout_override_touches_only_dropout() {
        let spec = crate::model::build_rccnet();
        let changed = with_dropout(&spec, 0.25);
        for (a, b) in spec.layers.iter().zip(&changed.layers) {
            match (a, b) {
                (LayerSpec::Dropout { .. }, LayerSpec::Dropout { rate }) => assert_eq!(*rate, 0.25),
                _ => assert_eq!(a, b),
            }
        }
    }
}
