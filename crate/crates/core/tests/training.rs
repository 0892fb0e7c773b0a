use std::fs;

use rccnet::data::{synthetic_dataset, Dataset};
use rccnet::metrics::cross_entropy;
use rccnet::model::{build_rccnet, BnConfig};
use rccnet::train::{
    evaluate, evaluate_indices, export_curve_svg, export_metrics_csv, train, Timing, TrainConfig,
    ValidationSource, CSV_HEADER,
};
use rccnet::{Checkpoint, ErrorKind, Model, SeededRng, Stream};

fn quick(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 1,
        batch_size: 16,
        seed,
        timing: Timing::Omitted,
        ..TrainConfig::default()
    }
}

#[test]
fn initial_loss_is_near_ln4() {
    let ds = synthetic_dataset(8, 32);
    let idx: Vec<usize> = (0..ds.len()).collect();
    let (x, y) = ds.batch::<f32>(&idx).unwrap();
    for seed in 0..5 {
        let mut model = Model::<f32>::init(
            build_rccnet(),
            &mut SeededRng::stream(seed, Stream::Init),
            BnConfig::default(),
        )
        .unwrap();
        let (logits, _) = model.forward_train(&x, &mut SeededRng::new(seed)).unwrap();
        let loss = cross_entropy(&logits, &y).unwrap();
        assert!((loss - 4f64.ln()).abs() < 0.15, "seed {seed}: {loss}");
    }
}

#[test]
fn one_epoch_beats_uniform_loss() {
    let ds = synthetic_dataset(3, 50);
    let out = train(&quick(3), &build_rccnet(), &ds).unwrap();
    let model = Model::new(out.last.spec.clone(), out.last.params.clone()).unwrap();
    let after = evaluate_indices(&model, &ds, &out.train).unwrap().loss;
    assert!(after < 4f64.ln(), "training loss after one epoch: {after}");
}

#[test]
fn untrained_model_is_near_chance() {
    let ds = synthetic_dataset(3, 250);
    let model = Model::<f32>::init(
        build_rccnet(),
        &mut SeededRng::stream(0, Stream::Init),
        BnConfig::default(),
    )
    .unwrap();
    let ck = Checkpoint {
        spec: model.spec,
        params: model.params,
        optimizer: None,
        epoch: 0,
        seed: 0,
    };
    let acc = evaluate(&ck, &ds).unwrap().accuracy;
    assert!((15.0..=35.0).contains(&acc), "{acc}");
    let err = evaluate(&ck, &Dataset::empty()).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn runs_are_reproducible_and_consistent() {
    let ds = synthetic_dataset(4, 30);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut outcomes = Vec::new();
    for dir in &dirs {
        let config = TrainConfig {
            epochs: 3,
            out_dir: Some(dir.path().to_path_buf()),
            ..quick(4)
        };
        outcomes.push(train(&config, &build_rccnet(), &ds).unwrap());
    }
    let csv = |i: usize| fs::read(dirs[i].path().join("metrics.csv")).unwrap();
    assert_eq!(csv(0), csv(1));
    assert_eq!(
        fs::read(dirs[0].path().join("last.rcck")).unwrap(),
        fs::read(dirs[1].path().join("last.rcck")).unwrap()
    );
    assert!(dirs[0].path().join("best.rcck").is_file());
    assert!(dirs[0].path().join("curve.svg").is_file());

    let out = &outcomes[0];
    assert_eq!(out.records.len(), 3);
    assert!(out
        .records
        .iter()
        .enumerate()
        .all(|(i, r)| r.epoch == i + 1));
    assert!(out.records.windows(2).all(|w| w[1].lr <= w[0].lr));

    // Train and validation partition the training split.
    let mut joined: Vec<usize> = out.train.iter().chain(&out.validation).copied().collect();
    joined.sort_unstable();
    assert_eq!(joined, out.split.train);

    let test = ds.subset(&out.split.test).unwrap();
    let report = evaluate(&out.last, &test).unwrap();
    let last = out.records.last().unwrap();
    assert_eq!(report.accuracy, last.test_acc);
    assert_eq!(report.weighted_f1, last.test_f1);

    let best = out
        .records
        .iter()
        .min_by(|a, b| a.val_loss.total_cmp(&b.val_loss))
        .unwrap();
    assert_eq!(out.best.epoch as usize, best.epoch);
}

#[test]
fn test_split_can_drive_the_schedule() {
    let ds = synthetic_dataset(5, 20);
    let config = TrainConfig {
        validation: ValidationSource::Test,
        ..quick(5)
    };
    let out = train(&config, &build_rccnet(), &ds).unwrap();
    assert_eq!(out.validation, out.split.test);
    assert_eq!(out.train, out.split.train);
    let test = ds.subset(&out.split.test).unwrap();
    assert_eq!(
        out.records[0].val_loss,
        evaluate(&out.last, &test).unwrap().loss
    );
}

#[test]
fn exploding_run_aborts_and_keeps_a_checkpoint() {
    let ds = synthetic_dataset(6, 20);
    let dir = tempfile::tempdir().unwrap();
    let mut config = TrainConfig {
        epochs: 3,
        out_dir: Some(dir.path().to_path_buf()),
        ..quick(6)
    };
    config.adam.lr = 1e37;
    let err = train(&config, &build_rccnet(), &ds).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Numerical, "{err}");
    let kept = Checkpoint::load(dir.path().join("best.rcck")).unwrap();
    assert!(kept.params.learnable().iter().all(|t| t.all_finite()));
}

#[test]
fn bad_configs_and_data_are_rejected() {
    let ds = synthetic_dataset(1, 10);
    let spec = build_rccnet();
    assert_eq!(
        train(
            &TrainConfig {
                batch_size: 1,
                ..quick(0)
            },
            &spec,
            &ds
        )
        .unwrap_err()
        .kind(),
        ErrorKind::Usage
    );
    let in27 = rccnet::model::build_softmax_cnn_in27();
    assert!(train(&quick(0), &in27, &ds).is_err());
    // One class with a single sample cannot be stratified.
    let idx: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.label(i) != 2)
        .chain([2])
        .collect();
    let lopsided = ds.subset(&idx).unwrap();
    assert_eq!(
        train(&quick(0), &spec, &lopsided).unwrap_err().kind(),
        ErrorKind::Data
    );
}

#[test]
fn exported_logs_round_trip() {
    let ds = synthetic_dataset(7, 15);
    let out = train(
        &TrainConfig {
            epochs: 3,
            ..quick(7)
        },
        &build_rccnet(),
        &ds,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("m.csv");
    export_metrics_csv(&out.records, &csv_path).unwrap();
    let text = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], CSV_HEADER);
    let close = |a: f64, b: f64| a == b || ((a - b) / a.abs().max(b.abs())).abs() < 1e-6;
    for (line, r) in lines[1..].iter().zip(&out.records) {
        let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        let want = [
            r.epoch as f64,
            r.train_loss,
            r.train_acc,
            r.val_loss,
            r.test_acc,
            r.test_f1,
            r.lr,
            r.seconds,
        ];
        assert!(v.iter().zip(want).all(|(&a, b)| close(a, b)), "{line}");
    }

    let svg_path = dir.path().join("c.svg");
    export_curve_svg(&out.records, &svg_path).unwrap();
    let svg = fs::read_to_string(&svg_path).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let polylines: Vec<_> = doc
        .descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .collect();
    assert_eq!(polylines.len(), 2);
    for p in polylines {
        assert_eq!(p.attribute("points").unwrap().split_whitespace().count(), 3);
    }

    assert!(export_metrics_csv(&out.records, dir.path().join("no/such/dir/m.csv")).is_err());
}
