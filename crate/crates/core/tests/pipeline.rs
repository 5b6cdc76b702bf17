use std::path::{Path, PathBuf};

use qasa_core::config::RunConfig;
use qasa_core::dataset::first_sample_bar;
use qasa_core::experiment::{dataset_for, evaluate, model_factory, prepare};
use qasa_core::featuremap::{encode_angles, six_scalar_channels};
use qasa_core::indicators::FeatureFrame;
use qasa_core::marketdata::{load_ohlcv, parse_ohlcv, LoadOptions};
use qasa_core::qasa::{QasaModel, Variant};
use qasa_core::synthetic::{generate, SyntheticConfig};
use qasa_core::trainer::{predict, train};

fn fixture_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic_300.csv")
}

#[test]
fn bundled_fixture_matches_generator() {
    let loaded = load_ohlcv(&fixture_path(), &LoadOptions::default()).unwrap();
    let generated = generate(&SyntheticConfig::default()).unwrap();
    assert_eq!(loaded, generated.series);
}

#[test]
fn csv_round_trip_is_exact() {
    let series = generate(&SyntheticConfig::default()).unwrap().series;
    let mut buf = Vec::new();
    series.write_csv(&mut buf).unwrap();
    let back = parse_ohlcv(buf.as_slice(), &LoadOptions::default()).unwrap();
    assert_eq!(back, series);
}

#[test]
fn feature_csv_round_trip_preserves_labels() {
    let series = load_ohlcv(&fixture_path(), &LoadOptions::default()).unwrap();
    let cfg = RunConfig::default();
    let (frame, labels) = prepare(&series, &cfg).unwrap();
    let mut buf = Vec::new();
    frame.write_csv(&mut buf, &series.timestamps(), Some(&labels)).unwrap();
    let (back, stamps, back_labels) = FeatureFrame::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.names(), frame.names());
    assert_eq!(back.valid_from(), frame.valid_from());
    assert_eq!(stamps, series.timestamps()[frame.valid_from()..]);
    let back_labels = back_labels.unwrap();
    assert_eq!(back_labels[frame.valid_from()..], labels[frame.valid_from()..]);
    for name in frame.names() {
        let (a, b) = (frame.column(name).unwrap(), back.column(name).unwrap());
        for t in frame.valid_from()..frame.len() {
            assert_eq!(a[t].to_bits(), b[t].to_bits(), "{name}[{t}]");
        }
    }
}

#[test]
fn hybrid_angles_stay_in_range_on_every_bar() {
    let series = load_ohlcv(&fixture_path(), &LoadOptions::default()).unwrap();
    let mut cfg = RunConfig::default();
    cfg.model.variant = Variant::Hybrid;
    let (frame, labels) = prepare(&series, &cfg).unwrap();
    let data = dataset_for(&series, &frame, &labels, &cfg).unwrap();
    let scaler = data.scaler.expect("hybrid datasets carry a scaler");
    let channels = six_scalar_channels(&frame).unwrap();
    for row in &channels.rows {
        let a = encode_angles(row, &scaler);
        assert!(a.0.iter().all(|v| (0.0..=std::f64::consts::TAU).contains(v)));
    }
    assert_eq!(data.start, first_sample_bar(&frame, &cfg.dataset_spec()));
}

#[test]
fn short_training_and_checkpoint_reload_agree() {
    let series = load_ohlcv(&fixture_path(), &LoadOptions::default()).unwrap();
    let mut cfg = RunConfig::default();
    cfg.train.epochs = 3;
    let (frame, labels) = prepare(&series, &cfg).unwrap();
    let data = dataset_for(&series, &frame, &labels, &cfg).unwrap();
    let model = model_factory(&cfg)(7).unwrap();
    let run = train(model, &data, &cfg.train).unwrap();
    assert_eq!(run.losses.len(), 3);

    let json = serde_json::to_string(&run.checkpoint).unwrap();
    let reloaded: QasaModel = serde_json::from_str(&json).unwrap();
    assert_eq!(reloaded, run.checkpoint);
    assert_eq!(predict(&reloaded, data.test()).unwrap(), predict(&run.checkpoint, data.test()).unwrap());

    let eval = evaluate(7, &reloaded, &data, &series.closes(), &cfg, series.periods_per_year()).unwrap();
    assert_eq!(eval.test_bars.len(), data.test().len());
    assert_eq!(eval.backtest.equity.len(), data.test().len());
    assert!(eval.predictions.iter().all(|p| (0.0..=1.0).contains(p)));
}
