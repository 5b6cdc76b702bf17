//! One function per subcommand. Each stage reads the artifacts of the
//! previous one from the run directory and writes its own next to them.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, ensure, Context as _, Result};
use serde::{Deserialize, Serialize};

use qasa_core::config::RunConfig;
use qasa_core::experiment::{dataset_for, evaluate, format_table, run_on_dataset, Evaluation, Summary};
use qasa_core::indicators::{compute_features, FeatureFrame};
use qasa_core::labeling::label_series;
use qasa_core::marketdata::{format_timestamp, load_ohlcv, OhlcvSeries};
use qasa_core::qasa::QasaModel;
use qasa_core::synthetic::{generate, oracle_accuracy, SyntheticConfig};
use qasa_core::{backtest, selftest};

use crate::{BacktestArgs, TrainArgs};

pub const SERIES: &str = "series.csv";
pub const INGEST_META: &str = "ingest.json";
pub const FEATURES: &str = "features.csv";
pub const FEATURES_META: &str = "features.json";
pub const LABELS_META: &str = "labels.json";
pub const SUMMARY: &str = "summary.json";
pub const REPORT: &str = "report.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const LOSSES: &str = "losses.csv";
pub const EQUITY: &str = "equity.csv";

pub struct Context {
    pub run_dir: PathBuf,
    pub config_path: Option<PathBuf>,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.run_dir.join(name)
    }

    /// Path to an artifact written by an earlier stage.
    fn require(&self, name: &str, stage: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if !p.is_file() {
            bail!(
                "missing artifact {name} in {}; run `qasa {stage}` first",
                self.run_dir.display()
            );
        }
        Ok(p)
    }

    fn config(&self) -> Result<RunConfig> {
        let cfg = match &self.config_path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("invalid config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        Ok(cfg)
    }
}

fn run_subdir(seed: u64) -> String {
    format!("run_{seed}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_series(ctx: &Context, cfg: &RunConfig) -> Result<OhlcvSeries> {
    let path = ctx.require(SERIES, "ingest")?;
    Ok(load_ohlcv(&path, &cfg.data)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct IngestMeta {
    config: RunConfig,
    bars: usize,
    first_timestamp: String,
    last_timestamp: String,
}

pub fn ingest(ctx: &Context, csv: &Path, out: Option<&Path>, forward_fill: bool) -> Result<ExitCode> {
    let mut cfg = ctx.config()?;
    cfg.data.forward_fill |= forward_fill;
    cfg.validate()?;
    let series = load_ohlcv(csv, &cfg.data)?;
    let dir = out.unwrap_or(&ctx.run_dir);
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    series.save(&dir.join(SERIES))?;
    let ts = series.timestamps();
    write_json(
        &dir.join(INGEST_META),
        &IngestMeta {
            config: cfg,
            bars: series.len(),
            first_timestamp: format_timestamp(ts[0]),
            last_timestamp: format_timestamp(ts[ts.len() - 1]),
        },
    )?;
    println!("ingested {} bars into {}", series.len(), dir.join(SERIES).display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize, Deserialize)]
struct FeaturesMeta {
    config: RunConfig,
    bars: usize,
    valid_from: usize,
    columns: Vec<String>,
}

pub fn features(ctx: &Context) -> Result<ExitCode> {
    let cfg = ctx.config()?;
    cfg.validate()?;
    let series = load_series(ctx, &cfg)?;
    let frame = compute_features(&series, &cfg.indicators)?;
    let file = fs::File::create(ctx.path(FEATURES))?;
    frame.write_csv(file, &series.timestamps(), None)?;
    write_json(
        &ctx.path(FEATURES_META),
        &FeaturesMeta {
            config: cfg,
            bars: frame.len(),
            valid_from: frame.valid_from(),
            columns: frame.names().to_vec(),
        },
    )?;
    println!(
        "{} feature columns from bar {} of {}",
        frame.n_columns(),
        frame.valid_from(),
        frame.len()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelsMeta {
    config: RunConfig,
    labelled_bars: usize,
    positives: usize,
}

fn read_frame(ctx: &Context, series: &OhlcvSeries) -> Result<(FeatureFrame, Option<Vec<u8>>)> {
    let path = ctx.require(FEATURES, "features")?;
    let (frame, _, labels) = FeatureFrame::read_csv(fs::File::open(&path)?)?;
    ensure!(
        frame.len() == series.len(),
        "{FEATURES} covers {} bars but {SERIES} has {}; rerun `qasa features`",
        frame.len(),
        series.len()
    );
    Ok((frame, labels))
}

pub fn label(ctx: &Context) -> Result<ExitCode> {
    let cfg = ctx.config()?;
    cfg.validate()?;
    let series = load_series(ctx, &cfg)?;
    let (frame, _) = read_frame(ctx, &series)?;
    let labels = label_series(&series.closes(), &cfg.labels)?;
    let file = fs::File::create(ctx.path(FEATURES))?;
    frame.write_csv(file, &series.timestamps(), Some(&labels))?;
    let exported = &labels[frame.valid_from()..];
    let positives = exported.iter().filter(|&&y| y == 1).count();
    write_json(
        &ctx.path(LABELS_META),
        &LabelsMeta {
            config: cfg,
            labelled_bars: exported.len(),
            positives,
        },
    )?;
    println!("{positives} positive labels over {} bars", exported.len());
    Ok(ExitCode::SUCCESS)
}

/// Rejects feature files built under a different configuration.
fn check_upstream(ctx: &Context, cfg: &RunConfig) -> Result<()> {
    if let Ok(meta) = read_json::<FeaturesMeta>(&ctx.path(FEATURES_META)) {
        ensure!(
            meta.config.indicators == cfg.indicators,
            "{FEATURES} was built with different indicator settings; rerun `qasa features`"
        );
    }
    if let Ok(meta) = read_json::<LabelsMeta>(&ctx.path(LABELS_META)) {
        ensure!(
            meta.config.labels == cfg.labels,
            "labels were built with different settings; rerun `qasa label`"
        );
    }
    Ok(())
}

fn load_labelled(ctx: &Context, cfg: &RunConfig) -> Result<(OhlcvSeries, FeatureFrame, Vec<u8>)> {
    let series = load_series(ctx, cfg)?;
    let (frame, labels) = read_frame(ctx, &series)?;
    let Some(labels) = labels else {
        bail!("{FEATURES} has no label column; run `qasa label` first");
    };
    check_upstream(ctx, cfg)?;
    Ok((series, frame, labels))
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    seed: u64,
    config: RunConfig,
    best_epoch: usize,
    positive_weight: f64,
    model: QasaModel,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunLine {
    seed: u64,
    best_epoch: usize,
    test_accuracy: f64,
    total_return: f64,
    sharpe: f64,
    max_drawdown: f64,
    calmar: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrainSummary {
    config: RunConfig,
    runs: Vec<RunLine>,
    summary: Summary,
    calmar_convention: String,
    table: String,
}

pub fn train(ctx: &Context, args: &TrainArgs) -> Result<ExitCode> {
    let mut cfg = ctx.config()?;
    if let Some(v) = args.variant {
        cfg.model.variant = v;
    }
    if let Some(s) = args.seed {
        cfg.train.seed = s;
    }
    if let Some(r) = args.repeats {
        cfg.train.n_repeats = r;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(w) = args.window {
        cfg.model.window = w;
    }
    if let Some(l) = args.layers {
        cfg.model.n_layers = l;
    }
    cfg.validate()?;
    let (series, frame, labels) = load_labelled(ctx, &cfg)?;
    let dataset = dataset_for(&series, &frame, &labels, &cfg)?;
    log::info!(
        "{} samples from bar {}: train {}, val {}, test {}",
        dataset.samples.len(),
        dataset.start,
        dataset.split.train.len(),
        dataset.split.val.len(),
        dataset.split.test.len()
    );
    let started = Instant::now();
    let exp = run_on_dataset(dataset, &series.closes(), &cfg, series.periods_per_year())?;
    log::info!("trained {} runs in {:.1?}", exp.runs.len(), started.elapsed());

    let mut lines = Vec::new();
    for (run, eval) in exp.runs.iter().zip(&exp.evaluations) {
        let dir = ctx.path(&run_subdir(run.seed));
        fs::create_dir_all(&dir)?;
        write_json(
            &dir.join(CHECKPOINT),
            &Checkpoint {
                seed: run.seed,
                config: cfg.clone(),
                best_epoch: run.best_epoch,
                positive_weight: run.positive_weight,
                model: run.checkpoint.clone(),
            },
        )?;
        fs::write(dir.join(LOSSES), run.losses_csv())?;
        lines.push(RunLine {
            seed: run.seed,
            best_epoch: run.best_epoch,
            test_accuracy: eval.test_accuracy,
            total_return: eval.backtest.total_return,
            sharpe: eval.backtest.sharpe,
            max_drawdown: eval.backtest.max_drawdown,
            calmar: eval.backtest.calmar,
        });
    }
    let table = format_table(std::slice::from_ref(&exp.summary));
    write_json(
        &ctx.path(SUMMARY),
        &TrainSummary {
            config: cfg,
            runs: lines,
            summary: exp.summary.clone(),
            calmar_convention: backtest::CALMAR_CONVENTION.to_string(),
            table: table.clone(),
        },
    )?;
    print!("{table}");
    println!(
        "test accuracy {:.3} ± {:.3} over {} runs",
        exp.summary.test_accuracy.mean,
        exp.summary.test_accuracy.sd,
        exp.runs.len()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize, Deserialize)]
struct RunReport {
    config: RunConfig,
    calmar_convention: String,
    #[serde(flatten)]
    evaluation: Evaluation,
}

pub fn backtest(ctx: &Context, args: &BacktestArgs) -> Result<ExitCode> {
    let trained: TrainSummary = read_json(&ctx.require(SUMMARY, "train")?)?;
    let mut cfg = trained.config;
    if ctx.config_path.is_some() {
        cfg.backtest = ctx.config()?.backtest;
    }
    if let Some(f) = args.fee_bps {
        cfg.backtest.fee_bps = f;
    }
    if let Some(c) = args.cooldown {
        cfg.backtest.cooldown_bars = c;
    }
    if let Some(t) = args.threshold {
        cfg.backtest.decision_threshold = t;
    }
    cfg.validate()?;
    let (series, frame, labels) = load_labelled(ctx, &cfg)?;
    let dataset = dataset_for(&series, &frame, &labels, &cfg)?;
    let closes = series.closes();
    let timestamps = series.timestamps();
    for seed in &trained.summary.seeds {
        let dir = ctx.path(&run_subdir(*seed));
        let ckpt_path = dir.join(CHECKPOINT);
        ensure!(
            ckpt_path.is_file(),
            "missing artifact {} ; run `qasa train` first",
            ckpt_path.display()
        );
        let ckpt: Checkpoint = read_json(&ckpt_path)?;
        ckpt.model.validate()?;
        let eval = evaluate(*seed, &ckpt.model, &dataset, &closes, &cfg, series.periods_per_year())?;
        let stamps: Vec<String> = eval.test_bars.iter().map(|&b| format_timestamp(timestamps[b])).collect();
        backtest::write_equity_csv(&dir.join(EQUITY), &eval.test_bars, &stamps, &eval.backtest.equity)?;
        println!(
            "run {seed}: return {:.2}%, sharpe {:.2}, max drawdown {:.2}%, {} trades",
            100.0 * eval.backtest.total_return,
            eval.backtest.sharpe,
            100.0 * eval.backtest.max_drawdown,
            eval.backtest.trades.len()
        );
        write_json(
            &dir.join(REPORT),
            &RunReport {
                config: cfg.clone(),
                calmar_convention: backtest::CALMAR_CONVENTION.to_string(),
                evaluation: eval,
            },
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize, Deserialize)]
struct AggregateReport {
    config: RunConfig,
    summary: Summary,
    runs: Vec<RunLine>,
    calmar_convention: String,
    table: String,
}

pub fn report(ctx: &Context) -> Result<ExitCode> {
    let trained: TrainSummary = read_json(&ctx.require(SUMMARY, "train")?)?;
    let mut evals = Vec::new();
    let mut config = None;
    for seed in &trained.summary.seeds {
        let path = ctx.path(&run_subdir(*seed)).join(REPORT);
        ensure!(
            path.is_file(),
            "missing artifact {}; run `qasa backtest` first",
            path.display()
        );
        let r: RunReport = read_json(&path)?;
        config.get_or_insert(r.config);
        evals.push(r.evaluation);
    }
    let config = config.unwrap_or(trained.config);
    let summary = Summary::from_evaluations(config.model.variant, &evals);
    let best_epochs: std::collections::HashMap<u64, usize> =
        trained.runs.iter().map(|r| (r.seed, r.best_epoch)).collect();
    let runs = evals
        .iter()
        .map(|e| RunLine {
            seed: e.seed,
            best_epoch: best_epochs.get(&e.seed).copied().unwrap_or(0),
            test_accuracy: e.test_accuracy,
            total_return: e.backtest.total_return,
            sharpe: e.backtest.sharpe,
            max_drawdown: e.backtest.max_drawdown,
            calmar: e.backtest.calmar,
        })
        .collect();
    let table = format_table(std::slice::from_ref(&summary));
    write_json(
        &ctx.path(REPORT),
        &AggregateReport {
            config,
            summary,
            runs,
            calmar_convention: backtest::CALMAR_CONVENTION.to_string(),
            table: table.clone(),
        },
    )?;
    print!("{table}");
    Ok(ExitCode::SUCCESS)
}

pub fn selftest(seed: u64) -> Result<ExitCode> {
    let started = Instant::now();
    let reports = selftest::run_all(seed);
    for r in &reports {
        println!("{}", r.line());
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!(
        "{} of {} suites passed in {:.2}s",
        reports.len() - failed,
        reports.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

pub fn synth(out: &Path, seed: Option<u64>, bars: Option<usize>) -> Result<ExitCode> {
    let defaults = SyntheticConfig::default();
    let cfg = SyntheticConfig {
        seed: seed.unwrap_or(defaults.seed),
        n_bars: bars.unwrap_or(defaults.n_bars),
        ..defaults
    };
    let data = generate(&cfg)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    data.series.save(out)?;
    let labels = qasa_core::labeling::LabelConfig::default();
    let warmup = labels.warmup();
    if cfg.n_bars > warmup {
        let acc = oracle_accuracy(&data, cfg.oracle_onset, &labels, warmup..cfg.n_bars)?;
        println!("wrote {} bars to {}; reference classifier accuracy {acc:.3}", cfg.n_bars, out.display());
    } else {
        println!("wrote {} bars to {}", cfg.n_bars, out.display());
    }
    Ok(ExitCode::SUCCESS)
}
