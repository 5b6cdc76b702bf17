//! End-to-end orchestration: features and labels from a price series,
//! repeated training, test-split evaluation and the summary table.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::{simulate_with, BacktestReport};
use crate::config::RunConfig;
use crate::dataset::{build_dataset, Dataset};
use crate::error::Result;
use crate::indicators::{compute_features, FeatureFrame};
use crate::labeling::label_series;
use crate::marketdata::OhlcvSeries;
use crate::qasa::{QasaModel, Variant};
use crate::trainer::{accuracy, predict, repeat_runs, MeanSd, RunArtifact};

/// Feature frame and labels for a series.
pub fn prepare(series: &OhlcvSeries, cfg: &RunConfig) -> Result<(FeatureFrame, Vec<u8>)> {
    let frame = compute_features(series, &cfg.indicators)?;
    let labels = label_series(&series.closes(), &cfg.labels)?;
    Ok((frame, labels))
}

pub fn dataset_for(series: &OhlcvSeries, frame: &FeatureFrame, labels: &[u8], cfg: &RunConfig) -> Result<Dataset> {
    build_dataset(&series.closes(), frame, labels, &cfg.dataset_spec())
}

pub fn model_factory(cfg: &RunConfig) -> impl Fn(u64) -> Result<QasaModel> + Sync + '_ {
    move |seed| {
        let mut m = QasaModel::init(cfg.model.variant, cfg.model.window, cfg.model.n_layers, seed)?;
        m.token_mode = cfg.model.token_mode;
        Ok(m)
    }
}

/// Test-split outcome of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub seed: u64,
    pub test_accuracy: f64,
    pub test_bars: Vec<usize>,
    pub predictions: Vec<f64>,
    pub backtest: BacktestReport,
}

pub fn evaluate(
    seed: u64,
    model: &QasaModel,
    dataset: &Dataset,
    closes: &[f64],
    cfg: &RunConfig,
    periods_per_year: f64,
) -> Result<Evaluation> {
    let test = dataset.test();
    let predictions = predict(model, test)?;
    let bars: Vec<usize> = test.iter().map(|s| s.bar).collect();
    let prices: Vec<f64> = bars.iter().map(|&b| closes[b]).collect();
    let backtest = simulate_with(&prices, &predictions, &cfg.backtest, periods_per_year)?;
    Ok(Evaluation {
        seed,
        test_accuracy: accuracy(&predictions, test, cfg.backtest.decision_threshold),
        test_bars: bars,
        predictions,
        backtest,
    })
}

/// Mean and sample s.d. of each metric over the repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: String,
    pub seeds: Vec<u64>,
    pub total_return: MeanSd,
    pub sharpe: MeanSd,
    pub max_drawdown: MeanSd,
    /// Over runs with a defined Calmar ratio.
    pub calmar: MeanSd,
    pub calmar_defined_runs: usize,
    pub test_accuracy: MeanSd,
}

impl Summary {
    pub fn from_evaluations(variant: Variant, evals: &[Evaluation]) -> Self {
        let pick = |f: &dyn Fn(&Evaluation) -> f64| MeanSd::of(&evals.iter().map(f).collect::<Vec<_>>());
        let calmars: Vec<f64> = evals.iter().filter_map(|e| e.backtest.calmar).collect();
        Self {
            model: variant.display_name().to_string(),
            seeds: evals.iter().map(|e| e.seed).collect(),
            total_return: pick(&|e| e.backtest.total_return),
            sharpe: pick(&|e| e.backtest.sharpe),
            max_drawdown: pick(&|e| e.backtest.max_drawdown),
            calmar: MeanSd::of(&calmars),
            calmar_defined_runs: calmars.len(),
            test_accuracy: pick(&|e| e.test_accuracy),
        }
    }
}

fn pct(m: MeanSd) -> String {
    format!("{:.2}% ± {:.2}%", 100.0 * m.mean, 100.0 * m.sd)
}

fn num(m: MeanSd) -> String {
    if m.mean.is_nan() {
        "n/a".to_string()
    } else {
        format!("{:.2} ± {:.2}", m.mean, m.sd)
    }
}

/// Plain-text table with one row per summary.
pub fn format_table(rows: &[Summary]) -> String {
    let header = ["Model", "Return", "Sharpe", "MaxDD", "Calmar"];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|s| {
            [
                s.model.clone(),
                pct(s.total_return),
                num(s.sharpe),
                pct(s.max_drawdown),
                num(s.calmar),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..5)
        .map(|c| body.iter().map(|r| r[c].chars().count()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-|-"));
    out.push('\n');
    for r in &body {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub dataset: Dataset,
    pub runs: Vec<RunArtifact>,
    pub evaluations: Vec<Evaluation>,
    pub summary: Summary,
}

/// Full pipeline from bars to summary.
pub fn run_experiment(series: &OhlcvSeries, cfg: &RunConfig) -> Result<Experiment> {
    cfg.validate()?;
    let (frame, labels) = prepare(series, cfg)?;
    let dataset = dataset_for(series, &frame, &labels, cfg)?;
    run_on_dataset(dataset, &series.closes(), cfg, series.periods_per_year())
}

pub fn run_on_dataset(dataset: Dataset, closes: &[f64], cfg: &RunConfig, periods_per_year: f64) -> Result<Experiment> {
    let runs = repeat_runs(model_factory(cfg), &dataset, &cfg.train)?;
    let evaluations = runs
        .par_iter()
        .map(|r| evaluate(r.seed, &r.checkpoint, &dataset, closes, cfg, periods_per_year))
        .collect::<Result<Vec<_>>>()?;
    let summary = Summary::from_evaluations(cfg.model.variant, &evaluations);
    Ok(Experiment {
        dataset,
        runs,
        evaluations,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_one_row_per_summary() {
        let s = Summary {
            model: "QASA Sequence".into(),
            seeds: vec![0, 1, 2, 3, 4],
            total_return: MeanSd { mean: 0.1399, sd: 0.0204 },
            sharpe: MeanSd { mean: 1.76, sd: 0.3 },
            max_drawdown: MeanSd { mean: -0.101, sd: 0.01 },
            calmar: MeanSd { mean: 6.51, sd: 1.0 },
            calmar_defined_runs: 5,
            test_accuracy: MeanSd { mean: 0.8, sd: 0.02 },
        };
        let t = format_table(&[s]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("Model"));
        assert!(lines[2].contains("13.99% ± 2.04%"));
        assert!(lines[2].contains("1.76 ± 0.30"));
        assert!(lines[2].contains("-10.10%"));
    }
}
