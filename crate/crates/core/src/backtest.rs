//! Rebalancing backtest on a liquidity-provider value proxy, and the
//! performance metrics reported for it.
//!
//! Between rebalances the position is worth `V_anchor * sqrt(P_t / P_ref)`,
//! the value shape of a constant-product pool share. A rebalance moves the
//! anchor to the current bar and pays a fee on half the position.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyMode {
    /// Constant-product LP value, anchor reset on each signal.
    #[default]
    LpRebalance,
    /// Long by default, flat while the signal is on; fees on full notional.
    FlatLongSwitch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestConfig {
    pub fee_bps: f64,
    pub cooldown_bars: usize,
    pub decision_threshold: f64,
    pub initial_value: f64,
    pub mode: StrategyMode,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            fee_bps: 30.0,
            cooldown_bars: 1,
            decision_threshold: 0.5,
            initial_value: 1.0,
            mode: StrategyMode::LpRebalance,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fee_bps >= 0.0) || !self.fee_bps.is_finite() {
            return Err(Error::param("fee_bps", "must be finite and >= 0"));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return Err(Error::param("decision_threshold", "must lie in (0, 1)"));
        }
        if !(self.initial_value > 0.0) || !self.initial_value.is_finite() {
            return Err(Error::param("initial_value", "must be finite and positive"));
        }
        Ok(())
    }

    fn fee_rate(&self) -> f64 {
        self.fee_bps / 10_000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub bar: usize,
    pub fee_paid: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeResult {
    pub value: f64,
    /// Zero return variance; `value` is then 0 by convention.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalmarResult {
    /// `None` when there was no drawdown to divide by.
    pub value: Option<f64>,
    pub annualized_return: f64,
    pub degenerate: bool,
}

pub const CALMAR_CONVENTION: &str =
    "annualized return (1 + R)^(periods_per_year / periods) - 1 divided by |max drawdown|, periods = equity points - 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub equity: Vec<f64>,
    pub trades: Vec<Trade>,
    pub total_return: f64,
    pub sharpe: f64,
    pub sharpe_degenerate: bool,
    pub max_drawdown: f64,
    pub calmar: Option<f64>,
    pub calmar_degenerate: bool,
    pub annualized_return: f64,
    pub calmar_convention: String,
    pub periods_per_year: f64,
}

/// Runs the strategy over `prices` with one prediction per bar.
pub fn simulate(prices: &[f64], predictions: &[f64], cfg: &BacktestConfig) -> Result<BacktestReport> {
    simulate_with(prices, predictions, cfg, 252.0)
}

pub fn simulate_with(
    prices: &[f64],
    predictions: &[f64],
    cfg: &BacktestConfig,
    periods_per_year: f64,
) -> Result<BacktestReport> {
    cfg.validate()?;
    if prices.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: prices.len(),
            right: predictions.len(),
        });
    }
    if prices.is_empty() {
        return Err(Error::EmptySeries);
    }
    if let Some(i) = prices.iter().position(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(Error::BadRow {
            row: i,
            reason: format!("price {} is not positive", prices[i]),
        });
    }
    let (equity, trades) = match cfg.mode {
        StrategyMode::LpRebalance => run_lp(prices, predictions, cfg),
        StrategyMode::FlatLongSwitch => run_switch(prices, predictions, cfg),
    };
    report(equity, trades, periods_per_year)
}

fn cooled(last: Option<usize>, t: usize, cooldown: usize) -> bool {
    last.is_none_or(|l| t - l >= cooldown)
}

fn run_lp(prices: &[f64], predictions: &[f64], cfg: &BacktestConfig) -> (Vec<f64>, Vec<Trade>) {
    let mut anchor_value = cfg.initial_value;
    let mut anchor_price = prices[0];
    let mut last_trade = None;
    let mut equity = Vec::with_capacity(prices.len());
    let mut trades = Vec::new();
    for (t, (&p, &pred)) in prices.iter().zip(predictions).enumerate() {
        let mut value = anchor_value * (p / anchor_price).sqrt();
        if pred >= cfg.decision_threshold && cooled(last_trade, t, cfg.cooldown_bars) {
            let fee = cfg.fee_rate() * value / 2.0;
            value -= fee;
            anchor_value = value;
            anchor_price = p;
            last_trade = Some(t);
            trades.push(Trade { bar: t, fee_paid: fee });
        }
        equity.push(value);
    }
    (equity, trades)
}

fn run_switch(prices: &[f64], predictions: &[f64], cfg: &BacktestConfig) -> (Vec<f64>, Vec<Trade>) {
    let mut value = cfg.initial_value;
    let mut long = true;
    let mut last_trade = None;
    let mut equity = Vec::with_capacity(prices.len());
    let mut trades = Vec::new();
    for t in 0..prices.len() {
        if t > 0 && long {
            value *= prices[t] / prices[t - 1];
        }
        let want_long = predictions[t] < cfg.decision_threshold;
        if want_long != long && cooled(last_trade, t, cfg.cooldown_bars) {
            let fee = cfg.fee_rate() * value;
            value -= fee;
            long = want_long;
            last_trade = Some(t);
            trades.push(Trade { bar: t, fee_paid: fee });
        }
        equity.push(value);
    }
    (equity, trades)
}

fn report(equity: Vec<f64>, trades: Vec<Trade>, periods_per_year: f64) -> Result<BacktestReport> {
    let total = total_return(&equity)?;
    let sharpe = if equity.len() >= 3 {
        sharpe(&equity, periods_per_year)?
    } else {
        SharpeResult {
            value: 0.0,
            degenerate: true,
        }
    };
    let mdd = max_drawdown(&equity)?;
    let calmar = calmar(total, mdd, equity.len().saturating_sub(1).max(1), periods_per_year)?;
    Ok(BacktestReport {
        equity,
        trades,
        total_return: total,
        sharpe: sharpe.value,
        sharpe_degenerate: sharpe.degenerate,
        max_drawdown: mdd,
        calmar: calmar.value,
        calmar_degenerate: calmar.degenerate,
        annualized_return: calmar.annualized_return,
        calmar_convention: CALMAR_CONVENTION.to_string(),
        periods_per_year,
    })
}

pub fn total_return(equity: &[f64]) -> Result<f64> {
    match (equity.first(), equity.last()) {
        (Some(first), Some(last)) => Ok(last / first - 1.0),
        _ => Err(Error::EmptySeries),
    }
}

/// Annualized mean over sample standard deviation of simple bar returns.
pub fn sharpe(equity: &[f64], periods_per_year: f64) -> Result<SharpeResult> {
    if equity.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            actual: equity.len(),
        });
    }
    let rets: Vec<f64> = equity.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    sharpe_from_returns(&rets, periods_per_year)
}

pub fn sharpe_from_returns(returns: &[f64], periods_per_year: f64) -> Result<SharpeResult> {
    if returns.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            actual: returns.len(),
        });
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    // a constant return series leaves rounding-level spread
    if sd == 0.0 || sd <= 1e-10 * mean.abs() {
        return Ok(SharpeResult {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(SharpeResult {
        value: mean / sd * periods_per_year.sqrt(),
        degenerate: false,
    })
}

/// Worst `equity_t / running_max_t - 1`.
pub fn max_drawdown(equity: &[f64]) -> Result<f64> {
    if equity.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &e in equity {
        peak = peak.max(e);
        worst = worst.min(e / peak - 1.0);
    }
    Ok(worst)
}

pub fn annualize(total_return: f64, periods: usize, periods_per_year: f64) -> f64 {
    (1.0 + total_return).powf(periods_per_year / periods as f64) - 1.0
}

/// Annualized return over `|max_drawdown|`; a zero return gives 0 and a zero
/// drawdown is flagged instead of dividing.
pub fn calmar(total_return: f64, max_drawdown: f64, periods: usize, periods_per_year: f64) -> Result<CalmarResult> {
    if periods == 0 {
        return Err(Error::param("periods", "must be >= 1"));
    }
    if max_drawdown > 0.0 || max_drawdown < -1.0 {
        return Err(Error::param("max_drawdown", "must lie in [-1, 0]"));
    }
    let annualized = annualize(total_return, periods, periods_per_year);
    if total_return == 0.0 {
        return Ok(CalmarResult {
            value: Some(0.0),
            annualized_return: annualized,
            degenerate: max_drawdown == 0.0,
        });
    }
    if max_drawdown == 0.0 {
        return Ok(CalmarResult {
            value: None,
            annualized_return: annualized,
            degenerate: true,
        });
    }
    Ok(CalmarResult {
        value: Some(annualized / max_drawdown.abs()),
        annualized_return: annualized,
        degenerate: false,
    })
}

/// Writes `bar_index,timestamp,equity`.
pub fn write_equity_csv(path: &Path, bars: &[usize], timestamps: &[String], equity: &[f64]) -> Result<()> {
    if bars.len() != equity.len() || timestamps.len() != equity.len() {
        return Err(Error::LengthMismatch {
            left: bars.len().min(timestamps.len()),
            right: equity.len(),
        });
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "bar_index,timestamp,equity")?;
        for ((b, ts), e) in bars.iter().zip(timestamps).zip(equity) {
            writeln!(w, "{b},{ts},{e}")?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn no_fee() -> BacktestConfig {
        BacktestConfig {
            fee_bps: 0.0,
            ..BacktestConfig::default()
        }
    }

    #[test]
    fn lp_examples() {
        let r = simulate(&[3.0; 10], &[0.0; 10], &BacktestConfig::default()).unwrap();
        assert!(r.equity.iter().all(|&e| e == 1.0));
        assert!(r.trades.is_empty());
        assert_eq!(r.total_return, 0.0);

        let prices = [1.0, 1.5, 2.5, 4.0];
        let r = simulate(&prices, &[0.0; 4], &BacktestConfig::default()).unwrap();
        assert!((r.equity[3] - 2.0).abs() < 1e-12);

        let prices = [1.0, 1.21, 1.44, 1.21];
        let r = simulate(&prices, &[0.0, 0.9, 0.0, 0.0], &no_fee()).unwrap();
        assert!((r.equity[1] - 1.1).abs() < 1e-15);
        // anchor moved to 1.21: value at 1.44 is 1.1 * sqrt(1.44/1.21) = 1.2
        assert!((r.equity[2] - 1.2).abs() < 1e-12);
        assert_eq!(r.trades, vec![Trade { bar: 1, fee_paid: 0.0 }]);
    }

    #[test]
    fn fee_is_on_half_notional() {
        let r = simulate(&[1.0, 1.0], &[1.0, 0.0], &BacktestConfig::default()).unwrap();
        assert!((r.trades[0].fee_paid - 0.0015).abs() < 1e-15);
        assert!((r.equity[1] - 0.9985).abs() < 1e-15);
    }

    #[test]
    fn cooldown_spaces_trades() {
        let cfg = BacktestConfig {
            cooldown_bars: 3,
            ..BacktestConfig::default()
        };
        let r = simulate(&[1.0; 10], &[1.0; 10], &cfg).unwrap();
        let bars: Vec<usize> = r.trades.iter().map(|t| t.bar).collect();
        assert_eq!(bars, vec![0, 3, 6, 9]);
    }

    #[test]
    fn switch_mode_goes_flat_on_signal() {
        let cfg = BacktestConfig {
            mode: StrategyMode::FlatLongSwitch,
            ..no_fee()
        };
        let r = simulate(&[1.0, 2.0, 1.0, 2.0], &[0.0, 0.9, 0.9, 0.0], &cfg).unwrap();
        assert_eq!(r.equity, vec![1.0, 2.0, 2.0, 2.0]);
        assert_eq!(r.trades.len(), 2);
    }

    #[test]
    fn metric_examples() {
        assert!((total_return(&[1.0, 1.1]).unwrap() - 0.1).abs() < 1e-15);
        assert!((total_return(&[1.0, 1.1399]).unwrap() - 0.1399).abs() < 1e-15);
        assert_eq!(total_return(&[2.0; 5]).unwrap(), 0.0);
        assert!(total_return(&[]).is_err());

        assert_eq!(max_drawdown(&[1.0, 2.0, 1.0]).unwrap(), -0.5);
        assert_eq!(max_drawdown(&[2.0, 1.0, 3.0]).unwrap(), -0.5);
        assert_eq!(max_drawdown(&[1.0, 2.0, 3.0]).unwrap(), 0.0);

        let s = sharpe_from_returns(&[0.02, -0.02, 0.02, -0.02], 252.0).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(!s.degenerate);
        let growth: Vec<f64> = (0..10).map(|i| 1.01f64.powi(i)).collect();
        assert!(sharpe(&growth, 252.0).unwrap().degenerate);
        assert!(sharpe(&[1.0, 1.1], 252.0).is_err());

        let c = calmar(0.1, -0.1, 252, 252.0).unwrap();
        assert!((c.value.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(calmar(0.0, -0.2, 30, 252.0).unwrap().value, Some(0.0));
        let flat = calmar(0.05, 0.0, 30, 252.0).unwrap();
        assert!(flat.degenerate && flat.value.is_none());
    }

    #[test]
    fn short_window_calmar_is_large() {
        let c = calmar(0.1399, -0.1010, 38, 252.0).unwrap();
        let want = (1.1399f64.powf(252.0 / 38.0) - 1.0) / 0.1010;
        assert!((c.value.unwrap() - want).abs() < 1e-12);
        assert!(c.value.unwrap() > 13.0 && c.value.unwrap() < 14.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(simulate(&[1.0, 2.0], &[0.0], &BacktestConfig::default()).is_err());
        assert!(simulate(&[1.0, -2.0], &[0.0; 2], &BacktestConfig::default()).is_err());
        let bad = BacktestConfig {
            decision_threshold: 1.0,
            ..BacktestConfig::default()
        };
        assert!(simulate(&[1.0], &[0.0], &bad).is_err());
    }

    fn path_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (5usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.5f64..2.0, n),
                proptest::collection::vec(0.0f64..1.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn fee_monotone_and_cooldown_respected((prices, preds) in path_strategy(), cooldown in 0usize..5) {
            let mut last = f64::INFINITY;
            for fee in [0.0, 10.0, 30.0, 100.0] {
                let cfg = BacktestConfig { fee_bps: fee, cooldown_bars: cooldown, ..BacktestConfig::default() };
                let r = simulate(&prices, &preds, &cfg).unwrap();
                prop_assert!(r.total_return <= last + 1e-15);
                last = r.total_return;
                prop_assert!(r.equity.iter().all(|&e| e > 0.0));
                prop_assert!((-1.0..=0.0).contains(&r.max_drawdown));
                for w in r.trades.windows(2) {
                    prop_assert!(w[1].bar - w[0].bar >= cooldown.max(1));
                }
            }
        }

        #[test]
        fn quiet_run_is_buy_and_hold((prices, _) in path_strategy()) {
            let r = simulate(&prices, &vec![0.0; prices.len()], &BacktestConfig::default()).unwrap();
            for (e, p) in r.equity.iter().zip(&prices) {
                prop_assert_eq!(*e, (p / prices[0]).sqrt());
            }
        }

        #[test]
        fn drawdown_monotone_under_extension(e in proptest::collection::vec(0.1f64..10.0, 1..50), cut in 1usize..50) {
            let cut = cut.min(e.len());
            prop_assert!(max_drawdown(&e[..cut]).unwrap() >= max_drawdown(&e).unwrap());
        }
    }
}
