//! Technical indicators and the engineered feature frame.
//!
//! Every indicator returns a series aligned to its input: index `t` of the
//! output belongs to bar `t`. Positions that are still inside the warm-up
//! period are `NaN`. All indicators are causal, so the value at `t` only
//! reads inputs at indices `<= t`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::OhlcvSeries;

/// Base column names, in frame order. Interaction pairs index into this list.
pub mod col {
    pub const LOG_RETURN: &str = "log_return";
    pub const MA_RATIO: &str = "ma_ratio";
    pub const MOMENTUM: &str = "momentum";
    pub const ROLLING_VOL: &str = "rolling_vol";
    pub const EWMA_VOL: &str = "ewma_vol";
    pub const LR_VOL: &str = "lr_vol";
    pub const BB_PCT_B: &str = "bb_pct_b";
    pub const BB_Z: &str = "bb_z";
    pub const ATR_REL: &str = "atr_rel";
    pub const VOL_RATIO: &str = "vol_ratio";
    pub const SIGNED_VOL_RATIO: &str = "signed_vol_ratio";
    pub const AMIHUD: &str = "amihud";
    pub const RSI: &str = "rsi";
    pub const MACD_HIST: &str = "macd_hist";

    pub const BASE: [&str; 14] = [
        LOG_RETURN,
        MA_RATIO,
        MOMENTUM,
        ROLLING_VOL,
        EWMA_VOL,
        LR_VOL,
        BB_PCT_B,
        BB_Z,
        ATR_REL,
        VOL_RATIO,
        SIGNED_VOL_RATIO,
        AMIHUD,
        RSI,
        MACD_HIST,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndicatorConfig {
    /// Window for the MA ratio and the short rolling volatility.
    pub n_ma: usize,
    /// Momentum horizon.
    pub k_m: usize,
    pub n_bb: usize,
    pub k_bb: f64,
    pub n_atr: usize,
    /// Window for volume ratio, signed volume and Amihud illiquidity.
    pub n_v: usize,
    /// Long-run volatility window.
    pub n_lr: usize,
    pub lambda_ewma: f64,
    pub n_rsi: usize,
    pub macd_fast: usize,
    pub macd_slow: usize,
    pub macd_signal: usize,
    pub eps: f64,
    pub lag_set: Vec<usize>,
    /// Index pairs into [`col::BASE`].
    pub interaction_pairs: Vec<(usize, usize)>,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        Self {
            n_ma: 20,
            k_m: 5,
            n_bb: 20,
            k_bb: 2.0,
            n_atr: 14,
            n_v: 20,
            n_lr: 60,
            lambda_ewma: 0.94,
            n_rsi: 14,
            macd_fast: 12,
            macd_slow: 26,
            macd_signal: 9,
            eps: 1e-12,
            lag_set: vec![1, 2, 3, 5],
            interaction_pairs: vec![(1, 2), (2, 4), (1, 12)],
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("n_ma", self.n_ma),
            ("k_m", self.k_m),
            ("n_bb", self.n_bb),
            ("n_atr", self.n_atr),
            ("n_v", self.n_v),
            ("n_lr", self.n_lr),
            ("n_rsi", self.n_rsi),
            ("macd_fast", self.macd_fast),
            ("macd_slow", self.macd_slow),
            ("macd_signal", self.macd_signal),
        ] {
            if w < 2 {
                return Err(Error::param(name, format!("window must be >= 2, got {w}")));
            }
        }
        if !(self.lambda_ewma > 0.0 && self.lambda_ewma < 1.0) {
            return Err(Error::param("lambda_ewma", "must lie in (0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::param("eps", "must be positive"));
        }
        if !(self.k_bb > 0.0) {
            return Err(Error::param("k_bb", "must be positive"));
        }
        if self.lag_set.contains(&0) {
            return Err(Error::param("lag_set", "lags must be >= 1"));
        }
        for &(i, j) in &self.interaction_pairs {
            if i >= col::BASE.len() || j >= col::BASE.len() {
                return Err(Error::param(
                    "interaction_pairs",
                    format!("pair ({i}, {j}) outside the {} base columns", col::BASE.len()),
                ));
            }
        }
        Ok(())
    }
}

fn check_window(name: &'static str, n: usize, min: usize, len: usize) -> Result<()> {
    if n < min {
        return Err(Error::param(name, format!("window must be >= {min}, got {n}")));
    }
    if len < n {
        return Err(Error::TooShort {
            needed: n,
            actual: len,
        });
    }
    Ok(())
}

/// Simple moving average, defined from `t = n - 1`.
pub fn sma(x: &[f64], n: usize) -> Result<Vec<f64>> {
    check_window("n", n, 1, x.len())?;
    let mut out = vec![f64::NAN; x.len()];
    for t in n - 1..x.len() {
        out[t] = x[t + 1 - n..=t].iter().sum::<f64>() / n as f64;
    }
    Ok(out)
}

/// Exponential moving average with `alpha = 2 / (n + 1)`, seeded with the
/// first finite observation.
pub fn ema(x: &[f64], n: usize) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::EmptySeries);
    }
    if n < 1 {
        return Err(Error::param("n", "window must be >= 1"));
    }
    let alpha = 2.0 / (n as f64 + 1.0);
    let mut out = vec![f64::NAN; x.len()];
    let mut prev: Option<f64> = None;
    for (t, &v) in x.iter().enumerate() {
        let next = match prev {
            None if v.is_nan() => continue,
            None => v,
            Some(p) => alpha * v + (1.0 - alpha) * p,
        };
        out[t] = next;
        prev = Some(next);
    }
    Ok(out)
}

fn sample_std(window: &[f64]) -> f64 {
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let ss = window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (ss / (n - 1.0)).sqrt()
}

/// Trailing sample standard deviation (divisor `n - 1`).
pub fn rolling_volatility(returns: &[f64], n: usize) -> Result<Vec<f64>> {
    check_window("n", n, 2, returns.len())?;
    let mut out = vec![f64::NAN; returns.len()];
    for t in n - 1..returns.len() {
        out[t] = sample_std(&returns[t + 1 - n..=t]);
    }
    Ok(out)
}

/// RiskMetrics-style EWMA volatility: the variance recursion is seeded with
/// the first squared return and the square root is returned.
pub fn ewma_volatility(returns: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::param("lambda", format!("must lie in (0, 1), got {lambda}")));
    }
    let mut out = vec![f64::NAN; returns.len()];
    let mut var: Option<f64> = None;
    for (t, &r) in returns.iter().enumerate() {
        let next = match var {
            None if r.is_nan() => continue,
            None => r * r,
            Some(v) => (1.0 - lambda) * r * r + lambda * v,
        };
        out[t] = next.sqrt();
        var = Some(next);
    }
    Ok(out)
}

/// `P_t / MA_n(P_t) - 1`, evaluated as `(P_t - MA) / MA` so that exact
/// deviations such as 102 vs 100 stay exact.
pub fn ma_ratio(prices: &[f64], n: usize) -> Result<Vec<f64>> {
    let ma = sma(prices, n)?;
    Ok(prices.iter().zip(&ma).map(|(p, m)| (p - m) / m).collect())
}

/// `ln(P_t / P_{t-k})`.
pub fn momentum(prices: &[f64], k: usize) -> Result<Vec<f64>> {
    if k < 1 {
        return Err(Error::param("k", "horizon must be >= 1"));
    }
    if prices.len() < k + 1 {
        return Err(Error::TooShort {
            needed: k + 1,
            actual: prices.len(),
        });
    }
    let mut out = vec![f64::NAN; prices.len()];
    for t in k..prices.len() {
        out[t] = (prices[t] / prices[t - k]).ln();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bollinger {
    pub mid: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub percent_b: Vec<f64>,
    pub z: Vec<f64>,
}

/// Bollinger bands over closes. A flat window (zero band width) reports
/// `%b = 0.5` and `z = 0`.
pub fn bollinger(prices: &[f64], n: usize, k: f64) -> Result<Bollinger> {
    check_window("n_bb", n, 2, prices.len())?;
    let len = prices.len();
    let mut b = Bollinger {
        mid: vec![f64::NAN; len],
        upper: vec![f64::NAN; len],
        lower: vec![f64::NAN; len],
        percent_b: vec![f64::NAN; len],
        z: vec![f64::NAN; len],
    };
    for t in n - 1..len {
        let window = &prices[t + 1 - n..=t];
        let mu = window.iter().sum::<f64>() / n as f64;
        let s = sample_std(window);
        let p = prices[t];
        b.mid[t] = mu;
        b.upper[t] = mu + k * s;
        b.lower[t] = mu - k * s;
        if s <= 1e-12 * mu.abs() {
            b.percent_b[t] = 0.5;
            b.z[t] = 0.0;
        } else {
            b.percent_b[t] = (p - b.lower[t]) / (b.upper[t] - b.lower[t]);
            b.z[t] = (p - mu) / (k * s);
        }
    }
    Ok(b)
}

/// True range; the first bar has no previous close and uses `H - L`.
pub fn true_range(series: &OhlcvSeries) -> Vec<f64> {
    let bars = series.bars();
    bars.iter()
        .enumerate()
        .map(|(t, b)| {
            let hl = b.high - b.low;
            if t == 0 {
                hl
            } else {
                let pc = bars[t - 1].close;
                hl.max((b.high - pc).abs()).max((b.low - pc).abs())
            }
        })
        .collect()
}

/// Returns `(ATR, ATR / close)`, with ATR the EMA of the true range.
pub fn atr(series: &OhlcvSeries, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if series.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            actual: series.len(),
        });
    }
    let atr = ema(&true_range(series), n)?;
    let rel = atr
        .iter()
        .zip(series.bars())
        .map(|(a, b)| a / b.close)
        .collect();
    Ok((atr, rel))
}

/// Log-returns aligned to bars: `out[0]` is `NaN`.
pub fn aligned_returns(prices: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; prices.len()];
    for t in 1..prices.len() {
        out[t] = prices[t].ln() - prices[t - 1].ln();
    }
    out
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Volume ratio `V_t / MA_n(V) - 1` and signed-volume ratio
/// `S_t / (MA_n(|S|) + eps)` with `S_t = sgn(r_t) V_t`. `returns` must be
/// aligned to bars (see [`aligned_returns`]). A window of zero volume gives
/// a volume ratio of 0.
pub fn volume_features(
    series: &OhlcvSeries,
    returns: &[f64],
    n: usize,
    eps: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if returns.len() != series.len() {
        return Err(Error::LengthMismatch {
            left: returns.len(),
            right: series.len(),
        });
    }
    let volumes = series.volumes();
    check_window("n_v", n, 1, volumes.len())?;
    let ma_v = sma(&volumes, n)?;
    let vol_ratio = volumes
        .iter()
        .zip(&ma_v)
        .map(|(v, m)| {
            if m.is_nan() {
                f64::NAN
            } else if *m > 0.0 {
                v / m - 1.0
            } else {
                0.0
            }
        })
        .collect();
    let signed: Vec<f64> = returns
        .iter()
        .zip(&volumes)
        .map(|(r, v)| if r.is_nan() { f64::NAN } else { sgn(*r) * v })
        .collect();
    let abs_signed: Vec<f64> = signed.iter().map(|s| s.abs()).collect();
    let ma_abs = sma(&abs_signed, n)?;
    let signed_ratio = signed
        .iter()
        .zip(&ma_abs)
        .map(|(s, m)| s / (m + eps))
        .collect();
    Ok((vol_ratio, signed_ratio))
}

/// Amihud illiquidity: trailing mean of `|r| / (V + eps)`.
pub fn amihud(returns: &[f64], volumes: &[f64], n: usize, eps: f64) -> Result<Vec<f64>> {
    if returns.len() != volumes.len() {
        return Err(Error::LengthMismatch {
            left: returns.len(),
            right: volumes.len(),
        });
    }
    let ratio: Vec<f64> = returns
        .iter()
        .zip(volumes)
        .map(|(r, v)| r.abs() / (v + eps))
        .collect();
    sma(&ratio, n)
}

/// Wilder RSI in `[0, 100]`, defined from `t = n`. A window with neither
/// gains nor losses reads 50.
pub fn rsi(prices: &[f64], n: usize) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::param("n_rsi", "window must be >= 1"));
    }
    if prices.len() < n + 1 {
        return Err(Error::TooShort {
            needed: n + 1,
            actual: prices.len(),
        });
    }
    let mut out = vec![f64::NAN; prices.len()];
    let diff = |t: usize| prices[t] - prices[t - 1];
    let mut gain = (1..=n).map(|t| diff(t).max(0.0)).sum::<f64>() / n as f64;
    let mut loss = (1..=n).map(|t| (-diff(t)).max(0.0)).sum::<f64>() / n as f64;
    out[n] = rsi_value(gain, loss);
    let nf = n as f64;
    for t in n + 1..prices.len() {
        let d = diff(t);
        gain = (gain * (nf - 1.0) + d.max(0.0)) / nf;
        loss = (loss * (nf - 1.0) + (-d).max(0.0)) / nf;
        out[t] = rsi_value(gain, loss);
    }
    Ok(out)
}

fn rsi_value(gain: f64, loss: f64) -> f64 {
    match (gain > 0.0, loss > 0.0) {
        (false, false) => 50.0,
        (_, false) => 100.0,
        (false, true) => 0.0,
        (true, true) => 100.0 - 100.0 / (1.0 + gain / loss),
    }
}

/// MACD histogram: `macd - EMA_signal(macd)` with
/// `macd = EMA_fast - EMA_slow`. Values before `slow + signal - 2` are
/// warm-up and masked.
pub fn macd_histogram(prices: &[f64], fast: usize, slow: usize, signal: usize) -> Result<Vec<f64>> {
    if fast < 1 || slow < 1 || signal < 1 {
        return Err(Error::param("macd", "windows must be >= 1"));
    }
    let warmup = slow.max(fast) + signal;
    if prices.len() < warmup {
        return Err(Error::TooShort {
            needed: warmup,
            actual: prices.len(),
        });
    }
    let ef = ema(prices, fast)?;
    let es = ema(prices, slow)?;
    let line: Vec<f64> = ef.iter().zip(&es).map(|(a, b)| a - b).collect();
    let sig = ema(&line, signal)?;
    let mut hist: Vec<f64> = line.iter().zip(&sig).map(|(l, s)| l - s).collect();
    for v in hist.iter_mut().take(warmup - 2) {
        *v = f64::NAN;
    }
    Ok(hist)
}

/// Named feature columns aligned to bar index.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    valid_from: usize,
    len: usize,
}

/// First index from which every remaining value is finite.
fn first_valid(values: &[f64]) -> usize {
    values
        .iter()
        .rposition(|v| !v.is_finite())
        .map_or(0, |i| i + 1)
}

impl FeatureFrame {
    pub fn new(len: usize) -> Self {
        Self {
            names: Vec::new(),
            columns: Vec::new(),
            valid_from: 0,
            len,
        }
    }

    /// Appends a column; `valid_from` advances to cover its warm-up.
    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.len {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: self.len,
            });
        }
        self.valid_from = self.valid_from.max(first_valid(&values));
        self.names.push(name.into());
        self.columns.push(values);
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn valid_from(&self) -> usize {
        self.valid_from
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column_at(&self, index: usize) -> Option<&[f64]> {
        self.columns.get(index).map(Vec::as_slice)
    }

    /// Appends lagged copies of every current column for each lag, then the
    /// pairwise products for each `(i, j)` in `pairs`.
    pub fn augment_lags_interactions(&self, lags: &[usize], pairs: &[(usize, usize)]) -> Result<Self> {
        let base = self.columns.len();
        for &(i, j) in pairs {
            if i >= base || j >= base {
                return Err(Error::param(
                    "interaction_pairs",
                    format!("pair ({i}, {j}) outside {base} columns"),
                ));
            }
        }
        if lags.contains(&0) {
            return Err(Error::param("lag_set", "lags must be >= 1"));
        }
        if let Some(&max_lag) = lags.iter().max() {
            if self.valid_from + max_lag >= self.len {
                return Err(Error::TooShort {
                    needed: self.valid_from + max_lag + 1,
                    actual: self.len,
                });
            }
        }
        let mut out = self.clone();
        for &lag in lags {
            for c in 0..base {
                let src = &self.columns[c];
                let mut shifted = vec![f64::NAN; self.len];
                shifted[lag..].copy_from_slice(&src[..self.len - lag]);
                out.push(format!("{}_lag{lag}", self.names[c]), shifted)?;
            }
        }
        for &(i, j) in pairs {
            let prod = self.columns[i]
                .iter()
                .zip(&self.columns[j])
                .map(|(a, b)| a * b)
                .collect();
            out.push(format!("{}_x_{}", self.names[i], self.names[j]), prod)?;
        }
        Ok(out)
    }

    /// CSV export: `bar_index,timestamp,<columns...>[,label]`, one row per bar
    /// from `valid_from` on.
    pub fn write_csv<W: Write>(
        &self,
        writer: W,
        timestamps: &[i64],
        labels: Option<&[u8]>,
    ) -> Result<()> {
        if timestamps.len() != self.len {
            return Err(Error::LengthMismatch {
                left: timestamps.len(),
                right: self.len,
            });
        }
        if let Some(l) = labels {
            if l.len() != self.len {
                return Err(Error::LengthMismatch {
                    left: l.len(),
                    right: self.len,
                });
            }
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["bar_index".to_string(), "timestamp".to_string()];
        header.extend(self.names.iter().cloned());
        if labels.is_some() {
            header.push(LABEL_COLUMN.to_string());
        }
        w.write_record(&header)?;
        for t in self.valid_from..self.len {
            let mut row = vec![t.to_string(), timestamps[t].to_string()];
            row.extend(self.columns.iter().map(|c| c[t].to_string()));
            if let Some(l) = labels {
                row.push(l[t].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Reads a frame written by [`FeatureFrame::write_csv`]. Rows before the
    /// first exported bar come back as `NaN`. Returns the frame, the
    /// timestamps of the exported rows, and the label column if present.
    pub fn read_csv<R: Read>(reader: R) -> Result<(Self, Vec<i64>, Option<Vec<u8>>)> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 || header[0] != "bar_index" || header[1] != "timestamp" {
            return Err(Error::BadHeader {
                expected: "bar_index,timestamp,...".into(),
                found: header.join(","),
            });
        }
        let has_label = header.last().map(String::as_str) == Some(LABEL_COLUMN);
        let n_feat = header.len() - 2 - usize::from(has_label);
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |reason: String| Error::BadRow { row: i + 2, reason };
            let idx: usize = rec[0].parse().map_err(|_| bad("bad bar_index".into()))?;
            let ts: i64 = rec[1].parse().map_err(|_| bad("bad timestamp".into()))?;
            let vals = (0..n_feat)
                .map(|c| rec[2 + c].parse::<f64>().map_err(|_| bad(format!("bad value in column {}", header[2 + c]))))
                .collect::<Result<Vec<_>>>()?;
            let label = if has_label {
                Some(rec[header.len() - 1].parse::<u8>().map_err(|_| bad("bad label".into()))?)
            } else {
                None
            };
            rows.push((idx, ts, vals, label));
        }
        let first = rows.first().ok_or(Error::EmptySeries)?.0;
        for (k, r) in rows.iter().enumerate() {
            if r.0 != first + k {
                return Err(Error::BadRow {
                    row: k + 2,
                    reason: "bar_index not contiguous".into(),
                });
            }
        }
        let len = first + rows.len();
        let mut frame = FeatureFrame::new(len);
        for c in 0..n_feat {
            let mut values = vec![f64::NAN; len];
            for r in &rows {
                values[r.0] = r.2[c];
            }
            frame.push(header[2 + c].clone(), values)?;
        }
        frame.valid_from = frame.valid_from.max(first);
        let timestamps = rows.iter().map(|r| r.1).collect();
        let labels = has_label.then(|| {
            let mut l = vec![0u8; len];
            for r in &rows {
                l[r.0] = r.3.unwrap_or(0);
            }
            l
        });
        Ok((frame, timestamps, labels))
    }
}

pub const LABEL_COLUMN: &str = "label";

/// Computes every base indicator column, then lags and interactions.
pub fn compute_features(series: &OhlcvSeries, cfg: &IndicatorConfig) -> Result<FeatureFrame> {
    cfg.validate()?;
    let closes = series.closes();
    let volumes = series.volumes();
    let returns = aligned_returns(&closes);
    let bb = bollinger(&closes, cfg.n_bb, cfg.k_bb)?;
    let (_, atr_rel) = atr(series, cfg.n_atr)?;
    let (vol_ratio, signed_vol) = volume_features(series, &returns, cfg.n_v, cfg.eps)?;

    let mut frame = FeatureFrame::new(series.len());
    frame.push(col::LOG_RETURN, returns.clone())?;
    frame.push(col::MA_RATIO, ma_ratio(&closes, cfg.n_ma)?)?;
    frame.push(col::MOMENTUM, momentum(&closes, cfg.k_m)?)?;
    frame.push(col::ROLLING_VOL, rolling_volatility(&returns, cfg.n_ma)?)?;
    frame.push(col::EWMA_VOL, ewma_volatility(&returns, cfg.lambda_ewma)?)?;
    frame.push(col::LR_VOL, rolling_volatility(&returns, cfg.n_lr)?)?;
    frame.push(col::BB_PCT_B, bb.percent_b)?;
    frame.push(col::BB_Z, bb.z)?;
    frame.push(col::ATR_REL, atr_rel)?;
    frame.push(col::VOL_RATIO, vol_ratio)?;
    frame.push(col::SIGNED_VOL_RATIO, signed_vol)?;
    frame.push(col::AMIHUD, amihud(&returns, &volumes, cfg.n_v, cfg.eps)?)?;
    frame.push(col::RSI, rsi(&closes, cfg.n_rsi)?)?;
    frame.push(
        col::MACD_HIST,
        macd_histogram(&closes, cfg.macd_fast, cfg.macd_slow, cfg.macd_signal)?,
    )?;
    if frame.valid_from() >= frame.len() {
        return Err(Error::TooShort {
            needed: frame.valid_from() + 1,
            actual: frame.len(),
        });
    }
    frame.augment_lags_interactions(&cfg.lag_set, &cfg.interaction_pairs)
}
