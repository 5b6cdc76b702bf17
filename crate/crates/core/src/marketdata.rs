//! OHLCV candle ingestion, validation and chronological splitting.
//!
//! The on-disk format is a CSV with the exact header
//! `timestamp,open,high,low,close,volume`. Timestamps are either integer
//! epoch seconds or ISO-8601 dates/datetimes; the kind is detected once per
//! file from the first data row and every other row must use the same kind.

use std::fs::File;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "timestamp,open,high,low,close,volume";
pub const SECONDS_PER_DAY: i64 = 86_400;

/// One candle. `timestamp` is the bar open time in epoch seconds (UTC).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcvBar {
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl OhlcvBar {
    fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(format!("non-positive or non-finite {name} price {v}"));
            }
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err(format!("negative or non-finite volume {}", self.volume));
        }
        if self.low > self.high {
            return Err(format!("low {} > high {}", self.low, self.high));
        }
        if self.low > self.open.min(self.close) {
            return Err(format!(
                "low {} above min(open, close) {}",
                self.low,
                self.open.min(self.close)
            ));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!(
                "high {} below max(open, close) {}",
                self.high,
                self.open.max(self.close)
            ));
        }
        Ok(())
    }
}

/// A validated, uniformly spaced bar series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OhlcvSeries {
    bars: Vec<OhlcvBar>,
    bar_interval: i64,
}

/// How to treat the file while loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadOptions {
    /// Expected spacing between bars, seconds.
    pub bar_interval: i64,
    /// Fill missing bars by repeating the last close with zero volume
    /// instead of rejecting the file.
    pub forward_fill: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            bar_interval: SECONDS_PER_DAY,
            forward_fill: false,
        }
    }
}

impl OhlcvSeries {
    /// Builds a series from bars that are already in order. Runs the same
    /// validation as the loader.
    pub fn new(bars: Vec<OhlcvBar>, bar_interval: i64) -> Result<Self> {
        if bars.is_empty() {
            return Err(Error::EmptySeries);
        }
        if bar_interval <= 0 {
            return Err(Error::param("bar_interval", "must be positive"));
        }
        for (i, bar) in bars.iter().enumerate() {
            bar.validate()
                .map_err(|reason| Error::BadRow { row: i + 1, reason })?;
        }
        for (i, pair) in bars.windows(2).enumerate() {
            let step = pair[1].timestamp - pair[0].timestamp;
            if step != bar_interval {
                return Err(Error::BadRow {
                    row: i + 2,
                    reason: format!("spacing {step}s differs from bar interval {bar_interval}s"),
                });
            }
        }
        Ok(Self { bars, bar_interval })
    }

    pub fn bars(&self) -> &[OhlcvBar] {
        &self.bars
    }

    pub fn bar_interval(&self) -> i64 {
        self.bar_interval
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    /// Close prices; these serve as the reference price everywhere.
    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.volume).collect()
    }

    pub fn timestamps(&self) -> Vec<i64> {
        self.bars.iter().map(|b| b.timestamp).collect()
    }

    /// Bar periods per year, used to annualize metrics.
    pub fn periods_per_year(&self) -> f64 {
        if self.bar_interval == SECONDS_PER_DAY {
            252.0
        } else {
            252.0 * SECONDS_PER_DAY as f64 / self.bar_interval as f64
        }
    }

    /// Writes the canonical CSV form (epoch-second timestamps).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER.split(','))?;
        for b in &self.bars {
            w.write_record([
                b.timestamp.to_string(),
                b.open.to_string(),
                b.high.to_string(),
                b.low.to_string(),
                b.close.to_string(),
                b.volume.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TimestampKind {
    Epoch,
    Iso,
}

impl TimestampKind {
    fn detect(raw: &str) -> Self {
        if raw.trim().parse::<i64>().is_ok() {
            TimestampKind::Epoch
        } else {
            TimestampKind::Iso
        }
    }

    fn parse(self, raw: &str) -> std::result::Result<i64, String> {
        let raw = raw.trim();
        match self {
            TimestampKind::Epoch => raw
                .parse::<i64>()
                .map_err(|_| format!("expected epoch seconds, found `{raw}`")),
            TimestampKind::Iso => parse_iso(raw).ok_or_else(|| {
                format!("expected ISO-8601 date or datetime, found `{raw}`")
            }),
        }
    }
}

fn parse_iso(raw: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S") {
        return Some(dt.and_utc().timestamp());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S") {
        return Some(dt.and_utc().timestamp());
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp())
}

/// ISO-8601 rendering of an epoch-second timestamp.
pub fn format_timestamp(ts: i64) -> String {
    DateTime::<Utc>::from_timestamp(ts, 0)
        .map(|d| d.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
        .unwrap_or_else(|| ts.to_string())
}

fn parse_price(field: &str, name: &str) -> std::result::Result<f64, String> {
    let field = field.trim();
    field
        .parse::<f64>()
        .map_err(|_| format!("unparseable {name} `{field}`"))
}

/// Parses and validates OHLCV CSV from any reader.
pub fn parse_ohlcv<R: Read>(reader: R, opts: &LoadOptions) -> Result<OhlcvSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::BadHeader {
            expected: CSV_HEADER.to_string(),
            found: header,
        });
    }

    let mut kind = None;
    // (line number, bar)
    let mut rows: Vec<(usize, OhlcvBar)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::BadRow {
            row: line,
            reason: e.to_string(),
        })?;
        if record.len() != 6 {
            return Err(Error::BadRow {
                row: line,
                reason: format!("expected 6 fields, found {}", record.len()),
            });
        }
        let k = *kind.get_or_insert_with(|| TimestampKind::detect(&record[0]));
        let bad = |reason| Error::BadRow { row: line, reason };
        let bar = OhlcvBar {
            timestamp: k.parse(&record[0]).map_err(bad)?,
            open: parse_price(&record[1], "open").map_err(bad)?,
            high: parse_price(&record[2], "high").map_err(bad)?,
            low: parse_price(&record[3], "low").map_err(bad)?,
            close: parse_price(&record[4], "close").map_err(bad)?,
            volume: parse_price(&record[5], "volume").map_err(bad)?,
        };
        bar.validate().map_err(bad)?;
        rows.push((line, bar));
    }
    if rows.is_empty() {
        return Err(Error::EmptySeries);
    }
    if opts.bar_interval <= 0 {
        return Err(Error::param("bar_interval", "must be positive"));
    }

    rows.sort_by_key(|(_, b)| b.timestamp);
    let mut bars: Vec<OhlcvBar> = Vec::with_capacity(rows.len());
    for (line, bar) in rows {
        if let Some(prev) = bars.last().copied() {
            let step = bar.timestamp - prev.timestamp;
            if step == 0 {
                return Err(Error::BadRow {
                    row: line,
                    reason: format!("duplicate timestamp {}", format_timestamp(bar.timestamp)),
                });
            }
            if step != opts.bar_interval {
                let fillable = step % opts.bar_interval == 0;
                if !(opts.forward_fill && fillable) {
                    return Err(Error::BadRow {
                        row: line,
                        reason: format!(
                            "gap of {step}s after {} (bar interval {}s)",
                            format_timestamp(prev.timestamp),
                            opts.bar_interval
                        ),
                    });
                }
                let mut ts = prev.timestamp + opts.bar_interval;
                while ts < bar.timestamp {
                    bars.push(OhlcvBar {
                        timestamp: ts,
                        open: prev.close,
                        high: prev.close,
                        low: prev.close,
                        close: prev.close,
                        volume: 0.0,
                    });
                    ts += opts.bar_interval;
                }
            }
        }
        bars.push(bar);
    }
    Ok(OhlcvSeries {
        bars,
        bar_interval: opts.bar_interval,
    })
}

/// Loads an OHLCV CSV file.
pub fn load_ohlcv(path: &Path, opts: &LoadOptions) -> Result<OhlcvSeries> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ohlcv(file, opts)
}

/// `r_t = ln P_t - ln P_{t-1}`; one shorter than the input.
pub fn log_returns(series: &OhlcvSeries) -> Result<Vec<f64>> {
    log_returns_of(&series.closes())
}

pub fn log_returns_of(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            actual: prices.len(),
        });
    }
    Ok(prices.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
}

/// Contiguous train / validation / test ranges over `[0, len)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitIndices {
    pub fn len(&self) -> usize {
        self.test.end
    }

    pub fn is_empty(&self) -> bool {
        self.test.end == 0
    }
}

pub const DEFAULT_SPLIT: (f64, f64, f64) = (0.70, 0.15, 0.15);
pub const MIN_SPLIT_LEN: usize = 20;

/// Floors the train and validation sizes; the remainder goes to test.
pub fn chronological_split(len: usize, fractions: (f64, f64, f64)) -> Result<SplitIndices> {
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !(0.0..=1.0).contains(f)) || (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(Error::param(
            "fractions",
            format!("must be in [0,1] and sum to 1, got ({ft}, {fv}, {fs})"),
        ));
    }
    if len < MIN_SPLIT_LEN {
        return Err(Error::TooShort {
            needed: MIN_SPLIT_LEN,
            actual: len,
        });
    }
    // The epsilon absorbs products such as 0.7 * 10 = 6.999...
    let n_train = (ft * len as f64 + 1e-9).floor() as usize;
    let n_val = (fv * len as f64 + 1e-9).floor() as usize;
    let n_test = len.saturating_sub(n_train + n_val);
    if n_train == 0 {
        return Err(Error::EmptySplit("train"));
    }
    if n_val == 0 {
        return Err(Error::EmptySplit("val"));
    }
    if n_test == 0 {
        return Err(Error::EmptySplit("test"));
    }
    Ok(SplitIndices {
        train: 0..n_train,
        val: n_train..n_train + n_val,
        test: n_train + n_val..len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<OhlcvSeries> {
        parse_ohlcv(s.as_bytes(), &LoadOptions::default())
    }

    #[test]
    fn parses_three_rows() {
        let csv = "timestamp,open,high,low,close,volume\n\
                   1704067200,100,101,99,100.5,10\n\
                   1704153600,100.5,102,100,101,12\n\
                   1704240000,101,101.5,98,99,9\n";
        let s = parse(csv).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.timestamps().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn iso_dates_and_unsorted_rows() {
        let csv = "timestamp,open,high,low,close,volume\n\
                   2024-01-02,1,1,1,1,0\n\
                   2024-01-01,1,1,1,1,0\n";
        let s = parse(csv).unwrap();
        assert_eq!(s.bars()[0].timestamp, 1704067200);
        assert_eq!(format_timestamp(s.bars()[1].timestamp), "2024-01-02T00:00:00Z");
    }

    #[test]
    fn mixed_timestamp_kinds_rejected() {
        let csv = "timestamp,open,high,low,close,volume\n\
                   2024-01-01,1,1,1,1,0\n\
                   1704153600,1,1,1,1,0\n";
        assert!(matches!(parse(csv), Err(Error::BadRow { row: 3, .. })));
    }

    #[test]
    fn low_above_high_names_row() {
        let csv = "timestamp,open,high,low,close,volume\n\
                   1704067200,100,101,99,100,1\n\
                   1704153600,100,99,101,100,1\n";
        match parse(csv) {
            Err(Error::BadRow { row, reason }) => {
                assert_eq!(row, 3);
                assert!(reason.contains("low"), "{reason}");
            }
            other => panic!("expected BadRow, got {other:?}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(
            parse("timestamp,open,high,low,close,volume\n"),
            Err(Error::EmptySeries)
        ));
    }

    #[test]
    fn wrong_header() {
        assert!(matches!(
            parse("time,open,high,low,close,volume\n1,1,1,1,1,1\n"),
            Err(Error::BadHeader { .. })
        ));
    }

    #[test]
    fn non_positive_price_and_duplicates() {
        let csv = "timestamp,open,high,low,close,volume\n1704067200,0,1,0,1,1\n";
        assert!(matches!(parse(csv), Err(Error::BadRow { row: 2, .. })));
        let csv = "timestamp,open,high,low,close,volume\n\
                   1704067200,1,1,1,1,1\n1704067200,1,1,1,1,1\n";
        match parse(csv) {
            Err(Error::BadRow { reason, .. }) => assert!(reason.contains("duplicate")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gaps_rejected_or_filled() {
        let csv = "timestamp,open,high,low,close,volume\n\
                   2024-01-01,1,2,1,2,5\n\
                   2024-01-04,2,3,2,3,5\n";
        assert!(parse(csv).is_err());
        let opts = LoadOptions {
            forward_fill: true,
            ..LoadOptions::default()
        };
        let s = parse_ohlcv(csv.as_bytes(), &opts).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.bars()[1].close, 2.0);
        assert_eq!(s.bars()[2].volume, 0.0);
        assert_eq!(s.closes(), vec![2.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn log_return_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert_eq!(log_returns_of(&[100.0, 100.0]).unwrap(), vec![0.0]);
        assert!((log_returns_of(&[100.0, 200.0]).unwrap()[0] - ln2).abs() < 1e-15);
        let r = log_returns_of(&[100.0, 200.0, 100.0]).unwrap();
        assert!((r[0] - ln2).abs() < 1e-15 && (r[1] + ln2).abs() < 1e-15);
        assert!(matches!(log_returns_of(&[1.0]), Err(Error::TooShort { .. })));
    }

    #[test]
    fn split_examples() {
        let s = chronological_split(252, DEFAULT_SPLIT).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (176, 37, 39));
        let s = chronological_split(20, DEFAULT_SPLIT).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (14, 3, 3));
        assert!(chronological_split(10, DEFAULT_SPLIT).is_err());
        assert!(chronological_split(100, (0.5, 0.5, 0.1)).is_err());
        assert!(matches!(
            chronological_split(30, (0.9, 0.1, 0.0)),
            Err(Error::EmptySplit("test"))
        ));
    }

    #[test]
    fn load_twice_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bars.csv");
        std::fs::write(
            &path,
            "timestamp,open,high,low,close,volume\n1,1,1,1,1,1\n86401,1,2,1,2,3\n",
        )
        .unwrap();
        let a = load_ohlcv(&path, &LoadOptions::default()).unwrap();
        let b = load_ohlcv(&path, &LoadOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn split_partitions_range(len in 20usize..5000) {
            let s = chronological_split(len, DEFAULT_SPLIT).unwrap();
            prop_assert_eq!(s.train.start, 0);
            prop_assert_eq!(s.train.end, s.val.start);
            prop_assert_eq!(s.val.end, s.test.start);
            prop_assert_eq!(s.test.end, len);
            prop_assert!(!s.train.is_empty() && !s.val.is_empty() && !s.test.is_empty());
        }

        #[test]
        fn returns_recover_price_ratios(prices in proptest::collection::vec(0.01f64..1e6, 2..200)) {
            let r = log_returns_of(&prices).unwrap();
            let mut acc = 0.0;
            for (t, ret) in r.iter().enumerate() {
                acc += ret;
                let ratio = prices[t + 1] / prices[0];
                prop_assert!((acc.exp() - ratio).abs() <= 1e-12 * ratio);
            }
        }

        #[test]
        fn csv_round_trip(closes in proptest::collection::vec(0.5f64..2e5, 1..40)) {
            let bars: Vec<OhlcvBar> = closes.iter().enumerate().map(|(i, &c)| OhlcvBar {
                timestamp: 1_700_000_000 + i as i64 * SECONDS_PER_DAY,
                open: c, high: c * 1.01, low: c * 0.99, close: c, volume: c / 3.0,
            }).collect();
            let s = OhlcvSeries::new(bars, SECONDS_PER_DAY).unwrap();
            let mut buf = Vec::new();
            s.write_csv(&mut buf).unwrap();
            let back = parse_ohlcv(buf.as_slice(), &LoadOptions::default()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
