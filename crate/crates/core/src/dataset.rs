//! Supervised samples: one token context and label per bar, split
//! chronologically into train, validation and test.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featuremap::{encode_angles, fit_minmax, six_scalar_channels, MinMaxScaler};
use crate::indicators::FeatureFrame;
use crate::marketdata::{chronological_split, SplitIndices, DEFAULT_SPLIT};
use crate::qasa::{sequence_token, TokenMode, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub variant: Variant,
    /// Context length, and token width for sequence models.
    pub window: usize,
    pub token_mode: TokenMode,
    /// First bar whose label is meaningful.
    pub label_warmup: usize,
    pub split: (f64, f64, f64),
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            variant: Variant::Sequence,
            window: 8,
            token_mode: TokenMode::LogReturns,
            label_warmup: 19,
            split: DEFAULT_SPLIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub bar: usize,
    pub tokens: Vec<Vec<f64>>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    /// Bar of the first sample.
    pub start: usize,
    pub samples: Vec<Sample>,
    /// Ranges over `samples`.
    pub split: SplitIndices,
    /// Fitted on train bars; hybrid only.
    pub scaler: Option<MinMaxScaler>,
}

impl Dataset {
    pub fn part(&self, range: &Range<usize>) -> &[Sample] {
        &self.samples[range.clone()]
    }

    pub fn train(&self) -> &[Sample] {
        self.part(&self.split.train)
    }

    pub fn val(&self) -> &[Sample] {
        self.part(&self.split.val)
    }

    pub fn test(&self) -> &[Sample] {
        self.part(&self.split.test)
    }

    /// Bar indices covered by a sample range.
    pub fn bars(&self, range: &Range<usize>) -> Range<usize> {
        self.start + range.start..self.start + range.end
    }

    /// `negatives / positives` on the train split; 1 if either class is absent.
    pub fn positive_weight(&self) -> f64 {
        let pos = self.train().iter().filter(|s| s.label == 1).count();
        let neg = self.train().len() - pos;
        if pos == 0 || neg == 0 {
            1.0
        } else {
            neg as f64 / pos as f64
        }
    }
}

/// Earliest bar for which every variant has features, a full token context
/// and a meaningful label.
pub fn first_sample_bar(frame: &FeatureFrame, spec: &DatasetSpec) -> usize {
    let w = spec.window;
    let token_ready = match spec.token_mode {
        TokenMode::LogReturns => 2 * w - 1,
        TokenMode::RawPrices => 2 * w - 2,
    };
    (frame.valid_from() + w - 1).max(token_ready).max(spec.label_warmup)
}

pub fn build_dataset(closes: &[f64], frame: &FeatureFrame, labels: &[u8], spec: &DatasetSpec) -> Result<Dataset> {
    if spec.window == 0 {
        return Err(Error::param("window", "must be >= 1"));
    }
    if closes.len() != frame.len() || labels.len() != frame.len() {
        return Err(Error::LengthMismatch {
            left: closes.len().min(labels.len()),
            right: frame.len(),
        });
    }
    let start = first_sample_bar(frame, spec);
    if start >= frame.len() {
        return Err(Error::TooShort {
            needed: start + 1,
            actual: frame.len(),
        });
    }
    let n = frame.len() - start;
    let split = chronological_split(n, spec.split)?;
    let w = spec.window;

    let (samples, scaler) = match spec.variant {
        Variant::Sequence => {
            let samples = (start..frame.len())
                .map(|t| {
                    let tokens = (t + 1 - w..=t)
                        .map(|s| sequence_token(closes, s, w, spec.token_mode).expect("history checked"))
                        .collect();
                    Sample {
                        bar: t,
                        tokens,
                        label: labels[t],
                    }
                })
                .collect();
            (samples, None)
        }
        Variant::Hybrid => {
            let channels = six_scalar_channels(frame)?;
            let train_rows = channels.rows_for(start + split.train.start..start + split.train.end)?;
            let scaler = fit_minmax(&channels.rows, train_rows)?;
            let degenerate = scaler.degenerate_channels();
            if !degenerate.is_empty() {
                log::warn!("constant channels on the train split mapped to mid-range: {degenerate:?}");
            }
            let samples = (start..frame.len())
                .map(|t| {
                    let tokens = (t + 1 - w..=t)
                        .map(|s| {
                            let row = channels.get(s).expect("inside feature range");
                            encode_angles(row, &scaler).0.to_vec()
                        })
                        .collect();
                    Sample {
                        bar: t,
                        tokens,
                        label: labels[t],
                    }
                })
                .collect();
            (samples, Some(scaler))
        }
    };
    Ok(Dataset {
        spec: spec.clone(),
        start,
        samples,
        split,
        scaler,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicators::{compute_features, IndicatorConfig};
    use crate::labeling::{label_series, LabelConfig};
    use crate::synthetic::{generate, SyntheticConfig};

    fn fixture() -> (Vec<f64>, FeatureFrame, Vec<u8>) {
        let data = generate(&SyntheticConfig::default()).unwrap();
        let frame = compute_features(&data.series, &IndicatorConfig::default()).unwrap();
        let closes = data.series.closes();
        let labels = label_series(&closes, &LabelConfig::default()).unwrap();
        (closes, frame, labels)
    }

    #[test]
    fn both_variants_share_sample_bars() {
        let (closes, frame, labels) = fixture();
        let seq = build_dataset(&closes, &frame, &labels, &DatasetSpec::default()).unwrap();
        let hyb = build_dataset(
            &closes,
            &frame,
            &labels,
            &DatasetSpec {
                variant: Variant::Hybrid,
                ..DatasetSpec::default()
            },
        )
        .unwrap();
        assert_eq!(seq.start, hyb.start);
        assert_eq!(seq.split, hyb.split);
        assert_eq!(seq.start, frame.valid_from() + 7);
        assert_eq!(seq.samples.len(), closes.len() - seq.start);
        assert!(seq.samples.iter().all(|s| s.tokens.len() == 8 && s.tokens[0].len() == 8));
        assert!(hyb.samples.iter().all(|s| s.tokens.len() == 8 && s.tokens[0].len() == 8));
        assert!(hyb.scaler.is_some() && seq.scaler.is_none());
        let s = &seq.samples[0];
        assert_eq!(s.tokens[7][7], closes[s.bar].ln() - closes[s.bar - 1].ln());
    }

    #[test]
    fn scaler_ignores_later_bars() {
        let (mut closes, frame, labels) = fixture();
        let spec = DatasetSpec {
            variant: Variant::Hybrid,
            ..DatasetSpec::default()
        };
        let a = build_dataset(&closes, &frame, &labels, &spec).unwrap();
        let last = closes.len() - 1;
        closes[last] *= 1.5;
        let b = build_dataset(&closes, &frame, &labels, &spec).unwrap();
        assert_eq!(a.scaler, b.scaler);
    }
}
